//! Noisy gradient-descent walker on a two-dimensional height field.
//!
//! Each step applies `w <- w - eta * grad L(w) + eta * sigma * Z` with `Z` a
//! standard normal vector, using the finite-difference gradient of the
//! bilinear loss. The walker is confined to the region where that gradient
//! is defined, one grid cell inside the field edge.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{detect_minima, eval_loss, numerical_gradient, HeightField, Minimum};
use crate::model::Trajectory;
use crate::scalar::Real;

/// Frames the walker has to stay inside a basin to count as having entered.
pub const DEFAULT_DWELL: usize = 50;

/// What happens when an update leaves the valid region.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPolicy {
    Clamp,
    #[default]
    Reflect,
    /// Stop the run and mark it as escaped.
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartPosition<T> {
    At([T; 2]),
    Named(NamedStart),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedStart {
    /// Uniformly chosen node among the highest decile of the valid region.
    RandomHigh,
}

impl<T> StartPosition<T> {
    pub fn random_high() -> Self {
        StartPosition::Named(NamedStart::RandomHigh)
    }
}

impl<T> Default for StartPosition<T> {
    fn default() -> Self {
        Self::random_high()
    }
}

fn default_steps() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig<T> {
    pub eta: T,
    pub sigma: T,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "StartPosition::random_high")]
    pub start: StartPosition<T>,
    #[serde(default)]
    pub boundary: BoundaryPolicy,
}

impl<T: Real> SimConfig<T> {
    pub fn new(eta: T, sigma: T, n_steps: usize, seed: u64) -> Self {
        Self {
            eta,
            sigma,
            n_steps,
            seed,
            start: StartPosition::default(),
            boundary: BoundaryPolicy::default(),
        }
    }

    pub fn with_start(mut self, pos: [T; 2]) -> Self {
        self.start = StartPosition::At(pos);
        self
    }

    pub fn with_boundary(mut self, policy: BoundaryPolicy) -> Self {
        self.boundary = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > T::zero()) || !self.eta.is_finite() {
            return Err(Error::Argument(format!("learning rate eta = {} must be positive", self.eta)));
        }
        if !(self.sigma >= T::zero()) || !self.sigma.is_finite() {
            return Err(Error::Argument(format!("noise sigma = {} must be non-negative", self.sigma)));
        }
        if self.n_steps == 0 {
            return Err(Error::Argument("n_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult<T> {
    /// `n_steps + 1` frames with loss and gradient channels (fewer if the run
    /// escaped under the abort policy).
    pub trajectory: Trajectory<T>,
    /// First step inside the global minimum's basin, see [`detect_entry_time`].
    pub entry_step: Option<usize>,
    pub escaped: bool,
    pub config_echo: SimConfig<T>,
}

/// Runs the walker. The random stream first picks the start (if random) and
/// then supplies the noise, two normals per step.
pub fn run_sgd<T: Real>(field: &HeightField<T>, config: &SimConfig<T>) -> Result<SimResult<T>> {
    let minima = detect_minima(field);
    run_sgd_toward(field, config, minima.first())
}

/// As [`run_sgd`], with the basin used for `entry_step` supplied by the
/// caller (no entry detection when `None`).
pub fn run_sgd_toward<T: Real>(
    field: &HeightField<T>,
    config: &SimConfig<T>,
    target: Option<&Minimum<T>>,
) -> Result<SimResult<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let h = field.spacing();
    let (lo, hi) = (h, field.extent() - h);
    let inside = |p: [T; 2]| p.iter().all(|&c| c >= lo && c <= hi);

    let mut w = match config.start {
        StartPosition::At(p) => {
            if !inside(p) {
                return Err(Error::Boundary(format!(
                    "start ({}, {}) outside [{lo}, {hi}]^2",
                    p[0], p[1]
                )));
            }
            p
        }
        StartPosition::Named(NamedStart::RandomHigh) => random_high_start(field, &mut rng)?,
    };

    let n = config.n_steps;
    let mut frames = Vec::with_capacity(2 * (n + 1));
    let mut losses = Vec::with_capacity(n + 1);
    let mut grads = Vec::with_capacity(2 * (n + 1));
    let step_noise = config.eta * config.sigma;
    let mut escaped = false;
    for t in 0..=n {
        let g = numerical_gradient(field, w)?;
        frames.extend_from_slice(&w);
        losses.push(eval_loss(field, w)?);
        grads.extend_from_slice(&g);
        if t == n {
            break;
        }
        let mut next = [T::zero(); 2];
        for k in 0..2 {
            let z: f64 = StandardNormal.sample(&mut rng);
            next[k] = w[k] - config.eta * g[k] + step_noise * T::of(z);
        }
        if !inside(next) {
            match config.boundary {
                BoundaryPolicy::Clamp => next = next.map(|c| c.max(lo).min(hi)),
                BoundaryPolicy::Reflect => next = next.map(|c| reflect(c, lo, hi)),
                BoundaryPolicy::Abort => {
                    escaped = true;
                    break;
                }
            }
        }
        w = next;
    }

    let trajectory = Trajectory::new(2, frames)?
        .with_losses(losses)
        .with_gradients(grads);
    let entry_step = target.and_then(|m| detect_entry_time(&trajectory, m, DEFAULT_DWELL));
    Ok(SimResult {
        trajectory,
        entry_step,
        escaped,
        config_echo: config.clone(),
    })
}

/// Folds `c` back into `[lo, hi]` by mirror reflection at both walls.
fn reflect<T: Real>(c: T, lo: T, hi: T) -> T {
    let span = hi - lo;
    if !(span > T::zero()) {
        return lo;
    }
    let two = span + span;
    let mut u = (c - lo) % two;
    if u < T::zero() {
        u = u + two;
    }
    if u > span {
        u = two - u;
    }
    lo + u
}

fn random_high_start<T: Real>(field: &HeightField<T>, rng: &mut ChaCha8Rng) -> Result<[T; 2]> {
    let n = field.n();
    let cells: Vec<(usize, usize)> = (1..n - 1).flat_map(|r| (1..n - 1).map(move |c| (c, r))).collect();
    let mut heights: Vec<f64> = cells.iter().map(|&(c, r)| field.at(c, r).f64()).collect();
    heights.sort_by(f64::total_cmp);
    let cut = heights[(heights.len() * 9) / 10];
    let high: Vec<(usize, usize)> = cells
        .into_iter()
        .filter(|&(c, r)| field.at(c, r).f64() >= cut)
        .collect();
    let &(c, r) = high
        .choose(rng)
        .ok_or_else(|| Error::Degenerate("no interior cells to start from".into()))?;
    Ok(field.node_position(c, r))
}

/// First frame `t` such that frames `t ..= t + dwell` all lie within the
/// minimum's `width_estimate` of its position.
pub fn detect_entry_time<T: Real>(traj: &Trajectory<T>, minimum: &Minimum<T>, dwell: usize) -> Option<usize> {
    let n = traj.n_steps();
    let r2 = minimum.width_estimate * minimum.width_estimate;
    let d = traj.dim().min(2);
    let mut run = 0usize;
    for t in 1..=n {
        let f = traj.frame(t).ok()?;
        let dist2 = (0..d)
            .map(|k| (f[k] - minimum.position[k]) * (f[k] - minimum.position[k]))
            .fold(T::zero(), |a, b| a + b);
        if dist2 <= r2 {
            run += 1;
            if run > dwell {
                return Some(t - dwell);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Runs every configuration in parallel; results keep the input order.
pub fn sweep<T: Real>(field: &HeightField<T>, configs: &[SimConfig<T>]) -> Result<Vec<SimResult<T>>> {
    let minima = detect_minima(field);
    configs
        .par_iter()
        .enumerate()
        .map(|(index, c)| {
            run_sgd_toward(field, c, minima.first()).map_err(|e| Error::Run {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{make_convex_paraboloid, FieldKind};

    fn flat(n: usize) -> HeightField<f64> {
        HeightField::from_fn(n, FieldKind::External, |_, _| 0.5).unwrap()
    }

    #[test]
    fn noiseless_paraboloid_contracts() {
        let f = make_convex_paraboloid::<f64>(129, 1.0).unwrap();
        let cfg = SimConfig::new(0.1, 0.0, 200, 0).with_start([0.8, 0.3]);
        let r = run_sgd(&f, &cfg).unwrap();
        let t = &r.trajectory;
        let dist = |k: usize| {
            let p = t.frame(k).unwrap();
            ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt()
        };
        for k in 1..50 {
            assert!(dist(k + 1) < dist(k));
        }
        assert!(dist(t.n_steps()) < 1e-6);
    }

    #[test]
    fn flat_field_noiseless_stays_put() {
        let cfg = SimConfig::new(0.1, 0.0, 50, 0).with_start([0.3, 0.6]);
        let r = run_sgd(&flat(33), &cfg).unwrap();
        assert!(r.trajectory.frames().chunks(2).all(|p| p == [0.3, 0.6]));
    }

    #[test]
    fn frame_count_and_channels() {
        let f = make_convex_paraboloid::<f64>(65, 1.0).unwrap();
        let r = run_sgd(&f, &SimConfig::new(0.1, 1.0, 100, 3)).unwrap();
        let t = &r.trajectory;
        assert_eq!(t.n_steps(), 101);
        assert!(t.validate().is_empty());
        for k in 1..=t.n_steps() {
            let p = t.frame(k).unwrap();
            assert_eq!(t.loss(k).unwrap().unwrap(), eval_loss(&f, [p[0], p[1]]).unwrap());
        }
    }

    #[test]
    fn deterministic() {
        let f = make_convex_paraboloid::<f64>(65, 1.0).unwrap();
        let cfg = SimConfig::new(0.05, 0.5, 300, 17);
        assert_eq!(run_sgd(&f, &cfg).unwrap(), run_sgd(&f, &cfg).unwrap());
        let other = SimConfig { seed: 18, ..cfg.clone() };
        assert_ne!(run_sgd(&f, &cfg).unwrap().trajectory, run_sgd(&f, &other).unwrap().trajectory);
    }

    #[test]
    fn convex_noiseless_loss_non_increasing() {
        let f = make_convex_paraboloid::<f64>(257, 2.0).unwrap();
        let cfg = SimConfig::new(0.1, 0.0, 300, 0).with_start([0.1, 0.85]);
        let r = run_sgd(&f, &cfg).unwrap();
        let l = r.trajectory.losses().unwrap();
        assert!(l.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn step_lengths_are_rayleigh_on_flat_field() {
        let (eta, sigma) = (0.01, 0.01);
        let n = 10_000;
        let cfg = SimConfig::new(eta, sigma, n, 5).with_start([0.5, 0.5]);
        let r = run_sgd(&flat(65), &cfg).unwrap();
        let t = &r.trajectory;
        let s = eta * sigma;
        let mut steps: Vec<f64> = (1..=n)
            .map(|k| {
                let (a, b) = (t.frame(k).unwrap(), t.frame(k + 1).unwrap());
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            })
            .collect();
        steps.sort_by(f64::total_cmp);
        let cdf = |x: f64| 1.0 - (-x * x / (2.0 * s * s)).exp();
        let nf = n as f64;
        let d = steps
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / nf).abs().max(((i + 1) as f64 / nf - f).abs())
            })
            .fold(0.0, f64::max);
        let lam = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
        let p: f64 = 2.0 * (1..100).map(|k| {
            let k = k as f64;
            (-1f64).powf(k - 1.0) * (-2.0 * k * k * lam * lam).exp()
        }).sum::<f64>();
        assert!(p > 0.01, "KS D = {d}, p = {p}");
    }

    #[test]
    fn boundary_policies() {
        let f = flat(33);
        let h = f.spacing();
        let cfg = SimConfig::new(1.0, 0.5, 400, 1).with_start([0.5, 0.5]);
        for policy in [BoundaryPolicy::Clamp, BoundaryPolicy::Reflect] {
            let r = run_sgd(&f, &cfg.clone().with_boundary(policy)).unwrap();
            assert!(!r.escaped);
            assert!(r.trajectory.frames().iter().all(|&c| c >= h && c <= 1.0 - h));
        }
        let r = run_sgd(&f, &cfg.clone().with_boundary(BoundaryPolicy::Abort)).unwrap();
        assert!(r.escaped);
        assert!(r.trajectory.n_steps() < 401);
        assert!(matches!(
            run_sgd(&f, &SimConfig::new(0.1, 0.0, 5, 0).with_start([0.0, 0.5])),
            Err(Error::Boundary(_))
        ));
    }

    #[test]
    fn reflect_folds() {
        assert!((reflect(1.2f64, 0.0, 1.0) - 0.8).abs() < 1e-12);
        assert!((reflect(-0.3f64, 0.0, 1.0) - 0.3).abs() < 1e-12);
        assert!((reflect(2.25f64, 0.0, 1.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn random_high_start_is_high() {
        let f = make_convex_paraboloid::<f64>(65, 1.0).unwrap();
        let r = run_sgd(&f, &SimConfig::new(0.01, 0.0, 1, 9)).unwrap();
        let l0 = r.trajectory.loss(1).unwrap().unwrap();
        let mut v: Vec<f64> = f.values().to_vec();
        v.sort_by(f64::total_cmp);
        assert!(l0 >= v[v.len() * 8 / 10]);
    }

    fn line_traj(xs: &[f64]) -> Trajectory<f64> {
        Trajectory::new(2, xs.iter().flat_map(|&x| [x, 0.0]).collect()).unwrap()
    }

    #[test]
    fn entry_time_examples() {
        let m = Minimum {
            position: [0.0, 0.0],
            value: 0.0,
            width_estimate: 1.0,
        };
        // outside for 10 frames, then inside for good
        let mut xs = vec![5.0; 10];
        xs.extend(vec![0.5; 100]);
        assert_eq!(detect_entry_time(&line_traj(&xs), &m, 50), Some(11));
        // a short visit does not count
        let mut xs = vec![5.0; 10];
        xs.extend(vec![0.5; 20]);
        xs.extend(vec![5.0; 10]);
        xs.extend(vec![0.5; 60]);
        assert_eq!(detect_entry_time(&line_traj(&xs), &m, 50), Some(41));
        // never long enough
        assert_eq!(detect_entry_time(&line_traj(&[0.5; 50]), &m, 50), None);
        assert_eq!(detect_entry_time(&line_traj(&[0.5; 51]), &m, 50), Some(1));
    }

    #[test]
    fn entry_time_matches_brute_force() {
        let m = Minimum {
            position: [0.0, 0.0],
            value: 0.0,
            width_estimate: 1.0,
        };
        let mut state = 7u64;
        for _ in 0..200 {
            let xs: Vec<f64> = (0..60)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    if (state >> 33) % 5 == 0 { 2.0 } else { 0.1 }
                })
                .collect();
            let dwell = 3;
            let brute = (1..=xs.len())
                .find(|&t| t + dwell <= xs.len() && (t..=t + dwell).all(|k| xs[k - 1] <= 1.0));
            assert_eq!(detect_entry_time(&line_traj(&xs), &m, dwell), brute);
        }
    }

    #[test]
    fn sweep_keeps_order_and_wraps_errors() {
        let f = make_convex_paraboloid::<f64>(65, 1.0).unwrap();
        let cfgs: Vec<_> = (0..4).map(|s| SimConfig::new(0.05, 0.5, 50, s)).collect();
        let out = sweep(&f, &cfgs).unwrap();
        for (c, r) in cfgs.iter().zip(&out) {
            assert_eq!(r, &run_sgd(&f, c).unwrap());
        }
        let mut bad = cfgs.clone();
        bad[2].eta = -1.0;
        match sweep(&f, &bad) {
            Err(Error::Run { index, .. }) => assert_eq!(index, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_json() {
        let c: SimConfig<f64> = serde_json::from_str(r#"{"eta":0.02,"sigma":0.01,"start":"random_high"}"#).unwrap();
        assert_eq!(c.n_steps, 1000);
        assert_eq!(c.boundary, BoundaryPolicy::Reflect);
        let c: SimConfig<f64> =
            serde_json::from_str(r#"{"eta":0.02,"sigma":0.01,"start":[0.2,0.3],"boundary":"abort"}"#).unwrap();
        assert_eq!(c.start, StartPosition::At([0.2, 0.3]));
        assert!(serde_json::from_str::<SimConfig<f64>>(r#"{"eta":1,"sigma":0,"bogus":1}"#).is_err());
    }
}
