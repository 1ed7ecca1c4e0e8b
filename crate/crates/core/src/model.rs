//! Trajectory data model and elementary displacement computations.
//!
//! Steps are 1-based throughout: frame `t` of an `n`-step trajectory is valid
//! for `1 <= t <= n`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Time-ordered weight frames with optional per-frame loss and gradient
/// channels. Frames are stored contiguously, frame-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    dim: usize,
    frames: Vec<T>,
    losses: Option<Vec<T>>,
    gradients: Option<Vec<T>>,
    time_unit: String,
}

impl<T: Real> Trajectory<T> {
    /// Builds a trajectory from a flat frame-major buffer of `n_steps * dim`
    /// weights. Channel contents are not checked here; see [`Trajectory::validate`].
    pub fn new(dim: usize, frames: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("trajectory dimension must be positive".into()));
        }
        if frames.len() % dim != 0 {
            return Err(Error::Argument(format!(
                "frame buffer of length {} is not a multiple of dim {}",
                frames.len(),
                dim
            )));
        }
        Ok(Self {
            dim,
            frames,
            losses: None,
            gradients: None,
            time_unit: "iterations".to_string(),
        })
    }

    /// Builds a trajectory from a list of per-step weight vectors.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::Argument("trajectory needs at least one non-empty frame".into()));
        }
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Argument(format!(
                    "frame {} has {} entries, expected {}",
                    i + 1,
                    r.len(),
                    dim
                )));
            }
            flat.extend_from_slice(r);
        }
        Self::new(dim, flat)
    }

    pub fn with_losses(mut self, losses: Vec<T>) -> Self {
        self.losses = Some(losses);
        self
    }

    /// Attaches a flat frame-major gradient channel (`n_steps * dim` values).
    pub fn with_gradients(mut self, gradients: Vec<T>) -> Self {
        self.gradients = Some(gradients);
        self
    }

    pub fn with_time_unit(mut self, unit: impl Into<String>) -> Self {
        self.time_unit = unit.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_steps(&self) -> usize {
        self.frames.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn time_unit(&self) -> &str {
        &self.time_unit
    }

    pub fn frames(&self) -> &[T] {
        &self.frames
    }

    pub fn losses(&self) -> Option<&[T]> {
        self.losses.as_deref()
    }

    pub fn gradients(&self) -> Option<&[T]> {
        self.gradients.as_deref()
    }

    /// Weights at step `t` (1-based).
    pub fn frame(&self, t: usize) -> Result<&[T]> {
        self.check_step(t)?;
        let i = (t - 1) * self.dim;
        Ok(&self.frames[i..i + self.dim])
    }

    /// Gradient at step `t` (1-based), if the channel is present.
    pub fn gradient(&self, t: usize) -> Result<Option<&[T]>> {
        self.check_step(t)?;
        let i = (t - 1) * self.dim;
        Ok(self
            .gradients
            .as_deref()
            .and_then(|g| g.get(i..i + self.dim)))
    }

    pub fn loss(&self, t: usize) -> Result<Option<T>> {
        self.check_step(t)?;
        Ok(self.losses.as_deref().and_then(|l| l.get(t - 1).copied()))
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.n_steps() {
            return Err(Error::Index(format!(
                "step {t} outside [1, {}]",
                self.n_steps()
            )));
        }
        Ok(())
    }

    /// Sub-trajectory covering steps `first..=last` (1-based, inclusive),
    /// renumbered to start at 1. Channels are sliced alongside the frames.
    pub fn slice(&self, first: usize, last: usize) -> Result<Self> {
        if first == 0 || first > last || last > self.n_steps() {
            return Err(Error::Index(format!(
                "slice [{first}, {last}] outside [1, {}]",
                self.n_steps()
            )));
        }
        let d = self.dim;
        let span = (first - 1) * d..last * d;
        Ok(Self {
            dim: d,
            frames: self.frames[span.clone()].to_vec(),
            losses: self.losses.as_ref().map(|l| l[first - 1..last].to_vec()),
            gradients: self.gradients.as_ref().map(|g| g[span].to_vec()),
            time_unit: self.time_unit.clone(),
        })
    }

    /// Lists every violated trajectory invariant. Empty iff the trajectory is
    /// well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.n_steps();
        let d = self.dim;
        for t in 1..=n {
            let row = &self.frames[(t - 1) * d..t * d];
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                out.push(Violation::new(Some(t), Channel::Weights, format!("non-finite weight at component {}", i + 1)));
            }
        }
        if let Some(losses) = &self.losses {
            if losses.len() != n {
                out.push(Violation::new(
                    None,
                    Channel::Loss,
                    format!("loss channel has {} entries, expected {n}", losses.len()),
                ));
            } else {
                for (i, v) in losses.iter().enumerate() {
                    if !v.is_finite() {
                        out.push(Violation::new(Some(i + 1), Channel::Loss, "non-finite loss".into()));
                    }
                }
            }
        }
        if let Some(grads) = &self.gradients {
            if grads.len() != n * d {
                out.push(Violation::new(
                    None,
                    Channel::Gradient,
                    format!("gradient channel has {} entries, expected {}", grads.len(), n * d),
                ));
            } else {
                for t in 1..=n {
                    let row = &grads[(t - 1) * d..t * d];
                    if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                        out.push(Violation::new(
                            Some(t),
                            Channel::Gradient,
                            format!("non-finite gradient at component {}", i + 1),
                        ));
                    }
                }
            }
        }
        out
    }

    /// Returns `self` if it passes [`Trajectory::validate`].
    pub fn validated(self) -> Result<Self> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Converts every channel to another scalar type.
    pub fn cast<U: Real>(&self) -> Trajectory<U> {
        let conv = |v: &Vec<T>| v.iter().map(|x| U::of(x.f64())).collect::<Vec<U>>();
        Trajectory {
            dim: self.dim,
            frames: conv(&self.frames),
            losses: self.losses.as_ref().map(conv),
            gradients: self.gradients.as_ref().map(conv),
            time_unit: self.time_unit.clone(),
        }
    }
}

/// Squared Euclidean displacement between steps `t` and `t + lag`.
pub fn displacement_sq<T: Real>(traj: &Trajectory<T>, t: usize, lag: usize) -> Result<T> {
    let end = t
        .checked_add(lag)
        .ok_or_else(|| Error::Index("step overflow".into()))?;
    let a = traj.frame(t)?;
    let b = traj.frame(end)?;
    Ok(sq_dist(a, b))
}

#[inline]
pub(crate) fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| {
            let d = y - x;
            acc + d * d
        })
}

/// Trajectory channel named by a [`Violation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Weights,
    Loss,
    Gradient,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Weights => "weights",
            Channel::Loss => "loss",
            Channel::Gradient => "gradient",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// 1-based frame index, or `None` for channel-wide problems.
    pub frame: Option<usize>,
    pub channel: Channel,
    pub message: String,
}

impl Violation {
    fn new(frame: Option<usize>, channel: Channel, message: String) -> Self {
        Self {
            frame,
            channel,
            message,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frame {
            Some(t) => write!(f, "frame {t} ({}): {}", self.channel, self.message),
            None => write!(f, "{} channel: {}", self.channel, self.message),
        }
    }
}

/// Analysis window `[start, start + len]` in steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn new(start: usize, len: usize) -> Result<Self> {
        if start == 0 {
            return Err(Error::Argument("window start is 1-based".into()));
        }
        if len < 2 {
            return Err(Error::Argument(format!("window length {len} < 2")));
        }
        Ok(Self { start, len })
    }

    /// Window covering the whole trajectory.
    pub fn full(n_steps: usize) -> Result<Self> {
        Self::new(1, n_steps.saturating_sub(1))
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn check<T: Real>(&self, traj: &Trajectory<T>) -> Result<()> {
        if self.end() > traj.n_steps() {
            return Err(Error::Argument(format!(
                "window [{}, {}] exceeds trajectory of {} steps",
                self.start,
                self.end(),
                traj.n_steps()
            )));
        }
        Ok(())
    }
}

/// Paired `(x, y)` samples with strictly increasing `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series<T> {
    x: Vec<T>,
    y: Vec<T>,
}

impl<T: Real> Series<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Argument(format!(
                "series length mismatch: {} x vs {} y",
                x.len(),
                y.len()
            )));
        }
        if let Some(i) = x.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::Argument(format!(
                "series x not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self { x, y })
    }

    /// Series indexed by step `1..=y.len()`.
    pub fn from_steps(y: Vec<T>) -> Self {
        let x = (1..=y.len()).map(T::of_usize).collect();
        Self { x, y }
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.x.iter().copied().zip(self.y.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(n: usize) -> Trajectory<f64> {
        Trajectory::new(1, (1..=n).map(|t| t as f64).collect()).unwrap()
    }

    #[test]
    fn stationary_has_zero_displacement() {
        let t = Trajectory::new(3, vec![0.5; 30]).unwrap();
        for s in 1..=10 {
            for lag in 0..=(10 - s) {
                assert_eq!(displacement_sq(&t, s, lag).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn ballistic_1d() {
        assert_eq!(displacement_sq(&line(10), 1, 5).unwrap(), 25.0);
    }

    #[test]
    fn pythagorean_step() {
        let t = Trajectory::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(displacement_sq(&t, 1, 1).unwrap(), 25.0);
    }

    #[test]
    fn out_of_range_is_index_error() {
        let t = line(5);
        assert!(matches!(displacement_sq(&t, 0, 1), Err(Error::Index(_))));
        assert!(matches!(displacement_sq(&t, 3, 3), Err(Error::Index(_))));
    }

    #[test]
    fn validate_clean() {
        let t = line(10)
            .with_losses(vec![1.0; 10])
            .with_gradients(vec![0.0; 10]);
        assert!(t.validate().is_empty());
    }

    #[test]
    fn validate_names_nan_frame() {
        let mut f = vec![0.0; 20];
        f[2 * 2 + 1] = f64::NAN;
        let v = Trajectory::new(2, f).unwrap().validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].frame, Some(3));
        assert_eq!(v[0].channel, Channel::Weights);
    }

    #[test]
    fn validate_rejects_partial_loss_channel() {
        let v = line(10).with_losses(vec![0.0; 9]).validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].channel, Channel::Loss);
        assert_eq!(v[0].frame, None);
    }

    #[test]
    fn slice_renumbers() {
        let t = line(10).with_losses((0..10).map(f64::from).collect());
        let s = t.slice(4, 6).unwrap();
        assert_eq!(s.n_steps(), 3);
        assert_eq!(s.frame(1).unwrap(), &[4.0]);
        assert_eq!(s.losses().unwrap(), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn series_requires_increasing_x() {
        assert!(Series::new(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(Series::new(vec![1.0], vec![0.0, 0.0]).is_err());
        assert!(Series::new(vec![1.0, 2.0], vec![0.0, 0.0]).is_ok());
    }

    fn frames_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (1usize..4, 2usize..12).prop_flat_map(|(d, n)| {
            (Just(d), prop::collection::vec(-100.0f64..100.0, d * n))
        })
    }

    proptest! {
        #[test]
        fn zero_lag_is_zero((d, f) in frames_strategy()) {
            let t = Trajectory::new(d, f).unwrap();
            for s in 1..=t.n_steps() {
                prop_assert_eq!(displacement_sq(&t, s, 0).unwrap(), 0.0);
            }
        }

        #[test]
        fn time_reversal_symmetry((d, f) in frames_strategy(), a in 0usize..64, b in 0usize..64) {
            let t = Trajectory::new(d, f.clone()).unwrap();
            let n = t.n_steps();
            let (s, lag) = (1 + a % n, b % n);
            prop_assume!(s + lag <= n);
            let rev: Vec<f64> = f.chunks(d).rev().flatten().copied().collect();
            let r = Trajectory::new(d, rev).unwrap();
            // step u maps to n + 1 - u under reversal
            let fwd = displacement_sq(&t, s, lag).unwrap();
            let bwd = displacement_sq(&r, n + 1 - (s + lag), lag).unwrap();
            prop_assert_eq!(fwd, bwd);
        }

        #[test]
        fn quadratic_scaling((d, f) in frames_strategy(), c in -8.0f64..8.0) {
            let t = Trajectory::new(d, f.clone()).unwrap();
            let s = Trajectory::new(d, f.iter().map(|v| v * c).collect()).unwrap();
            let n = t.n_steps();
            let base = displacement_sq(&t, 1, n - 1).unwrap();
            let scaled = displacement_sq(&s, 1, n - 1).unwrap();
            prop_assert!((scaled - c * c * base).abs() <= 1e-9 * (1.0 + scaled.abs()));
        }
    }
}
