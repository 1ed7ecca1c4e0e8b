//! Toy-model experiment: walkers on a fractal landscape with a wide minimum,
//! with convex and shuffled-smoothed control landscapes.
//!
//! Everything here runs in `f64`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::diffusion::{fit_msd, fit_window, MsdCurve};
use crate::error::{Error, Result};
use crate::fractal::{msl, MslBins};
use crate::heavytail::{fit_stable_symmetric, gradient_pool, StableFit};
use crate::landscape::{
    detect_minima, generate_fractal_terrain, make_convex_paraboloid, shuffle_and_smooth, HeightField, Minimum,
};
use crate::model::{Trajectory, Window};
use crate::simulator::{detect_entry_time, run_sgd_toward, sweep, SimConfig, SimResult, DEFAULT_DWELL};

/// Parameters of the full toy-model pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig6Config {
    pub grid_n: usize,
    pub hurst: f64,
    /// Terrain seed. The default was picked by [`select_landscape`] with
    /// [`SelectionConfig::default`] over seeds `0..1000`.
    pub landscape_seed: u64,
    pub eta: f64,
    pub sigma: f64,
    pub n_steps: usize,
    pub trials: usize,
    /// Walker seeds are `seed_base .. seed_base + trials`.
    pub seed_base: u64,
    pub dwell: usize,
    pub convex_curvature: f64,
    /// Window length `T` of the control MSD fits (from step 1).
    pub control_window: usize,
    pub shuffle_sigma: f64,
    pub msl_bins: usize,
    pub msl_min_pairs: usize,
}

impl Default for Fig6Config {
    fn default() -> Self {
        Self {
            grid_n: 257,
            hurst: 0.9,
            landscape_seed: 588,
            eta: 0.02,
            sigma: 0.01,
            n_steps: 1000,
            trials: 10,
            seed_base: 0,
            dwell: DEFAULT_DWELL,
            convex_curvature: 0.02,
            control_window: 500,
            shuffle_sigma: 8.0,
            msl_bins: 32,
            msl_min_pairs: 50,
        }
    }
}

impl Fig6Config {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Argument("at least one trial is required".into()));
        }
        if self.control_window < 5 || self.control_window >= self.n_steps {
            return Err(Error::Argument(format!(
                "control window {} must lie in [5, n_steps)",
                self.control_window
            )));
        }
        if self.dwell >= self.n_steps {
            return Err(Error::Argument(format!("dwell {} >= n_steps {}", self.dwell, self.n_steps)));
        }
        self.sim(0).validate()
    }

    fn sim(&self, seed: u64) -> SimConfig<f64> {
        SimConfig::new(self.eta, self.sigma, self.n_steps, seed)
    }

    fn seeds(&self) -> Range<u64> {
        self.seed_base..self.seed_base + self.trials as u64
    }
}

/// How [`select_landscape`] screens terrain seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    /// Candidates whose global minimum is narrower than this are skipped.
    pub min_width: f64,
    pub pilot_walkers: usize,
    /// Pilot walkers use seeds from here on, away from the trial seeds.
    pub pilot_seed_base: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            min_width: 0.08,
            pilot_walkers: 20,
            pilot_seed_base: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub seed: u64,
    pub global_minimum: Minimum<f64>,
    /// Pilot walkers that settled in the global minimum.
    pub pilot_entries: usize,
}

/// Picks the terrain seed whose global minimum is wide and actually captures
/// walkers: among seeds with a global minimum at least `min_width` wide, the
/// one with most pilot entries (ties go to the wider minimum, then the lower
/// seed). `None` if no seed passes the width screen.
pub fn select_landscape(config: &Fig6Config, selection: &SelectionConfig, seeds: Range<u64>) -> Result<Option<Candidate>> {
    config.validate()?;
    let mut best: Option<Candidate> = None;
    for seed in seeds {
        let field = generate_fractal_terrain::<f64>(config.grid_n, config.hurst, seed)?;
        let Some(global) = detect_minima(&field).into_iter().next() else {
            continue;
        };
        if global.width_estimate < selection.min_width {
            continue;
        }
        let configs: Vec<SimConfig<f64>> = (0..selection.pilot_walkers as u64)
            .map(|k| config.sim(selection.pilot_seed_base + k))
            .collect();
        let pilot_entries = sweep(&field, &configs)?
            .iter()
            .filter(|r| detect_entry_time(&r.trajectory, &global, config.dwell).is_some())
            .count();
        let better = match &best {
            None => true,
            Some(b) => {
                pilot_entries > b.pilot_entries
                    || (pilot_entries == b.pilot_entries
                        && global.width_estimate > b.global_minimum.width_estimate)
            }
        };
        if better {
            best = Some(Candidate {
                seed,
                global_minimum: global,
                pilot_entries,
            });
        }
    }
    Ok(best)
}

/// One walker on the fractal landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub seed: u64,
    pub start: [f64; 2],
    /// Entry into the global minimum (the regime boundary `t0`).
    pub entry_step: Option<usize>,
    /// MSD exponent of the window `[1, t0]`.
    pub pre_exponent: Option<f64>,
    /// MSD exponent of the window `[t0, n_steps]`.
    pub post_exponent: Option<f64>,
    /// MSL Hurst exponents of the same two windows.
    pub early_hurst: Option<f64>,
    pub final_hurst: Option<f64>,
    #[serde(skip)]
    pub msd_pre: Option<MsdCurve<f64>>,
    #[serde(skip)]
    pub msd_post: Option<MsdCurve<f64>>,
}

impl TrialReport {
    /// Super-diffusive before entry and sub-diffusive after.
    pub fn regime_change(&self) -> bool {
        self.pre_exponent.is_some_and(|a| a > 1.0) && self.post_exponent.is_some_and(|a| a < 1.0)
    }

    /// Rougher landscape seen early than in the final basin.
    pub fn roughness_drop(&self) -> bool {
        matches!((self.early_hurst, self.final_hurst), (Some(e), Some(f)) if e > f)
    }
}

/// One walker on a control landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRun {
    pub seed: u64,
    /// MSD exponent of the window `[1, control_window]`.
    pub exponent: Option<f64>,
    /// Distance from the last position to the nearest detected minimum.
    pub final_displacement: Option<f64>,
    /// `width_estimate` of that minimum.
    pub trap_width: Option<f64>,
}

impl ControlRun {
    pub fn trapped(&self, widths: f64) -> bool {
        matches!((self.final_displacement, self.trap_width), (Some(d), Some(w)) if d <= widths * w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub kind: String,
    pub runs: Vec<ControlRun>,
    /// Exponent of the trial-averaged MSD curve.
    pub exponent: Option<f64>,
    /// Fit to the pooled gradient components of every step of every run.
    pub gradient_fit: Option<StableFit<f64>>,
    #[serde(skip)]
    pub msd: Option<MsdCurve<f64>>,
    #[serde(skip)]
    pub gradients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig6Report {
    pub config: Fig6Config,
    pub global_minimum: Minimum<f64>,
    pub trials: Vec<TrialReport>,
    /// Fit to the pooled pre-entry gradient components of all trials.
    pub gradient_fit: Option<StableFit<f64>>,
    pub convex: ControlReport,
    pub shuffled: ControlReport,
    #[serde(skip)]
    pub gradients: Vec<f64>,
}

impl Fig6Report {
    pub fn regime_changes(&self) -> usize {
        self.trials.iter().filter(|t| t.regime_change()).count()
    }

    pub fn roughness_drops(&self) -> usize {
        self.trials.iter().filter(|t| t.roughness_drop()).count()
    }

    pub fn entries(&self) -> usize {
        self.trials.iter().filter(|t| t.entry_step.is_some()).count()
    }
}

/// Runs the trials on the fractal landscape and both controls.
pub fn run_fig6(config: &Fig6Config) -> Result<Fig6Report> {
    config.validate()?;
    let field = generate_fractal_terrain::<f64>(config.grid_n, config.hurst, config.landscape_seed)?;
    let global = detect_minima(&field)
        .into_iter()
        .next()
        .ok_or_else(|| Error::Degenerate("fractal landscape has no strict minimum".into()))?;

    let seeds: Vec<u64> = config.seeds().collect();
    let mut trials = Vec::with_capacity(seeds.len());
    let mut pool = Vec::new();
    for &seed in &seeds {
        let run = run_sgd_toward(&field, &config.sim(seed), None)?;
        let entry_step = detect_entry_time(&run.trajectory, &global, config.dwell);
        let (report, grads) = trial_report(config, seed, &run, entry_step)?;
        pool.extend(grads);
        trials.push(report);
    }
    let gradient_fit = fit_pool(&pool)?;

    let convex_field = make_convex_paraboloid::<f64>(config.grid_n, config.convex_curvature)?;
    let convex = control(config, "convex", &convex_field, &seeds)?;
    let shuffled_field = shuffle_and_smooth(&field, config.shuffle_sigma, config.landscape_seed)?;
    let shuffled = control(config, "shuffled_smoothed", &shuffled_field, &seeds)?;

    Ok(Fig6Report {
        config: config.clone(),
        global_minimum: global,
        trials,
        gradient_fit,
        convex,
        shuffled,
        gradients: pool,
    })
}

fn trial_report(
    config: &Fig6Config,
    seed: u64,
    run: &SimResult<f64>,
    entry_step: Option<usize>,
) -> Result<(TrialReport, Vec<f64>)> {
    let traj = &run.trajectory;
    let n = traj.n_steps();
    let start = [traj.frames()[0], traj.frames()[1]];
    let mut report = TrialReport {
        seed,
        start,
        entry_step,
        pre_exponent: None,
        post_exponent: None,
        early_hurst: None,
        final_hurst: None,
        msd_pre: None,
        msd_post: None,
    };
    let Some(t0) = entry_step else {
        return Ok((report, Vec::new()));
    };
    let mut grads = Vec::new();
    if t0 >= 2 {
        let (curve, fit) = fit_window(traj, 1, t0)?;
        report.pre_exponent = fit.exponent();
        report.msd_pre = Some(curve);
        report.early_hurst = hurst(config, traj, Window::new(1, t0)?);
        grads = gradient_pool(traj, Window::new(1, t0)?)?;
    }
    if n - t0 >= 2 {
        let (curve, fit) = fit_window(traj, t0, n - t0)?;
        report.post_exponent = fit.exponent();
        report.msd_post = Some(curve);
        report.final_hurst = hurst(config, traj, Window::new(t0, n - t0)?);
    }
    Ok((report, grads))
}

fn hurst(config: &Fig6Config, traj: &Trajectory<f64>, window: Window) -> Option<f64> {
    msl(traj, window, &MslBins::LogSpaced(config.msl_bins), config.msl_min_pairs, 0)
        .ok()
        .and_then(|c| c.hurst())
}

fn control(config: &Fig6Config, kind: &str, field: &HeightField<f64>, seeds: &[u64]) -> Result<ControlReport> {
    let minima = detect_minima(field);
    let configs: Vec<SimConfig<f64>> = seeds.iter().map(|&s| config.sim(s)).collect();
    let results = sweep(field, &configs)?;
    let mut gradients = Vec::new();
    let mut curves = Vec::with_capacity(results.len());
    let mut runs = Vec::with_capacity(results.len());
    for (r, &seed) in results.iter().zip(seeds) {
        let traj = &r.trajectory;
        let (curve, fit) = fit_window(traj, 1, config.control_window)?;
        let k = traj.frames().len();
        let last = [traj.frames()[k - 2], traj.frames()[k - 1]];
        let nearest = minima
            .iter()
            .map(|m| ((m.position[0] - last[0]).hypot(m.position[1] - last[1]), m.width_estimate))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        runs.push(ControlRun {
            seed,
            exponent: fit.exponent(),
            final_displacement: nearest.map(|n| n.0),
            trap_width: nearest.map(|n| n.1),
        });
        curves.push(curve);
        gradients.extend(gradient_pool(traj, Window::full(traj.n_steps())?)?);
    }
    let msd = average_curves(&curves);
    let exponent = msd.as_ref().and_then(|c| fit_msd(c).ok()).map(|f| f.exponent);
    Ok(ControlReport {
        kind: kind.to_string(),
        runs,
        exponent,
        gradient_fit: fit_pool(&gradients)?,
        msd,
        gradients,
    })
}

fn fit_pool(pool: &[f64]) -> Result<Option<StableFit<f64>>> {
    match fit_stable_symmetric(pool) {
        Ok(f) => Ok(Some(f)),
        Err(Error::InsufficientData(_) | Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Point-wise mean of curves sharing one lag grid.
fn average_curves(curves: &[MsdCurve<f64>]) -> Option<MsdCurve<f64>> {
    let first = curves.first()?;
    if curves.iter().any(|c| c.lags != first.lags) {
        return None;
    }
    let k = curves.len() as f64;
    let values = (0..first.lags.len())
        .map(|i| curves.iter().map(|c| c.values[i]).sum::<f64>() / k)
        .collect();
    Some(MsdCurve {
        window: first.window,
        lags: first.lags.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Fig6Config {
        Fig6Config {
            grid_n: 65,
            n_steps: 300,
            trials: 3,
            control_window: 100,
            msl_min_pairs: 10,
            ..Fig6Config::default()
        }
    }

    #[test]
    fn validate_rejects_bad_settings() {
        assert!(Fig6Config::default().validate().is_ok());
        for bad in [
            Fig6Config { trials: 0, ..small() },
            Fig6Config { control_window: 300, ..small() },
            Fig6Config { control_window: 2, ..small() },
            Fig6Config { dwell: 300, ..small() },
            Fig6Config { eta: -1.0, ..small() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Argument(_))), "{bad:?}");
        }
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let c: Fig6Config = serde_json::from_str(r#"{"trials": 4}"#).unwrap();
        assert_eq!(c.trials, 4);
        assert_eq!(c.grid_n, Fig6Config::default().grid_n);
        assert!(serde_json::from_str::<Fig6Config>(r#"{"trails": 4}"#).is_err());
    }

    #[test]
    fn small_run_is_deterministic_and_complete() {
        let a = run_fig6(&small()).unwrap();
        let b = run_fig6(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trials.len(), 3);
        assert_eq!(a.convex.runs.len(), 3);
        assert_eq!(a.shuffled.runs.len(), 3);
        assert_eq!(
            a.trials.iter().map(|t| t.seed).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert!(a.entries() <= 3);
        assert!(a.regime_changes() <= a.entries());
    }
}
