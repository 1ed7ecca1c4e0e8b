//! Mean squared displacement, logarithmic derivatives, power-law fits and
//! regime detection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sq_dist, Series, Trajectory, Window};
use crate::scalar::Real;
use crate::stats;

/// Goodness-of-fit threshold (RMSE of log10 residuals) for "single power law".
pub const DEFAULT_RMSE_THRESHOLD: f64 = 0.03;
/// Lag increment of the logarithmic derivative.
pub const DEFAULT_DELTA_TAU: usize = 20;
/// Default analysis window length.
pub const DEFAULT_WINDOW: usize = 1000;
/// Lag density used when scanning for the crossover lag.
pub const CROSSOVER_LAGS_PER_DECADE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsdCurve<T> {
    pub window: Window,
    pub lags: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Real> MsdCurve<T> {
    pub fn to_series(&self) -> Series<T> {
        Series::new(self.lags.iter().map(|&l| T::of_usize(l)).collect(), self.values.clone())
            .expect("lags are strictly increasing")
    }

    pub fn max_lag(&self) -> usize {
        self.lags.last().copied().unwrap_or(0)
    }

    fn value_at(&self, lag: usize) -> Option<T> {
        self.lags.binary_search(&lag).ok().map(|i| self.values[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit<T> {
    pub exponent: T,
    /// log10 of the prefactor `c` in `y = c * x^exponent`.
    pub log_prefactor: T,
    /// Smallest and largest `x` actually used.
    pub fit_range: [T; 2],
    /// Root-mean-square residual in log10 units.
    pub rmse: T,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSeries<T> {
    pub lags: Vec<usize>,
    pub values: Vec<T>,
    pub delta_tau: usize,
}

/// Lags `1..=min(T, n_steps - t_w)`; the longest lags average over fewer
/// start times.
pub fn default_lags<T: Real>(traj: &Trajectory<T>, window: Window) -> Vec<usize> {
    let max = window.len.min(traj.n_steps().saturating_sub(window.start));
    (1..=max).collect()
}

/// Integer lags in `1..=max_lag`, thinned to about `per_decade` points per
/// decade of lag.
pub fn log_spaced_lags(max_lag: usize, per_decade: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    if max_lag == 0 {
        return out;
    }
    let steps = ((max_lag as f64).log10() * per_decade as f64).ceil() as usize;
    for k in 0..=steps {
        let l = 10f64.powf(k as f64 / per_decade as f64).round() as usize;
        let l = l.clamp(1, max_lag);
        if out.last() != Some(&l) {
            out.push(l);
        }
    }
    if out.last() != Some(&max_lag) {
        out.push(max_lag);
    }
    out
}

/// Time-averaged MSD over start times `t_w ..= t_w + T`.
///
/// Start times whose partner frame `t + lag` lies past the end of the
/// trajectory are dropped and the average uses the number of terms actually
/// summed.
pub fn time_averaged_msd<T: Real>(traj: &Trajectory<T>, window: Window, lags: &[usize]) -> Result<MsdCurve<T>> {
    window.check(traj)?;
    if lags.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument("lags must be strictly increasing".into()));
    }
    let n = traj.n_steps();
    let d = traj.dim();
    let frames = traj.frames();
    let mut values = Vec::with_capacity(lags.len());
    for &lag in lags {
        if lag == 0 {
            return Err(Error::Argument("lag 0 is excluded from MSD curves".into()));
        }
        let last_start = (window.end()).min(n.saturating_sub(lag));
        if last_start < window.start {
            return Err(Error::Argument(format!(
                "lag {lag} exceeds the frames available after step {}",
                window.start
            )));
        }
        let mut acc = 0.0f64;
        for t in window.start..=last_start {
            let a = &frames[(t - 1) * d..t * d];
            let b = &frames[(t + lag - 1) * d..(t + lag) * d];
            acc += sq_dist(a, b).f64();
        }
        values.push(T::of(acc / (last_start - window.start + 1) as f64));
    }
    Ok(MsdCurve {
        window,
        lags: lags.to_vec(),
        values,
    })
}

/// Single-start, per-coordinate MSD `|w(t_w + lag) - w(t_w)|^2 / d`.
pub fn no_averaged_msd<T: Real>(traj: &Trajectory<T>, t_w: usize, lags: &[usize]) -> Result<Series<T>> {
    let d = T::of_usize(traj.dim());
    let mut ys = Vec::with_capacity(lags.len());
    for &lag in lags {
        if t_w + lag > traj.n_steps() {
            return Err(Error::Argument(format!(
                "lag {lag} exceeds the frames available after step {t_w}"
            )));
        }
        ys.push(crate::model::displacement_sq(traj, t_w, lag)? / d);
    }
    Series::new(lags.iter().map(|&l| T::of_usize(l)).collect(), ys)
}

/// `beta(tau) = [ln MSD(tau + dtau) - ln MSD(tau)] / [ln(tau + dtau) - ln tau]`
/// at every lag whose partner `tau + dtau` is also on the curve.
pub fn log_derivative_beta<T: Real>(curve: &MsdCurve<T>, delta_tau: usize) -> Result<BetaSeries<T>> {
    if delta_tau == 0 {
        return Err(Error::Argument("delta_tau must be positive".into()));
    }
    let mut lags = Vec::new();
    let mut values = Vec::new();
    for (&lag, &v) in curve.lags.iter().zip(&curve.values) {
        let Some(ahead) = curve.value_at(lag + delta_tau) else {
            continue;
        };
        if v <= T::zero() || ahead <= T::zero() {
            return Err(Error::Domain(format!(
                "non-positive MSD at lag {lag} or {}",
                lag + delta_tau
            )));
        }
        let num = ahead.f64().ln() - v.f64().ln();
        let den = ((lag + delta_tau) as f64).ln() - (lag as f64).ln();
        lags.push(lag);
        values.push(T::of(num / den));
    }
    Ok(BetaSeries {
        lags,
        values,
        delta_tau,
    })
}

/// Least-squares fit of `log10 y` against `log10 x` over `x` in `range`.
pub fn fit_power_law<T: Real>(curve: &Series<T>, range: [T; 2]) -> Result<PowerLawFit<T>> {
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut used = [T::infinity(), T::neg_infinity()];
    for (x, y) in curve.iter() {
        if x < range[0] || x > range[1] {
            continue;
        }
        if x <= T::zero() || y <= T::zero() {
            return Err(Error::Domain(format!("non-positive point ({x}, {y}) in fit range")));
        }
        lx.push(x.f64().log10());
        ly.push(y.f64().log10());
        used[0] = used[0].min(x);
        used[1] = used[1].max(x);
    }
    if lx.len() < 5 {
        return Err(Error::Argument(format!(
            "{} points in [{}, {}], need at least 5",
            lx.len(),
            range[0],
            range[1]
        )));
    }
    let fit = stats::fit_line(&lx, &ly)
        .ok_or_else(|| Error::Degenerate("no spread in x over the fit range".into()))?;
    Ok(PowerLawFit {
        exponent: T::of(fit.slope),
        log_prefactor: T::of(fit.intercept),
        fit_range: used,
        rmse: T::of(fit.rmse),
        n_points: lx.len(),
    })
}

/// Fit over the whole lag range of an MSD curve.
pub fn fit_msd<T: Real>(curve: &MsdCurve<T>) -> Result<PowerLawFit<T>> {
    let s = curve.to_series();
    let lo = T::of_usize(curve.lags.first().copied().unwrap_or(0));
    fit_power_law(&s, [lo, T::of_usize(curve.max_lag())])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossover<T> {
    /// Smallest lag from which a single power law fits to the end of the
    /// curve; `None` if no lag qualifies.
    pub tau0: Option<usize>,
    pub tail_fit: Option<PowerLawFit<T>>,
}

/// Finds the smallest `tau'` for which the power-law fit over
/// `[tau', tau_max]` has RMSE below `rmse_thresh`.
pub fn detect_crossover_tau0<T: Real>(curve: &MsdCurve<T>, rmse_thresh: f64) -> Result<Crossover<T>> {
    if curve.lags.len() < 20 {
        return Err(Error::Argument(format!(
            "crossover detection needs at least 20 lags, curve has {}",
            curve.lags.len()
        )));
    }
    if let Some(i) = curve.values.iter().position(|&v| v <= T::zero()) {
        return Err(Error::Domain(format!("non-positive MSD at lag {}", curve.lags[i])));
    }
    let lx: Vec<f64> = curve.lags.iter().map(|&l| (l as f64).log10()).collect();
    let ly: Vec<f64> = curve.values.iter().map(|v| v.f64().log10()).collect();
    let n = lx.len();
    for start in 0..=n - 5 {
        if let Some(f) = stats::fit_line(&lx[start..], &ly[start..]) {
            if f.rmse < rmse_thresh {
                return Ok(Crossover {
                    tau0: Some(curve.lags[start]),
                    tail_fit: Some(PowerLawFit {
                        exponent: T::of(f.slope),
                        log_prefactor: T::of(f.intercept),
                        fit_range: [T::of_usize(curve.lags[start]), T::of_usize(curve.max_lag())],
                        rmse: T::of(f.rmse),
                        n_points: n - start,
                    }),
                });
            }
        }
    }
    Ok(Crossover {
        tau0: None,
        tail_fit: None,
    })
}

/// Label attached to a [`RegimeReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// Sub-diffusive short lags, super-diffusive long lags before `t0`, and
    /// sub-diffusion after.
    ThreeRegime,
    Atypical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport<T> {
    pub tau0: Option<usize>,
    pub t0: Option<usize>,
    pub alpha1: Option<T>,
    pub alpha2: Option<T>,
    pub alpha3: Option<T>,
    pub classification: Classification,
    pub window_len: usize,
    pub stride: usize,
    pub rmse_threshold: f64,
}

impl<T: Real> RegimeReport<T> {
    fn classify(&mut self) {
        let unit = |a: Option<T>| a.is_some_and(|a| a > T::zero() && a < T::one());
        self.classification = if unit(self.alpha1) && self.alpha2.is_some_and(|a| a > T::one()) && unit(self.alpha3) {
            Classification::ThreeRegime
        } else {
            Classification::Atypical
        };
    }
}

/// Outcome of fitting a single power law to one analysis window.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowFit<T> {
    /// The walker did not move: MSD is identically zero (exponent 0).
    Frozen,
    Fitted(PowerLawFit<T>),
    /// Mixed zero/positive values or too few lags.
    Unfittable,
}

impl<T: Real> WindowFit<T> {
    pub fn passes(&self, rmse_thresh: f64) -> bool {
        match self {
            WindowFit::Frozen => true,
            WindowFit::Fitted(f) => f.rmse.f64() < rmse_thresh,
            WindowFit::Unfittable => false,
        }
    }

    pub fn exponent(&self) -> Option<T> {
        match self {
            WindowFit::Frozen => Some(T::zero()),
            WindowFit::Fitted(f) => Some(f.exponent),
            WindowFit::Unfittable => None,
        }
    }
}

/// Single power-law fit of the full-range MSD curve of `[t_w, t_w + T]`.
pub fn fit_window<T: Real>(traj: &Trajectory<T>, t_w: usize, len: usize) -> Result<(MsdCurve<T>, WindowFit<T>)> {
    let window = Window::new(t_w, len)?;
    let lags = default_lags(traj, window);
    let curve = time_averaged_msd(traj, window, &lags)?;
    let fit = if curve.values.iter().all(|&v| v == T::zero()) {
        WindowFit::Frozen
    } else if curve.values.iter().any(|&v| v <= T::zero()) {
        WindowFit::Unfittable
    } else {
        match fit_msd(&curve) {
            Ok(f) => WindowFit::Fitted(f),
            Err(_) => WindowFit::Unfittable,
        }
    };
    Ok((curve, fit))
}

/// Keeps the lags of `curve` that lie on a log-spaced grid.
pub fn thin_to_log_grid<T: Real>(curve: &MsdCurve<T>, per_decade: usize) -> MsdCurve<T> {
    let grid = log_spaced_lags(curve.max_lag(), per_decade);
    let (lags, values) = curve
        .lags
        .iter()
        .zip(&curve.values)
        .filter(|(l, _)| grid.binary_search(l).is_ok())
        .map(|(&l, &v)| (l, v))
        .unzip();
    MsdCurve {
        window: curve.window,
        lags,
        values,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeDetection<T> {
    pub t0: Option<usize>,
    pub report: RegimeReport<T>,
}

/// Slides `t_w = 1, 1 + stride, ...` and returns the first window whose
/// full-range MSD admits a single power law with RMSE below `rmse_thresh`,
/// together with the crossover and exponents of the piecewise law.
pub fn detect_regime_change_t0<T: Real>(
    traj: &Trajectory<T>,
    len: usize,
    stride: usize,
    rmse_thresh: f64,
) -> Result<RegimeDetection<T>> {
    if stride == 0 {
        return Err(Error::Argument("stride must be positive".into()));
    }
    let n = traj.n_steps();
    if n < 2 * len {
        return Err(Error::Argument(format!(
            "trajectory of {n} steps is shorter than twice the window ({len})"
        )));
    }
    let count = (n - len - 1) / stride + 1;
    let fits: Vec<Option<WindowFit<T>>> = (0..count)
        .into_par_iter()
        .map(|k| fit_window(traj, 1 + k * stride, len).ok().map(|(_, f)| f))
        .collect();
    let first = fits
        .iter()
        .position(|f| f.as_ref().is_some_and(|f| f.passes(rmse_thresh)));
    let t0 = first.map(|k| 1 + k * stride);

    let mut report = RegimeReport {
        tau0: None,
        t0,
        alpha1: None,
        alpha2: None,
        alpha3: first.and_then(|k| fits[k].as_ref().and_then(|f| f.exponent())),
        classification: Classification::Atypical,
        window_len: len,
        stride,
        rmse_threshold: rmse_thresh,
    };

    let (full, _) = fit_window(traj, 1, len)?;
    let curve = thin_to_log_grid(&full, CROSSOVER_LAGS_PER_DECADE);
    if curve.values.iter().all(|&v| v > T::zero()) && curve.lags.len() >= 20 {
        let cross = detect_crossover_tau0(&curve, rmse_thresh)?;
        report.tau0 = cross.tau0;
        report.alpha2 = cross.tail_fit.map(|f| f.exponent);
        if let Some(tau0) = cross.tau0 {
            let s = curve.to_series();
            if let Ok(f) = fit_power_law(&s, [T::one(), T::of_usize(tau0)]) {
                report.alpha1 = Some(f.exponent);
            }
        }
    }
    report.classify();
    Ok(RegimeDetection { t0, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ballistic(n: usize, v: &[f64]) -> Trajectory<f64> {
        let d = v.len();
        let mut f = Vec::with_capacity(n * d);
        for t in 1..=n {
            f.extend(v.iter().map(|c| c * t as f64));
        }
        Trajectory::new(d, f).unwrap()
    }

    fn power_curve(alpha: f64, max: usize) -> MsdCurve<f64> {
        let lags: Vec<usize> = (1..=max).collect();
        MsdCurve {
            window: Window::new(1, max).unwrap(),
            values: lags.iter().map(|&l| 0.3 * (l as f64).powf(alpha)).collect(),
            lags,
        }
    }

    #[test]
    fn stationary_msd_is_zero() {
        let t = Trajectory::new(2, vec![1.0; 40]).unwrap();
        let c = time_averaged_msd(&t, Window::new(1, 10).unwrap(), &[1, 2, 5]).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ballistic_msd_is_exact() {
        let v = [0.3, -0.4, 1.2];
        let speed2: f64 = v.iter().map(|x| x * x).sum();
        let t = ballistic(200, &v);
        for tw in [1, 17, 50] {
            let w = Window::new(tw, 60).unwrap();
            let c = time_averaged_msd(&t, w, &default_lags(&t, w)).unwrap();
            for (&l, &m) in c.lags.iter().zip(&c.values) {
                let want = speed2 * (l * l) as f64;
                assert!((m - want).abs() <= 1e-9 * want, "lag {l}: {m} vs {want}");
            }
        }
    }

    #[test]
    fn lag_beyond_frames_is_rejected() {
        let t = ballistic(10, &[1.0]);
        let e = time_averaged_msd(&t, Window::new(5, 3).unwrap(), &[6]).unwrap_err();
        assert!(matches!(e, Error::Argument(ref m) if m.contains("lag 6")));
    }

    #[test]
    fn no_averaged_cases() {
        let t = ballistic(30, &[1.0]);
        let s = no_averaged_msd(&t, 3, &[1, 2, 10]).unwrap();
        assert_eq!(s.y(), &[1.0, 4.0, 100.0]);
        let z = Trajectory::new(2, vec![0.0; 20]).unwrap();
        assert!(no_averaged_msd(&z, 1, &[1, 5]).unwrap().y().iter().all(|&v| v == 0.0));
        assert!(no_averaged_msd(&t, 25, &[6]).is_err());
    }

    #[test]
    fn no_averaged_matches_single_term_average() {
        // a window of length T whose only valid start is t_w reduces the
        // time average to one term; the two formulas then differ by 1/d.
        let t = Trajectory::from_rows(&[
            [0.1, 0.7, -0.2],
            [0.4, 0.2, 0.9],
            [-1.3, 0.5, 0.0],
            [0.8, 0.8, 0.3],
            [2.0, -0.6, 1.1],
        ])
        .unwrap();
        for lag in 2..=4usize {
            let tw = 5 - lag;
            let ta = time_averaged_msd(&t, Window::new(tw, 2).unwrap(), &[lag]).unwrap();
            let na = no_averaged_msd(&t, tw, &[lag]).unwrap();
            let direct: f64 = t
                .frame(tw)
                .unwrap()
                .iter()
                .zip(t.frame(tw + lag).unwrap())
                .map(|(a, b)| (b - a) * (b - a))
                .sum();
            assert!((ta.values[0] - direct).abs() < 1e-12);
            assert!((na.y()[0] - direct / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_of_pure_power_laws() {
        for alpha in [1.5, 1.0] {
            let b = log_derivative_beta(&power_curve(alpha, 200), 20).unwrap();
            assert_eq!(b.lags.len(), 180);
            assert!(b.values.iter().all(|v| (v - alpha).abs() < 1e-9));
        }
    }

    #[test]
    fn beta_tracks_a_crossover() {
        // tau^0.5 below 100, continuous tau^1.8 above
        let lags: Vec<usize> = (1..=1000).collect();
        let values = lags
            .iter()
            .map(|&l| {
                let t = l as f64;
                if t < 100.0 {
                    t.powf(0.5)
                } else {
                    10.0 * (t / 100.0).powf(1.8)
                }
            })
            .collect();
        let c = MsdCurve {
            window: Window::new(1, 1000).unwrap(),
            lags,
            values,
        };
        let b = log_derivative_beta(&c, 20).unwrap();
        assert!((b.values[9] - 0.5).abs() < 1e-9);
        assert!((b.values[299] - 1.8).abs() < 1e-9);
        let mid = b.values[89]; // tau = 90 straddles the crossover
        assert!(mid > 0.5 && mid < 1.8);
    }

    #[test]
    fn beta_rejects_zero_msd() {
        let mut c = power_curve(1.0, 50);
        c.values[3] = 0.0;
        assert!(matches!(log_derivative_beta(&c, 20), Err(Error::Domain(_))));
    }

    #[test]
    fn power_law_fits() {
        let x: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = Series::new(x.clone(), x.iter().map(|v| 3.0 * v * v).collect()).unwrap();
        let f = fit_power_law(&s, [1.0, 100.0]).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-9 && f.rmse < 1e-12);
        assert!((f.log_prefactor - 3f64.log10()).abs() < 1e-9);

        let c = Series::new(x.clone(), vec![4.0; 100]).unwrap();
        assert!(fit_power_law(&c, [1.0, 100.0]).unwrap().exponent.abs() < 1e-9);

        assert!(matches!(fit_power_law(&s, [1.0, 4.0]), Err(Error::Argument(_))));
        let neg = Series::new(x, (0..100).map(|i| i as f64 - 1.0).collect()).unwrap();
        assert!(matches!(fit_power_law(&neg, [1.0, 100.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn power_law_with_lognormal_noise() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0f64, 0.01).unwrap();
        let x: Vec<f64> = (1..=100).map(f64::from).collect();
        let y = x.iter().map(|v| v * noise.sample(&mut rng).exp()).collect();
        let f = fit_power_law(&Series::new(x, y).unwrap(), [1.0, 100.0]).unwrap();
        assert!((f.exponent - 1.0).abs() < 0.05);
    }

    #[test]
    fn crossover_on_pure_power_law_is_first_lag() {
        let c = detect_crossover_tau0(&power_curve(1.3, 100), 0.03).unwrap();
        assert_eq!(c.tau0, Some(1));
        assert!((c.tail_fit.unwrap().exponent - 1.3).abs() < 1e-9);
    }

    #[test]
    fn crossover_brackets_construction_point() {
        let lags = log_spaced_lags(1000, CROSSOVER_LAGS_PER_DECADE);
        let values = lags
            .iter()
            .map(|&l| {
                let t = l as f64;
                if t < 100.0 {
                    t.powf(0.5)
                } else {
                    10.0 * (t / 100.0).powf(1.8)
                }
            })
            .collect();
        let c = MsdCurve {
            window: Window::new(1, 1000).unwrap(),
            lags,
            values,
        };
        let x = detect_crossover_tau0(&c, 0.03).unwrap();
        let tau0 = x.tau0.unwrap();
        assert!((x.tail_fit.unwrap().exponent - 1.8).abs() < 0.05);
        assert!((80..=130).contains(&tau0), "tau0 = {tau0}");
    }

    #[test]
    fn crossover_absent_on_white_noise() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let noise = Normal::new(0.0f64, 1.0).unwrap();
        let lags: Vec<usize> = (1..=200).collect();
        let values = lags.iter().map(|_| noise.sample(&mut rng).exp()).collect();
        let c = MsdCurve {
            window: Window::new(1, 200).unwrap(),
            lags,
            values,
        };
        let x = detect_crossover_tau0(&c, 0.03).unwrap();
        assert_eq!(x.tau0, None);
        assert!(x.tail_fit.is_none());
    }

    #[test]
    fn crossover_preconditions() {
        assert!(detect_crossover_tau0(&power_curve(1.0, 10), 0.03).is_err());
        let mut c = power_curve(1.0, 30);
        c.values[0] = 0.0;
        assert!(matches!(detect_crossover_tau0(&c, 0.03), Err(Error::Domain(_))));
    }

    #[test]
    fn regime_change_needs_long_trajectory() {
        let t = ballistic(100, &[1.0]);
        assert!(detect_regime_change_t0(&t, 60, 6, 0.03).is_err());
    }

    #[test]
    fn ballistic_then_frozen() {
        let n = 1200;
        let boundary = 500;
        let f: Vec<f64> = (1..=n).map(|t| t.min(boundary) as f64 * 0.01).collect();
        let t = Trajectory::new(1, f).unwrap();
        // windows of 500 steps starting before the boundary mix both regimes
        let r = detect_regime_change_t0(&t, 500, 20, 0.03).unwrap();
        let t0 = r.t0.unwrap();
        assert!(t0.abs_diff(boundary) <= 20, "t0 = {t0}");
        assert!(r.report.alpha3.unwrap().abs() < 0.1);
    }

    proptest! {
        #[test]
        fn msd_translation_invariant(
            f in prop::collection::vec(-10.0f64..10.0, 2 * 30),
            shift in prop::collection::vec(-50.0f64..50.0, 2),
        ) {
            let t = Trajectory::new(2, f.clone()).unwrap();
            let moved: Vec<f64> = f.chunks(2).flat_map(|c| [c[0] + shift[0], c[1] + shift[1]]).collect();
            let m = Trajectory::new(2, moved).unwrap();
            let w = Window::new(3, 12).unwrap();
            let lags = default_lags(&t, w);
            let a = time_averaged_msd(&t, w, &lags).unwrap();
            let b = time_averaged_msd(&m, w, &lags).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn tau0_of_exact_power_law(alpha in 0.1f64..2.5, c in 0.01f64..100.0) {
            let lags: Vec<usize> = (1..=60).collect();
            let curve = MsdCurve {
                window: Window::new(1, 60).unwrap(),
                values: lags.iter().map(|&l| c * (l as f64).powf(alpha)).collect(),
                lags,
            };
            let x = detect_crossover_tau0(&curve, 0.03).unwrap();
            prop_assert_eq!(x.tau0, Some(1));
            let fit = x.tail_fit.unwrap();
            prop_assert!((fit.exponent - alpha).abs() < 1e-9);
            // beta agrees with the fitted exponent
            let b = log_derivative_beta(&curve, 20).unwrap();
            for v in b.values {
                prop_assert!((v - fit.exponent).abs() < 1e-9);
            }
        }

        #[test]
        fn doubled_window_recomputes(f in prop::collection::vec(-5.0f64..5.0, 12)) {
            // concatenating a trajectory with a shifted copy of itself: the MSD of
            // the doubled window is the term-count weighted combination of
            // the original terms plus the added ones.
            let n = f.len();
            let mut g = f.clone();
            g.extend(f.iter().map(|v| v + 100.0));
            let t = Trajectory::new(1, g.clone()).unwrap();
            let lag = 2;
            let short = time_averaged_msd(&t, Window::new(1, n - 1).unwrap(), &[lag]).unwrap();
            let long = time_averaged_msd(&t, Window::new(1, 2 * n - 1 - 1).unwrap(), &[lag]).unwrap();
            let term = |s: usize| (g[s - 1 + lag] - g[s - 1]).powi(2);
            let first: f64 = (1..=n).map(term).sum();
            let all: f64 = (1..=2 * n - lag).map(term).sum();
            prop_assert!((short.values[0] - first / n as f64).abs() < 1e-9);
            prop_assert!((long.values[0] - all / (2 * n - lag) as f64).abs() < 1e-9);
        }
    }
}
