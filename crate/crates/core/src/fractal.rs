//! Fractality of optimizer paths and of the loss sampled along them.
//!
//! * [`path_scaling`]: contour length `Δs` against squared end-to-end
//!   distance `Δr²`, `Δr² ~ Δs^λ`, with fractal dimension `D_f = 2 / λ`.
//! * [`transverse_profile`]: largest perpendicular deviation from the chord
//!   between two path points, against the chord length.
//! * [`msl`]: mean squared loss difference against weight distance,
//!   `MSL ~ Δr^(2H)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{fit_power_law, log_spaced_lags, PowerLawFit, DEFAULT_RMSE_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::{sq_dist, Series, Trajectory, Window};
use crate::scalar::Real;
use crate::stats::fit_line;

pub const DEFAULT_SMOOTHING: usize = 40;
pub const DEFAULT_MIN_PAIRS: usize = 50;
pub const DEFAULT_MSL_BINS: usize = 32;
/// Windows with at most this many steps use every pair for MSL.
pub const EXHAUSTIVE_PAIR_LIMIT: usize = 2000;
pub const SAMPLED_PAIRS: usize = 2_000_000;

const MAX_ANCHORS: usize = 2000;
const FIT_POINTS_PER_DECADE: usize = 20;
const MIN_SEGMENT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFractalResult<T> {
    pub window: Window,
    /// Smoothed anchor-averaged `Δs` (x) against `Δr²` (y).
    pub ds_dr2: Series<T>,
    pub lambda_short: T,
    pub lambda_long: T,
    /// Contour length where the two regimes meet; `None` when a single
    /// power law fits.
    pub crossover_l: Option<T>,
    pub d_f_short: T,
    pub d_f_long: T,
    pub smoothing_window: usize,
    /// log10 RMSE of the reported (one- or two-segment) fit.
    pub fit_rmse: T,
}

fn window_frames<T: Real>(traj: &Trajectory<T>, window: Window) -> Result<&[T]> {
    window.check(traj)?;
    let d = traj.dim();
    Ok(&traj.frames()[(window.start - 1) * d..window.end() * d])
}

/// Contour/end-to-end scaling over spans `1 ..= T / 4`. For each span the
/// quantities are averaged over anchors in the window, the log coordinates
/// are smoothed with a centred moving average of `smoothing` spans, and a
/// one- or two-segment line is fitted in log-log space.
pub fn path_scaling<T: Real>(traj: &Trajectory<T>, window: Window, smoothing: usize) -> Result<PathFractalResult<T>> {
    if window.len < 100 {
        return Err(Error::InsufficientData(format!(
            "path scaling needs at least 100 steps, window has {}",
            window.len
        )));
    }
    if smoothing == 0 {
        return Err(Error::Argument("smoothing window must be at least 1".into()));
    }
    let frames = window_frames(traj, window)?;
    let d = traj.dim();
    let m = window.len + 1;
    let point = |i: usize| &frames[i * d..(i + 1) * d];
    let mut arc = vec![0.0f64; m];
    for i in 1..m {
        arc[i] = arc[i - 1] + sq_dist(point(i - 1), point(i)).f64().sqrt();
    }
    if arc[m - 1] == 0.0 {
        return Err(Error::Domain("path has zero length".into()));
    }

    let max_span = window.len / 4;
    let pts: Vec<(f64, f64)> = (1..=max_span)
        .into_par_iter()
        .map(|k| {
            let anchors = m - k;
            let stride = anchors.div_ceil(MAX_ANCHORS);
            let (mut s, mut r2, mut c) = (0.0, 0.0, 0usize);
            for t in (0..anchors).step_by(stride) {
                s += arc[t + k] - arc[t];
                r2 += sq_dist(point(t), point(t + k)).f64();
                c += 1;
            }
            (s / c as f64, r2 / c as f64)
        })
        .collect();
    let (span, lx, ly): (Vec<usize>, Vec<f64>, Vec<f64>) = {
        let mut span = Vec::new();
        let mut lx = Vec::new();
        let mut ly = Vec::new();
        for (i, &(s, r2)) in pts.iter().enumerate() {
            if s > 0.0 && r2 > 0.0 {
                span.push(i + 1);
                lx.push(s.log10());
                ly.push(r2.log10());
            }
        }
        (span, lx, ly)
    };
    let (sx, sy) = (moving_average(&lx, smoothing), moving_average(&ly, smoothing));

    // thin to roughly even spacing in log span for the fit
    let keep = log_spaced_lags(max_span, FIT_POINTS_PER_DECADE);
    let mut fx = Vec::new();
    let mut fy = Vec::new();
    let mut j = 0;
    for (i, &k) in span.iter().enumerate() {
        while j < keep.len() && keep[j] < k {
            j += 1;
        }
        if j < keep.len() && keep[j] == k {
            fx.push(sx[i]);
            fy.push(sy[i]);
        }
    }
    if fx.len() < 2 * MIN_SEGMENT {
        return Err(Error::InsufficientData(format!(
            "only {} usable spans for the path fit",
            fx.len()
        )));
    }
    let single = fit_line(&fx, &fy).ok_or_else(|| Error::Degenerate("contour length does not vary".into()))?;
    let mut best = None;
    if single.rmse >= DEFAULT_RMSE_THRESHOLD {
        let n = fx.len();
        let mut best_sse = single.rmse * single.rmse * n as f64;
        for split in MIN_SEGMENT..=n - MIN_SEGMENT {
            let (Some(a), Some(b)) = (fit_line(&fx[..split], &fy[..split]), fit_line(&fx[split..], &fy[split..])) else {
                continue;
            };
            let sse = a.rmse * a.rmse * split as f64 + b.rmse * b.rmse * (n - split) as f64;
            if sse < best_sse {
                best_sse = sse;
                best = Some((split, a, b, (sse / n as f64).sqrt()));
            }
        }
    }
    let (lambda_short, lambda_long, crossover_l, fit_rmse) = match best {
        Some((split, a, b, rmse)) => {
            let l = 10f64.powf(0.5 * (fx[split - 1] + fx[split]));
            (a.slope, b.slope, Some(T::of(l)), rmse)
        }
        None => (single.slope, single.slope, None, single.rmse),
    };
    let series = Series::new(
        sx.iter().map(|v| T::of(10f64.powf(*v))).collect(),
        sy.iter().map(|v| T::of(10f64.powf(*v))).collect(),
    )
    .map_err(|e| Error::Domain(format!("contour length not increasing with span: {e}")))?;
    Ok(PathFractalResult {
        window,
        ds_dr2: series,
        lambda_short: T::of(lambda_short),
        lambda_long: T::of(lambda_long),
        crossover_l,
        d_f_short: T::of(2.0 / lambda_short),
        d_f_long: T::of(2.0 / lambda_long),
        smoothing_window: smoothing,
        fit_rmse: T::of(fit_rmse),
    })
}

/// Contour length `Δs` and end-to-end distance `Δr` between frames `t` and
/// `t + span`.
pub fn contour_and_chord<T: Real>(traj: &Trajectory<T>, t: usize, span: usize) -> Result<(T, T)> {
    let a = traj.frame(t)?;
    let b = traj.frame(t + span)?;
    let frames = traj.frames();
    let d = traj.dim();
    let mut s = 0.0f64;
    for i in t - 1..t - 1 + span {
        s += sq_dist(&frames[i * d..(i + 1) * d], &frames[(i + 1) * d..(i + 2) * d])
            .f64()
            .sqrt();
    }
    Ok((T::of(s), T::of(sq_dist(a, b).f64().sqrt())))
}

/// Centred moving average; the window is truncated at both ends.
fn moving_average(v: &[f64], width: usize) -> Vec<f64> {
    let n = v.len();
    let before = (width - 1) / 2;
    let after = width - 1 - before;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + v[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Largest perpendicular distance of frames `t+1 .. t+span-1` from the
/// infinite line through frames `t` and `t + span`. `None` when the chord has
/// zero length.
pub fn transverse_distance<T: Real>(traj: &Trajectory<T>, t: usize, span: usize) -> Result<Option<T>> {
    if span < 2 {
        return Err(Error::Argument("a chord needs at least three points".into()));
    }
    let a = traj.frame(t)?;
    let b = traj.frame(t + span)?;
    Ok(transverse_in(traj.frames(), traj.dim(), t - 1, span, a, b).map(T::of))
}

fn transverse_in<T: Real>(frames: &[T], d: usize, i0: usize, span: usize, a: &[T], b: &[T]) -> Option<f64> {
    let chord: Vec<f64> = a.iter().zip(b).map(|(x, y)| y.f64() - x.f64()).collect();
    let len2: f64 = chord.iter().map(|c| c * c).sum();
    if len2 == 0.0 {
        return None;
    }
    let mut best = 0.0f64;
    for i in i0 + 1..i0 + span {
        let p = &frames[i * d..(i + 1) * d];
        let mut vv = 0.0;
        let mut vc = 0.0;
        for k in 0..d {
            let v = p[k].f64() - a[k].f64();
            vv += v * v;
            vc += v * chord[k];
        }
        best = best.max((vv - vc * vc / len2).max(0.0));
    }
    Some(best.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransverseProfile<T> {
    /// Bin-averaged chord length (x) against transverse distance (y).
    pub series: Series<T>,
    pub scaling_fit: Option<PowerLawFit<T>>,
    pub self_similar: bool,
    /// Every sampled transverse distance was zero.
    pub degenerate: bool,
    /// Pairs skipped because their chord had zero length.
    pub skipped_pairs: usize,
}

const TRANSVERSE_SPANS_PER_DECADE: usize = 10;
const TRANSVERSE_ANCHORS: usize = 200;
const TRANSVERSE_BINS: usize = 20;

/// Transverse distance against chord length on log-spaced spans, binned in
/// log chord length and fitted with a power law.
pub fn transverse_profile<T: Real>(traj: &Trajectory<T>, window: Window) -> Result<TransverseProfile<T>> {
    let frames = window_frames(traj, window)?;
    let d = traj.dim();
    let spans: Vec<usize> = log_spaced_lags(window.len, TRANSVERSE_SPANS_PER_DECADE)
        .into_iter()
        .filter(|&k| k >= 2)
        .collect();
    if spans.is_empty() {
        return Err(Error::InsufficientData("window too short for chords of three points".into()));
    }
    let samples: Vec<(Vec<(f64, f64)>, usize)> = spans
        .par_iter()
        .map(|&k| {
            let anchors = window.len + 1 - k;
            let stride = anchors.div_ceil(TRANSVERSE_ANCHORS);
            let mut out = Vec::new();
            let mut skipped = 0;
            for t in (0..anchors).step_by(stride) {
                let a = &frames[t * d..(t + 1) * d];
                let b = &frames[(t + k) * d..(t + k + 1) * d];
                match transverse_in(frames, d, t, k, a, b) {
                    Some(h) => out.push((sq_dist(a, b).f64().sqrt(), h)),
                    None => skipped += 1,
                }
            }
            (out, skipped)
        })
        .collect();
    let skipped_pairs = samples.iter().map(|s| s.1).sum();
    let pairs: Vec<(f64, f64)> = samples.into_iter().flat_map(|s| s.0).collect();
    if pairs.is_empty() {
        return Err(Error::Degenerate("every chord has zero length".into()));
    }
    let degenerate = pairs.iter().all(|p| p.1 == 0.0);
    let binned = log_bin(&pairs, TRANSVERSE_BINS, 1);
    let series = Series::new(
        binned.iter().map(|b| T::of(b.0)).collect(),
        binned.iter().map(|b| T::of(b.1)).collect(),
    )?;
    let scaling_fit = if degenerate || binned.iter().any(|b| b.1 <= 0.0) {
        None
    } else {
        fit_power_law(&series, [T::neg_infinity(), T::infinity()]).ok()
    };
    let self_similar = scaling_fit.is_some_and(|f| f.rmse.f64() < DEFAULT_RMSE_THRESHOLD);
    Ok(TransverseProfile {
        series,
        scaling_fit,
        self_similar,
        degenerate,
        skipped_pairs,
    })
}

/// Mean `x` and mean `y` per log-spaced bin of positive `x`; bins with fewer
/// than `min_count` entries are dropped.
fn log_bin(pairs: &[(f64, f64)], bins: usize, min_count: usize) -> Vec<(f64, f64)> {
    let pos: Vec<&(f64, f64)> = pairs.iter().filter(|p| p.0 > 0.0).collect();
    if pos.is_empty() {
        return Vec::new();
    }
    let lo = pos.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).log10();
    let hi = pos.iter().map(|p| p.0).fold(0.0, f64::max).log10();
    let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
    let mut acc = vec![(0.0, 0.0, 0usize); bins];
    for p in pos {
        let b = (((p.0.log10() - lo) / width) as usize).min(bins - 1);
        acc[b].0 += p.0;
        acc[b].1 += p.1;
        acc[b].2 += 1;
    }
    acc.into_iter()
        .filter(|a| a.2 >= min_count.max(1))
        .map(|a| (a.0 / a.2 as f64, a.1 / a.2 as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MslCurve<T> {
    pub window: Window,
    /// Root-mean-square pair distance of each retained bin.
    pub bin_centers: Vec<T>,
    pub msl: Vec<T>,
    pub pair_counts: Vec<usize>,
    /// Power law over bins with positive MSL; exponent is `2H`. `None` when
    /// fewer than five such bins exist (e.g. a constant loss).
    pub hurst_fit: Option<PowerLawFit<T>>,
}

impl<T: Real> MslCurve<T> {
    pub fn hurst(&self) -> Option<T> {
        self.hurst_fit.map(|f| f.exponent / T::of(2.0))
    }
}

/// Distance binning for [`msl`].
#[derive(Debug, Clone, PartialEq)]
pub enum MslBins<T> {
    /// Log-spaced bins spanning the observed positive distances.
    LogSpaced(usize),
    /// Explicit increasing, positive bin edges.
    Edges(Vec<T>),
}

impl<T> Default for MslBins<T> {
    fn default() -> Self {
        MslBins::LogSpaced(DEFAULT_MSL_BINS)
    }
}

/// Mean squared loss difference over unordered frame pairs in the window,
/// binned by weight distance. Windows longer than
/// [`EXHAUSTIVE_PAIR_LIMIT`] steps are subsampled to [`SAMPLED_PAIRS`]
/// pairs drawn with `seed`.
pub fn msl<T: Real>(traj: &Trajectory<T>, window: Window, bins: &MslBins<T>, min_pairs: usize, seed: u64) -> Result<MslCurve<T>> {
    let losses = traj
        .losses()
        .ok_or_else(|| Error::Data("trajectory has no loss channel".into()))?;
    let frames = window_frames(traj, window)?;
    let d = traj.dim();
    let m = window.len + 1;
    let loss = &losses[window.start - 1..window.end()];
    let point = |i: usize| &frames[i * d..(i + 1) * d];
    let pair = |i: usize, j: usize| {
        let dl = loss[i].f64() - loss[j].f64();
        (sq_dist(point(i), point(j)).f64(), dl * dl)
    };

    // (squared distance, squared loss difference)
    let pairs: Vec<(f64, f64)> = if window.len <= EXHAUSTIVE_PAIR_LIMIT {
        (0..m)
            .into_par_iter()
            .flat_map_iter(|i| (i + 1..m).map(move |j| pair(i, j)))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..SAMPLED_PAIRS)
            .map(|_| {
                let i = rng.random_range(0..m);
                let mut j = rng.random_range(0..m - 1);
                if j >= i {
                    j += 1;
                }
                (i, j)
            })
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(i, j)| pair(i, j))
            .collect()
    };

    let edges: Vec<f64> = match bins {
        MslBins::Edges(e) => {
            let e: Vec<f64> = e.iter().map(|v| v.f64()).collect();
            if e.len() < 2 || e[0] <= 0.0 || e.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Argument("bin edges must be positive and strictly increasing".into()));
            }
            e
        }
        MslBins::LogSpaced(k) => {
            if *k == 0 {
                return Err(Error::Argument("need at least one bin".into()));
            }
            let pos = pairs.iter().map(|p| p.0).filter(|&r2| r2 > 0.0);
            let (lo, hi) = pos.fold((f64::INFINITY, 0.0f64), |(a, b), r2| (a.min(r2), b.max(r2)));
            if !lo.is_finite() {
                return Err(Error::InsufficientData("all pairs are at zero distance".into()));
            }
            let (lo, hi) = (0.5 * lo.log10(), 0.5 * hi.log10());
            let mut e: Vec<f64> = (0..=*k).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / *k as f64)).collect();
            // keep the extreme pairs inside despite rounding
            e[0] = e[0].min(10f64.powf(lo)) * (1.0 - 1e-12);
            e[*k] = e[*k].max(10f64.powf(hi)) * (1.0 + 1e-12);
            e
        }
    };
    let nb = edges.len() - 1;
    let sq_edges: Vec<f64> = edges.iter().map(|e| e * e).collect();
    let mut acc = vec![(0.0f64, 0.0f64, 0usize); nb];
    for &(r2, dl2) in &pairs {
        if r2 < sq_edges[0] || r2 > sq_edges[nb] {
            continue;
        }
        let b = sq_edges.partition_point(|&e| e <= r2).saturating_sub(1).min(nb - 1);
        acc[b].0 += r2;
        acc[b].1 += dl2;
        acc[b].2 += 1;
    }
    let kept: Vec<_> = acc.into_iter().filter(|a| a.2 >= min_pairs.max(1)).collect();
    if kept.is_empty() {
        return Err(Error::InsufficientData(format!("no distance bin has {min_pairs} pairs")));
    }
    let bin_centers: Vec<T> = kept.iter().map(|a| T::of((a.0 / a.2 as f64).sqrt())).collect();
    let msl: Vec<T> = kept.iter().map(|a| T::of(a.1 / a.2 as f64)).collect();
    let pair_counts = kept.iter().map(|a| a.2).collect();

    let (fx, fy): (Vec<T>, Vec<T>) = bin_centers
        .iter()
        .zip(&msl)
        .filter(|(_, &v)| v > T::zero())
        .map(|(&x, &y)| (x, y))
        .unzip();
    let hurst_fit = Series::new(fx, fy)
        .ok()
        .and_then(|s| fit_power_law(&s, [T::neg_infinity(), T::infinity()]).ok());
    Ok(MslCurve {
        window,
        bin_centers,
        msl,
        pair_counts,
        hurst_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn walk(d: usize, n: usize, seed: u64) -> Trajectory<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pos = vec![0.0; d];
        let mut frames = pos.clone();
        for _ in 1..n {
            for p in pos.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *p += z;
            }
            frames.extend_from_slice(&pos);
        }
        Trajectory::new(d, frames).unwrap()
    }

    #[test]
    fn straight_line_is_ballistic() {
        let t = Trajectory::new(3, (0..400).flat_map(|i| [i as f64, 2.0 * i as f64, -0.5 * i as f64]).collect()).unwrap();
        let r = path_scaling(&t, Window::new(1, 399).unwrap(), DEFAULT_SMOOTHING).unwrap();
        assert!((r.lambda_long - 2.0).abs() < 1e-9);
        assert!((r.d_f_long - 1.0).abs() < 1e-9);
        assert!(r.crossover_l.is_none());
    }

    #[test]
    fn contour_and_chord_on_a_corner() {
        let t = Trajectory::from_rows(&[[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(contour_and_chord(&t, 1, 2).unwrap(), (7.0, 5.0));
        assert_eq!(contour_and_chord(&t, 2, 1).unwrap(), (4.0, 4.0));
        assert!(contour_and_chord(&t, 2, 2).is_err());
    }

    #[test]
    fn back_and_forth_is_folded() {
        let t = Trajectory::new(1, (0..600).map(|i| (i % 2) as f64).collect()).unwrap();
        let r = path_scaling(&t, Window::new(1, 599).unwrap(), DEFAULT_SMOOTHING).unwrap();
        assert!(r.lambda_long.abs() < 1e-9, "{}", r.lambda_long);
    }

    #[test]
    fn brownian_dimension_two() {
        let t = walk(10, 10_000, 1);
        let r = path_scaling(&t, Window::full(10_000).unwrap(), DEFAULT_SMOOTHING).unwrap();
        assert!((r.d_f_long - 2.0).abs() < 0.3, "{r:?}");
    }

    #[test]
    fn frozen_path_is_domain_error() {
        let t = Trajectory::new(2, vec![1.0; 400]).unwrap();
        assert!(matches!(path_scaling(&t, Window::new(1, 199).unwrap(), 40), Err(Error::Domain(_))));
        assert!(path_scaling(&t, Window::new(1, 50).unwrap(), 40).is_err());
    }

    #[test]
    fn invariant_under_rigid_motion() {
        let t = walk(3, 300, 4);
        // rotation about an arbitrary axis plus a shift
        let (c, s) = (0.6f64, 0.8f64);
        let rot = [[c, -s, 0.0], [s * 0.6, c * 0.6, -0.8], [s * 0.8, c * 0.8, 0.6]];
        let moved: Vec<f64> = t
            .frames()
            .chunks(3)
            .flat_map(|p| {
                (0..3)
                    .map(|i| rot[i][0] * p[0] + rot[i][1] * p[1] + rot[i][2] * p[2] + [5.0, -2.0, 7.5][i])
                    .collect::<Vec<_>>()
            })
            .collect();
        let u = Trajectory::new(3, moved).unwrap();
        let w = Window::new(1, 299).unwrap();
        let (a, b) = (path_scaling(&t, w, 10).unwrap(), path_scaling(&u, w, 10).unwrap());
        for (p, q) in a.ds_dr2.iter().zip(b.ds_dr2.iter()) {
            assert!((p.0 - q.0).abs() < 1e-9 * p.0 && (p.1 - q.1).abs() < 1e-9 * p.1);
        }
    }

    #[test]
    fn transverse_semicircle() {
        let r = 3.0;
        let pts: Vec<f64> = (0..=100)
            .flat_map(|i| {
                let a = std::f64::consts::PI * i as f64 / 100.0;
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        let t = Trajectory::new(2, pts).unwrap();
        let h = transverse_distance(&t, 1, 100).unwrap().unwrap();
        assert!((h - r).abs() < 1e-12);
    }

    #[test]
    fn transverse_straight_line_degenerate() {
        let t = Trajectory::new(2, (0..200).flat_map(|i| [i as f64, 0.5 * i as f64]).collect()).unwrap();
        let p = transverse_profile(&t, Window::full(200).unwrap()).unwrap();
        assert!(p.degenerate && !p.self_similar && p.scaling_fit.is_none());
    }

    #[test]
    fn transverse_grows_for_brownian() {
        let t = walk(2, 10_000, 6);
        let p = transverse_profile(&t, Window::full(10_000).unwrap()).unwrap();
        let fit = p.scaling_fit.unwrap();
        assert!(fit.exponent > 0.5, "{fit:?}");
        let y = p.series.y();
        assert!(y[y.len() - 1] > 10.0 * y[0]);
    }

    #[test]
    fn transverse_zero_chord_skipped() {
        let t = Trajectory::new(1, (0..50).map(|i| (i % 2) as f64).collect()).unwrap();
        assert_eq!(transverse_distance(&t, 1, 2).unwrap(), None);
    }

    #[test]
    fn msl_linear_loss() {
        let xs: Vec<f64> = (0..500).map(|i| ((i * 37) % 500) as f64 / 100.0).collect();
        let t = Trajectory::new(1, xs.clone()).unwrap().with_losses(xs.iter().map(|x| 3.0 * x).collect());
        let c = msl(&t, Window::full(500).unwrap(), &MslBins::default(), DEFAULT_MIN_PAIRS, 0).unwrap();
        for (x, y) in c.bin_centers.iter().zip(&c.msl) {
            assert!((y - 9.0 * x * x).abs() < 1e-9 * y);
        }
        assert!((c.hurst().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn msl_constant_loss() {
        let t = walk(2, 300, 2).with_losses(vec![1.5; 300]);
        let c = msl(&t, Window::full(300).unwrap(), &MslBins::default(), 10, 0).unwrap();
        assert!(c.msl.iter().all(|&v| v == 0.0));
        assert!(c.hurst_fit.is_none());
    }

    #[test]
    fn msl_requires_losses_and_pairs() {
        let t = walk(2, 100, 2);
        let w = Window::full(100).unwrap();
        assert!(matches!(msl(&t, w, &MslBins::default(), 50, 0), Err(Error::Data(_))));
        let t = t.with_losses(vec![0.0; 100]);
        assert!(matches!(msl(&t, w, &MslBins::default(), 100_000, 0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn msl_counts_unordered_pairs() {
        let t = walk(2, 60, 3).with_losses((0..60).map(|i| i as f64).collect());
        let c = msl(&t, Window::full(60).unwrap(), &MslBins::LogSpaced(4), 1, 0).unwrap();
        assert_eq!(c.pair_counts.iter().sum::<usize>(), 60 * 59 / 2);
    }

    #[test]
    fn moving_average_edges() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 3), vec![1.5, 2.0, 3.0, 3.5]);
        assert_eq!(moving_average(&[1.0, 2.0], 1), vec![1.0, 2.0]);
    }
}
