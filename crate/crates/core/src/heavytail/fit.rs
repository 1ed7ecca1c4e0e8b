use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::stable::{StableParams, StandardDensity};
use crate::error::{Error, Result};
use crate::optimize::NelderMead;
use crate::scalar::Real;
use crate::stats::{mean, quantile_sorted, sorted};

/// Lower end of the alpha search range.
pub const ALPHA_MIN: f64 = 0.5;
/// Fits on fewer samples carry a warning about wide intervals.
pub const MIN_RELIABLE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableFit<T> {
    pub params: StableParams<T>,
    /// 95% interval for alpha from the observed information.
    pub ci_alpha: [T; 2],
    pub loglik_stable: T,
    pub loglik_gauss: T,
    /// `loglik_stable - loglik_gauss`.
    pub llr: T,
    pub vuong_stat: T,
    /// Two-sided normal tail probability of `vuong_stat`.
    pub vuong_p: T,
    pub n: usize,
    pub gauss_mean: T,
    pub gauss_sd: T,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Vuong comparison of two models from their pointwise log-likelihoods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vuong {
    pub llr: f64,
    pub stat: f64,
    pub p: f64,
}

/// Positive statistic favours `a`. Identical columns give `stat = 0`, `p = 1`.
pub fn vuong_test(ll_a: &[f64], ll_b: &[f64]) -> Result<Vuong> {
    if ll_a.len() != ll_b.len() || ll_a.len() < 2 {
        return Err(Error::Argument(format!(
            "vuong test needs two equal columns of at least 2 values, got {} and {}",
            ll_a.len(),
            ll_b.len()
        )));
    }
    let d: Vec<f64> = ll_a.iter().zip(ll_b).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let llr: f64 = d.iter().sum();
    let m = llr / n;
    let s = (d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt();
    let scale = llr.abs().max(1.0) * 1e-12;
    if s * n.sqrt() <= scale {
        return Ok(Vuong { llr, stat: 0.0, p: 1.0 });
    }
    let stat = llr / (n.sqrt() * s);
    Ok(Vuong {
        llr,
        stat,
        p: erfc(stat.abs() / std::f64::consts::SQRT_2),
    })
}

/// `(x95 - x05) / (x75 - x25)` of the standard symmetric law on an alpha grid.
fn quantile_ratio_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=30)
            .map(|k| {
                let a = ALPHA_MIN + k as f64 * (2.0 - ALPHA_MIN) / 30.0;
                let d = StandardDensity::new(a, 0.0).expect("valid alpha");
                let (q75, q95) = (d.symmetric_quantile(0.75), d.symmetric_quantile(0.95));
                (a, q95 / q75)
            })
            .collect()
    })
}

/// Quantile-based starting point: alpha from the tail/body spread ratio,
/// scale from the interquartile range, shift from the median.
fn quantile_start(sorted: &[f64]) -> (f64, f64, f64) {
    let q = |p| quantile_sorted(sorted, p);
    let iqr = q(0.75) - q(0.25);
    let nu = (q(0.95) - q(0.05)) / iqr;
    let table = quantile_ratio_table();
    // ratio decreases with alpha
    let alpha = if nu >= table[0].1 {
        table[0].0
    } else if nu <= table[table.len() - 1].1 {
        2.0
    } else {
        let i = table.windows(2).position(|w| nu <= w[0].1 && nu >= w[1].1).unwrap_or(0);
        let (a0, r0) = table[i];
        let (a1, r1) = table[i + 1];
        a0 + (nu - r0) / (r1 - r0) * (a1 - a0)
    };
    let alpha = alpha.clamp(ALPHA_MIN + 0.01, 1.99);
    let q75 = StandardDensity::new(alpha, 0.0)
        .expect("valid alpha")
        .symmetric_quantile(0.75);
    (alpha, iqr / (2.0 * q75), q(0.5))
}

fn neg_loglik(xs: &[f64], alpha: f64, gamma: f64, delta: f64) -> f64 {
    if !(ALPHA_MIN..=2.0).contains(&alpha) || !(gamma > 0.0) || !gamma.is_finite() {
        return f64::INFINITY;
    }
    let d = match StandardDensity::new(alpha, 0.0) {
        Ok(d) => d,
        Err(_) => return f64::INFINITY,
    };
    let lg = gamma.ln();
    -xs.iter().map(|&x| d.log_pdf((x - delta) / gamma) - lg).sum::<f64>()
}

/// Maximum-likelihood fit of a symmetric (`beta = 0`) stable law, compared
/// against the maximum-likelihood Gaussian with a Vuong test.
pub fn fit_stable_symmetric<T: Real>(samples: &[T]) -> Result<StableFit<T>> {
    let xs: Vec<f64> = samples.iter().map(|v| v.f64()).collect();
    if let Some(i) = xs.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite sample at index {i}")));
    }
    if xs.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "stable fit needs at least 10 samples, got {}",
            xs.len()
        )));
    }
    let s = sorted(&xs);
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    if !(iqr > 0.0) {
        return Err(Error::Degenerate(
            "samples have zero interquartile range".into(),
        ));
    }

    let (a0, g0, d0) = quantile_start(&s);
    let objective = |p: &[f64]| neg_loglik(&xs, p[0], p[1].exp(), p[2]);
    let nm = NelderMead {
        max_iter: 600,
        f_tol: 1e-7,
        x_tol: 1e-6,
    };
    let mut best = nm.minimize(objective, &[a0, g0.ln(), d0], &[0.1, 0.1, 0.1 * g0]);
    // restart from the optimum with a fresh simplex
    let step = [0.02, 0.02, 0.02 * best.x[1].exp()];
    let again = nm.minimize(objective, &best.x.clone(), &step);
    if again.value <= best.value {
        best = again;
    }
    if !best.value.is_finite() {
        return Err(Error::Fit(format!(
            "stable likelihood is not finite at the optimum (start alpha {a0:.3}, gamma {g0:.3e})"
        )));
    }
    let (alpha, gamma, delta) = (best.x[0], best.x[1].exp(), best.x[2]);
    let mut warnings = Vec::new();
    if !best.converged {
        warnings.push(format!(
            "optimiser stopped after {} iterations without meeting tolerance",
            best.iterations
        ));
    }
    if xs.len() < MIN_RELIABLE_SAMPLES {
        warnings.push(format!(
            "only {} samples; alpha interval is wide",
            xs.len()
        ));
    }
    let ci_alpha = match alpha_std_error(&xs, alpha, gamma, delta) {
        Some(se) => [(alpha - 1.96 * se).max(ALPHA_MIN.min(alpha)), (alpha + 1.96 * se).min(2.0)],
        None => {
            warnings.push("observed information not positive definite; alpha interval collapsed".into());
            [alpha, alpha]
        }
    };

    let d = StandardDensity::new(alpha, 0.0)?;
    let ll_stable: Vec<f64> = xs
        .iter()
        .map(|&x| d.log_pdf((x - delta) / gamma) - gamma.ln())
        .collect();
    let mu = mean(&xs);
    let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / xs.len() as f64;
    let ll_gauss: Vec<f64> = xs
        .iter()
        .map(|&x| -0.5 * (2.0 * PI * var).ln() - (x - mu) * (x - mu) / (2.0 * var))
        .collect();
    let v = vuong_test(&ll_stable, &ll_gauss)?;

    Ok(StableFit {
        params: StableParams::symmetric(T::of(alpha), T::of(gamma), T::of(delta))?,
        ci_alpha: [T::of(ci_alpha[0]), T::of(ci_alpha[1])],
        loglik_stable: T::of(ll_stable.iter().sum()),
        loglik_gauss: T::of(ll_gauss.iter().sum()),
        llr: T::of(v.llr),
        vuong_stat: T::of(v.stat),
        vuong_p: T::of(v.p),
        n: xs.len(),
        gauss_mean: T::of(mu),
        gauss_sd: T::of(var.sqrt()),
        warnings,
    })
}

/// Standard error of alpha from the inverse of the numerical Hessian of the
/// negative log-likelihood in `(alpha, gamma, delta)`.
fn alpha_std_error(xs: &[f64], alpha: f64, gamma: f64, delta: f64) -> Option<f64> {
    let ha = 2e-3;
    // keep the stencil inside the admissible range
    let ca = alpha.clamp(ALPHA_MIN + ha, 2.0 - ha);
    let c = [ca, gamma, delta];
    let h = [ha, 2e-3 * gamma, 2e-3 * gamma];
    let f = |p: [f64; 3]| neg_loglik(xs, p[0], p[1], p[2]);
    let f0 = f(c);
    let mut hess = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = if i == j {
                let mut p = c;
                p[i] += h[i];
                let fp = f(p);
                p[i] -= 2.0 * h[i];
                let fm = f(p);
                (fp - 2.0 * f0 + fm) / (h[i] * h[i])
            } else {
                let at = |si: f64, sj: f64| {
                    let mut p = c;
                    p[i] += si * h[i];
                    p[j] += sj * h[j];
                    f(p)
                };
                (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h[i] * h[j])
            };
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    let inv = invert3(hess)?;
    (inv[0][0] > 0.0 && inv[0][0].is_finite()).then(|| inv[0][0].sqrt())
}

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if !det.is_finite() || det == 0.0 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            *v = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heavytail::sample_stable;

    #[test]
    fn recovers_alpha() {
        let truth = StableParams::symmetric(1.5f64, 2.0, 0.5).unwrap();
        let xs = sample_stable(truth, 20_000, 11).unwrap();
        let fit = fit_stable_symmetric(&xs).unwrap();
        assert!((fit.params.alpha - 1.5).abs() < 0.05, "{:?}", fit.params);
        assert!((fit.params.gamma / 2.0 - 1.0).abs() < 0.05);
        assert!(fit.ci_alpha[0] < fit.params.alpha && fit.params.alpha < fit.ci_alpha[1]);
        assert!(fit.llr > 0.0 && fit.vuong_p < 1e-3);
    }

    #[test]
    fn shift_and_scale_equivariance() {
        let truth = StableParams::symmetric(1.3, 1.0, 0.0).unwrap();
        let xs = sample_stable(truth, 5_000, 12).unwrap();
        let a = fit_stable_symmetric(&xs).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| -3.0 * x + 5.0).collect();
        let b = fit_stable_symmetric(&ys).unwrap();
        assert!((b.params.alpha - a.params.alpha).abs() < 0.5 * (a.ci_alpha[1] - a.ci_alpha[0]));
        assert!((b.params.gamma / (3.0 * a.params.gamma) - 1.0).abs() < 0.01);
        assert!((b.params.delta - (-3.0 * a.params.delta + 5.0)).abs() < 0.03 * a.params.gamma * 3.0);
    }

    #[test]
    fn vuong_is_antisymmetric() {
        let a = [-1.0, -2.0, -0.5, -3.0, -1.2];
        let b = [-1.1, -1.7, -0.9, -2.0, -1.0];
        let ab = vuong_test(&a, &b).unwrap();
        let ba = vuong_test(&b, &a).unwrap();
        assert!((ab.stat + ba.stat).abs() < 1e-12);
        assert!((ab.llr + ba.llr).abs() < 1e-12);
        assert!((ab.p - ba.p).abs() < 1e-12);
        let same = vuong_test(&a, &a).unwrap();
        assert_eq!((same.stat, same.p), (0.0, 1.0));
    }

    #[test]
    fn degenerate_pool_rejected() {
        assert!(matches!(fit_stable_symmetric(&[0.0f64; 200]), Err(Error::Degenerate(_))));
        assert!(matches!(fit_stable_symmetric(&[1.0, f64::NAN, 2.0]), Err(Error::Data(_))));
    }

    #[test]
    fn small_sample_warns() {
        let xs = sample_stable(StableParams::symmetric(1.5, 1.0, 0.0).unwrap(), 300, 1).unwrap();
        let fit = fit_stable_symmetric(&xs).unwrap();
        assert!(fit.warnings.iter().any(|w| w.contains("300 samples")));
    }

    #[test]
    fn quantile_ratio_matches_gaussian_reference() {
        let t = quantile_ratio_table();
        // 2 * 1.6449 / (2 * 0.6745)
        assert!((t[t.len() - 1].1 - 2.4387).abs() < 1e-3);
        assert!(t.windows(2).all(|w| w[0].1 > w[1].1));
    }
}
