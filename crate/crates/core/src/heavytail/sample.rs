use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::stable::StableParams;
use crate::error::Result;
use crate::scalar::Real;

/// Draws `n` variates with the Chambers–Mallows–Stuck construction.
pub fn sample_stable<T: Real>(params: StableParams<T>, n: usize, seed: u64) -> Result<Vec<T>> {
    params.check()?;
    let p = params.to_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| T::of(draw(&p, &mut rng))).collect())
}

pub(crate) fn draw<R: Rng>(p: &StableParams<f64>, rng: &mut R) -> f64 {
    let (a, b) = (p.alpha, p.beta);
    let v = PI * (rng.random::<f64>() - 0.5);
    let w = -(1.0 - rng.random::<f64>()).ln();
    if a == 1.0 {
        let s = FRAC_PI_2 + b * v;
        let x = (s * v.tan() - b * (FRAC_PI_2 * w * v.cos() / s).ln()) / FRAC_PI_2;
        return p.gamma * x + (2.0 / PI) * b * p.gamma * p.gamma.ln() + p.delta;
    }
    let x = if b == 0.0 {
        (a * v).sin() / v.cos().powf(1.0 / a) * ((v - a * v).cos() / w).powf((1.0 - a) / a)
    } else {
        let t = b * (PI * a / 2.0).tan();
        let shift = t.atan() / a;
        let scale = (1.0 + t * t).powf(1.0 / (2.0 * a));
        scale * (a * (v + shift)).sin() / v.cos().powf(1.0 / a)
            * ((v - a * (v + shift)).cos() / w).powf((1.0 - a) / a)
    };
    p.gamma * x + p.delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{quantile_sorted, sorted, variance};

    #[test]
    fn gaussian_variance() {
        let p = StableParams::symmetric(2.0, 1.0, 0.0).unwrap();
        let xs = sample_stable(p, 200_000, 3).unwrap();
        let v = variance(&xs);
        assert!((v - 2.0).abs() / 2.0 < 0.02, "{v}");
    }

    #[test]
    fn cauchy_quartiles() {
        let p = StableParams::symmetric(1.0, 1.0, 0.0).unwrap();
        let xs = sorted(&sample_stable(p, 100_000, 4).unwrap());
        let med = quantile_sorted(&xs, 0.5);
        let iqr = quantile_sorted(&xs, 0.75) - quantile_sorted(&xs, 0.25);
        assert!(med.abs() < 0.05, "{med}");
        assert!((iqr - 2.0).abs() < 0.05, "{iqr}");
    }

    #[test]
    fn deterministic() {
        let p = StableParams::symmetric(1.3f32, 0.5, 1.0).unwrap();
        assert_eq!(sample_stable(p, 64, 9).unwrap(), sample_stable(p, 64, 9).unwrap());
    }

    #[test]
    fn skewed_tail_is_heavier_on_positive_side() {
        let p = StableParams::new(1.5, 1.0, 1.0, 0.0).unwrap();
        let xs = sample_stable(p, 50_000, 5).unwrap();
        let right = xs.iter().filter(|&&x| x > 10.0).count();
        let left = xs.iter().filter(|&&x| x < -10.0).count();
        assert!(right > 10 * left.max(1));
    }
}
