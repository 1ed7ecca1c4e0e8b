use crate::error::{Error, Result};
use crate::model::{Series, Trajectory, Window};
use crate::scalar::Real;

/// Window length used for the moving variance of the loss.
pub const DEFAULT_VARIANCE_WINDOW: usize = 100;

/// Pools every gradient component of the steps `start .. start + len`, i.e.
/// the gradients that drive the transitions inside the window.
pub fn gradient_pool<T: Real>(traj: &Trajectory<T>, window: Window) -> Result<Vec<T>> {
    let grads = traj
        .gradients()
        .ok_or_else(|| Error::Data("trajectory has no gradient channel".into()))?;
    window.check(traj)?;
    let d = traj.dim();
    Ok(grads[(window.start - 1) * d..(window.end() - 1) * d].to_vec())
}

/// `|L(t + 1) - L(t)|` indexed by `t`.
pub fn change_of_loss<T: Real>(losses: &Series<T>) -> Result<Series<T>> {
    if losses.len() < 2 {
        return Err(Error::InsufficientData("change of loss needs two values".into()));
    }
    let y = losses.y();
    let dy = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    Series::new(losses.x()[..y.len() - 1].to_vec(), dy)
}

/// Unbiased variance over sliding windows of `window` consecutive values,
/// indexed by the window start.
pub fn moving_variance<T: Real>(losses: &Series<T>, window: usize) -> Result<Series<T>> {
    if window < 2 {
        return Err(Error::Argument(format!("variance window {window} < 2")));
    }
    let y = losses.y();
    if y.len() < window {
        return Err(Error::InsufficientData(format!(
            "{} values shorter than variance window {window}",
            y.len()
        )));
    }
    let w = T::of_usize(window);
    let v = y
        .windows(window)
        .map(|s| {
            let m = s.iter().copied().sum::<T>() / w;
            s.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / (w - T::one())
        })
        .collect();
    Series::new(losses.x()[..y.len() - window + 1].to_vec(), v)
}

/// Loss channel of a trajectory as a step-indexed series.
pub fn loss_series<T: Real>(traj: &Trajectory<T>) -> Result<Series<T>> {
    let l = traj
        .losses()
        .ok_or_else(|| Error::Data("trajectory has no loss channel".into()))?;
    Ok(Series::from_steps(l.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn pool_of_constant_gradients() {
        let t = Trajectory::from_rows(&[[0.0, 0.0]; 5])
            .unwrap()
            .with_gradients([1.0, 2.0].repeat(5));
        let pool = gradient_pool(&t, Window::new(1, 3).unwrap()).unwrap();
        assert_eq!(pool, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
    }

    #[test]
    fn full_pool_is_concatenation() {
        let g: Vec<f64> = (0..12).map(|v| v as f64).collect();
        let t = Trajectory::from_rows(&[[0.0, 0.0]; 6]).unwrap().with_gradients(g.clone());
        let pool = gradient_pool(&t, Window::full(6).unwrap()).unwrap();
        let mut cat = Vec::new();
        for s in 1..6 {
            cat.extend_from_slice(t.gradient(s).unwrap().unwrap());
        }
        assert_eq!(pool, cat);
    }

    #[test]
    fn pool_requires_gradients() {
        let t = Trajectory::from_rows(&[[0.0, 0.0]; 5]).unwrap();
        assert!(matches!(gradient_pool(&t, Window::new(1, 3).unwrap()), Err(Error::Data(_))));
    }

    #[test]
    fn alternating_variance() {
        let y: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let v = moving_variance(&Series::from_steps(y), 100).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v.y()[0] - 25.0 / 99.0).abs() < 1e-12);
    }

    #[test]
    fn normal_noise_variance_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y: Vec<f64> = (0..20_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let v = moving_variance(&Series::from_steps(y), DEFAULT_VARIANCE_WINDOW).unwrap();
        let m = v.y().iter().sum::<f64>() / v.len() as f64;
        assert!((m - 1.0).abs() < 0.03, "{m}");
    }

    #[test]
    fn change_of_loss_values() {
        let c = change_of_loss(&Series::from_steps(vec![3.0, 1.0, 1.5, 1.5])).unwrap();
        assert_eq!(c.y(), &[2.0, 0.5, 0.0]);
        assert_eq!(c.x(), &[1.0, 2.0, 3.0]);
    }
}
