use crate::error::{check_dim, Error, Result};

/// `KL(N(m1, diag s1²) ‖ N(m2, diag s2²))`.
pub fn kl_diag_gaussian(mean1: &[f64], std1: &[f64], mean2: &[f64], std2: &[f64]) -> Result<f64> {
    let n = mean1.len();
    check_dim("kl std1", n, std1.len())?;
    check_dim("kl mean2", n, mean2.len())?;
    check_dim("kl std2", n, std2.len())?;
    if std1.iter().chain(std2).any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidArgument("standard deviations must be positive and finite".into()));
    }
    let mut kl = 0.0;
    for i in 0..n {
        let r = std1[i] / std2[i];
        let dm = (mean1[i] - mean2[i]) / std2[i];
        kl += 0.5 * (r * r + dm * dm - 1.0) - r.ln();
    }
    // roundoff can leave tiny negatives for near-identical inputs
    Ok(kl.max(0.0))
}

/// `KL(p ‖ q)` for categorical distributions; `q` must cover the support of `p`.
pub fn kl_categorical(p: &[f64], q: &[f64]) -> Result<f64> {
    check_dim("kl categorical", p.len(), q.len())?;
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Ok(f64::INFINITY);
            }
            kl += pi * (pi / qi).ln();
        }
    }
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identical_is_zero() {
        assert_eq!(kl_diag_gaussian(&[0.3, -1.0], &[0.5, 2.0], &[0.3, -1.0], &[0.5, 2.0]).unwrap(), 0.0);
        assert_eq!(kl_categorical(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
    }

    #[test]
    fn mean_shift_closed_form() {
        let kl = kl_diag_gaussian(&[0.7], &[1.0], &[0.0], &[1.0]).unwrap();
        assert!((kl - 0.49 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_std() {
        assert!(kl_diag_gaussian(&[0.0], &[0.0], &[0.0], &[1.0]).is_err());
        assert!(kl_diag_gaussian(&[0.0], &[1.0], &[0.0], &[-1.0]).is_err());
    }

    #[test]
    fn matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let m1: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m2: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s1: Vec<f64> = (0..2).map(|_| rng.random_range(0.5..1.5)).collect();
            let s2: Vec<f64> = (0..2).map(|_| rng.random_range(0.5..1.5)).collect();
            let exact = kl_diag_gaussian(&m1, &s1, &m2, &s2).unwrap();
            let n = 100_000;
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..n {
                let mut lr = 0.0;
                for i in 0..2 {
                    let x = Normal::new(m1[i], s1[i]).unwrap().sample(&mut rng);
                    let lp = |m: f64, s: f64| -0.5 * ((x - m) / s).powi(2) - s.ln();
                    lr += lp(m1[i], s1[i]) - lp(m2[i], s2[i]);
                }
                sum += lr;
                sq += lr * lr;
            }
            let mean = sum / n as f64;
            let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - exact).abs() <= 3.0 * se, "mc {mean} exact {exact} se {se}");
        }
    }
}
