use serde::{Deserialize, Serialize};

use super::p_value;
use crate::error::{Error, Result};
use crate::numeric::{mean, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub dof: f64,
    pub p_value: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// Two-sided Welch test with Welch-Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("each sample needs at least two values"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples contain missing values"));
    }
    let (ma, mb) = (mean(a), mean(b));
    let va = sample_variance(a) / a.len() as f64;
    let vb = sample_variance(b) / b.len() as f64;
    let se2 = va + vb;
    if !(se2 > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    Ok(TTestResult {
        t,
        dof,
        p_value: p_value(t, Some(dof)),
        mean_a: ma,
        mean_b: mb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 4.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        assert!(matches!(welch_t_test(&[0.0; 4], &[1.0; 4]), Err(Error::DegenerateVariance)));
        assert!(matches!(welch_t_test(&[0.0], &[1.0, 2.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn known_values() {
        // a: mean 2, var 1; b: mean 5, var 4 (n = 3 each)
        let r = welch_t_test(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        let se2: f64 = 1.0 / 3.0 + 4.0 / 3.0;
        assert!((r.t + 3.0 / se2.sqrt()).abs() < 1e-12);
        let dof = se2 * se2 / ((1.0f64 / 3.0).powi(2) / 2.0 + (4.0f64 / 3.0).powi(2) / 2.0);
        assert!((r.dof - dof).abs() < 1e-12);
    }

    #[test]
    fn shifted_normals_differ() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..1000).map(|_| 1.0 + rng.sample::<f64, _>(StandardNormal)).collect();
        assert!(welch_t_test(&a, &b).unwrap().p_value < 0.001);
    }
}
