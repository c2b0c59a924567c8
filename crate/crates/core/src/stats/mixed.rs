use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::linalg::{check_rank, cross, gram, to_rows};
use super::{coefficients, DesignMatrix, FitResult, Method, INTERCEPT};
use crate::error::{Error, Result};

const LAMBDA_TOL: f64 = 1e-8;
const LAMBDA_MAX: f64 = 1e12;

/// Sufficient statistics for the random-intercept likelihood.
struct RiData {
    names: Vec<String>,
    n: usize,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    /// G x p matrix of per-group column sums.
    s: DMatrix<f64>,
    /// Per-group outcome sums.
    t: Vec<f64>,
    ng: Vec<f64>,
}

struct Profile {
    loglik: f64,
    dloglik: f64,
    beta: DVector<f64>,
    a_inv: DMatrix<f64>,
    q: f64,
}

impl RiData {
    fn new(design: &DesignMatrix) -> Result<Self> {
        let sizes = design.group_sizes();
        if sizes.len() < 2 {
            return Err(Error::TooFewGroups { found: sizes.len(), needed: 2 });
        }
        if sizes.iter().all(|&n| n < 2) {
            return Err(Error::invalid("every group has a single row; the intercept variance is not identified"));
        }
        let ones = vec![1.0; design.n_obs()];
        let (names, mut cols) = design.regressors();
        cols.insert(0, &ones);
        let names: Vec<String> = std::iter::once(INTERCEPT.to_string()).chain(names).collect();
        let (n, p) = (design.n_obs(), cols.len());
        if n <= p {
            return Err(Error::invalid(format!("{n} rows cannot identify {p} coefficients")));
        }
        check_rank(&names, &cols)?;
        let g = sizes.len();
        let mut s = DMatrix::zeros(g, p);
        let mut t = vec![0.0; g];
        for (i, &grp) in design.groups().iter().enumerate() {
            for (j, c) in cols.iter().enumerate() {
                s[(grp, j)] += c[i];
            }
            t[grp] += design.y[i];
        }
        Ok(Self {
            xtx: gram(&cols),
            xty: cross(&cols, &design.y),
            yty: design.y.iter().map(|v| v * v).sum(),
            names,
            n,
            s,
            t,
            ng: sizes.iter().map(|&x| x as f64).collect(),
        })
    }

    fn p(&self) -> usize {
        self.names.len()
    }

    fn profile(&self, lambda: f64, method: Method) -> Result<Profile> {
        let g = self.ng.len();
        let c: Vec<f64> = self.ng.iter().map(|n| lambda / (1.0 + n * lambda)).collect();
        let mut sc = self.s.clone();
        for (i, ci) in c.iter().enumerate() {
            sc.row_mut(i).scale_mut(*ci);
        }
        let a = &self.xtx - self.s.transpose() * &sc;
        let b = &self.xty - sc.transpose() * DVector::from_column_slice(&self.t);
        let yhy = self.yty - c.iter().zip(&self.t).map(|(ci, ti)| ci * ti * ti).sum::<f64>();
        let chol = a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NoConvergence(format!("X'V^-1X lost positive definiteness at lambda = {lambda}")))?;
        let beta = chol.solve(&b);
        let q = yhy - b.dot(&beta);
        if !(q > 0.0) {
            return Err(Error::DegenerateVariance);
        }
        let resid_sums = DVector::from_column_slice(&self.t) - &self.s * &beta;
        let shrink: Vec<f64> = self.ng.iter().map(|n| 1.0 / (1.0 + n * lambda)).collect();
        let dq = -(0..g).map(|i| (resid_sums[i] * shrink[i]).powi(2)).sum::<f64>();
        let logdet_v: f64 = self.ng.iter().map(|n| (n * lambda).ln_1p()).sum();
        let dlogdet_v: f64 = self.ng.iter().zip(&shrink).map(|(n, s)| n * s).sum();
        let n = self.n as f64;
        let (loglik, dloglik) = match method {
            Method::Ml => (
                -0.5 * (n * (2.0 * PI * q / n).ln() + n + logdet_v),
                -0.5 * (n * dq / q + dlogdet_v),
            ),
            Method::Reml => {
                let m = n - self.p() as f64;
                let l = chol.l();
                let logdet_a = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
                // s_g' A^-1 s_g via the triangular solve L W = S'
                let w = chol.l().solve_lower_triangular(&self.s.transpose()).expect("nonsingular factor");
                let dlogdet_a = -(0..g).map(|i| w.column(i).norm_squared() * shrink[i] * shrink[i]).sum::<f64>();
                (
                    -0.5 * (m * (2.0 * PI * q / m).ln() + m + logdet_v + logdet_a),
                    -0.5 * (m * dq / q + dlogdet_v + dlogdet_a),
                )
            }
            _ => return Err(Error::invalid("mixed models are fit by ML or REML")),
        };
        Ok(Profile {
            loglik,
            dloglik,
            beta,
            a_inv: chol.inverse(),
            q,
        })
    }
}

/// Profiled log-likelihood and its derivative at variance ratio `lambda`.
pub fn profile_loglik(design: &DesignMatrix, method: Method, lambda: f64) -> Result<(f64, f64)> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid("variance ratio must be non-negative"));
    }
    let p = RiData::new(design)?.profile(lambda, method)?;
    Ok((p.loglik, p.dloglik))
}

/// Gaussian random-intercept model. The variance ratio is found by
/// bracketing and bisecting the root of the profiled score, with a boundary
/// solution at zero when the score is non-positive there.
pub fn fit_random_intercept(design: &DesignMatrix, method: Method) -> Result<FitResult> {
    let data = RiData::new(design)?;
    let mut trace = Vec::new();
    let at0 = data.profile(0.0, method)?;
    let (lambda, iterations) = if at0.dloglik <= 0.0 {
        (0.0, 0)
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut iters = 0;
        loop {
            let d = data.profile(hi, method)?.dloglik;
            trace.push((hi, d));
            iters += 1;
            if d <= 0.0 {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > LAMBDA_MAX {
                return Err(Error::NoConvergence(format!(
                    "variance ratio did not bracket; last (lambda, score) = {:?}",
                    &trace[trace.len().saturating_sub(3)..]
                )));
            }
        }
        while hi - lo > LAMBDA_TOL * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            let d = data.profile(mid, method)?.dloglik;
            iters += 1;
            if d > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi), iters)
    };
    let fit = data.profile(lambda, method)?;
    let dof = match method {
        Method::Reml => (data.n - data.p()) as f64,
        _ => data.n as f64,
    };
    let sigma2 = fit.q / dof;
    let vcov = to_rows(&(fit.a_inv * sigma2));
    let beta: Vec<f64> = fit.beta.iter().copied().collect();
    Ok(FitResult {
        method,
        outcome: design.outcome.clone(),
        coefficients: coefficients(&data.names, &beta, &vcov, None),
        vcov,
        vcov_classical: None,
        sigma_mu: vec![(lambda * sigma2).sqrt()],
        random_effects: vec![INTERCEPT.to_string()],
        re_correlation: None,
        sigma_eps: sigma2.sqrt(),
        loglik: Some(fit.loglik),
        n_obs: data.n,
        n_groups: data.ng.len(),
        df: None,
        absorbed: Vec::new(),
        flagged_groups: Vec::new(),
        iterations,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::stats::ols;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Two predictors, one of them group-level, with a random intercept.
    pub(crate) fn panel(groups: usize, per: usize, sigma_mu: f64, seed: u64) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut y, mut x1, mut x2, mut labels) = (vec![], vec![], vec![], vec![]);
        for g in 0..groups {
            let mu: f64 = sigma_mu * rng.sample::<f64, _>(StandardNormal);
            let zg: f64 = rng.sample(StandardNormal);
            for _ in 0..per {
                let a: f64 = rng.sample(StandardNormal);
                let e: f64 = rng.sample(StandardNormal);
                y.push(1.0 + 0.5 * a - 0.3 * zg + mu + e);
                x1.push(a);
                x2.push(zg);
                labels.push(format!("g{g:04}"));
            }
        }
        let mut d = DesignMatrix::new("y", y, &labels).unwrap();
        d.add_column("x1", x1, false).unwrap();
        d.add_column("z", x2, true).unwrap();
        d
    }

    #[test]
    fn recovers_planted_components() {
        let d = panel(200, 20, 1.0, 3);
        let f = fit_random_intercept(&d, Method::Reml).unwrap();
        for (name, truth) in [("(Intercept)", 1.0), ("x1", 0.5), ("z", -0.3)] {
            let c = f.coefficient(name).unwrap();
            assert!((c.estimate - truth).abs() < 3.0 * c.std_error, "{name}: {c:?}");
        }
        assert!((f.sigma_mu[0] - 1.0).abs() < 0.15);
        assert!((f.sigma_eps - 1.0).abs() < 0.05);
    }

    #[test]
    fn score_matches_finite_differences() {
        let d = panel(30, 6, 0.7, 5);
        for method in [Method::Ml, Method::Reml] {
            for &lam in &[0.05, 0.4, 2.0] {
                let h = 1e-6 * lam;
                let (_, analytic) = profile_loglik(&d, method, lam).unwrap();
                let up = profile_loglik(&d, method, lam + h).unwrap().0;
                let down = profile_loglik(&d, method, lam - h).unwrap().0;
                let numeric = (up - down) / (2.0 * h);
                assert!((analytic - numeric).abs() <= 1e-4 * (1.0 + numeric.abs()), "{method} {lam}: {analytic} vs {numeric}");
            }
        }
    }

    #[test]
    fn optimum_beats_neighbours() {
        let d = panel(40, 8, 0.8, 9);
        let f = fit_random_intercept(&d, Method::Ml).unwrap();
        let lam = (f.sigma_mu[0] / f.sigma_eps).powi(2);
        let best = f.loglik.unwrap();
        assert!(best >= profile_loglik(&d, Method::Ml, 0.0).unwrap().0);
        assert!(best >= profile_loglik(&d, Method::Ml, 10.0 * lam).unwrap().0);
    }

    #[test]
    fn no_group_signal_collapses_to_ols() {
        // residual noise has zero mean within every group
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut y, mut x, mut labels) = (vec![], vec![], vec![]);
        for g in 0..50 {
            let e: Vec<f64> = (0..10).map(|_| rng.sample(StandardNormal)).collect();
            let m = e.iter().sum::<f64>() / 10.0;
            for ei in e {
                let xi: f64 = rng.sample(StandardNormal);
                y.push(2.0 - xi + (ei - m));
                x.push(xi);
                labels.push(g.to_string());
            }
        }
        let mut d = DesignMatrix::new("y", y, &labels).unwrap();
        d.add_column("x", x, false).unwrap();
        let re = fit_random_intercept(&d, Method::Reml).unwrap();
        let o = ols(&d, true).unwrap();
        assert_eq!(re.sigma_mu[0], 0.0);
        for (a, b) in re.coefficients.iter().zip(&o.coefficients) {
            assert!((a.estimate - b.estimate).abs() <= 1e-6 * b.estimate.abs());
        }
    }

    #[test]
    fn preconditions() {
        let d = DesignMatrix::new("y", vec![1.0, 2.0, 3.0], &["a", "a", "a"]).unwrap();
        assert!(matches!(fit_random_intercept(&d, Method::Reml), Err(Error::TooFewGroups { .. })));
        let mut d = panel(5, 4, 1.0, 1);
        d.add_column("x1_dup", d.column("x1").unwrap().to_vec(), false).unwrap();
        assert!(matches!(fit_random_intercept(&d, Method::Reml), Err(Error::Collinear(_))));
    }
}
