use std::f64::consts::PI;

use super::linalg::{check_rank, cholesky, cross, gram, to_rows};
use super::{coefficients, DesignMatrix, FitResult, Method};
use crate::error::{Error, Result};

/// Ordinary least squares with classical standard errors and t reference.
pub fn ols(design: &DesignMatrix, intercept: bool) -> Result<FitResult> {
    let ones = vec![1.0; design.n_obs()];
    let (names, mut cols) = design.regressors();
    let names = if intercept {
        cols.insert(0, &ones);
        std::iter::once(super::INTERCEPT.to_string()).chain(names).collect()
    } else {
        names
    };
    let (n, p) = (design.n_obs(), cols.len());
    if p == 0 {
        return Err(Error::invalid("no regressors"));
    }
    if n <= p {
        return Err(Error::invalid(format!("{n} rows cannot identify {p} coefficients")));
    }
    check_rank(&names, &cols)?;
    let chol = cholesky(gram(&cols), "X'X")?;
    let beta = chol.solve(&cross(&cols, &design.y));
    let rss: f64 = (0..n)
        .map(|i| {
            let fit: f64 = cols.iter().zip(beta.iter()).map(|(c, b)| c[i] * b).sum();
            (design.y[i] - fit).powi(2)
        })
        .sum();
    let sigma2 = rss / (n - p) as f64;
    let vcov = to_rows(&(chol.inverse() * sigma2));
    let df = (n - p) as f64;
    let beta: Vec<f64> = beta.iter().copied().collect();
    Ok(FitResult {
        method: Method::Ols,
        outcome: design.outcome.clone(),
        coefficients: coefficients(&names, &beta, &vcov, Some(df)),
        vcov,
        vcov_classical: None,
        sigma_mu: Vec::new(),
        random_effects: Vec::new(),
        re_correlation: None,
        sigma_eps: sigma2.sqrt(),
        loglik: Some(-0.5 * n as f64 * ((2.0 * PI * rss / n as f64).ln() + 1.0)),
        n_obs: n,
        n_groups: design.n_groups(),
        df: Some(df),
        absorbed: Vec::new(),
        flagged_groups: Vec::new(),
        iterations: 0,
    })
}
