use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::{check_rank, cholesky, cross, from_rows, gram, to_rows};
use super::{chi_square_sf, coefficients, DesignMatrix, FitResult, Method};
use crate::error::{Error, Result};

const EIGEN_TOL: f64 = 1e-10;
const WITHIN_TOL: f64 = 1e-10;

fn demean(values: &[f64], groups: &[usize], sizes: &[usize]) -> Vec<f64> {
    let mut sums = vec![0.0; sizes.len()];
    for (v, &g) in values.iter().zip(groups) {
        sums[g] += v;
    }
    let means: Vec<f64> = sums.iter().zip(sizes).map(|(s, &n)| s / n as f64).collect();
    values.iter().zip(groups).map(|(v, &g)| v - means[g]).collect()
}

/// Within-group (publisher fixed effects) regression with cluster-robust
/// standard errors. Group-level columns are absorbed and reported.
pub fn fit_fixed_effects(design: &DesignMatrix) -> Result<FitResult> {
    let sizes = design.group_sizes();
    let g = sizes.len();
    if g < 2 {
        return Err(Error::TooFewGroups { found: g, needed: 2 });
    }
    let groups = design.groups();
    let (all_names, all_cols) = design.regressors();
    let mut names = Vec::new();
    let mut absorbed = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut constant = Vec::new();
    for (name, col) in all_names.into_iter().zip(all_cols) {
        if design.is_group_level(&name) {
            absorbed.push(name);
        } else {
            let within = demean(col, groups, &sizes);
            let scale = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if within.iter().map(|v| v * v).sum::<f64>().sqrt() <= WITHIN_TOL * scale {
                constant.push(name);
            } else {
                cols.push(within);
                names.push(name);
            }
        }
    }
    if !constant.is_empty() {
        return Err(Error::Collinear(constant));
    }
    let k = names.len();
    let n = design.n_obs();
    if k == 0 {
        return Err(Error::invalid("no article-level predictors"));
    }
    if n <= g + k {
        return Err(Error::invalid(format!("{n} rows cannot identify {k} slopes and {g} group effects")));
    }
    let y = demean(&design.y, groups, &sizes);
    let col_refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    check_rank(&names, &col_refs)?;
    let chol = cholesky(gram(&col_refs), "within X'X")?;
    let beta = chol.solve(&cross(&col_refs, &y));
    let resid: Vec<f64> = (0..n)
        .map(|i| y[i] - col_refs.iter().zip(beta.iter()).map(|(c, b)| c[i] * b).sum::<f64>())
        .collect();
    let rss: f64 = resid.iter().map(|e| e * e).sum();
    let bread = chol.inverse();

    let mut scores = DMatrix::<f64>::zeros(g, k);
    for i in 0..n {
        for j in 0..k {
            scores[(groups[i], j)] += col_refs[j][i] * resid[i];
        }
    }
    let meat = scores.transpose() * &scores;
    let factor = (g as f64 / (g - 1) as f64) * ((n - 1) as f64 / (n - k) as f64);
    let robust = &bread * meat * &bread * factor;
    let sigma2 = rss / (n - g - k) as f64;
    let classical = &bread * sigma2;

    let vcov = to_rows(&robust);
    let df = (g - 1) as f64;
    let beta: Vec<f64> = beta.iter().copied().collect();
    Ok(FitResult {
        method: Method::Fe,
        outcome: design.outcome.clone(),
        coefficients: coefficients(&names, &beta, &vcov, Some(df)),
        vcov,
        vcov_classical: Some(to_rows(&classical)),
        sigma_mu: Vec::new(),
        random_effects: Vec::new(),
        re_correlation: None,
        sigma_eps: sigma2.sqrt(),
        loglik: None,
        n_obs: n,
        n_groups: g,
        df: Some(df),
        absorbed,
        flagged_groups: Vec::new(),
        iterations: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HausmanResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub compared: Vec<String>,
}

/// `H = d' (V_fe - V_re)^+ d` over the coefficients both fits share. The
/// pseudo-inverse keeps only the positive part of the spectrum, so H >= 0
/// and the degrees of freedom are the number of positive eigenvalues. The
/// fixed-effects side uses its homoskedastic covariance when available.
pub fn hausman_test(fe: &FitResult, re: &FitResult) -> Result<HausmanResult> {
    let compared: Vec<String> = fe
        .coefficients
        .iter()
        .filter(|c| re.coefficient(&c.name).is_some())
        .map(|c| c.name.clone())
        .collect();
    if compared.is_empty() {
        return Err(Error::invalid("the two fits share no coefficients"));
    }
    let d = DVector::from_iterator(
        compared.len(),
        compared.iter().map(|n| fe.estimate(n).unwrap() - re.estimate(n).unwrap()),
    );
    let diff = from_rows(&fe.vcov_block(&compared, true)) - from_rows(&re.vcov_block(&compared, false));
    let sym = (&diff + diff.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut statistic = 0.0;
    let mut dof = 0;
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > EIGEN_TOL * scale && lam > 0.0 {
            let proj = eig.eigenvectors.column(j).dot(&d);
            statistic += proj * proj / lam;
            dof += 1;
        }
    }
    Ok(HausmanResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
        compared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mixed::tests::panel;
    use crate::stats::{fit_random_intercept, ols};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dummy_variable_regression() {
        let d = panel(12, 7, 1.0, 8);
        let fe = fit_fixed_effects(&d).unwrap();
        assert_eq!(fe.absorbed, vec!["z".to_string()]);
        let mut dummies = DesignMatrix::new("y", d.y.clone(), &d.groups().iter().map(|g| g.to_string()).collect::<Vec<_>>()).unwrap();
        dummies.add_column("x1", d.column("x1").unwrap().to_vec(), false).unwrap();
        for g in 0..d.n_groups() {
            dummies
                .add_column(format!("d{g}"), d.groups().iter().map(|&x| f64::from(u8::from(x == g))).collect(), false)
                .unwrap();
        }
        let lsdv = ols(&dummies, false).unwrap();
        assert!((fe.estimate("x1").unwrap() - lsdv.estimate("x1").unwrap()).abs() < 1e-8);
        // classical SE agrees with LSDV
        let se = fe.vcov_classical.as_ref().unwrap()[0][0].sqrt();
        assert!((se - lsdv.coefficient("x1").unwrap().std_error).abs() < 1e-8);
    }

    #[test]
    fn group_constant_predictor_is_collinear_unless_flagged() {
        let d = panel(10, 5, 1.0, 2);
        let z = d.column("z").unwrap().to_vec();
        let bad = d.with_column("z_again", z.clone(), false).unwrap();
        assert!(matches!(fit_fixed_effects(&bad), Err(Error::Collinear(n)) if n == vec!["z_again".to_string()]));
        let ok = d.with_column("z_again", z, true).unwrap();
        let (a, b) = (fit_fixed_effects(&d).unwrap(), fit_fixed_effects(&ok).unwrap());
        assert!((a.estimate("x1").unwrap() - b.estimate("x1").unwrap()).abs() < 1e-10);
    }

    #[test]
    fn identical_fits_give_zero_statistic() {
        let d = panel(30, 10, 1.0, 4);
        let re = fit_random_intercept(&d, Method::Reml).unwrap();
        let h = hausman_test(&re, &re).unwrap();
        assert_eq!(h.statistic, 0.0);
        assert_eq!(h.p_value, 1.0);
        let fe = fit_fixed_effects(&d).unwrap();
        let h = hausman_test(&fe, &re).unwrap();
        assert_eq!(h.compared, vec!["x1".to_string()]);
        assert!(h.statistic >= 0.0);
        let o = ols(&DesignMatrix::new("y", vec![1.0, 2.0, 4.0], &["a", "a", "b"]).unwrap(), true).unwrap();
        assert!(matches!(hausman_test(&fe, &o), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn endogenous_intercepts_are_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (mut y, mut x, mut labels) = (vec![], vec![], vec![]);
        for g in 0..100 {
            let mu: f64 = rng.sample(rand_distr::StandardNormal);
            for _ in 0..10 {
                let xi = mu + rng.sample::<f64, _>(rand_distr::StandardNormal);
                y.push(xi + mu + rng.sample::<f64, _>(rand_distr::StandardNormal));
                x.push(xi);
                labels.push(g.to_string());
            }
        }
        let mut d = DesignMatrix::new("y", y, &labels).unwrap();
        d.add_column("x", x, false).unwrap();
        let h = hausman_test(&fit_fixed_effects(&d).unwrap(), &fit_random_intercept(&d, Method::Reml).unwrap()).unwrap();
        assert!(h.p_value < 0.05, "{h:?}");
    }
}
