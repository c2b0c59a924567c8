//! Small multilevel panels with known parameters, for estimator recovery.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::stats::DesignMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct PanelConfig {
    pub groups: usize,
    pub per_group: usize,
    pub intercept: f64,
    /// Slopes on the row-level predictors `x1, x2, ...`.
    pub beta: Vec<f64>,
    pub sigma_mu: f64,
    pub sigma_eps: f64,
    /// SD of the group deviations of the `x1` slope.
    pub slope_sd: f64,
    /// Loading of every predictor on its group's intercept. Nonzero values
    /// make the random-intercept model inconsistent.
    pub endogeneity: f64,
    /// Coefficient of a group-level covariate `z`, if one is wanted.
    pub group_covariate: Option<f64>,
    /// Remove the group mean of the noise, so the data carry no between-group
    /// variation beyond the fixed part.
    pub centered_noise: bool,
}

impl Default for PanelConfig {
    fn default() -> Self {
        Self {
            groups: 500,
            per_group: 20,
            intercept: 1.0,
            beta: vec![0.5, -0.3],
            sigma_mu: 1.0,
            sigma_eps: 1.0,
            slope_sd: 0.0,
            endogeneity: 0.0,
            group_covariate: None,
            centered_noise: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub design: DesignMatrix,
    /// Planted group intercept deviations.
    pub intercepts: Vec<f64>,
    /// Planted group deviations of the `x1` slope.
    pub slopes: Vec<f64>,
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn regression_panel(config: &PanelConfig, seed: u64) -> Result<Panel> {
    if config.groups < 2 || config.per_group < 2 {
        return Err(Error::invalid("a panel needs at least two groups of two rows"));
    }
    if !(config.sigma_mu >= 0.0 && config.sigma_eps >= 0.0 && config.slope_sd >= 0.0) {
        return Err(Error::invalid("standard deviations must be non-negative"));
    }
    let mut rng = stream_rng(seed, 0);
    let p = config.beta.len();
    let n = config.groups * config.per_group;
    let mut x = vec![Vec::with_capacity(n); p];
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let (mut intercepts, mut slopes) = (Vec::new(), Vec::new());
    for g in 0..config.groups {
        let mu = config.sigma_mu * normal(&mut rng);
        let slope = config.slope_sd * normal(&mut rng);
        let zg = normal(&mut rng);
        intercepts.push(mu);
        slopes.push(slope);
        let mut eps: Vec<f64> = (0..config.per_group).map(|_| config.sigma_eps * normal(&mut rng)).collect();
        if config.centered_noise {
            let m = eps.iter().sum::<f64>() / eps.len() as f64;
            eps.iter_mut().for_each(|e| *e -= m);
        }
        for e in eps {
            let mut yi = config.intercept + mu + e;
            for j in 0..p {
                let xij = normal(&mut rng) + config.endogeneity * mu;
                yi += (config.beta[j] + if j == 0 { slope } else { 0.0 }) * xij;
                x[j].push(xij);
            }
            if let Some(gamma) = config.group_covariate {
                yi += gamma * zg;
            }
            z.push(zg);
            y.push(yi);
            labels.push(format!("g{g:04}"));
        }
    }
    let mut design = DesignMatrix::new("y", y, &labels)?;
    for (j, col) in x.into_iter().enumerate() {
        design.add_column(format!("x{}", j + 1), col, false)?;
    }
    if config.group_covariate.is_some() {
        design.add_column("z", z, true)?;
    }
    Ok(Panel {
        design,
        intercepts,
        slopes,
    })
}

/// Emotion -> mediator -> outcome chain with a publisher intercept on both
/// the mediator and the outcome: `m = a*x + u + e`, `y = direct*x + b*m + v + e'`.
/// The emotion column is called `anxiety`; a nuisance control `ctrl` is added.
pub fn mediation_panel(
    groups: usize,
    per_group: usize,
    a: f64,
    b: f64,
    direct: f64,
    seed: u64,
) -> Result<(DesignMatrix, Vec<f64>)> {
    let mut rng = stream_rng(seed, 1);
    let n = groups * per_group;
    let (mut y, mut x, mut ctrl, mut m, mut labels) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for g in 0..groups {
        let u = 0.5 * normal(&mut rng);
        let v = normal(&mut rng);
        for _ in 0..per_group {
            let xi = normal(&mut rng);
            let ci = normal(&mut rng);
            let mi = a * xi + u + normal(&mut rng);
            y.push(direct * xi + b * mi + 0.2 * ci + v + normal(&mut rng));
            x.push(xi);
            ctrl.push(ci);
            m.push(mi);
            labels.push(format!("g{g:04}"));
        }
    }
    let mut d = DesignMatrix::new("y", y, &labels)?;
    d.add_column("anxiety", x, false)?;
    d.add_column("ctrl", ctrl, false)?;
    Ok((d, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_centering() {
        let cfg = PanelConfig {
            groups: 10,
            per_group: 5,
            group_covariate: Some(0.3),
            centered_noise: true,
            sigma_mu: 0.0,
            beta: vec![],
            ..Default::default()
        };
        let p = regression_panel(&cfg, 3).unwrap();
        assert_eq!(p.design.n_obs(), 50);
        assert!(p.design.is_group_level("z"));
        // y = 1 + 0.3 z + centred noise, so each group's mean is exactly 1 + 0.3 z
        let z = p.design.column("z").unwrap();
        for g in 0..10 {
            let m: f64 = p.design.y[g * 5..g * 5 + 5].iter().sum::<f64>() / 5.0;
            assert!((m - 1.0 - 0.3 * z[g * 5]).abs() < 1e-12);
        }
        let (d, m) = mediation_panel(4, 3, 0.5, 0.5, 0.0, 1).unwrap();
        assert_eq!((d.n_obs(), m.len()), (12, 12));
    }
}
