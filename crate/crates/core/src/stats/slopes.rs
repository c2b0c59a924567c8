use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::linalg::{check_rank, cross, gram, psd_factor, to_rows};
use super::{coefficients, fit_random_intercept, DesignMatrix, FitResult, Method, INTERCEPT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeOptions {
    /// Convergence tolerance on the log-likelihood change.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SlopeOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 2000,
        }
    }
}

struct Group {
    n: f64,
    ztz: DMatrix<f64>,
    ztx: DMatrix<f64>,
    zty: DVector<f64>,
}

#[derive(Clone)]
struct Theta {
    psi: DMatrix<f64>,
    s2: f64,
}

impl Theta {
    fn sub(&self, o: &Theta) -> Theta {
        Theta {
            psi: &self.psi - &o.psi,
            s2: self.s2 - o.s2,
        }
    }

    fn axpy(&self, a: f64, o: &Theta) -> Theta {
        Theta {
            psi: &self.psi + &o.psi * a,
            s2: self.s2 + a * o.s2,
        }
    }

    fn norm(&self) -> f64 {
        (self.psi.norm_squared() + self.s2 * self.s2).sqrt()
    }

    /// Nearest admissible point: PSD covariance, positive residual variance.
    fn project(self) -> Option<Theta> {
        if !(self.s2 > 0.0) || !self.psi.iter().all(|v| v.is_finite()) {
            return None;
        }
        let l = psd_factor(&self.psi);
        Some(Theta {
            psi: &l * l.transpose(),
            s2: self.s2,
        })
    }
}

struct State {
    beta: DVector<f64>,
    vcov: DMatrix<f64>,
    loglik: f64,
    rtr: f64,
    shr: Vec<(DMatrix<f64>, f64)>,
    zr: Vec<DVector<f64>>,
}

struct Model<'a> {
    groups: &'a [Group],
    xtx: &'a DMatrix<f64>,
    xty: &'a DVector<f64>,
    yty: f64,
    n: usize,
}

impl Model<'_> {
    /// GLS fixed effects and the log-likelihood at `theta`.
    fn evaluate(&self, theta: &Theta) -> Result<State> {
        let q = theta.psi.nrows();
        let s2 = theta.s2;
        let l = psd_factor(&theta.psi);
        let shr = shrinkage(self.groups, &l, s2)?;
        let mut a = self.xtx.clone();
        let mut b = self.xty.clone();
        for (g, (m, _)) in self.groups.iter().zip(&shr) {
            let xz_m = g.ztx.transpose() * m;
            a -= &xz_m * &g.ztx;
            b -= &xz_m * &g.zty;
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::NoConvergence("GLS normal equations are singular".into()))?;
        let beta = chol.solve(&b);
        let rtr = self.yty - 2.0 * beta.dot(self.xty) + beta.dot(&(self.xtx * &beta));
        let zr: Vec<DVector<f64>> = self.groups.iter().map(|g| &g.zty - &g.ztx * &beta).collect();
        let mut quad = rtr;
        let mut logdet = 0.0;
        for ((g, (m, ld)), r) in self.groups.iter().zip(&shr).zip(&zr) {
            quad -= r.dot(&(m * r));
            logdet += (g.n - q as f64) * s2.ln() + ld;
        }
        let loglik = -0.5 * (self.n as f64 * (2.0 * PI).ln() + logdet + quad / s2);
        Ok(State {
            beta,
            vcov: chol.inverse() * s2,
            loglik,
            rtr,
            shr,
            zr,
        })
    }

    /// One EM update of the covariance parameters.
    fn em_step(&self, theta: &Theta, state: &State) -> Result<Theta> {
        let q = theta.psi.nrows();
        let mut psi = DMatrix::zeros(q, q);
        let mut resid = state.rtr;
        let mut trace = 0.0;
        for ((g, (m, _)), r) in self.groups.iter().zip(&state.shr).zip(&state.zr) {
            let bg = m * r;
            psi += &bg * bg.transpose() + m * theta.s2;
            resid += -2.0 * bg.dot(r) + bg.dot(&(&g.ztz * &bg));
            trace += (&g.ztz * m).trace();
        }
        let s2 = (resid + theta.s2 * trace) / self.n as f64;
        if !(s2 > 0.0) {
            return Err(Error::DegenerateVariance);
        }
        Ok(Theta {
            psi: psi / self.groups.len() as f64,
            s2,
        })
    }
}

/// Per-group `M = L (s2 I + L'Z'ZL)^-1 L'` with `Psi = L L'`, plus
/// `log|s2 I + L'Z'ZL|`.
fn shrinkage(groups: &[Group], l: &DMatrix<f64>, s2: f64) -> Result<Vec<(DMatrix<f64>, f64)>> {
    let q = l.nrows();
    groups
        .iter()
        .map(|g| {
            let k = DMatrix::identity(q, q) * s2 + l.transpose() * &g.ztz * l;
            let chol = k
                .cholesky()
                .ok_or_else(|| Error::NoConvergence("random-effect system lost positive definiteness".into()))?;
            let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            Ok((l * chol.inverse() * l.transpose(), logdet))
        })
        .collect()
}

/// Random intercept plus random slopes on `slope_columns` with an
/// unstructured covariance, fit by ML through ECME: EM updates for the
/// covariance and residual variance, GLS for the fixed effects.
pub fn fit_random_slopes(design: &DesignMatrix, slope_columns: &[&str], options: &SlopeOptions) -> Result<FitResult> {
    if slope_columns.is_empty() {
        return Err(Error::invalid("no slope columns given"));
    }
    for s in slope_columns {
        if design.column(s).is_none() {
            return Err(Error::invalid(format!("slope column `{s}` is not a predictor")));
        }
    }
    let q = slope_columns.len() + 1;
    let sizes = design.group_sizes();
    let flagged: Vec<String> = sizes
        .iter()
        .enumerate()
        .filter(|(_, &n)| n < 2 + slope_columns.len())
        .map(|(g, _)| design.group_names()[g].clone())
        .collect();
    let usable = sizes.len() - flagged.len();
    if usable < q + 1 {
        return Err(Error::TooFewGroups { found: usable, needed: q + 1 });
    }

    let ones = vec![1.0; design.n_obs()];
    let (names, mut cols) = design.regressors();
    cols.insert(0, &ones);
    let names: Vec<String> = std::iter::once(INTERCEPT.to_string()).chain(names).collect();
    check_rank(&names, &cols)?;
    let zcols: Vec<&[f64]> = std::iter::once(ones.as_slice())
        .chain(slope_columns.iter().map(|s| design.column(s).expect("checked")))
        .collect();
    let (n, p, ng) = (design.n_obs(), cols.len(), sizes.len());

    let mut groups: Vec<Group> = sizes
        .iter()
        .map(|&m| Group {
            n: m as f64,
            ztz: DMatrix::zeros(q, q),
            ztx: DMatrix::zeros(q, p),
            zty: DVector::zeros(q),
        })
        .collect();
    for (i, &g) in design.groups().iter().enumerate() {
        let grp = &mut groups[g];
        for a in 0..q {
            let za = zcols[a][i];
            for b in 0..q {
                grp.ztz[(a, b)] += za * zcols[b][i];
            }
            for b in 0..p {
                grp.ztx[(a, b)] += za * cols[b][i];
            }
            grp.zty[a] += za * design.y[i];
        }
    }
    let xtx = gram(&cols);
    let xty = cross(&cols, &design.y);
    let yty: f64 = design.y.iter().map(|v| v * v).sum();

    // start from the ML random-intercept fit
    let ri = fit_random_intercept(design, Method::Ml)?;
    let s2 = ri.sigma_eps.powi(2);
    let mut psi = DMatrix::zeros(q, q);
    psi[(0, 0)] = ri.sigma_mu[0].powi(2).max(0.05 * s2);
    for (j, col) in zcols.iter().enumerate().skip(1) {
        let var = crate::numeric::population_sd(col).powi(2).max(1e-12);
        psi[(j, j)] = 0.05 * s2 / var;
    }

    let model = Model {
        groups: &groups,
        xtx: &xtx,
        xty: &xty,
        yty,
        n,
    };
    let mut theta = Theta { psi, s2 };
    let mut state = model.evaluate(&theta)?;
    let mut evals = 1;
    // SQUAREM-accelerated EM: two EM steps, a squared extrapolation and a
    // stabilising EM step, falling back to the plain steps if the
    // likelihood would drop
    loop {
        let t1 = model.em_step(&theta, &state)?;
        let s1 = model.evaluate(&t1)?;
        let t2 = model.em_step(&t1, &s1)?;
        let s2_state = model.evaluate(&t2)?;
        evals += 2;
        let (r, v) = (t1.sub(&theta), t2.sub(&t1).sub(&t1.sub(&theta)));
        let (rn, vn) = (r.norm(), v.norm());
        let mut next = (t2.clone(), s2_state);
        if vn > 0.0 && rn > 0.0 {
            let alpha = -(rn / vn).max(1.0);
            let jump = theta.axpy(-2.0 * alpha, &r).axpy(alpha * alpha, &v).project();
            if let Some(jump) = jump {
                if let Ok(sj) = model.evaluate(&jump) {
                    if let Ok(stab) = model.em_step(&jump, &sj) {
                        if let Ok(ss) = model.evaluate(&stab) {
                            evals += 2;
                            if ss.loglik >= next.1.loglik {
                                next = (stab, ss);
                            }
                        }
                    }
                }
            }
        }
        let change = next.1.loglik - state.loglik;
        theta = next.0;
        state = next.1;
        if change.abs() < options.tolerance {
            break;
        }
        if evals >= options.max_iterations {
            return Err(Error::NoConvergence(format!(
                "random-slope EM stopped after {evals} iterations; last log-likelihood change {change:.3e}"
            )));
        }
    }
    // EM creeps toward a zero-variance boundary; the nested random-intercept
    // optimum is an admissible point and wins when it is better
    let mut nested = DMatrix::zeros(q, q);
    nested[(0, 0)] = ri.sigma_mu[0].powi(2);
    let nested = Theta {
        psi: nested,
        s2: ri.sigma_eps.powi(2),
    };
    let nested_state = model.evaluate(&nested)?;
    if nested_state.loglik > state.loglik {
        theta = nested;
        state = nested_state;
    }
    let iterations = evals;
    let psi = theta.psi;
    let s2 = theta.s2;
    let (beta, vcov, loglik) = (state.beta, state.vcov, state.loglik);

    let sd: Vec<f64> = (0..q).map(|j| psi[(j, j)].max(0.0).sqrt()).collect();
    let corr: Vec<Vec<f64>> = (0..q)
        .map(|i| {
            (0..q)
                .map(|j| {
                    if i == j {
                        1.0
                    } else if sd[i] > 0.0 && sd[j] > 0.0 {
                        psi[(i, j)] / (sd[i] * sd[j])
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let vcov = to_rows(&vcov);
    let beta: Vec<f64> = beta.iter().copied().collect();
    Ok(FitResult {
        method: Method::Ml,
        outcome: design.outcome.clone(),
        coefficients: coefficients(&names, &beta, &vcov, None),
        vcov,
        vcov_classical: None,
        sigma_mu: sd,
        random_effects: std::iter::once(INTERCEPT.to_string())
            .chain(slope_columns.iter().map(|s| s.to_string()))
            .collect(),
        re_correlation: Some(corr),
        sigma_eps: s2.sqrt(),
        loglik: Some(loglik),
        n_obs: n,
        n_groups: ng,
        df: None,
        absorbed: Vec::new(),
        flagged_groups: flagged,
        iterations,
    })
}
