//! Regression battery: OLS, random-intercept and random-slope mixed models,
//! fixed effects with clustered errors, the Hausman test, three-step
//! mediation and Welch's t-test.

mod design;
mod fe;
mod linalg;
mod mediation;
mod mixed;
mod ols;
mod slopes;
mod ttest;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

pub use design::{
    build_design, fit_specification, BuiltDesign, DesignOptions, Outcome, Spec, CONTROL_COLUMNS, DEGREE_COLUMN, GROUP_COLUMN, INTERCEPT,
    PUBLISHER_COLUMNS,
};
pub use fe::{fit_fixed_effects, hausman_test, HausmanResult};
pub use mediation::{classify, mediation_analysis, Classification, MediationMode, MediationReport, MediationRow};
pub use mixed::{fit_random_intercept, profile_loglik};
pub use ols::ols;
pub use slopes::{fit_random_slopes, SlopeOptions};
pub use ttest::{welch_t_test, TTestResult};

use crate::error::{Error, Result};
use crate::table::{num, Table};

/// Significance level used for mediation classification.
pub const SIGNIFICANCE: f64 = 0.05;

/// Outcome, named predictor columns and a group label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub outcome: String,
    pub y: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    group_level: Vec<bool>,
    groups: Vec<usize>,
    group_names: Vec<String>,
}

impl DesignMatrix {
    /// Groups are numbered in sorted label order.
    pub fn new<S: AsRef<str>>(outcome: impl Into<String>, y: Vec<f64>, groups: &[S]) -> Result<Self> {
        if y.len() != groups.len() {
            return Err(Error::invalid("outcome and group vectors differ in length"));
        }
        if y.is_empty() {
            return Err(Error::invalid("design has no rows"));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("outcome is missing or non-finite at row {}", i + 1)));
        }
        let labels: BTreeMap<&str, usize> = groups.iter().map(|g| (g.as_ref(), 0)).collect();
        let group_names: Vec<String> = labels.keys().map(|s| s.to_string()).collect();
        let lookup: BTreeMap<&str, usize> = labels.keys().enumerate().map(|(i, k)| (*k, i)).collect();
        let groups = groups.iter().map(|g| lookup[g.as_ref()]).collect();
        Ok(Self {
            outcome: outcome.into(),
            y,
            names: Vec::new(),
            columns: Vec::new(),
            group_level: Vec::new(),
            groups,
            group_names,
        })
    }

    /// Adds a predictor. `group_level` marks columns that are constant within
    /// groups by construction (absorbed under fixed effects).
    pub fn add_column(&mut self, name: impl Into<String>, values: Vec<f64>, group_level: bool) -> Result<()> {
        let name = name.into();
        if values.len() != self.y.len() {
            return Err(Error::invalid(format!("column `{name}` has {} rows, expected {}", values.len(), self.y.len())));
        }
        if name == INTERCEPT || self.names.contains(&name) {
            return Err(Error::invalid(format!("duplicate column name `{name}`")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("column `{name}` is missing or non-finite at row {}", i + 1)));
        }
        self.names.push(name);
        self.columns.push(values);
        self.group_level.push(group_level);
        Ok(())
    }

    pub fn with_column(&self, name: impl Into<String>, values: Vec<f64>, group_level: bool) -> Result<Self> {
        let mut d = self.clone();
        d.add_column(name, values, group_level)?;
        Ok(d)
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_groups(&self) -> usize {
        self.group_names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn is_group_level(&self, name: &str) -> bool {
        self.names.iter().position(|n| n == name).is_some_and(|i| self.group_level[i])
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut n = vec![0; self.n_groups()];
        for &g in &self.groups {
            n[g] += 1;
        }
        n
    }

    /// Keeps the given rows; groups left empty disappear.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let labels: Vec<&str> = rows.iter().map(|&r| self.group_names[self.groups[r]].as_str()).collect();
        let mut d = DesignMatrix::new(self.outcome.clone(), rows.iter().map(|&r| self.y[r]).collect(), &labels)?;
        for (i, name) in self.names.iter().enumerate() {
            d.add_column(name.clone(), rows.iter().map(|&r| self.columns[i][r]).collect(), self.group_level[i])?;
        }
        Ok(d)
    }

    /// Same predictors with a different outcome.
    pub fn with_outcome(&self, outcome: impl Into<String>, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.y.len() {
            return Err(Error::invalid("replacement outcome has the wrong length"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("replacement outcome has missing values"));
        }
        let mut d = self.clone();
        d.outcome = outcome.into();
        d.y = y;
        Ok(d)
    }

    pub(crate) fn regressors(&self) -> (Vec<String>, Vec<&[f64]>) {
        (self.names.clone(), self.columns.iter().map(Vec::as_slice).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ols,
    Ml,
    Reml,
    Fe,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ols => "OLS",
            Method::Ml => "ML",
            Method::Reml => "REML",
            Method::Fe => "FE",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ols" => Method::Ols,
            "ml" => Method::Ml,
            "reml" => Method::Reml,
            "fe" => Method::Fe,
            _ => return Err(Error::invalid(format!("unknown method `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub statistic: f64,
    pub p_value: f64,
}

impl Coefficient {
    pub fn stars(&self) -> &'static str {
        stars(self.p_value)
    }

    pub fn significant(&self) -> bool {
        self.p_value < SIGNIFICANCE
    }
}

pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: Method,
    pub outcome: String,
    pub coefficients: Vec<Coefficient>,
    /// Coefficient covariance, in coefficient order.
    pub vcov: Vec<Vec<f64>>,
    /// Homoskedastic covariance when `vcov` is cluster-robust.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vcov_classical: Option<Vec<Vec<f64>>>,
    /// Random-effect SDs: one for a random intercept, intercept then slopes
    /// otherwise. Empty for OLS and FE.
    pub sigma_mu: Vec<f64>,
    pub random_effects: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re_correlation: Option<Vec<Vec<f64>>>,
    pub sigma_eps: f64,
    pub loglik: Option<f64>,
    pub n_obs: usize,
    pub n_groups: usize,
    /// t degrees of freedom for p-values; normal reference when absent.
    pub df: Option<f64>,
    pub absorbed: Vec<String>,
    pub flagged_groups: Vec<String>,
    pub iterations: usize,
}

impl FitResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.coefficient(name).map(|c| c.estimate)
    }

    /// term, estimate, std_error, statistic, p_value, stars.
    pub fn coefficient_table(&self) -> Table {
        let mut t = Table::new(["term", "estimate", "std_error", "statistic", "p_value", "stars"]);
        for c in &self.coefficients {
            t.push(vec![
                c.name.clone(),
                num(c.estimate),
                num(c.std_error),
                num(c.statistic),
                num(c.p_value),
                c.stars().to_string(),
            ])
            .expect("fixed width");
        }
        t
    }

    /// Variance components and fit statistics as name/value pairs.
    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(["quantity", "value"]);
        let mut row = |k: String, v: String| t.push(vec![k, v]).expect("fixed width");
        row("method".into(), self.method.to_string());
        row("outcome".into(), self.outcome.clone());
        row("n_obs".into(), self.n_obs.to_string());
        row("n_groups".into(), self.n_groups.to_string());
        for (name, sd) in self.random_effects.iter().zip(&self.sigma_mu) {
            row(format!("sigma_mu[{name}]"), num(*sd));
        }
        row("sigma_eps".into(), num(self.sigma_eps));
        row("loglik".into(), self.loglik.map_or("NA".into(), num));
        for a in &self.absorbed {
            row("absorbed".into(), a.clone());
        }
        if !self.flagged_groups.is_empty() {
            row("flagged_groups".into(), self.flagged_groups.len().to_string());
        }
        t
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    /// Covariance block for the named coefficients.
    pub(crate) fn vcov_block(&self, names: &[String], classical: bool) -> Vec<Vec<f64>> {
        let v = match (&self.vcov_classical, classical) {
            (Some(c), true) => c,
            _ => &self.vcov,
        };
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.coefficients.iter().position(|c| &c.name == n).expect("known name"))
            .collect();
        idx.iter().map(|&i| idx.iter().map(|&j| v[i][j]).collect()).collect()
    }
}

/// Two-sided p-value under a normal or Student t reference.
pub(crate) fn p_value(stat: f64, df: Option<f64>) -> f64 {
    if !stat.is_finite() {
        return if stat.is_nan() { f64::NAN } else { 0.0 };
    }
    let tail = match df {
        Some(d) if d.is_finite() && d > 0.0 => StudentsT::new(0.0, 1.0, d).expect("valid t").sf(stat.abs()),
        _ => Normal::new(0.0, 1.0).expect("valid normal").sf(stat.abs()),
    };
    (2.0 * tail).min(1.0)
}

pub(crate) fn chi_square_sf(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).expect("positive dof").sf(stat.max(0.0))
}

pub(crate) fn coefficients(names: &[String], beta: &[f64], vcov: &[Vec<f64>], df: Option<f64>) -> Vec<Coefficient> {
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let se = vcov[i][i].max(0.0).sqrt();
            let statistic = beta[i] / se;
            Coefficient {
                name: name.clone(),
                estimate: beta[i],
                std_error: se,
                statistic,
                p_value: p_value(statistic, df),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_validates_shapes() {
        assert!(DesignMatrix::new("y", vec![1.0, 2.0], &["a"]).is_err());
        assert!(DesignMatrix::new("y", vec![1.0, f64::NAN], &["a", "b"]).is_err());
        let mut d = DesignMatrix::new("y", vec![1.0, 2.0, 3.0], &["b", "a", "b"]).unwrap();
        assert_eq!(d.groups(), &[1, 0, 1]);
        assert_eq!(d.group_sizes(), vec![1, 2]);
        d.add_column("x", vec![1.0, 2.0, 3.0], false).unwrap();
        assert!(d.add_column("x", vec![1.0, 2.0, 3.0], false).is_err());
        assert!(d.add_column("z", vec![1.0], false).is_err());
        let s = d.select_rows(&[0, 2]).unwrap();
        assert_eq!(s.n_groups(), 1);
        assert_eq!(s.column("x").unwrap(), &[1.0, 3.0]);
    }

    #[test]
    fn stars_follow_conventional_levels() {
        assert_eq!(stars(0.0005), "***");
        assert_eq!(stars(0.005), "**");
        assert_eq!(stars(0.02), "*");
        assert_eq!(stars(0.2), "");
        assert!((p_value(1.959963984540054, None) - 0.05).abs() < 1e-9);
    }
}
