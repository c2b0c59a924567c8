use serde::{Deserialize, Serialize};

use super::{fit_random_intercept, ols, DesignMatrix, FitResult, Method};
use crate::error::{Error, Result};
use crate::table::{num, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MediationMode {
    /// Random-intercept fits (REML) for all three steps.
    Mixed,
    /// OLS fits; the total = direct + a*b identity holds exactly.
    Ols,
}

impl std::str::FromStr for MediationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mixed" => Ok(MediationMode::Mixed),
            "ols" => Ok(MediationMode::Ols),
            other => Err(Error::invalid(format!("expected `mixed` or `ols`, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    None,
    Partial,
    Complete,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::None => "none",
            Classification::Partial => "partial",
            Classification::Complete => "complete",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationRow {
    pub emotion: String,
    pub path_a: f64,
    pub path_a_p: f64,
    /// Emotion coefficient without the mediator.
    pub total: f64,
    pub total_p: f64,
    /// Emotion coefficient with the mediator.
    pub direct: f64,
    pub direct_p: f64,
    pub mediator_coef: f64,
    pub mediator_p: f64,
    pub classification: Classification,
    /// total - (direct + a*b), relative to |total|.
    pub identity_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationReport {
    pub mediator: String,
    pub outcome: String,
    pub mode: MediationMode,
    pub dropped_rows: usize,
    pub rows: Vec<MediationRow>,
}

impl MediationReport {
    pub fn row(&self, emotion: &str) -> Option<&MediationRow> {
        self.rows.iter().find(|r| r.emotion == emotion)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new([
            "mediator",
            "outcome",
            "emotion",
            "path_a",
            "path_a_p",
            "total",
            "total_p",
            "direct",
            "direct_p",
            "mediator_coef",
            "mediator_p",
            "classification",
            "identity_gap",
        ]);
        for r in &self.rows {
            t.push(vec![
                self.mediator.clone(),
                self.outcome.clone(),
                r.emotion.clone(),
                num(r.path_a),
                num(r.path_a_p),
                num(r.total),
                num(r.total_p),
                num(r.direct),
                num(r.direct_p),
                num(r.mediator_coef),
                num(r.mediator_p),
                r.classification.to_string(),
                num(r.identity_gap),
            ])
            .expect("fixed width");
        }
        t
    }
}

/// Complete when the emotion loses significance once the mediator enters,
/// partial when it stays significant but shrinks; both require a
/// significant path from emotion to mediator and a significant total effect.
pub fn classify(a_sig: bool, total_sig: bool, direct_sig: bool, total: f64, direct: f64) -> Classification {
    if !(a_sig && total_sig) {
        Classification::None
    } else if !direct_sig {
        Classification::Complete
    } else if direct.abs() < total.abs() {
        Classification::Partial
    } else {
        Classification::None
    }
}

/// Three-step mediation of each emotion's effect on the design's outcome.
/// Rows with a missing (NaN) mediator are dropped from all three steps.
pub fn mediation_analysis(
    design: &DesignMatrix,
    mediator_name: &str,
    mediator: &[f64],
    emotions: &[&str],
    mode: MediationMode,
) -> Result<MediationReport> {
    if mediator.len() != design.n_obs() {
        return Err(Error::invalid("mediator length differs from the design"));
    }
    for e in emotions {
        if design.column(e).is_none() {
            return Err(Error::invalid(format!("emotion column `{e}` is not a predictor")));
        }
    }
    let keep: Vec<usize> = (0..mediator.len()).filter(|&i| mediator[i].is_finite()).collect();
    let dropped_rows = mediator.len() - keep.len();
    let base = if dropped_rows == 0 { design.clone() } else { design.select_rows(&keep)? };
    let m: Vec<f64> = keep.iter().map(|&i| mediator[i]).collect();

    let fit = |d: &DesignMatrix| -> Result<FitResult> {
        match mode {
            MediationMode::Mixed => fit_random_intercept(d, Method::Reml),
            MediationMode::Ols => ols(d, true),
        }
    };
    let step_a = fit(&base.with_outcome(mediator_name, m.clone())?)?;
    let step2 = fit(&base)?;
    let step3 = fit(&base.with_column(mediator_name, m, false)?)?;
    let b = step3.coefficient(mediator_name).expect("mediator column fitted");

    let rows = emotions
        .iter()
        .map(|e| {
            let a = step_a.coefficient(e).expect("emotion fitted");
            let t = step2.coefficient(e).expect("emotion fitted");
            let d = step3.coefficient(e).expect("emotion fitted");
            let gap = t.estimate - (d.estimate + a.estimate * b.estimate);
            MediationRow {
                emotion: e.to_string(),
                path_a: a.estimate,
                path_a_p: a.p_value,
                total: t.estimate,
                total_p: t.p_value,
                direct: d.estimate,
                direct_p: d.p_value,
                mediator_coef: b.estimate,
                mediator_p: b.p_value,
                classification: classify(a.significant(), t.significant(), d.significant(), t.estimate, d.estimate),
                identity_gap: if t.estimate == 0.0 { gap } else { gap / t.estimate.abs() },
            }
        })
        .collect();
    Ok(MediationReport {
        mediator: mediator_name.to_string(),
        outcome: design.outcome.clone(),
        mode,
        dropped_rows,
        rows,
    })
}
