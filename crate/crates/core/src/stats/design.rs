use std::str::FromStr;

use super::{fit_fixed_effects, fit_random_intercept, fit_random_slopes, ols, DesignMatrix, FitResult, Method, SlopeOptions};
use crate::emotion::Emotion;
use crate::error::{Error, Result};
use crate::table::Table;

pub const INTERCEPT: &str = "(Intercept)";

/// Article-level controls, used when present in the analysis table.
pub const CONTROL_COLUMNS: [&str; 6] = ["ln_char_length", "n_images", "n_videos", "weekend", "n_comments", "original"];
/// Publisher-level covariates besides the `pubtype_*` indicators.
pub const PUBLISHER_COLUMNS: [&str; 2] = ["ln_followers", "articles_per_day"];
pub const DEGREE_COLUMN: &str = "degree_of_emotion";
pub const GROUP_COLUMN: &str = "publisher_id";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Size,
    Depth,
    MaxBreadth,
    Time,
    StructuralVirality,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::Size,
        Outcome::Depth,
        Outcome::MaxBreadth,
        Outcome::StructuralVirality,
        Outcome::Time,
    ];

    /// Source column in the analysis table.
    pub fn column(self) -> &'static str {
        match self {
            Outcome::Size => "size",
            Outcome::Depth => "depth",
            Outcome::MaxBreadth => "max_breadth",
            Outcome::Time => "time_per_level",
            Outcome::StructuralVirality => "structural_virality",
        }
    }

    /// Name of the regressed quantity (log scale for size and breadth).
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Size => "ln_size",
            Outcome::MaxBreadth => "ln_max_breadth",
            other => other.column(),
        }
    }

    pub fn is_log(self) -> bool {
        matches!(self, Outcome::Size | Outcome::MaxBreadth)
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "size" | "ln_size" => Outcome::Size,
            "depth" => Outcome::Depth,
            "max_breadth" | "breadth" | "ln_max_breadth" => Outcome::MaxBreadth,
            "time" | "time_per_level" => Outcome::Time,
            "structural_virality" | "sv" => Outcome::StructuralVirality,
            _ => return Err(Error::invalid(format!("unknown outcome `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spec {
    /// Eight emotion z-scores with controls, random intercept.
    Main,
    /// Single degree-of-emotion score with controls.
    Degree,
    /// As `Main`, with emotion slopes varying by publisher.
    RandomSlopes,
    /// As `Main`, publisher fixed effects.
    Fe,
}

impl Spec {
    pub const ALL: [Spec; 4] = [Spec::Main, Spec::Degree, Spec::RandomSlopes, Spec::Fe];

    pub fn name(self) -> &'static str {
        match self {
            Spec::Main => "main",
            Spec::Degree => "degree",
            Spec::RandomSlopes => "random-slopes",
            Spec::Fe => "fe",
        }
    }
}

impl FromStr for Spec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "main" => Spec::Main,
            "degree" => Spec::Degree,
            "random-slopes" | "random_slopes" => Spec::RandomSlopes,
            "fe" => Spec::Fe,
            _ => return Err(Error::invalid(format!("unknown specification `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DesignOptions {
    /// Publishers with fewer articles are removed.
    pub min_group_size: usize,
}

/// Design built from an analysis table, with what was left out.
#[derive(Debug, Clone)]
pub struct BuiltDesign {
    pub design: DesignMatrix,
    /// Table rows used, in order.
    pub rows: Vec<usize>,
    pub dropped_rows: usize,
    /// Constant or reference columns not entered.
    pub dropped_columns: Vec<String>,
}

fn topic_columns(table: &Table) -> Vec<String> {
    let mut topics: Vec<(usize, String)> = table
        .columns()
        .iter()
        .filter_map(|c| c.strip_prefix("topic_").and_then(|k| k.parse().ok()).map(|k: usize| (k, c.clone())))
        .collect();
    topics.sort();
    topics.into_iter().map(|t| t.1).collect()
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().filter(|x| x.is_finite()).all(|x| *x == v[0]) || v.len() < 2
}

/// Builds the design for one outcome and specification. The last topic share
/// and the first publisher-type indicator are left out as references;
/// constant controls are left out; rows with missing values are dropped.
pub fn build_design(table: &Table, outcome: Outcome, spec: Spec, options: &DesignOptions) -> Result<BuiltDesign> {
    let groups = table.text_column(GROUP_COLUMN)?;
    let raw_y = table.numeric_column(outcome.column())?;
    let y: Vec<f64> = if outcome.is_log() {
        if let Some(i) = raw_y.iter().position(|v| *v <= 0.0) {
            return Err(Error::invalid(format!("{} must be positive for the log transform (row {})", outcome.column(), i + 1)));
        }
        raw_y.iter().map(|v| v.ln()).collect()
    } else {
        raw_y
    };

    // (name, values, group level, may be dropped when constant)
    let mut cols: Vec<(String, Vec<f64>, bool, bool)> = Vec::new();
    match spec {
        Spec::Degree => cols.push((DEGREE_COLUMN.into(), table.numeric_column(DEGREE_COLUMN)?, false, false)),
        _ => {
            for e in Emotion::ALL {
                cols.push((e.name().into(), table.numeric_column(e.name())?, false, false));
            }
        }
    }
    let mut dropped_columns = Vec::new();
    let topics = topic_columns(table);
    if let Some((last, rest)) = topics.split_last() {
        dropped_columns.push(last.clone());
        for t in rest {
            cols.push((t.clone(), table.numeric_column(t)?, false, true));
        }
    }
    for c in CONTROL_COLUMNS {
        if table.has_column(c) {
            cols.push((c.into(), table.numeric_column(c)?, false, true));
        }
    }
    for c in PUBLISHER_COLUMNS {
        if table.has_column(c) {
            cols.push((c.into(), table.numeric_column(c)?, true, true));
        }
    }
    let mut pubtypes: Vec<&String> = table.columns().iter().filter(|c| c.starts_with("pubtype_")).collect();
    pubtypes.sort();
    if let Some((first, rest)) = pubtypes.split_first() {
        dropped_columns.push((*first).clone());
        for c in rest {
            cols.push(((*c).clone(), table.numeric_column(c)?, true, true));
        }
    }

    let mut sizes = std::collections::HashMap::new();
    for g in &groups {
        *sizes.entry(*g).or_insert(0usize) += 1;
    }
    let rows: Vec<usize> = (0..table.len())
        .filter(|&i| y[i].is_finite() && cols.iter().all(|c| c.1[i].is_finite()))
        .filter(|&i| sizes[groups[i]] >= options.min_group_size)
        .collect();
    if rows.is_empty() {
        return Err(Error::invalid("no complete rows for this specification"));
    }
    let labels: Vec<&str> = rows.iter().map(|&i| groups[i]).collect();
    let mut design = DesignMatrix::new(outcome.name(), rows.iter().map(|&i| y[i]).collect(), &labels)?;
    for (name, values, group_level, optional) in cols {
        let v: Vec<f64> = rows.iter().map(|&i| values[i]).collect();
        if optional && is_constant(&v) {
            dropped_columns.push(name);
            continue;
        }
        design.add_column(name, v, group_level)?;
    }
    Ok(BuiltDesign {
        design,
        dropped_rows: table.len() - rows.len(),
        rows,
        dropped_columns,
    })
}

/// Fits a design with the estimator its specification calls for. `method`
/// picks OLS, ML or REML for the random-intercept specifications; random
/// slopes are fitted by ML on `slopes` (all eight emotions when empty).
pub fn fit_specification(design: &DesignMatrix, spec: Spec, method: Method, slopes: &[&str]) -> Result<FitResult> {
    match spec {
        Spec::Fe => fit_fixed_effects(design),
        Spec::RandomSlopes => {
            let all: Vec<&str> = Emotion::ALL.iter().map(|e| e.name()).collect();
            let s = if slopes.is_empty() { &all[..] } else { slopes };
            fit_random_slopes(design, s, &SlopeOptions::default())
        }
        Spec::Main | Spec::Degree => match method {
            Method::Ols => ols(design, true),
            Method::Fe => fit_fixed_effects(design),
            m => fit_random_intercept(design, m),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        let mut cols: Vec<String> = vec!["article_id".into(), "publisher_id".into(), "size".into(), "depth".into()];
        cols.extend(Emotion::ALL.iter().map(|e| e.name().to_string()));
        cols.extend(["topic_0", "topic_1", "n_videos", "ln_followers", "pubtype_a", "pubtype_b"].map(String::from));
        let mut t = Table::new(cols);
        for i in 0..6 {
            let mut row = vec![format!("a{i}"), format!("p{}", i % 2), (i + 1).to_string(), "NA".to_string()];
            if i != 5 {
                row[3] = (i % 3).to_string();
            }
            row.extend((0..8).map(|k| ((i * 8 + k) % 5).to_string()));
            row.extend([format!("0.{i}"), format!("0.{}", 9 - i), "0".into(), (i % 2).to_string(), (i % 2).to_string(), (1 - i % 2).to_string()]);
            t.push(row).unwrap();
        }
        t
    }

    #[test]
    fn references_constants_and_missing_rows() {
        let b = build_design(&table(), Outcome::Depth, Spec::Main, &DesignOptions::default()).unwrap();
        assert_eq!(b.dropped_rows, 1);
        assert_eq!(b.design.n_obs(), 5);
        assert!(b.dropped_columns.contains(&"topic_1".to_string()));
        assert!(b.dropped_columns.contains(&"pubtype_a".to_string()));
        assert!(b.dropped_columns.contains(&"n_videos".to_string()));
        assert!(b.design.is_group_level("ln_followers"));
        assert!(b.design.column("topic_0").is_some());
        let s = build_design(&table(), Outcome::Size, Spec::Main, &DesignOptions::default()).unwrap();
        assert_eq!(s.design.outcome, "ln_size");
        assert!((s.design.y[1] - 2f64.ln()).abs() < 1e-15);
        assert!(build_design(&table(), Outcome::Depth, Spec::Degree, &DesignOptions::default()).is_err());
    }

    #[test]
    fn parses_names() {
        assert_eq!("sv".parse::<Outcome>().unwrap(), Outcome::StructuralVirality);
        assert_eq!("random-slopes".parse::<Spec>().unwrap(), Spec::RandomSlopes);
        assert!("x".parse::<Spec>().is_err());
    }
}
