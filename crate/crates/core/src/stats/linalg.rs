use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const COLLINEAR_TOL: f64 = 1e-8;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Names of columns lying in the span of the columns before them, found by
/// modified Gram-Schmidt. Zero columns are always reported.
pub(crate) fn collinear_columns(names: &[String], cols: &[&[f64]]) -> Vec<String> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut bad = Vec::new();
    for (name, col) in names.iter().zip(cols) {
        let norm0 = dot(col, col).sqrt();
        let mut v = col.to_vec();
        for q in &basis {
            let c = dot(q, &v);
            v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
        }
        let norm = dot(&v, &v).sqrt();
        if norm0 == 0.0 || norm <= COLLINEAR_TOL * norm0 {
            bad.push(name.clone());
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    bad
}

pub(crate) fn check_rank(names: &[String], cols: &[&[f64]]) -> Result<()> {
    let bad = collinear_columns(names, cols);
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Collinear(bad))
    }
}

pub(crate) fn gram(cols: &[&[f64]]) -> DMatrix<f64> {
    let p = cols.len();
    let mut m = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let v = dot(cols[i], cols[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub(crate) fn cross(cols: &[&[f64]], y: &[f64]) -> DVector<f64> {
    DVector::from_iterator(cols.len(), cols.iter().map(|c| dot(c, y)))
}

pub(crate) fn cholesky(m: DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    m.cholesky()
        .ok_or_else(|| Error::NoConvergence(format!("{what} is not positive definite")))
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Symmetric PSD square-root factor `L` with `L L' = m`; negative
/// eigenvalues from rounding are clipped to zero.
pub(crate) fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut l = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        l.column_mut(j).scale_mut(s);
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_and_constant_columns_are_named() {
        let one = vec![1.0; 4];
        let x = vec![1.0, 2.0, 3.0, 5.0];
        let x2 = vec![2.0, 4.0, 6.0, 10.0];
        let shifted = vec![2.0, 3.0, 4.0, 6.0];
        let names: Vec<String> = ["c", "x", "x2", "s"].iter().map(|s| s.to_string()).collect();
        let bad = collinear_columns(&names, &[&one, &x, &x2, &shifted]);
        assert_eq!(bad, vec!["x2".to_string(), "s".to_string()]);
    }

    #[test]
    fn psd_factor_reconstructs() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let l = psd_factor(&m);
        assert!((&l * l.transpose() - &m).abs().max() < 1e-12);
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let l = psd_factor(&z);
        assert!((&l * l.transpose() - &z).abs().max() < 1e-12);
    }
}
