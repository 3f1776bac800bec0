//! Dense determinant and spectrum helpers that exploit block-diagonal structure.

use nalgebra::{DMatrix, SymmetricEigen};

/// Maximal decomposition of a square matrix into consecutive diagonal blocks
/// with no nonzero entry outside them. Returns `(start, len)` pairs.
pub fn diagonal_blocks(m: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let dim = m.nrows();
    let mut reach = vec![0usize; dim];
    for i in 0..dim {
        let mut far = i;
        for j in 0..dim {
            if m[(i, j)] != 0.0 || m[(j, i)] != 0.0 {
                far = far.max(j);
            }
        }
        reach[i] = far;
    }
    let mut blocks = Vec::new();
    let mut start = 0;
    let mut far = 0;
    for i in 0..dim {
        far = far.max(reach[i]);
        if far == i {
            blocks.push((start, i + 1 - start));
            start = i + 1;
        }
    }
    blocks
}

/// Sign and log of |det| together with the smallest relative LU pivot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub sign: f64,
    pub log_abs: f64,
    pub min_pivot: f64,
}

impl LogDet {
    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }
}

fn lu_log_det(m: DMatrix<f64>) -> LogDet {
    let lu = m.lu();
    let u = lu.u();
    let mut sign = if lu.p().determinant::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let mut log_abs = 0.0;
    let mut min_pivot = f64::INFINITY;
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d < 0.0 {
            sign = -sign;
        }
        min_pivot = min_pivot.min(d.abs());
        log_abs += d.abs().ln();
    }
    if min_pivot == 0.0 {
        sign = 0.0;
    }
    LogDet {
        sign,
        log_abs,
        min_pivot,
    }
}

/// Determinant of a square matrix, factorized block by block.
pub fn block_log_det(m: &DMatrix<f64>) -> LogDet {
    let mut out = LogDet {
        sign: 1.0,
        log_abs: 0.0,
        min_pivot: f64::INFINITY,
    };
    for (start, len) in diagonal_blocks(m) {
        let block = m.view((start, start), (len, len)).into_owned();
        let part = lu_log_det(block);
        out.sign *= part.sign;
        out.log_abs += part.log_abs;
        out.min_pivot = out.min_pivot.min(part.min_pivot);
    }
    out
}

/// Eigenvalues of a symmetric matrix, computed block by block, sorted ascending.
pub fn block_symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut all = Vec::with_capacity(m.nrows());
    for (start, len) in diagonal_blocks(m) {
        let block = m.view((start, start), (len, len)).into_owned();
        if len == 1 {
            all.push(block[(0, 0)]);
        } else {
            all.extend(SymmetricEigen::new(block).eigenvalues.iter().copied());
        }
    }
    all.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    all
}

/// `max |A - A^T|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Log-determinant of a symmetric tridiagonal matrix via the LDLᵀ pivot recurrence.
/// Returns `None` when a pivot is not strictly positive.
pub fn tridiagonal_spd_log_det(diag: &[f64], off: &[f64]) -> Option<f64> {
    let mut pivot = *diag.first()?;
    if pivot <= 0.0 {
        return None;
    }
    let mut acc = pivot.ln();
    for (d, b) in diag.iter().skip(1).zip(off) {
        pivot = d - b * b / pivot;
        if pivot <= 0.0 {
            return None;
        }
        acc += pivot.ln();
    }
    Some(acc)
}
