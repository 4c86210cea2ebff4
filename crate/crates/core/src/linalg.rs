//! Dense linear algebra over Q_p at certified precision.
//!
//! Gaussian elimination with p-adic pivoting: the pivot is the entry of
//! least valuation (largest p-adic norm), which keeps the elimination
//! numerically lossless in the non-archimedean metric.

use crate::padic::{PadicError, PadicNumber, PadicResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<PadicNumber>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<PadicNumber>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix");
        Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &PadicNumber {
        &self.data[i * self.cols + j]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut PadicNumber {
        &mut self.data[i * self.cols + j]
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

/// Outcome of a forward elimination pass.
struct Echelon {
    mat: Matrix,
    pivots: Vec<(usize, usize)>,
    det_parity: bool,
}

/// Best pivot below (row, col): the entry of least valuation.
fn pick_pivot(m: &Matrix, row: usize, col: usize) -> Option<usize> {
    let mut best: Option<(usize, i64)> = None;
    for i in row..m.nrows() {
        let e = m.at(i, col);
        if e.is_zero() {
            continue;
        }
        let v = e.valuation().unwrap();
        if best.map_or(true, |(_, bv)| v < bv) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

fn eliminate(mut m: Matrix) -> PadicResult<Echelon> {
    let mut pivots = Vec::new();
    let mut parity = false;
    let mut row = 0;
    for col in 0..m.ncols() {
        if row >= m.nrows() {
            break;
        }
        let Some(pr) = pick_pivot(&m, row, col) else {
            continue;
        };
        if pr != row {
            m.swap_rows(pr, row);
            parity = !parity;
        }
        let pivot = m.at(row, col).clone();
        for i in (row + 1)..m.nrows() {
            if m.at(i, col).is_zero() {
                continue;
            }
            let factor = m.at(i, col).div(&pivot)?;
            for j in col..m.ncols() {
                let delta = factor.mul(m.at(row, j))?;
                *m.at_mut(i, j) = m.at(i, j).sub(&delta)?;
            }
        }
        pivots.push((row, col));
        row += 1;
    }
    Ok(Echelon {
        mat: m,
        pivots,
        det_parity: parity,
    })
}

/// Determinant of a square matrix.
pub fn det(m: &Matrix) -> PadicResult<PadicNumber> {
    assert_eq!(m.nrows(), m.ncols(), "determinant of a non-square matrix");
    let n = m.nrows();
    if n == 0 {
        return Err(PadicError::PrecisionExhausted);
    }
    let ech = eliminate(m.clone())?;
    if ech.pivots.len() < n {
        // A pivot column collapsed: det is zero to the provable precision.
        let abs = ech
            .mat
            .data
            .iter()
            .map(|e| e.abs_prec())
            .min()
            .unwrap_or(1)
            .max(1);
        let sample = &m.data[0];
        let ctx = crate::padic::PadicContext::new(sample.p(), sample.precision_cap())?;
        return ctx.zero_mod(abs);
    }
    let mut acc = ech.mat.at(0, 0).clone();
    for i in 1..n {
        acc = acc.mul(ech.mat.at(i, i))?;
    }
    if ech.det_parity {
        acc = acc.neg();
    }
    Ok(acc)
}

/// Solve M x = rhs for square M; fails when M is singular at precision.
pub fn solve(m: &Matrix, rhs: &[PadicNumber]) -> PadicResult<Vec<PadicNumber>> {
    assert_eq!(m.nrows(), m.ncols());
    assert_eq!(m.nrows(), rhs.len());
    let n = m.nrows();
    let mut aug_rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<PadicNumber> = (0..n).map(|j| m.at(i, j).clone()).collect();
        row.push(rhs[i].clone());
        aug_rows.push(row);
    }
    let ech = eliminate(Matrix::from_rows(aug_rows))?;
    if ech.pivots.len() < n || ech.pivots.iter().any(|&(_, c)| c >= n) {
        return Err(PadicError::DivisionByZero);
    }
    // Back substitution.
    let a = &ech.mat;
    let mut x: Vec<Option<PadicNumber>> = vec![None; n];
    for &(r, c) in ech.pivots.iter().rev() {
        let mut acc = a.at(r, n).clone();
        for j in (c + 1)..n {
            if a.at(r, j).is_zero() {
                continue;
            }
            let term = a.at(r, j).mul(x[j].as_ref().expect("solved later column"))?;
            acc = acc.sub(&term)?;
        }
        x[c] = Some(acc.div(a.at(r, c))?);
    }
    Ok(x.into_iter().map(|v| v.unwrap()).collect())
}

/// Rank at certified precision.
pub fn rank(m: &Matrix) -> PadicResult<usize> {
    Ok(eliminate(m.clone())?.pivots.len())
}

/// Basis of the right kernel {x : M x = 0}, each vector normalized so its
/// first nonzero coordinate is 1; returned in order of free column.
pub fn kernel_basis(m: &Matrix) -> PadicResult<Vec<Vec<PadicNumber>>> {
    let ncols = m.ncols();
    let ech = eliminate(m.clone())?;
    let a = &ech.mat;
    let pivot_cols: Vec<usize> = ech.pivots.iter().map(|&(_, c)| c).collect();
    let sample = &m.data[0];
    let ctx = crate::padic::PadicContext::new(sample.p(), sample.precision_cap())?;
    let mut basis = Vec::new();
    for free in 0..ncols {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut x: Vec<PadicNumber> = (0..ncols).map(|_| ctx.zero()).collect();
        x[free] = ctx.one();
        for &(r, c) in ech.pivots.iter().rev() {
            if c >= free {
                continue;
            }
            let mut acc = ctx.zero();
            for j in (c + 1)..ncols {
                if a.at(r, j).is_zero() || x[j].is_zero() {
                    continue;
                }
                acc = acc.add(&a.at(r, j).mul(&x[j])?)?;
            }
            x[c] = acc.neg().div(a.at(r, c))?;
        }
        // Normalize on the first nonzero coordinate.
        if let Some(lead) = x.iter().find(|e| !e.is_zero()).cloned() {
            for e in &mut x {
                *e = e.div(&lead)?;
            }
        }
        basis.push(x);
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::PadicContext;

    fn mat(ctx: &PadicContext, rows: &[&[i64]]) -> Matrix {
        Matrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| ctx.from_integer(x)).collect())
                .collect(),
        )
    }

    #[test]
    fn det_and_solve() {
        let c = PadicContext::new(5, 10).unwrap();
        let m = mat(&c, &[&[2, 1], &[1, 3]]);
        assert_eq!(det(&m).unwrap(), c.from_integer(5));
        let x = solve(&m, &[c.from_integer(5), c.from_integer(10)]).unwrap();
        assert_eq!(x[0], c.one());
        assert_eq!(x[1], c.from_integer(3));
    }

    #[test]
    fn pivots_pick_least_valuation() {
        let c = PadicContext::new(5, 10).unwrap();
        // First column is (5, 1): elimination must pivot on the unit.
        let m = mat(&c, &[&[5, 1], &[1, 1]]);
        let d = det(&m).unwrap();
        assert_eq!(d, c.from_integer(4));
    }

    #[test]
    fn kernel_recovers_planted_vector() {
        let c = PadicContext::new(7, 10).unwrap();
        // Row space orthogonal to (1, -2, 1).
        let m = mat(&c, &[&[1, 1, 1], &[0, 1, 2]]);
        let k = kernel_basis(&m).unwrap();
        assert_eq!(k.len(), 1);
        let v = &k[0];
        // normalized to first coordinate 1
        assert_eq!(v[0], c.one());
        assert_eq!(v[1], c.from_integer(-2));
        assert_eq!(v[2], c.one());
    }

    #[test]
    fn singular_matrix_reports_zero_det() {
        let c = PadicContext::new(5, 8).unwrap();
        let m = mat(&c, &[&[1, 2], &[2, 4]]);
        assert!(det(&m).unwrap().is_zero());
        assert!(solve(&m, &[c.one(), c.one()]).is_err());
    }
}
