//! Linear algebra over the field of rational functions, optionally modulo a
//! constraint ideal.
//!
//! A [`FieldMatrix`] in quotient mode decides zero-ness by normal form, so
//! ranks, solutions, and spans are those of the restriction to the constraint
//! surface (generic-point semantics). The pivot rule is pinned — smallest
//! numerator total degree, ties broken by lowest `(row, col)` — which makes
//! every derived object (pivot sets, maximal minors, particular solutions)
//! deterministic. Minor determinants are computed separately by fraction-free
//! Bareiss elimination on cleared polynomial entries, so the certificate is
//! an exact polynomial identity rather than a by-product of field division.

use std::sync::Arc;

use crate::algebra::ideal::ConstraintIdeal;
use crate::algebra::poly::Poly;
use crate::algebra::ratfunc::RatFunc;

#[derive(Debug, thiserror::Error)]
pub enum LinearError {
    #[error("denominator vanishes on the constraint surface at entry ({row}, {col})")]
    DenominatorVanishes { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A dense matrix of rational functions, with an optional constraint ideal
/// that all zero tests are taken modulo.
#[derive(Clone, Debug)]
pub struct FieldMatrix {
    entries: Vec<Vec<RatFunc>>,
    rows: usize,
    cols: usize,
    quotient: Option<Arc<ConstraintIdeal>>,
    /// When set (quotient mode only), entries are treated as zero whenever
    /// they vanish on the constraint locus, not merely when their normal form
    /// is zero. Needed for rank questions about non-radical ideals, e.g. a
    /// Jacobian row `2·p_X` over `⟨p_X²⟩`.
    radical_zero_test: bool,
}

/// A maximal nonsingular square submatrix: row and column indices (ascending)
/// and its exact determinant.
#[derive(Clone, Debug)]
pub struct Minor {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// Determinant of the submatrix in ascending index order. `1` for the
    /// empty minor of a zero matrix.
    pub det: RatFunc,
}

/// Solution set of a consistent linear system.
#[derive(Clone, Debug)]
pub struct Solution {
    /// The particular solution with every free variable set to zero.
    pub particular: Vec<RatFunc>,
    /// One basis vector per free variable, in ascending column order.
    pub nullspace: Vec<Vec<RatFunc>>,
}

struct Elimination {
    work: Vec<Vec<RatFunc>>,
    /// `(row, col)` of each pivot, in selection order.
    pivots: Vec<(usize, usize)>,
}

impl FieldMatrix {
    pub fn new(
        entries: Vec<Vec<RatFunc>>,
        quotient: Option<Arc<ConstraintIdeal>>,
    ) -> Result<Self, LinearError> {
        let rows = entries.len();
        let cols = entries.first().map(Vec::len).unwrap_or(0);
        for (i, row) in entries.iter().enumerate() {
            if row.len() != cols {
                return Err(LinearError::DimensionMismatch {
                    expected: cols,
                    got: row.len(),
                });
            }
            if let Some(ideal) = &quotient {
                for (j, e) in row.iter().enumerate() {
                    if ideal.normal_form(e.den()).is_zero() {
                        return Err(LinearError::DenominatorVanishes { row: i, col: j });
                    }
                }
            }
        }
        Ok(FieldMatrix {
            entries,
            rows,
            cols,
            quotient,
            radical_zero_test: false,
        })
    }

    /// Switch zero tests to vanishing-on-locus. No effect without a quotient.
    pub fn with_radical_zero_test(mut self) -> Self {
        self.radical_zero_test = true;
        self
    }

    pub fn from_polys(
        entries: Vec<Vec<Poly>>,
        quotient: Option<Arc<ConstraintIdeal>>,
    ) -> Result<Self, LinearError> {
        FieldMatrix::new(
            entries
                .into_iter()
                .map(|row| row.into_iter().map(RatFunc::from_poly).collect())
                .collect(),
            quotient,
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> &RatFunc {
        &self.entries[i][j]
    }

    pub fn quotient(&self) -> Option<&Arc<ConstraintIdeal>> {
        self.quotient.as_ref()
    }

    /// Normal form of a value in the matrix's coefficient field.
    fn reduce(&self, r: &RatFunc) -> Result<RatFunc, LinearError> {
        match &self.quotient {
            None => Ok(r.clone()),
            Some(ideal) => ideal
                .normal_form_rat(r)
                .map_err(|_| LinearError::DenominatorVanishes { row: 0, col: 0 }),
        }
    }

    fn is_zero(&self, r: &RatFunc) -> bool {
        match &self.quotient {
            None => r.is_zero(),
            Some(ideal) if self.radical_zero_test => ideal.vanishes_on_locus(r.num()),
            Some(ideal) => ideal.normal_form(r.num()).is_zero(),
        }
    }

    /// Gauss–Jordan elimination under the pinned pivot rule. After return,
    /// every pivot column is zero outside its pivot row.
    fn eliminate(&self, augment: Option<&[RatFunc]>) -> Result<Elimination, LinearError> {
        let mut work: Vec<Vec<RatFunc>> = (0..self.rows)
            .map(|i| {
                let mut row: Vec<RatFunc> =
                    self.entries[i].iter().map(|e| self.reduce(e)).collect::<Result<_, _>>()?;
                if let Some(b) = augment {
                    row.push(self.reduce(&b[i])?);
                }
                Ok::<_, LinearError>(row)
            })
            .collect::<Result<_, _>>()?;

        let mut row_used = vec![false; self.rows];
        let mut col_used = vec![false; self.cols];
        let mut pivots = Vec::new();

        loop {
            // Pivot choice: smallest numerator total degree among nonzero
            // candidates, then lowest (row, col).
            let mut best: Option<(u64, usize, usize)> = None;
            for i in 0..self.rows {
                if row_used[i] {
                    continue;
                }
                for j in 0..self.cols {
                    if col_used[j] || self.is_zero(&work[i][j]) {
                        continue;
                    }
                    let deg = work[i][j].num().total_degree().unwrap_or(0);
                    let cand = (deg, i, j);
                    if best.map(|b| cand < b).unwrap_or(true) {
                        best = Some(cand);
                    }
                }
            }
            let Some((_, pi, pj)) = best else { break };

            let pivot = work[pi][pj].clone();
            let pivot_row = work[pi].clone();
            for (i, current) in work.iter_mut().enumerate() {
                if i == pi || self.is_zero(&current[pj]) {
                    continue;
                }
                let factor = self
                    .reduce(&current[pj].div(&pivot).expect("pivot is nonzero"))?;
                for (cell, pivot_cell) in current.iter_mut().zip(&pivot_row) {
                    let delta = factor.mul(pivot_cell);
                    *cell = self.reduce(&cell.sub(&delta))?;
                }
            }
            row_used[pi] = true;
            col_used[pj] = true;
            pivots.push((pi, pj));
        }

        Ok(Elimination { work, pivots })
    }

    /// Rank over the coefficient field (modulo the ideal in quotient mode).
    pub fn generic_rank(&self) -> Result<usize, LinearError> {
        Ok(self.eliminate(None)?.pivots.len())
    }

    /// A maximal nonsingular minor: the pivot rows and columns of the pinned
    /// elimination, with the exact Bareiss determinant of that submatrix.
    pub fn maximal_minor(&self) -> Result<Minor, LinearError> {
        let elim = self.eliminate(None)?;
        let mut rows: Vec<usize> = elim.pivots.iter().map(|&(i, _)| i).collect();
        let mut cols: Vec<usize> = elim.pivots.iter().map(|&(_, j)| j).collect();
        rows.sort_unstable();
        cols.sort_unstable();
        let det = self.submatrix_det(&rows, &cols);
        Ok(Minor { rows, cols, det })
    }

    /// Exact determinant of the (rows × cols) submatrix via fraction-free
    /// Bareiss elimination after clearing denominators row by row.
    fn submatrix_det(&self, rows: &[usize], cols: &[usize]) -> RatFunc {
        let n = rows.len();
        if n == 0 {
            return RatFunc::one();
        }
        // Clear each row by the product of its entry denominators; the
        // determinant of the cleared matrix is det · Π(all denominators).
        let mut cleared: Vec<Vec<Poly>> = Vec::with_capacity(n);
        let mut den_product = Poly::one();
        for &i in rows {
            let row_dens: Vec<&Poly> = cols.iter().map(|&j| self.entries[i][j].den()).collect();
            for d in &row_dens {
                den_product = den_product.mul(d);
            }
            cleared.push(
                cols.iter()
                    .enumerate()
                    .map(|(k, &j)| {
                        let mut e = self.entries[i][j].num().clone();
                        for (l, d) in row_dens.iter().enumerate() {
                            if l != k {
                                e = e.mul(d);
                            }
                        }
                        e
                    })
                    .collect(),
            );
        }
        let det = bareiss_det(cleared);
        RatFunc::new(det, den_product).expect("denominators are nonzero")
    }

    /// Solves `self · x = rhs`. Returns `Ok(None)` when the system is
    /// inconsistent over the coefficient field. Free variables are zeroed in
    /// the particular solution; the nullspace basis has one vector per free
    /// column.
    pub fn solve(&self, rhs: &[RatFunc]) -> Result<Option<Solution>, LinearError> {
        if rhs.len() != self.rows {
            return Err(LinearError::DimensionMismatch {
                expected: self.rows,
                got: rhs.len(),
            });
        }
        let elim = self.eliminate(Some(rhs))?;

        // Rows without a pivot must have vanishing right-hand side.
        let pivot_rows: Vec<Option<usize>> = {
            let mut map = vec![None; self.rows];
            for &(i, j) in &elim.pivots {
                map[i] = Some(j);
            }
            map
        };
        for (row, pivot) in elim.work.iter().zip(&pivot_rows) {
            if pivot.is_none() && !self.is_zero(&row[self.cols]) {
                return Ok(None);
            }
        }

        let mut particular = vec![RatFunc::zero(); self.cols];
        for &(i, j) in &elim.pivots {
            let value = elim.work[i][self.cols]
                .div(&elim.work[i][j])
                .expect("pivot is nonzero");
            particular[j] = self.reduce(&value)?;
        }

        let pivot_cols: Vec<Option<usize>> = {
            let mut map = vec![None; self.cols];
            for &(i, j) in &elim.pivots {
                map[j] = Some(i);
            }
            map
        };
        let mut nullspace = Vec::new();
        for f in 0..self.cols {
            if pivot_cols[f].is_some() {
                continue;
            }
            let mut vec = vec![RatFunc::zero(); self.cols];
            vec[f] = RatFunc::one();
            for &(i, j) in &elim.pivots {
                let value = elim.work[i][f].div(&elim.work[i][j]).expect("pivot is nonzero");
                vec[j] = self.reduce(&value.neg())?;
            }
            nullspace.push(vec);
        }

        Ok(Some(Solution {
            particular,
            nullspace,
        }))
    }

    /// Expresses `target` as a linear combination of `spanning` vectors over
    /// the coefficient field, if possible. Returns the coefficients in the
    /// order of `spanning`.
    pub fn span_membership(
        target: &[RatFunc],
        spanning: &[Vec<RatFunc>],
        quotient: Option<Arc<ConstraintIdeal>>,
    ) -> Result<Option<Vec<RatFunc>>, LinearError> {
        let dim = target.len();
        for v in spanning {
            if v.len() != dim {
                return Err(LinearError::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
        }
        // Columns are the spanning vectors; solve for the coefficients.
        let entries: Vec<Vec<RatFunc>> = (0..dim)
            .map(|i| spanning.iter().map(|v| v[i].clone()).collect())
            .collect();
        let m = FieldMatrix::new(entries, quotient)?;
        Ok(m.solve(target)?.map(|s| s.particular))
    }
}

/// Fraction-free Bareiss determinant of a square polynomial matrix. Every
/// interior division is exact by the Sylvester identity; this is asserted.
fn bareiss_det(mut a: Vec<Vec<Poly>>) -> Poly {
    let n = a.len();
    if n == 0 {
        return Poly::one();
    }
    let mut sign_flip = false;
    let mut prev = Poly::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            // Pivot by the first row below with a nonzero entry in column k.
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign_flip = !sign_flip;
                }
                None => return Poly::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = a[k][k].mul(&a[i][j]).sub(&a[i][k].mul(&a[k][j]));
                a[i][j] = num
                    .exact_div(&prev)
                    .expect("Bareiss interior division is exact");
            }
            a[i][k] = Poly::zero();
        }
        prev = a[k][k].clone();
    }
    let det = a[n - 1][n - 1].clone();
    if sign_flip {
        det.neg()
    } else {
        det
    }
}

/// Numeric rank of a float matrix by Gaussian elimination with partial
/// pivoting: the count of pivots exceeding `tol`.
pub fn float_rank(mut m: Vec<Vec<f64>>, tol: f64) -> usize {
    let rows = m.len();
    let cols = m.first().map(Vec::len).unwrap_or(0);
    let mut rank = 0;
    let mut row = 0;
    for col in 0..cols {
        if row >= rows {
            break;
        }
        let (best, best_abs) = (row..rows)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if best_abs <= tol {
            continue;
        }
        m.swap(row, best);
        let pivot_row = m[row].clone();
        for (r, current) in m.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = current[col] / pivot_row[col];
            for (cell, pivot_cell) in current[col..].iter_mut().zip(&pivot_row[col..]) {
                *cell -= f * pivot_cell;
            }
        }
        rank += 1;
        row += 1;
    }
    rank
}
