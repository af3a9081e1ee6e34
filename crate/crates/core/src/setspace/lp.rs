//! Phase-one simplex for small dense feasibility problems.
//!
//! Finds `x >= 0` with `A x = b` or `A x >= b` row by row. Bland's rule keeps it
//! from cycling on the degenerate vertices that 0/1 incidence matrices produce.

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Row {
    Eq,
    Ge,
}

/// A feasibility problem in rows of `(coefficients, kind, rhs)`.
#[derive(Debug, Clone)]
pub struct Feasibility<T> {
    pub cols: usize,
    pub rows: Vec<(Vec<T>, Row, T)>,
}

fn pivot_tol<T: Real>() -> T {
    T::epsilon().sqrt() * T::lit(1e-4)
}

/// Largest phase-one objective still accepted as feasible.
pub fn feasibility_tol<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(1e4))
}

impl<T: Real> Feasibility<T> {
    pub fn new(cols: usize) -> Self {
        Self { cols, rows: Vec::new() }
    }

    pub fn push(&mut self, coeffs: Vec<T>, kind: Row, rhs: T) {
        assert_eq!(coeffs.len(), self.cols, "row width");
        self.rows.push((coeffs, kind, rhs));
    }

    /// Returns a feasible `x`, or `None` if the phase-one optimum exceeds the tolerance.
    pub fn solve(&self) -> Option<Vec<T>> {
        let m = self.rows.len();
        let n = self.cols;
        let surplus: Vec<usize> =
            self.rows.iter().enumerate().filter(|(_, r)| r.1 == Row::Ge).map(|(i, _)| i).collect();
        let ns = surplus.len();
        // columns: [x | surplus | artificial | rhs]
        let width = n + ns + m + 1;
        let rhs_col = width - 1;
        let mut tab = vec![vec![T::zero(); width]; m];
        for (i, (coeffs, _, rhs)) in self.rows.iter().enumerate() {
            let row = &mut tab[i];
            row[..n].copy_from_slice(coeffs);
            if let Some(s) = surplus.iter().position(|&r| r == i) {
                row[n + s] = -T::one();
            }
            row[rhs_col] = *rhs;
            if *rhs < T::zero() {
                for v in row.iter_mut() {
                    *v = -*v;
                }
            }
            row[n + ns + i] = T::one();
        }
        let mut basis: Vec<usize> = (0..m).map(|i| n + ns + i).collect();
        // reduced costs of the phase-one objective (sum of artificials)
        let mut cost = vec![T::zero(); width];
        for row in &tab {
            for j in 0..(n + ns) {
                cost[j] = cost[j] - row[j];
            }
            cost[rhs_col] = cost[rhs_col] - row[rhs_col];
        }
        let tol = pivot_tol::<T>();
        while let Some(enter) = (0..(n + ns + m)).find(|&j| cost[j] < -tol) {
            let mut leave: Option<(usize, T)> = None;
            for i in 0..m {
                let a = tab[i][enter];
                if a > tol {
                    let ratio = tab[i][rhs_col] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) if ratio < lr || (ratio == lr && basis[i] < basis[li]) => Some((i, ratio)),
                        keep => keep,
                    };
                }
            }
            // phase one is bounded below by zero
            let (p, _) = leave.expect("phase-one objective is bounded");
            let piv = tab[p][enter];
            for v in tab[p].iter_mut() {
                *v = *v / piv;
            }
            let prow = tab[p].clone();
            for (i, row) in tab.iter_mut().enumerate() {
                if i != p {
                    let f = row[enter];
                    if f != T::zero() {
                        for (v, &pv) in row.iter_mut().zip(&prow) {
                            *v = *v - f * pv;
                        }
                    }
                }
            }
            let f = cost[enter];
            for (v, &pv) in cost.iter_mut().zip(&prow) {
                *v = *v - f * pv;
            }
            basis[p] = enter;
        }
        let infeasibility = -cost[rhs_col];
        if infeasibility > feasibility_tol::<T>() {
            return None;
        }
        let mut x = vec![T::zero(); n];
        for (i, &b) in basis.iter().enumerate() {
            if b < n {
                x[b] = tab[i][rhs_col];
            }
        }
        Some(x)
    }
}
