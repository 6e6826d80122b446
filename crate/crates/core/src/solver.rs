//! Small dense solvers for box constraints on a low-dimensional affine
//! image.
//!
//! The trajectory optimizer repeatedly solves
//!
//! ```text
//! minimize   ½ ‖(b + Eα) − r‖²_W
//! subject to l ≤ b + Eα ≤ u
//! ```
//!
//! with `E` a 7×4 or 7×5 null-space basis, so `α` has at most five entries
//! and there are at most fourteen one-sided constraints. At this size an
//! exact primal active-set method (with an alternating-projection feasible
//! start and an exact LP fallback) is both faster and more reliable than a
//! general-purpose iterative solver. The LP itself is solved by enumerating
//! candidate vertices, which is exact for these dimensions.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("constraints admit no feasible point")]
    Infeasible,
    #[error("active-set iteration limit reached")]
    IterationLimit,
}

/// Which side of a box row a constraint touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Lower,
    Upper,
}

/// Solution of [`solve_box_qp`], including enough of the KKT system to
/// audit optimality externally.
#[derive(Debug, Clone)]
pub struct BoxQpSolution {
    /// Minimizer in the null-space coordinates.
    pub alpha: DVector<f64>,
    /// `b + E·alpha`.
    pub x: DVector<f64>,
    /// Active box rows at the solution.
    pub active: Vec<(usize, Bound)>,
    /// Lagrange multipliers, one per `active` entry, all ≥ 0.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

const FEAS_TOL: f64 = 1e-9;
const STEP_TOL: f64 = 1e-11;
const DUAL_TOL: f64 = 1e-10;

/// Iterate over all `k`-subsets of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if f(&idx) {
            return;
        }
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exact solver for `maximize cᵀz  s.t.  A z ≤ d` when the optimum is
/// attained at a vertex (bounded, pointed feasible set).
///
/// Enumerates every subset of `dim(z)` rows, solves the corresponding
/// square system and keeps the best feasible candidate. Exact (up to
/// roundoff) for the handful-of-rows problems this crate generates.
pub fn vertex_lp(
    a: &DMatrix<f64>,
    d: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<(DVector<f64>, f64), SolverError> {
    let rows = a.nrows();
    let dim = a.ncols();
    assert_eq!(d.len(), rows);
    assert_eq!(c.len(), dim);
    let mut best: Option<(DVector<f64>, f64)> = None;
    for_each_combination(rows, dim, |subset| {
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for (k, &i) in subset.iter().enumerate() {
            m.row_mut(k).copy_from(&a.row(i));
            rhs[k] = d[i];
        }
        if let Some(z) = m.lu().solve(&rhs) {
            if z.iter().all(|v| v.is_finite()) {
                let slack = a * &z - d;
                if slack.max() <= FEAS_TOL {
                    let obj = c.dot(&z);
                    if best.as_ref().map_or(true, |(_, b)| obj > *b) {
                        best = Some((z, obj));
                    }
                }
            }
        }
        false
    });
    best.ok_or(SolverError::Infeasible)
}

/// Feasibility phase: find `alpha` minimizing the worst box violation of
/// `b + E·alpha`. Returns `(alpha, worst_violation)`.
fn phase1(
    e: &DMatrix<f64>,
    b: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<(DVector<f64>, f64), SolverError> {
    let rows = e.nrows();
    let dim = e.ncols();
    // Variables z = (alpha, s); minimize s subject to
    //   E alpha - s·1 ≤ u - b   and   -E alpha - s·1 ≤ b - l.
    let mut a = DMatrix::<f64>::zeros(2 * rows, dim + 1);
    let mut d = DVector::<f64>::zeros(2 * rows);
    for i in 0..rows {
        for j in 0..dim {
            a[(i, j)] = e[(i, j)];
            a[(rows + i, j)] = -e[(i, j)];
        }
        a[(i, dim)] = -1.0;
        a[(rows + i, dim)] = -1.0;
        d[i] = upper[i] - b[i];
        d[rows + i] = b[i] - lower[i];
    }
    let mut c = DVector::<f64>::zeros(dim + 1);
    c[dim] = -1.0;
    let (z, _) = vertex_lp(&a, &d, &c)?;
    let alpha = DVector::from_fn(dim, |i, _| z[i]);
    Ok((alpha, z[dim]))
}

/// Cheap feasible-start attempt: alternate between clamping into the box
/// and projecting back onto the affine image. Converges geometrically when
/// the intersection is nonempty; returns `None` when it stalls (the exact
/// phase-1 LP then decides).
fn alternating_projections(
    e: &DMatrix<f64>,
    b: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    alpha0: &DVector<f64>,
) -> Option<DVector<f64>> {
    let gram = e.transpose() * e;
    let chol = gram.cholesky()?;
    let mut alpha = alpha0.clone();
    for _ in 0..500 {
        let x = b + e * &alpha;
        let clamped = DVector::from_fn(x.len(), |i, _| x[i].clamp(lower[i], upper[i]));
        if (&clamped - &x).amax() <= FEAS_TOL * 0.1 {
            return Some(alpha);
        }
        alpha = chol.solve(&(e.transpose() * (clamped - b)));
    }
    let x = b + e * &alpha;
    let viol = (0..x.len())
        .map(|i| (lower[i] - x[i]).max(x[i] - upper[i]).max(0.0))
        .fold(0.0, f64::max);
    if viol <= FEAS_TOL * 0.1 {
        Some(alpha)
    } else {
        None
    }
}

/// Minimize `½‖(b + Eα) − r‖²_W` subject to `l ≤ b + Eα ≤ u`.
///
/// `w` holds the diagonal of the (positive) weight matrix. `E` must have
/// full column rank. Exact active-set method; returns the multipliers of
/// the active rows so callers can audit the KKT conditions.
pub fn solve_box_qp(
    e: &DMatrix<f64>,
    b: &DVector<f64>,
    r: &DVector<f64>,
    w: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<BoxQpSolution, SolverError> {
    let rows = e.nrows();
    let dim = e.ncols();
    assert!(dim >= 1 && dim < rows);

    for i in 0..rows {
        if lower[i] > upper[i] + FEAS_TOL {
            return Err(SolverError::Infeasible);
        }
    }

    // Split rows the basis can influence from rows it cannot: a zero row of
    // E turns the box constraint into a plain feasibility check on b.
    let mut live_rows = Vec::with_capacity(rows);
    for i in 0..rows {
        if e.row(i).amax() > 1e-14 {
            live_rows.push(i);
        } else if b[i] < lower[i] - FEAS_TOL || b[i] > upper[i] + FEAS_TOL {
            return Err(SolverError::Infeasible);
        }
    }

    // Quadratic form: f(α) = ½ αᵀGα + gᵀα + const.
    let we = DMatrix::from_fn(rows, dim, |i, j| w[i] * e[(i, j)]);
    let big_g = e.transpose() * &we;
    let g_lin = we.transpose() * (b - r);
    let chol = big_g
        .clone()
        .cholesky()
        .expect("E must have full column rank and W must be positive");

    // Constraint rows aᵀα ≤ c: (row, side) with a = ±E_row.
    let cons: Vec<(usize, Bound)> = live_rows
        .iter()
        .flat_map(|&i| [(i, Bound::Upper), (i, Bound::Lower)])
        .collect();
    let con_vec = |&(i, side): &(usize, Bound)| -> DVector<f64> {
        let mut a = DVector::<f64>::zeros(dim);
        for j in 0..dim {
            a[j] = match side {
                Bound::Upper => e[(i, j)],
                Bound::Lower => -e[(i, j)],
            };
        }
        a
    };
    let con_rhs = |&(i, side): &(usize, Bound)| -> f64 {
        match side {
            Bound::Upper => upper[i] - b[i],
            Bound::Lower => b[i] - lower[i],
        }
    };

    // Start from the unconstrained minimizer when feasible, otherwise
    // restore feasibility (cheap path first, exact LP as arbiter).
    let mut alpha = chol.solve(&(-&g_lin));
    let violated = cons
        .iter()
        .any(|ci| con_vec(ci).dot(&alpha) > con_rhs(ci) + FEAS_TOL);
    let mut iterations = 0usize;
    if violated {
        alpha = match alternating_projections(e, b, lower, upper, &alpha) {
            Some(a) => a,
            None => {
                let (a, worst) = phase1(e, b, lower, upper)?;
                if worst > FEAS_TOL {
                    return Err(SolverError::Infeasible);
                }
                a
            }
        };
    } else {
        return Ok(BoxQpSolution {
            x: b + e * &alpha,
            alpha,
            active: Vec::new(),
            duals: Vec::new(),
            iterations,
        });
    }

    // Working set: active rows at the start point, kept linearly
    // independent by construction (a blocking row always has aᵀp > 0 while
    // working rows have aᵀp = 0).
    let mut working: Vec<usize> = Vec::new();
    for (ci, con) in cons.iter().enumerate() {
        if working.len() >= dim {
            break;
        }
        if (con_vec(con).dot(&alpha) - con_rhs(con)).abs() <= FEAS_TOL {
            // Greedy independence check against the current working set.
            let mut m = DMatrix::<f64>::zeros(working.len() + 1, dim);
            for (k, &wi) in working.iter().enumerate() {
                m.row_mut(k).copy_from(&con_vec(&cons[wi]).transpose());
            }
            m.row_mut(working.len())
                .copy_from(&con_vec(con).transpose());
            let rank = m.svd(false, false).rank(1e-10);
            if rank == working.len() + 1 {
                working.push(ci);
            }
        }
    }

    for _ in 0..200 {
        iterations += 1;
        // Equality-constrained step: KKT system in (p, λ).
        let nw = working.len();
        let mut kkt = DMatrix::<f64>::zeros(dim + nw, dim + nw);
        kkt.view_mut((0, 0), (dim, dim)).copy_from(&big_g);
        for (k, &wi) in working.iter().enumerate() {
            let a = con_vec(&cons[wi]);
            for j in 0..dim {
                kkt[(dim + k, j)] = a[j];
                kkt[(j, dim + k)] = a[j];
            }
        }
        let mut rhs = DVector::<f64>::zeros(dim + nw);
        let grad = &big_g * &alpha + &g_lin;
        for j in 0..dim {
            rhs[j] = -grad[j];
        }
        let sol = kkt.lu().solve(&rhs).ok_or(SolverError::IterationLimit)?;
        let p = DVector::from_fn(dim, |i, _| sol[i]);
        let lambda = DVector::from_fn(nw, |i, _| sol[dim + i]);

        if p.amax() <= STEP_TOL {
            // Stationary on the working set; check the multipliers.
            let (mut worst, mut worst_k) = (-DUAL_TOL, None);
            for k in 0..nw {
                if lambda[k] < worst {
                    worst = lambda[k];
                    worst_k = Some(k);
                }
            }
            match worst_k {
                Some(k) => {
                    working.remove(k);
                }
                None => {
                    let active: Vec<(usize, Bound)> =
                        working.iter().map(|&wi| cons[wi]).collect();
                    let duals: Vec<f64> = (0..nw).map(|k| lambda[k].max(0.0)).collect();
                    return Ok(BoxQpSolution {
                        x: b + e * &alpha,
                        alpha,
                        active,
                        duals,
                        iterations,
                    });
                }
            }
        } else {
            // Longest step along p that stays feasible.
            let mut step = 1.0f64;
            let mut blocking = None;
            for (ci, con) in cons.iter().enumerate() {
                if working.contains(&ci) {
                    continue;
                }
                let ap = con_vec(con).dot(&p);
                if ap > 1e-12 {
                    let room = con_rhs(con) - con_vec(con).dot(&alpha);
                    let t = (room / ap).max(0.0);
                    if t < step {
                        step = t;
                        blocking = Some(ci);
                    }
                }
            }
            alpha += step * &p;
            if let Some(ci) = blocking {
                working.push(ci);
            }
        }
    }
    Err(SolverError::IterationLimit)
}

/// Maximum violation / KKT residual report for a [`BoxQpSolution`]; used
/// by tests to audit optimality independently of the solver internals.
pub fn kkt_residual(
    sol: &BoxQpSolution,
    e: &DMatrix<f64>,
    b: &DVector<f64>,
    r: &DVector<f64>,
    w: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> f64 {
    let rows = e.nrows();
    let dim = e.ncols();
    // Consistency of the reported point with its coordinates.
    let recomposed = b + e * &sol.alpha;
    let mut grad = e.transpose() * DVector::from_fn(rows, |i, _| w[i] * (sol.x[i] - r[i]));
    for (k, &(i, side)) in sol.active.iter().enumerate() {
        let s = match side {
            Bound::Upper => 1.0,
            Bound::Lower => -1.0,
        };
        for j in 0..dim {
            grad[j] += sol.duals[k] * s * e[(i, j)];
        }
    }
    let mut res = grad.amax();
    for i in 0..rows {
        res = res.max((recomposed[i] - sol.x[i]).abs());
        res = res.max(lower[i] - sol.x[i]).max(sol.x[i] - upper[i]);
    }
    for (k, &(i, side)) in sol.active.iter().enumerate() {
        let gap = match side {
            Bound::Upper => upper[i] - sol.x[i],
            Bound::Lower => sol.x[i] - lower[i],
        };
        res = res.max((sol.duals[k] * gap).abs());
        res = res.max(-sol.duals[k]);
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dvec(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    /// E = [I4; 0]: the basis controls the first four coordinates directly.
    fn simple_basis() -> DMatrix<f64> {
        DMatrix::from_fn(7, 4, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn unconstrained_minimizer_inside_box() {
        let e = simple_basis();
        let b = dvec(&[0.2, -0.1, 0.3, 0.0, 0.5, -0.5, 0.1]);
        let r = dvec(&[0.0; 7]);
        let w = dvec(&[1.0; 7]);
        let lo = dvec(&[-1.0; 7]);
        let hi = dvec(&[1.0; 7]);
        let sol = solve_box_qp(&e, &b, &r, &w, &lo, &hi).unwrap();
        // Free coordinates are driven to the target exactly.
        for i in 0..4 {
            assert!((sol.x[i]).abs() < 1e-12);
        }
        assert!(sol.active.is_empty());
        assert!(kkt_residual(&sol, &e, &b, &r, &w, &lo, &hi) < 1e-10);
    }

    #[test]
    fn binding_bound_produces_nonnegative_dual() {
        let e = simple_basis();
        let b = dvec(&[0.0; 7]);
        let r = dvec(&[0.0; 7]);
        let w = dvec(&[1.0; 7]);
        let mut lo = dvec(&[-1.0; 7]);
        lo[0] = 0.5; // forces x0 ≥ 0.5 while the objective wants x0 = 0
        let hi = dvec(&[1.0; 7]);
        let sol = solve_box_qp(&e, &b, &r, &w, &lo, &hi).unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-10, "x0 must sit on its bound");
        assert_eq!(sol.active, vec![(0, Bound::Lower)]);
        assert!(sol.duals[0] > 0.0);
        assert!(kkt_residual(&sol, &e, &b, &r, &w, &lo, &hi) < 1e-10);
    }

    #[test]
    fn dead_row_violation_is_infeasible() {
        let e = simple_basis(); // rows 4..7 are zero
        let mut b = dvec(&[0.0; 7]);
        b[6] = 2.0; // twice the bound on a row the basis cannot touch
        let r = dvec(&[0.0; 7]);
        let w = dvec(&[1.0; 7]);
        let lo = dvec(&[-1.0; 7]);
        let hi = dvec(&[1.0; 7]);
        assert_eq!(
            solve_box_qp(&e, &b, &r, &w, &lo, &hi).unwrap_err(),
            SolverError::Infeasible
        );
    }

    #[test]
    fn crossed_bounds_are_infeasible() {
        let e = simple_basis();
        let z = dvec(&[0.0; 7]);
        let w = dvec(&[1.0; 7]);
        let lo = dvec(&[1.0; 7]);
        let hi = dvec(&[-1.0; 7]);
        assert_eq!(
            solve_box_qp(&e, &z, &z, &w, &lo, &hi).unwrap_err(),
            SolverError::Infeasible
        );
    }

    #[test]
    fn lp_finds_box_corner() {
        // maximize x + 2y on the unit box.
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let d = dvec(&[1.0, 1.0, 1.0, 1.0]);
        let c = dvec(&[1.0, 2.0]);
        let (z, obj) = vertex_lp(&a, &d, &c).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-12);
        assert!((z[1] - 1.0).abs() < 1e-12);
        assert!((obj - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lp_detects_empty_polytope() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let d = dvec(&[-1.0, -1.0]); // x ≤ -1 and x ≥ 1
        let c = dvec(&[1.0]);
        assert_eq!(vertex_lp(&a, &d, &c).unwrap_err(), SolverError::Infeasible);
    }

    #[test]
    fn combinations_cover_all_subsets() {
        let mut count = 0;
        for_each_combination(6, 3, |s| {
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            count += 1;
            false
        });
        assert_eq!(count, 20);
    }
}
