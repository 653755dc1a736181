//! Convex quadratic programs with a diagonal cost.
//!
//! ```text
//! minimize    Σ_j w_j x_j² + c_j x_j
//! subject to  row_lower ≤ a_r·x ≤ row_upper     for every row r
//!             lower ≤ x ≤ upper
//! ```
//!
//! Variables with equal bounds are substituted out, ranged rows receive a
//! bounded slack, and the remaining equality-constrained problem is solved
//! by a Mehrotra predictor-corrector interior-point method on the normal
//! equations `A H⁻¹ Aᵀ`, factorized by [`ldl`].

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod ldl;

use thiserror::Error;

use ldl::{Slot, Symbolic};

#[derive(Debug, Clone, PartialEq)]
pub struct QpRow {
    pub terms: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QpProblem {
    /// Quadratic weights `w_j ≥ 0`.
    pub weights: Vec<f64>,
    pub linear: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<QpRow>,
}

impl QpProblem {
    pub fn num_vars(&self) -> usize {
        self.weights.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.weights.iter().zip(&self.linear))
            .map(|(&v, (&w, &c))| w * v * v + c * v)
            .sum()
    }

    /// Largest violation of any row or variable bound.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.rows {
            let ax: f64 = row.terms.iter().map(|&(j, a)| a * x[j]).sum();
            worst = worst.max(row.lower - ax).max(ax - row.upper);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub max_iterations: usize,
    /// Absolute tolerance on equality residuals, relative to `1 + ‖b‖∞`.
    pub primal_tolerance: f64,
    /// Tolerance on stationarity, relative to the gradient scale.
    pub dual_tolerance: f64,
    /// Tolerance on total complementarity, relative to `1 + |objective|`.
    pub gap_tolerance: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            max_iterations: 200,
            primal_tolerance: 1e-11,
            dual_tolerance: 1e-9,
            gap_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("problem is infeasible: {certificate}")]
    Infeasible { certificate: String },
    #[error("iteration limit {iterations} reached (primal residual {primal:.3e}, gap {gap:.3e})")]
    IterationLimit {
        iterations: usize,
        primal: f64,
        gap: f64,
    },
    #[error("numerical failure after {iterations} iterations")]
    Numerical { iterations: usize },
    #[error("malformed problem: {0}")]
    Malformed(String),
}

/// Equality-constrained problem over the free variables and row slacks.
#[derive(Debug, Clone)]
struct Reduced {
    /// Original variable index for free variables; `None` for slacks.
    origin: Vec<Option<usize>>,
    weights: Vec<f64>,
    linear: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Column-wise constraint matrix: `(row, coefficient)` per variable.
    columns: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

impl Reduced {
    fn rhs_norm(&self) -> f64 {
        self.rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Same constraints with an elastic variable per row and the original
    /// objective scaled down to a mere regularizer.
    fn elastic(&self) -> Reduced {
        let mut e = self.clone();
        for w in &mut e.weights {
            *w *= 1e-10;
        }
        for c in &mut e.linear {
            *c = 0.0;
        }
        for r in 0..self.rhs.len() {
            e.origin.push(None);
            e.weights.push(1.0);
            e.linear.push(0.0);
            e.lower.push(f64::NEG_INFINITY);
            e.upper.push(f64::INFINITY);
            e.columns.push(vec![(r, 1.0)]);
        }
        e
    }
}

fn presolve(p: &QpProblem) -> Result<(Reduced, Vec<f64>), QpError> {
    let n = p.num_vars();
    if p.linear.len() != n || p.lower.len() != n || p.upper.len() != n {
        return Err(QpError::Malformed("vector lengths differ".into()));
    }
    let mut full = vec![0.0; n];
    let mut map: Vec<Option<usize>> = vec![None; n];
    let mut red = Reduced {
        origin: Vec::new(),
        weights: Vec::new(),
        linear: Vec::new(),
        lower: Vec::new(),
        upper: Vec::new(),
        columns: Vec::new(),
        rhs: Vec::new(),
    };
    for j in 0..n {
        let (lo, hi, w) = (p.lower[j], p.upper[j], p.weights[j]);
        if lo.is_nan() || hi.is_nan() || !(w >= 0.0) || !w.is_finite() || !p.linear[j].is_finite()
        {
            return Err(QpError::Malformed(format!("variable {j} has invalid data")));
        }
        if lo > hi {
            return Err(QpError::Infeasible {
                certificate: format!("variable {j} has lower bound {lo} above upper bound {hi}"),
            });
        }
        if lo == hi {
            full[j] = lo;
        } else {
            map[j] = Some(red.origin.len());
            red.origin.push(Some(j));
            red.weights.push(w);
            red.linear.push(p.linear[j]);
            red.lower.push(lo);
            red.upper.push(hi);
            red.columns.push(Vec::new());
        }
    }
    for (r, row) in p.rows.iter().enumerate() {
        let mut shift = 0.0;
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for &(j, a) in &row.terms {
            if j >= n || !a.is_finite() {
                return Err(QpError::Malformed(format!("row {r} has an invalid term")));
            }
            match map[j] {
                Some(rj) => match terms.iter_mut().find(|(k, _)| *k == rj) {
                    Some(t) => t.1 += a,
                    None => terms.push((rj, a)),
                },
                None => shift += a * full[j],
            }
        }
        terms.retain(|&(_, a)| a != 0.0);
        let (lo, hi) = (row.lower - shift, row.upper - shift);
        if terms.is_empty() {
            let scale = 1e-9 * (1.0 + shift.abs());
            if lo > scale || hi < -scale {
                return Err(QpError::Infeasible {
                    certificate: format!(
                        "row {r} has no free variables but requires a value in [{}, {}] while its fixed terms sum to {shift}",
                        row.lower, row.upper
                    ),
                });
            }
            continue;
        }
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            continue;
        }
        let ri = red.rhs.len();
        if lo == hi {
            red.rhs.push(lo);
        } else {
            if lo > hi {
                return Err(QpError::Infeasible {
                    certificate: format!("row {r} has empty range"),
                });
            }
            red.rhs.push(0.0);
            red.origin.push(None);
            red.weights.push(0.0);
            red.linear.push(0.0);
            red.lower.push(lo);
            red.upper.push(hi);
            red.columns.push(vec![(ri, -1.0)]);
        }
        for (rj, a) in terms {
            red.columns[rj].push((ri, a));
        }
    }
    Ok((red, full))
}

/// Solves the problem to high accuracy or reports why it cannot.
pub fn solve(problem: &QpProblem, settings: &QpSettings) -> Result<QpSolution, QpError> {
    PreparedQp::new(problem.clone())?.solve(settings)
}

/// A problem with presolve and symbolic factorization done once, for
/// repeated solves that change only the linear cost.
pub struct PreparedQp {
    problem: QpProblem,
    fixed: Vec<f64>,
    ipm: Ipm,
}

impl PreparedQp {
    pub fn new(problem: QpProblem) -> Result<Self, QpError> {
        let (red, fixed) = presolve(&problem)?;
        Ok(PreparedQp {
            problem,
            fixed,
            ipm: Ipm::new(red),
        })
    }

    pub fn problem(&self) -> &QpProblem {
        &self.problem
    }

    /// Replaces the linear cost vector.
    pub fn set_linear(&mut self, linear: &[f64]) {
        assert_eq!(linear.len(), self.problem.num_vars());
        self.problem.linear.copy_from_slice(linear);
        for (k, origin) in self.ipm.red.origin.iter().enumerate() {
            if let Some(j) = origin {
                self.ipm.red.linear[k] = linear[*j];
            }
        }
    }

    pub fn solve(&self, settings: &QpSettings) -> Result<QpSolution, QpError> {
        let red = &self.ipm.red;
        let mut full = self.fixed.clone();
        let (xr, iterations) = if red.origin.is_empty() {
            (Vec::new(), 0)
        } else {
            match self.ipm.run(settings) {
                Err(e @ QpError::IterationLimit { primal, .. })
                    if primal > settings.primal_tolerance * (1.0 + red.rhs_norm()) =>
                {
                    // Stalled while still infeasible: measure how far the
                    // constraints are from being satisfiable.
                    match self.ipm.minimum_violation(settings) {
                        Some(v) if v > 1e-6 * (1.0 + red.rhs_norm()) => {
                            return Err(QpError::Infeasible {
                                certificate: format!(
                                    "no point within the variable bounds satisfies all rows; smallest achievable violation is {v:.6e}"
                                ),
                            })
                        }
                        _ => return Err(e),
                    }
                }
                other => other?,
            }
        };
        for (k, origin) in red.origin.iter().enumerate() {
            if let Some(j) = origin {
                full[*j] = xr[k];
            }
        }
        Ok(QpSolution {
            objective: self.problem.objective(&full),
            max_residual: self.problem.max_residual(&full),
            x: full,
            iterations,
        })
    }
}

struct Ipm {
    red: Reduced,
    sym: Symbolic,
    /// `(slot, variable, a_r * a_s)` contributions to `A H⁻¹ Aᵀ`.
    assembly: Vec<(Slot, usize, f64)>,
    has_lo: Vec<bool>,
    has_hi: Vec<bool>,
}

impl Ipm {
    fn new(red: Reduced) -> Self {
        let m = red.rhs.len();
        let mut entries = Vec::new();
        for col in &red.columns {
            for (a, &(r, _)) in col.iter().enumerate() {
                for &(s, _) in &col[..a] {
                    entries.push((r, s));
                }
            }
        }
        let sym = Symbolic::analyze(m, &entries);
        let mut assembly = Vec::new();
        for (j, col) in red.columns.iter().enumerate() {
            for (a, &(r, ar)) in col.iter().enumerate() {
                for &(s, as_) in &col[..=a] {
                    let slot = sym.slot(r, s).expect("pattern contains all products");
                    assembly.push((slot, j, ar * as_));
                }
            }
        }
        Ipm {
            has_lo: red.lower.iter().map(|v| v.is_finite()).collect(),
            has_hi: red.upper.iter().map(|v| v.is_finite()).collect(),
            red,
            sym,
            assembly,
        }
    }

    fn a_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.red.rhs.len()];
        for (j, col) in self.red.columns.iter().enumerate() {
            let xj = x[j];
            if xj != 0.0 {
                for &(r, a) in col {
                    out[r] += a * xj;
                }
            }
        }
        out
    }

    fn at_mul(&self, y: &[f64]) -> Vec<f64> {
        self.red
            .columns
            .iter()
            .map(|col| col.iter().map(|&(r, a)| a * y[r]).sum())
            .collect()
    }

    fn run(&self, settings: &QpSettings) -> Result<(Vec<f64>, usize), QpError> {
        let red = &self.red;
        let n = red.origin.len();
        let m = red.rhs.len();
        let nb = self.has_lo.iter().filter(|&&b| b).count()
            + self.has_hi.iter().filter(|&&b| b).count();

        let mut x = vec![0.0; n];
        for j in 0..n {
            let (lo, hi) = (red.lower[j], red.upper[j]);
            x[j] = match (self.has_lo[j], self.has_hi[j]) {
                (true, true) => {
                    let mid = 0.5 * (lo + hi);
                    let width = hi - lo;
                    if lo < 0.0 && hi > 0.0 {
                        0.0f64.clamp(lo + 0.25 * width, hi - 0.25 * width)
                    } else {
                        mid
                    }
                }
                (true, false) => lo.max(0.0) + 1.0,
                (false, true) => hi.min(0.0) - 1.0,
                (false, false) => 0.0,
            };
        }
        let mut y = vec![0.0; m];
        let mut zl: Vec<f64> = self.has_lo.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let mut zu: Vec<f64> = self.has_hi.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();

        let b_norm = red.rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let c_norm = red.linear.iter().fold(0.0f64, |a, v| a.max(v.abs()));

        let mut stalled = 0;
        let mut iterations = 0;
        for it in 0..settings.max_iterations {
            iterations = it + 1;
            let sl: Vec<f64> = (0..n)
                .map(|j| if self.has_lo[j] { x[j] - red.lower[j] } else { 1.0 })
                .collect();
            let su: Vec<f64> = (0..n)
                .map(|j| if self.has_hi[j] { red.upper[j] - x[j] } else { 1.0 })
                .collect();
            let ax = self.a_mul(&x);
            let rp: Vec<f64> = ax.iter().zip(&red.rhs).map(|(a, b)| a - b).collect();
            let aty = self.at_mul(&y);
            let grad: Vec<f64> = (0..n)
                .map(|j| 2.0 * red.weights[j] * x[j] + red.linear[j])
                .collect();
            let rd: Vec<f64> = (0..n).map(|j| grad[j] - aty[j] - zl[j] + zu[j]).collect();
            let comp: f64 = (0..n)
                .map(|j| {
                    (if self.has_lo[j] { sl[j] * zl[j] } else { 0.0 })
                        + (if self.has_hi[j] { su[j] * zu[j] } else { 0.0 })
                })
                .sum();
            let mu = if nb > 0 { comp / nb as f64 } else { 0.0 };

            let rp_norm = rp.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let rd_norm = rd.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let grad_norm = grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let obj: f64 = (0..n)
                .map(|j| red.weights[j] * x[j] * x[j] + red.linear[j] * x[j])
                .sum();
            if !(rp_norm.is_finite() && rd_norm.is_finite() && comp.is_finite()) {
                return Err(QpError::Numerical { iterations: it });
            }
            if rp_norm <= settings.primal_tolerance * (1.0 + b_norm)
                && rd_norm <= settings.dual_tolerance * (1.0 + c_norm + grad_norm)
                && comp <= settings.gap_tolerance * (1.0 + obj.abs())
            {
                let x = self.polish(&x, &sl, &su, &zl, &zu).unwrap_or(x);
                return Ok((x, it));
            }
            if it >= 8 {
                if let Some(cert) = self.farkas(&y, rp_norm) {
                    return Err(QpError::Infeasible { certificate: cert });
                }
            }

            // Normal equations.
            let h: Vec<f64> = (0..n)
                .map(|j| {
                    let mut v = 2.0 * red.weights[j];
                    if self.has_lo[j] {
                        v += zl[j] / sl[j];
                    }
                    if self.has_hi[j] {
                        v += zu[j] / su[j];
                    }
                    v.max(1e-12)
                })
                .collect();
            let mut diag = vec![0.0; m];
            let mut lower = vec![0.0; self.sym.nnz()];
            for &(slot, j, prod) in &self.assembly {
                let v = prod / h[j];
                match slot {
                    Slot::Diag(i) => diag[i] += v,
                    Slot::Off(k) => lower[k] += v,
                }
            }
            let max_diag = diag.iter().fold(0.0f64, |a, &v| a.max(v));
            let num = self.sym.factor(&diag, &lower, 1e-14 * max_diag.max(1e-300));

            let solve_dir = |rcl: &[f64], rcu: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
                let g: Vec<f64> = (0..n)
                    .map(|j| {
                        let mut v = -rd[j];
                        if self.has_lo[j] {
                            v += rcl[j] / sl[j];
                        }
                        if self.has_hi[j] {
                            v -= rcu[j] / su[j];
                        }
                        v
                    })
                    .collect();
                let hg: Vec<f64> = (0..n).map(|j| g[j] / h[j]).collect();
                let ahg = self.a_mul(&hg);
                let rhs: Vec<f64> = (0..m).map(|r| -rp[r] - ahg[r]).collect();
                let mut dy = self.sym.solve(&num, &rhs);
                // One step of iterative refinement against the assembled matrix.
                let resid = self.sym.multiply(&diag, &lower, &dy);
                let corr: Vec<f64> = (0..m).map(|r| rhs[r] - resid[r]).collect();
                let fix = self.sym.solve(&num, &corr);
                for r in 0..m {
                    dy[r] += fix[r];
                }
                let atdy = self.at_mul(&dy);
                let dx: Vec<f64> = (0..n).map(|j| (g[j] + atdy[j]) / h[j]).collect();
                let dzl: Vec<f64> = (0..n)
                    .map(|j| {
                        if self.has_lo[j] {
                            (rcl[j] - zl[j] * dx[j]) / sl[j]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let dzu: Vec<f64> = (0..n)
                    .map(|j| {
                        if self.has_hi[j] {
                            (rcu[j] + zu[j] * dx[j]) / su[j]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                (dx, dy, dzl, dzu)
            };

            let step_len = |dx: &[f64], dzl: &[f64], dzu: &[f64]| -> f64 {
                let mut alpha: f64 = 1.0;
                for j in 0..n {
                    if self.has_lo[j] {
                        if dx[j] < 0.0 {
                            alpha = alpha.min(-sl[j] / dx[j]);
                        }
                        if dzl[j] < 0.0 {
                            alpha = alpha.min(-zl[j] / dzl[j]);
                        }
                    }
                    if self.has_hi[j] {
                        if dx[j] > 0.0 {
                            alpha = alpha.min(su[j] / dx[j]);
                        }
                        if dzu[j] < 0.0 {
                            alpha = alpha.min(-zu[j] / dzu[j]);
                        }
                    }
                }
                alpha
            };

            let rcl_aff: Vec<f64> = (0..n).map(|j| -sl[j] * zl[j]).collect();
            let rcu_aff: Vec<f64> = (0..n).map(|j| -su[j] * zu[j]).collect();
            let (dx_a, _, dzl_a, dzu_a) = solve_dir(&rcl_aff, &rcu_aff);
            let (dx, dy, dzl, dzu) = if nb > 0 {
                let a_aff = step_len(&dx_a, &dzl_a, &dzu_a);
                let comp_aff: f64 = (0..n)
                    .map(|j| {
                        (if self.has_lo[j] {
                            (sl[j] + a_aff * dx_a[j]) * (zl[j] + a_aff * dzl_a[j])
                        } else {
                            0.0
                        }) + (if self.has_hi[j] {
                            (su[j] - a_aff * dx_a[j]) * (zu[j] + a_aff * dzu_a[j])
                        } else {
                            0.0
                        })
                    })
                    .sum();
                let mu_aff = comp_aff / nb as f64;
                let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
                let rcl: Vec<f64> = (0..n)
                    .map(|j| sigma * mu - sl[j] * zl[j] - dx_a[j] * dzl_a[j])
                    .collect();
                let rcu: Vec<f64> = (0..n)
                    .map(|j| sigma * mu - su[j] * zu[j] + dx_a[j] * dzu_a[j])
                    .collect();
                solve_dir(&rcl, &rcu)
            } else {
                solve_dir(&rcl_aff, &rcu_aff)
            };
            let clip = |a: f64| if a >= 1.0 && nb == 0 { 1.0 } else { (0.995 * a).min(1.0) };
            let comp_after = |dx: &[f64], dzl: &[f64], dzu: &[f64], a: f64| -> f64 {
                (0..n)
                    .map(|j| {
                        (if self.has_lo[j] {
                            (sl[j] + a * dx[j]) * (zl[j] + a * dzl[j])
                        } else {
                            0.0
                        }) + (if self.has_hi[j] {
                            (su[j] - a * dx[j]) * (zu[j] + a * dzu[j])
                        } else {
                            0.0
                        })
                    })
                    .sum()
            };
            let mut alpha = clip(step_len(&dx, &dzl, &dzu));
            let (mut dx, mut dy, mut dzl, mut dzu) = (dx, dy, dzl, dzu);
            // The second-order correction can make complementarity grow and
            // the iterates cycle; fall back to a plain centered step then.
            if nb > 0 && comp_after(&dx, &dzl, &dzu, alpha) > comp {
                let rcl: Vec<f64> = (0..n).map(|j| 0.3 * mu - sl[j] * zl[j]).collect();
                let rcu: Vec<f64> = (0..n).map(|j| 0.3 * mu - su[j] * zu[j]).collect();
                (dx, dy, dzl, dzu) = solve_dir(&rcl, &rcu);
                alpha = clip(step_len(&dx, &dzl, &dzu));
            }
            for j in 0..n {
                x[j] += alpha * dx[j];
                if self.has_lo[j] {
                    zl[j] = (zl[j] + alpha * dzl[j]).max(1e-300);
                }
                if self.has_hi[j] {
                    zu[j] = (zu[j] + alpha * dzu[j]).max(1e-300);
                }
            }
            for r in 0..m {
                y[r] += alpha * dy[r];
            }
            // Iterates jammed against a bound stop moving; hand over to the
            // active-set polish below.
            stalled = if alpha < 1e-10 { stalled + 1 } else { 0 };
            if stalled >= 5 {
                break;
            }
            // Keep iterates strictly interior despite rounding.
            for j in 0..n {
                if self.has_lo[j] && x[j] <= red.lower[j] {
                    x[j] = red.lower[j] + 1e-14 * (1.0 + red.lower[j].abs());
                }
                if self.has_hi[j] && x[j] >= red.upper[j] {
                    x[j] = red.upper[j] - 1e-14 * (1.0 + red.upper[j].abs());
                }
            }
        }

        let sl: Vec<f64> = (0..n)
            .map(|j| if self.has_lo[j] { x[j] - red.lower[j] } else { 1.0 })
            .collect();
        let su: Vec<f64> = (0..n)
            .map(|j| if self.has_hi[j] { red.upper[j] - x[j] } else { 1.0 })
            .collect();
        // The polish verifies optimality itself, so its answer is safe to
        // return even though the interior-point run did not converge.
        if let Some(xp) = self.polish(&x, &sl, &su, &zl, &zu) {
            return Ok((xp, iterations));
        }
        let comp: f64 = (0..n)
            .map(|j| {
                (if self.has_lo[j] { sl[j] * zl[j] } else { 0.0 })
                    + (if self.has_hi[j] { su[j] * zu[j] } else { 0.0 })
            })
            .sum();
        let ax = self.a_mul(&x);
        let primal = ax
            .iter()
            .zip(&red.rhs)
            .fold(0.0f64, |a, (v, b)| a.max((v - b).abs()));
        if let Some(cert) = self.farkas(&y, primal) {
            return Err(QpError::Infeasible { certificate: cert });
        }
        Err(QpError::IterationLimit {
            iterations,
            primal,
            gap: comp,
        })
    }

    /// Refines a converged iterate by fixing the bounds it identifies as
    /// active and solving the remaining equality-constrained problem with
    /// proximal iterations. Returns `None` when the guess does not verify.
    fn polish(&self, x: &[f64], sl: &[f64], su: &[f64], zl: &[f64], zu: &[f64]) -> Option<Vec<f64>> {
        let red = &self.red;
        let n = red.origin.len();
        let m = red.rhs.len();
        let mut fixed: Vec<Option<f64>> = vec![None; n];
        for j in 0..n {
            if self.has_lo[j] && sl[j] < zl[j] {
                fixed[j] = Some(red.lower[j]);
            } else if self.has_hi[j] && su[j] < zu[j] {
                fixed[j] = Some(red.upper[j]);
            }
        }
        let wmax = red.weights.iter().fold(1.0f64, |a, &w| a.max(2.0 * w));
        let delta = 1e-7 * wmax;
        let inv_h: Vec<f64> = (0..n)
            .map(|j| match fixed[j] {
                Some(_) => 0.0,
                None => 1.0 / (2.0 * red.weights[j] + delta),
            })
            .collect();
        let mut diag = vec![0.0; m];
        let mut lower = vec![0.0; self.sym.nnz()];
        for &(slot, j, prod) in &self.assembly {
            let v = prod * inv_h[j];
            match slot {
                Slot::Diag(i) => diag[i] += v,
                Slot::Off(k) => lower[k] += v,
            }
        }
        let max_diag = diag.iter().fold(0.0f64, |a, &v| a.max(v));
        let num = self.sym.factor(&diag, &lower, 1e-13 * max_diag.max(1e-300));

        let mut xk: Vec<f64> = (0..n).map(|j| fixed[j].unwrap_or(x[j])).collect();
        let mut y = vec![0.0; m];
        for _ in 0..30 {
            // x = H⁻¹(Aᵀy − c + δ x_k) on free variables, with A x = b.
            let q: Vec<f64> = (0..n)
                .map(|j| match fixed[j] {
                    Some(_) => 0.0,
                    None => (delta * xk[j] - red.linear[j]) * inv_h[j],
                })
                .collect();
            let fixed_part: Vec<f64> = (0..n).map(|j| fixed[j].unwrap_or(0.0)).collect();
            let aq = self.a_mul(&q);
            let af = self.a_mul(&fixed_part);
            let rhs: Vec<f64> = (0..m).map(|r| red.rhs[r] - af[r] - aq[r]).collect();
            y = self.sym.solve(&num, &rhs);
            for _ in 0..2 {
                let back = self.sym.multiply(&diag, &lower, &y);
                let corr: Vec<f64> = (0..m).map(|r| rhs[r] - back[r]).collect();
                let fix = self.sym.solve(&num, &corr);
                for r in 0..m {
                    y[r] += fix[r];
                }
            }
            let aty = self.at_mul(&y);
            let next: Vec<f64> = (0..n)
                .map(|j| match fixed[j] {
                    Some(v) => v,
                    None => q[j] + aty[j] * inv_h[j],
                })
                .collect();
            let change = next
                .iter()
                .zip(&xk)
                .fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
            xk = next;
            if change <= 1e-14 * (1.0 + xk.iter().fold(0.0f64, |a, v| a.max(v.abs()))) {
                break;
            }
        }

        // Verify primal feasibility and multiplier signs.
        let scale = 1.0 + xk.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for j in 0..n {
            if fixed[j].is_none()
                && (xk[j] < red.lower[j] - 1e-12 * scale || xk[j] > red.upper[j] + 1e-12 * scale)
            {
                return None;
            }
        }
        let ax = self.a_mul(&xk);
        let b_norm = red.rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if ax
            .iter()
            .zip(&red.rhs)
            .any(|(a, b)| (a - b).abs() > 1e-10 * (1.0 + b_norm))
        {
            return None;
        }
        let aty = self.at_mul(&y);
        let gscale = 1.0
            + (0..n)
                .map(|j| (2.0 * red.weights[j] * xk[j] + red.linear[j]).abs())
                .fold(0.0f64, f64::max);
        for j in 0..n {
            if let Some(v) = fixed[j] {
                let z = 2.0 * red.weights[j] * v + red.linear[j] - aty[j];
                let at_lower = self.has_lo[j] && v == red.lower[j];
                if (at_lower && z < -1e-7 * gscale) || (!at_lower && z > 1e-7 * gscale) {
                    return None;
                }
            }
        }
        for j in 0..n {
            xk[j] = xk[j].clamp(red.lower[j], red.upper[j]);
        }
        Some(xk)
    }

    /// Largest row violation at the least-squares feasible point, or `None`
    /// if that problem cannot be solved either.
    fn minimum_violation(&self, settings: &QpSettings) -> Option<f64> {
        let m = self.red.rhs.len();
        let elastic = Ipm::new(self.red.elastic());
        let n0 = elastic.red.origin.len() - m;
        let (x, _) = elastic.run(settings).ok()?;
        Some(x[n0..].iter().fold(0.0f64, |a, v| a.max(v.abs())))
    }

    /// Checks whether the normalized equality multipliers prove that
    /// `A x = b` has no solution inside the variable bounds.
    fn farkas(&self, y: &[f64], primal_residual: f64) -> Option<String> {
        let red = &self.red;
        let ymax = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(ymax > 1e8) || primal_residual < 1e-8 {
            return None;
        }
        let yh: Vec<f64> = y.iter().map(|v| v / ymax).collect();
        let t = self.at_mul(&yh);
        let mut sup = 0.0;
        for (j, &tj) in t.iter().enumerate() {
            if tj.abs() <= 1e-9 {
                continue;
            }
            let bound = if tj > 0.0 { red.upper[j] } else { red.lower[j] };
            if !bound.is_finite() {
                return None;
            }
            sup += tj * bound;
        }
        let yb: f64 = yh.iter().zip(&red.rhs).map(|(a, b)| a * b).sum();
        // y·Ax ≤ sup for every x in the box, yet y·b exceeds it.
        let inf = {
            let mut inf = 0.0;
            for (j, &tj) in t.iter().enumerate() {
                if tj.abs() <= 1e-9 {
                    continue;
                }
                let bound = if tj > 0.0 { red.lower[j] } else { red.upper[j] };
                inf += tj * bound;
            }
            inf
        };
        let margin = 1e-7 * (1.0 + yb.abs());
        if yb > sup + margin {
            Some(format!(
                "multiplier combination requires {yb:.6e} but bounds allow at most {sup:.6e}"
            ))
        } else if yb < inf - margin {
            Some(format!(
                "multiplier combination requires {yb:.6e} but bounds allow at least {inf:.6e}"
            ))
        } else {
            None
        }
    }
}
