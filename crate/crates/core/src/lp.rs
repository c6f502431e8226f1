//! Dense bounded-variable primal simplex for small equality-form LPs:
//!
//! maximize c·x subject to A x = b and l ≤ x ≤ u (u may be +∞, l finite).
//!
//! Phase 1 starts every variable at its lower bound and covers the row
//! residuals with artificial variables. Pricing is Dantzig's largest reduced
//! cost; after a run of degenerate pivots the solver switches to Bland's rule
//! for the rest of the phase, which rules out cycling. All ties break on the
//! lowest variable index, so the pivot sequence is fully deterministic.

use thiserror::Error;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const DEGENERATE_RUN: usize = 50;
const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("infeasible: phase-1 residual {residual:.3e}")]
    Infeasible { residual: f64 },
    #[error("unbounded objective")]
    Unbounded,
    #[error("iteration limit reached")]
    IterationLimit,
    #[error("malformed program: {0}")]
    Malformed(String),
}

/// A sparse equality row Σ coeffs·x = rhs.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    /// Adds a variable with bounds and objective coefficient; returns its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(Row { coeffs, rhs });
    }

    pub fn vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed("bound vectors differ in length".into()));
        }
        for j in 0..n {
            if !self.lower[j].is_finite() || self.upper[j] < self.lower[j] || self.upper[j].is_nan() {
                return Err(LpError::Malformed(format!(
                    "variable {j} has bounds [{}, {}]",
                    self.lower[j], self.upper[j]
                )));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() || row.coeffs.iter().any(|&(j, a)| j >= n || !a.is_finite()) {
                return Err(LpError::Malformed("row references a bad variable or value".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// rows × cols, row-major: B⁻¹·[A | I·sign].
    t: Vec<f64>,
    /// Reduced costs of the current phase objective.
    d: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Moved { degenerate: bool },
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.cols + c]
    }

    fn set_costs(&mut self, cost: &[f64]) {
        self.d.clear();
        self.d.extend_from_slice(cost);
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * self.cols..(r + 1) * self.cols];
                for (dj, &a) in self.d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    /// Entering variable and direction (+1 increase, −1 decrease).
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols {
            if self.is_basic[j] || self.upper[j] - self.lower[j] <= 0.0 {
                continue;
            }
            let dj = self.d[j];
            let dir = if dj > COST_TOL && self.x[j] < self.upper[j] {
                1.0
            } else if dj < -COST_TOL && self.x[j] > self.lower[j] {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, score)| dj.abs() > score) {
                best = Some((j, dir, dj.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn step(&mut self, bland: bool) -> Step {
        let Some((j, dir)) = self.price(bland) else {
            return Step::Optimal;
        };
        // Moving x_j by dir·θ changes basic r by −dir·θ·t[r][j].
        let mut theta = self.upper[j] - self.lower[j];
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let alpha = dir * self.at(r, j);
            let b = self.basis[r];
            let limit = if alpha > PIVOT_TOL {
                (self.x[b] - self.lower[b]) / alpha
            } else if alpha < -PIVOT_TOL {
                if self.upper[b].is_infinite() {
                    continue;
                }
                (self.upper[b] - self.x[b]) / -alpha
            } else {
                continue;
            };
            let limit = limit.max(0.0);
            let better = limit < theta - 1e-12
                || leave.is_some_and(|(lr, _)| limit <= theta + 1e-12 && b < self.basis[lr]);
            if better {
                theta = limit;
                leave = Some((r, alpha));
            }
        }
        if theta.is_infinite() {
            return Step::Unbounded;
        }
        self.iterations += 1;
        for r in 0..self.rows {
            let b = self.basis[r];
            self.x[b] -= dir * theta * self.at(r, j);
        }
        self.x[j] += dir * theta;
        let Some((r, alpha)) = leave else {
            // bound flip
            self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
            return Step::Moved {
                degenerate: theta == 0.0,
            };
        };
        let out = self.basis[r];
        self.x[out] = if alpha > 0.0 { self.lower[out] } else { self.upper[out] };
        self.pivot(r, j);
        Step::Moved {
            degenerate: theta <= 1e-12,
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let p = self.at(r, j);
        for v in &mut self.t[r * cols..(r + 1) * cols] {
            *v /= p;
        }
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for row in before.chunks_exact_mut(cols).chain(after.chunks_exact_mut(cols)) {
            let f = row[j];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[j] = 0.0;
            }
        }
        let f = self.d[j];
        if f != 0.0 {
            for (v, &pv) in self.d.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            self.d[j] = 0.0;
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[j] = true;
        self.basis[r] = j;
    }

    fn run(&mut self) -> Result<(), LpError> {
        let mut bland = false;
        let mut degenerate = 0;
        loop {
            if self.iterations >= MAX_ITERATIONS {
                return Err(LpError::IterationLimit);
            }
            match self.step(bland) {
                Step::Optimal => return Ok(()),
                Step::Unbounded => return Err(LpError::Unbounded),
                Step::Moved { degenerate: true } => {
                    degenerate += 1;
                    if degenerate >= DEGENERATE_RUN && !bland {
                        log::trace!("simplex: switching to Bland's rule at iteration {}", self.iterations);
                        bland = true;
                    }
                }
                Step::Moved { degenerate: false } => degenerate = 0,
            }
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.vars();
    let m = lp.rows.len();
    let cols = n + m;
    let mut x: Vec<f64> = lp.lower.clone();
    x.resize(cols, 0.0);

    let mut t = vec![0.0; m * cols];
    for (r, row) in lp.rows.iter().enumerate() {
        let mut residual = row.rhs;
        for &(j, a) in &row.coeffs {
            t[r * cols + j] += a;
            residual -= a * lp.lower[j];
        }
        // artificial column r makes the start basic-feasible
        let sign = if residual < 0.0 { -1.0 } else { 1.0 };
        if sign < 0.0 {
            for v in &mut t[r * cols..r * cols + n] {
                *v = -*v;
            }
        }
        t[r * cols + n + r] = 1.0;
        x[n + r] = residual.abs();
    }

    let mut lower = lp.lower.clone();
    lower.resize(cols, 0.0);
    let mut upper = lp.upper.clone();
    upper.resize(cols, f64::INFINITY);
    let mut tab = Tableau {
        rows: m,
        cols,
        t,
        d: Vec::with_capacity(cols),
        basis: (n..cols).collect(),
        is_basic: (0..cols).map(|j| j >= n).collect(),
        x,
        lower,
        upper,
        iterations: 0,
    };

    let mut phase1 = vec![0.0; cols];
    for c in &mut phase1[n..] {
        *c = -1.0;
    }
    tab.set_costs(&phase1);
    tab.run()?;
    let residual: f64 = tab.x[n..].iter().sum();
    let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
    if residual > FEAS_TOL * scale {
        log::debug!("simplex: infeasible after {} iterations, residual {residual:.3e}", tab.iterations);
        return Err(LpError::Infeasible { residual });
    }
    let phase1_iterations = tab.iterations;
    for a in n..cols {
        tab.upper[a] = 0.0;
        if !tab.is_basic[a] {
            tab.x[a] = 0.0;
        }
    }

    let mut cost = lp.objective.clone();
    cost.resize(cols, 0.0);
    tab.set_costs(&cost);
    tab.run()?;

    let mut xs = tab.x[..n].to_vec();
    for (j, v) in xs.iter_mut().enumerate() {
        *v = v.clamp(lp.lower[j], lp.upper[j]);
    }
    let objective = lp.objective.iter().zip(&xs).map(|(c, v)| c * v).sum();
    log::debug!(
        "simplex: {} rows, {} vars, {} + {} iterations, objective {:.9}",
        m,
        n,
        phase1_iterations,
        tab.iterations - phase1_iterations,
        tab.objective(&cost)
    );
    Ok(LpSolution {
        x: xs,
        objective,
        iterations: tab.iterations,
    })
}
