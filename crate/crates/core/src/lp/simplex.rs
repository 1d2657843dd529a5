//! Two-phase primal simplex on a dense bounded-variable tableau.
//!
//! Columns are the shifted structurals `y = x − lower`, one slack per `≤`
//! row and one artificial per row that has no feasible unit column. Pricing
//! is Dantzig's largest reduced cost; after a run of degenerate pivots the
//! solver falls back to Bland's smallest-index rule until progress resumes.
//! The tableau is rebuilt from the original rows at phase ends and
//! periodically to bound round-off drift.

use log::{debug, trace};

use super::{check_feasible, LpError, StandardLp};

/// Tolerances and limits of [`solve_lp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub pivot_tol: f64,
    /// Overrides the default cap of `50·(num_vars + num_rows)` pivots.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            pivot_tol: 1e-9,
            max_iterations: None,
        }
    }
}

impl SolverOptions {
    pub fn with_feas_tol(feas_tol: f64) -> Self {
        Self {
            feas_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Present iff `status == Optimal`.
    pub x: Option<Vec<f64>>,
    /// Present iff `status == Optimal`; includes the objective offset.
    pub objective_value: Option<f64>,
    pub iterations: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        Self {
            status,
            x: None,
            objective_value: None,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Consecutive degenerate pivots before Bland's rule takes over.
const DEGENERACY_LIMIT: usize = 30;
/// Pivots between tableau rebuilds.
const REINVERT_EVERY: usize = 150;
/// Entries below this magnitude are flushed to zero after a pivot.
const DROP_TOL: f64 = 1e-13;
/// Step length below which a pivot counts as degenerate.
const DEGENERATE_STEP: f64 = 1e-12;

/// Solves `problem` to optimality, or certifies infeasibility or
/// unboundedness.
pub fn solve_lp(problem: &StandardLp, options: &SolverOptions) -> Result<LpSolution, LpError> {
    problem.validate()?;
    if options.feas_tol.is_nan()
        || options.feas_tol <= 0.0
        || options.pivot_tol.is_nan()
        || options.pivot_tol <= 0.0
    {
        return Err(LpError::Structural(format!(
            "tolerances must be positive (feas_tol={}, pivot_tol={})",
            options.feas_tol, options.pivot_tol
        )));
    }
    let cap = options
        .max_iterations
        .unwrap_or(50 * (problem.num_vars + problem.num_rows()).max(1));

    let mut tab = Tableau::new(problem, options);
    let mut iterations = 0usize;

    if tab.num_artificials > 0 {
        tab.set_phase_one_costs();
        match tab.run(&mut iterations, cap)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => {
                return Err(LpError::Numerical(
                    "phase one reported an unbounded ray".into(),
                ))
            }
        }
        let infeasibility = tab.artificial_sum();
        debug!("phase one finished after {iterations} pivots, infeasibility {infeasibility:.3e}");
        if infeasibility > options.feas_tol {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, iterations));
        }
        tab.expel_artificials();
    }

    tab.set_phase_two_costs();
    match tab.run(&mut iterations, cap)? {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => {
            return Ok(LpSolution::without_point(LpStatus::Unbounded, iterations))
        }
    }

    let x = tab.primal_point();
    let violations = check_feasible(problem, &x, options.feas_tol)?;
    if let Some(worst) = violations
        .iter()
        .max_by(|a, b| a.residual.abs().total_cmp(&b.residual.abs()))
    {
        return Err(LpError::Numerical(format!(
            "optimal basis fails the audit: {worst}"
        )));
    }
    let objective_value = problem.objective_value(&x);
    debug!("optimal after {iterations} pivots, objective {objective_value:.9e}");
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x: Some(x),
        objective_value: Some(objective_value),
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColState {
    Basic,
    AtLower,
    AtUpper,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

enum Step {
    Flip,
    Pivot { row: usize, to_upper: bool },
}

struct Tableau {
    m: usize,
    ncols: usize,
    num_structural: usize,
    num_artificials: usize,
    first_artificial: usize,
    /// Current `B⁻¹A`, row-major.
    a: Vec<f64>,
    /// Original (shifted, sign-normalized) constraint matrix, row-major.
    orig: Vec<f64>,
    rhs: Vec<f64>,
    upper: Vec<f64>,
    lower_shift: Vec<f64>,
    phase_two_cost: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<ColState>,
    xb: Vec<f64>,
    pivot_tol: f64,
    opt_tol: f64,
    since_reinvert: usize,
    scratch: Vec<(usize, f64)>,
}

impl Tableau {
    fn new(problem: &StandardLp, options: &SolverOptions) -> Self {
        let n = problem.num_vars;
        let n_eq = problem.eq_rows.len();
        let n_ub = problem.ub_rows.len();
        let m = n_eq + n_ub;
        let lower_shift: Vec<f64> = problem.var_bounds.iter().map(|b| b.0).collect();

        // Shifted right-hand sides and which rows need an artificial column.
        let mut rows: Vec<(Vec<(usize, f64)>, f64, Option<f64>)> = Vec::with_capacity(m);
        for row in &problem.eq_rows {
            let rhs = row.rhs - row.dot(&lower_shift);
            rows.push((row.coefs.clone(), rhs, None));
        }
        for row in &problem.ub_rows {
            let rhs = row.rhs - row.dot(&lower_shift);
            rows.push((row.coefs.clone(), rhs, Some(1.0)));
        }
        let num_artificials = rows
            .iter()
            .filter(|(_, rhs, slack)| slack.is_none() || *rhs < 0.0)
            .count();
        let first_slack = n;
        let first_artificial = n + n_ub;
        let ncols = first_artificial + num_artificials;

        let mut orig = vec![0.0; m * ncols];
        let mut rhs = vec![0.0; m];
        let mut basis = vec![0usize; m];
        let mut upper = vec![f64::INFINITY; ncols];
        for (j, &(lo, hi)) in problem.var_bounds.iter().enumerate() {
            upper[j] = hi - lo;
        }
        let mut state = vec![ColState::AtLower; ncols];
        let mut next_art = first_artificial;
        let mut slack_col = first_slack;
        for (i, (coefs, b, slack)) in rows.into_iter().enumerate() {
            let sign = if b < 0.0 { -1.0 } else { 1.0 };
            let base = i * ncols;
            for (j, v) in coefs {
                orig[base + j] += sign * v;
            }
            rhs[i] = sign * b;
            let needs_art = match slack {
                Some(s) => {
                    orig[base + slack_col] = sign * s;
                    let col = slack_col;
                    slack_col += 1;
                    if sign > 0.0 {
                        basis[i] = col;
                        false
                    } else {
                        true
                    }
                }
                None => true,
            };
            if needs_art {
                orig[base + next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
            state[basis[i]] = ColState::Basic;
        }

        let mut phase_two_cost = vec![0.0; ncols];
        phase_two_cost[..n].copy_from_slice(&problem.objective);

        let a = orig.clone();
        let xb = rhs.clone();
        Self {
            m,
            ncols,
            num_structural: n,
            num_artificials,
            first_artificial,
            a,
            orig,
            rhs,
            upper,
            lower_shift,
            phase_two_cost,
            cost: vec![0.0; ncols],
            d: vec![0.0; ncols],
            basis,
            state,
            xb,
            pivot_tol: options.pivot_tol,
            opt_tol: options.pivot_tol,
            since_reinvert: 0,
            scratch: Vec::new(),
        }
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.first_artificial
    }

    fn set_phase_one_costs(&mut self) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        for j in self.first_artificial..self.ncols {
            self.cost[j] = 1.0;
        }
        self.recompute_reduced_costs();
    }

    fn set_phase_two_costs(&mut self) {
        self.cost.copy_from_slice(&self.phase_two_cost);
        self.recompute_reduced_costs();
    }

    fn recompute_reduced_costs(&mut self) {
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.a[i * self.ncols..(i + 1) * self.ncols];
            for (dj, &aij) in self.d.iter_mut().zip(row) {
                *dj -= cb * aij;
            }
        }
        for &col in &self.basis {
            self.d[col] = 0.0;
        }
    }

    fn artificial_sum(&self) -> f64 {
        (0..self.m)
            .filter(|&i| self.is_artificial(self.basis[i]))
            .map(|i| self.xb[i].abs())
            .sum()
    }

    fn column_value(&self, col: usize) -> f64 {
        match self.state[col] {
            ColState::AtLower => 0.0,
            ColState::AtUpper => self.upper[col],
            ColState::Basic => {
                let row = self.basis.iter().position(|&c| c == col).unwrap();
                self.xb[row]
            }
        }
    }

    fn primal_point(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.num_structural];
        for (j, yj) in y.iter_mut().enumerate() {
            match self.state[j] {
                ColState::AtLower => {}
                ColState::AtUpper => *yj = self.upper[j],
                ColState::Basic => {}
            }
        }
        for (i, &col) in self.basis.iter().enumerate() {
            if col < self.num_structural {
                y[col] = self.xb[i];
            }
        }
        y.iter()
            .enumerate()
            .map(|(j, &v)| {
                let v = v.clamp(0.0, self.upper[j]);
                v + self.lower_shift[j]
            })
            .collect()
    }

    /// Runs simplex iterations with the current cost vector until no
    /// improving column remains.
    fn run(&mut self, iterations: &mut usize, cap: usize) -> Result<PhaseEnd, LpError> {
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut verified = false;
        loop {
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert();
            }
            let Some((q, dir)) = self.choose_entering(bland) else {
                if verified {
                    return Ok(PhaseEnd::Optimal);
                }
                self.reinvert();
                verified = true;
                continue;
            };
            verified = false;
            if *iterations >= cap {
                return Err(LpError::Stalled {
                    iterations: *iterations,
                });
            }
            *iterations += 1;

            let Some((theta, step)) = self.ratio_test(q, dir, bland) else {
                return Ok(PhaseEnd::Unbounded);
            };
            if theta <= DEGENERATE_STEP {
                degenerate_run += 1;
                if degenerate_run > DEGENERACY_LIMIT && !bland {
                    trace!("switching to Bland's rule after {degenerate_run} degenerate pivots");
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
            self.apply(q, dir, theta, step);
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols {
            let (score, dir) = match self.state[j] {
                ColState::Basic => continue,
                ColState::AtLower => {
                    if self.upper[j] <= 0.0 || self.d[j] >= -self.opt_tol {
                        continue;
                    }
                    (-self.d[j], 1.0)
                }
                ColState::AtUpper => {
                    if self.d[j] <= self.opt_tol {
                        continue;
                    }
                    (self.d[j], -1.0)
                }
            };
            if bland {
                return Some((j, dir));
            }
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    /// Harris-style two-pass ratio test. Returns `None` on an unbounded ray.
    fn ratio_test(&self, q: usize, dir: f64, bland: bool) -> Option<(f64, Step)> {
        let relax = if bland { 0.0 } else { 1e-9 };
        let mut theta_relaxed = f64::INFINITY;
        for i in 0..self.m {
            let alpha = self.a[i * self.ncols + q];
            if alpha.abs() <= self.pivot_tol {
                continue;
            }
            let delta = dir * alpha;
            let lim = if delta > 0.0 {
                (self.xb[i].max(0.0) + relax) / delta
            } else {
                let ub = self.upper[self.basis[i]];
                if ub == f64::INFINITY {
                    continue;
                }
                ((ub - self.xb[i]).max(0.0) + relax) / -delta
            };
            theta_relaxed = theta_relaxed.min(lim);
        }
        let flip = self.upper[q];
        if flip <= theta_relaxed {
            if flip == f64::INFINITY {
                return None;
            }
            return Some((flip, Step::Flip));
        }

        let mut chosen: Option<(usize, bool, f64)> = None;
        let mut chosen_alpha = 0.0;
        for i in 0..self.m {
            let alpha = self.a[i * self.ncols + q];
            if alpha.abs() <= self.pivot_tol {
                continue;
            }
            let delta = dir * alpha;
            let (lim, to_upper) = if delta > 0.0 {
                (self.xb[i].max(0.0) / delta, false)
            } else {
                let ub = self.upper[self.basis[i]];
                if ub == f64::INFINITY {
                    continue;
                }
                ((ub - self.xb[i]).max(0.0) / -delta, true)
            };
            if lim > theta_relaxed {
                continue;
            }
            let better = match chosen {
                None => true,
                Some((r, _, _)) if bland => self.basis[i] < self.basis[r],
                Some(_) => alpha.abs() > chosen_alpha,
            };
            if better {
                chosen = Some((i, to_upper, lim));
                chosen_alpha = alpha.abs();
            }
        }
        let (row, to_upper, theta) = chosen?;
        Some((theta, Step::Pivot { row, to_upper }))
    }

    fn apply(&mut self, q: usize, dir: f64, theta: f64, step: Step) {
        let shift = dir * theta;
        if shift != 0.0 {
            for i in 0..self.m {
                let alpha = self.a[i * self.ncols + q];
                if alpha != 0.0 {
                    self.xb[i] -= shift * alpha;
                }
            }
        }
        match step {
            Step::Flip => {
                self.state[q] = match self.state[q] {
                    ColState::AtLower => ColState::AtUpper,
                    _ => ColState::AtLower,
                };
            }
            Step::Pivot { row, to_upper } => {
                let start = if self.state[q] == ColState::AtUpper {
                    self.upper[q]
                } else {
                    0.0
                };
                let leaving = self.basis[row];
                self.state[leaving] = if to_upper {
                    ColState::AtUpper
                } else {
                    ColState::AtLower
                };
                self.xb[row] = start + shift;
                self.basis[row] = q;
                self.state[q] = ColState::Basic;
                self.pivot(row, q);
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.ncols;
        let piv = self.a[r * nc + q];
        let inv = 1.0 / piv;
        self.scratch.clear();
        {
            let row = &mut self.a[r * nc..(r + 1) * nc];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    if v.abs() < DROP_TOL {
                        *v = 0.0;
                    } else {
                        self.scratch.push((j, *v));
                    }
                }
            }
            row[q] = 1.0;
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * nc + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.a[i * nc..(i + 1) * nc];
            for &(j, v) in &self.scratch {
                let nv = row[j] - f * v;
                row[j] = if nv.abs() < DROP_TOL { 0.0 } else { nv };
            }
            row[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for &(j, v) in &self.scratch {
                self.d[j] -= f * v;
            }
        }
        self.d[q] = 0.0;
        self.since_reinvert += 1;
    }

    /// Rebuilds `B⁻¹A`, the basic values and the reduced costs from the
    /// original rows. Keeps the current tableau if the basis looks singular.
    fn reinvert(&mut self) {
        self.since_reinvert = 0;
        let (m, nc) = (self.m, self.ncols);
        if m == 0 {
            self.recompute_reduced_costs();
            return;
        }
        let mut work = self.orig.clone();
        let mut rhs = self.rhs.clone();
        for j in 0..nc {
            if self.state[j] == ColState::AtUpper {
                let u = self.upper[j];
                for i in 0..m {
                    let v = self.orig[i * nc + j];
                    if v != 0.0 {
                        rhs[i] -= v * u;
                    }
                }
            }
        }
        let mut assigned = vec![false; m];
        let mut new_basis = vec![usize::MAX; m];
        let mut pivot_row: Vec<(usize, f64)> = Vec::new();
        for &col in &self.basis {
            let mut best = None;
            let mut best_abs = 1e-11;
            for i in 0..m {
                let v = work[i * nc + col].abs();
                if !assigned[i] && v > best_abs {
                    best_abs = v;
                    best = Some(i);
                }
            }
            let Some(p) = best else {
                debug!("reinversion skipped: basis numerically singular");
                self.recompute_reduced_costs();
                return;
            };
            assigned[p] = true;
            new_basis[p] = col;
            let inv = 1.0 / work[p * nc + col];
            pivot_row.clear();
            for j in 0..nc {
                let v = &mut work[p * nc + j];
                if *v != 0.0 {
                    *v *= inv;
                    pivot_row.push((j, *v));
                }
            }
            work[p * nc + col] = 1.0;
            rhs[p] *= inv;
            for i in 0..m {
                if i == p {
                    continue;
                }
                let f = work[i * nc + col];
                if f == 0.0 {
                    continue;
                }
                for &(j, v) in &pivot_row {
                    let nv = work[i * nc + j] - f * v;
                    work[i * nc + j] = if nv.abs() < DROP_TOL { 0.0 } else { nv };
                }
                work[i * nc + col] = 0.0;
                rhs[i] -= f * rhs[p];
            }
        }
        self.a = work;
        self.xb = rhs;
        self.basis = new_basis;
        self.recompute_reduced_costs();
    }

    /// Pivots zero-level artificials out of the basis after phase one and
    /// bars every artificial from re-entering.
    fn expel_artificials(&mut self) {
        for r in 0..self.m {
            let col = self.basis[r];
            if !self.is_artificial(col) {
                continue;
            }
            let mut best = None;
            let mut best_abs = self.pivot_tol.max(1e-9);
            for j in 0..self.first_artificial {
                if self.state[j] == ColState::Basic {
                    continue;
                }
                let v = self.a[r * self.ncols + j].abs();
                if v > best_abs {
                    best_abs = v;
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                let value = self.column_value(j);
                self.state[col] = ColState::AtLower;
                self.basis[r] = j;
                self.state[j] = ColState::Basic;
                self.xb[r] = value;
                self.pivot(r, j);
            }
        }
        for j in self.first_artificial..self.ncols {
            self.upper[j] = 0.0;
        }
        self.reinvert();
    }
}
