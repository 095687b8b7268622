//! A small two-phase revised simplex solver.
//!
//! Columns are stored sparse and the basis inverse dense, which suits the
//! capacity problem: a few hundred rows, tens of thousands of columns with
//! two nonzeros each. Entering variables are priced with Dantzig's rule over
//! rotating segments of the columns; after a run of degenerate pivots the
//! solver falls back to Bland's rule until it makes progress again, which
//! rules out cycling.

use std::fmt;

const COST_EPS: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-7;
const FEAS_EPS: f64 = 1e-7;
const CHECK_EPS: f64 = 1e-6;
const DEGENERATE_STREAK: usize = 50;
const PRICING_SEGMENT: usize = 4096;
const HARRIS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpError {
    Infeasible,
    Unbounded,
    IterationLimit,
    /// The final basis fails the original rows beyond tolerance.
    Numerical,
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Infeasible => f.write_str("infeasible"),
            Self::Unbounded => f.write_str("unbounded"),
            Self::IterationLimit => f.write_str("iteration limit reached"),
            Self::Numerical => f.write_str("numerical breakdown"),
        }
    }
}

impl std::error::Error for LpError {}

#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

/// `maximize c·x` subject to linear rows and `x >= 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub objective: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    /// Adds `Σ coeff·x[var] (relation) rhs`. Repeated variables are summed.
    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        debug_assert!(coeffs.iter().all(|&(v, _)| v < self.num_vars()));
        self.rows.push(Row { coeffs, relation, rhs });
    }

    pub fn maximize(&self) -> Result<LpSolution, LpError> {
        let m = self.rows.len();
        let n = self.num_vars();

        // Standard form: every row an equality with rhs >= 0.
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut b = vec![0.0; m];
        let mut basis = vec![usize::MAX; m];
        let mut artificial_rows = Vec::new();

        for (i, row) in self.rows.iter().enumerate() {
            let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
            b[i] = sign * row.rhs;
            for &(v, c) in &row.coeffs {
                if c != 0.0 {
                    cols[v].push((i, sign * c));
                }
            }
            let relation = match (row.relation, sign < 0.0) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => r,
            };
            match relation {
                Relation::Le => {
                    basis[i] = cols.len();
                    cols.push(vec![(i, 1.0)]);
                }
                Relation::Ge => {
                    cols.push(vec![(i, -1.0)]);
                    artificial_rows.push(i);
                }
                Relation::Eq => artificial_rows.push(i),
            }
        }
        // Merge duplicate row entries within a column.
        for col in cols.iter_mut().take(n) {
            col.sort_unstable_by_key(|&(r, _)| r);
            col.dedup_by(|a, b| {
                if a.0 == b.0 {
                    b.1 += a.1;
                    true
                } else {
                    false
                }
            });
        }
        let first_artificial = cols.len();
        for &i in &artificial_rows {
            basis[i] = cols.len();
            cols.push(vec![(i, 1.0)]);
        }

        let cols = Columns::new(cols);
        // Segmented pricing is much faster on wide problems; full pricing
        // takes a different pivot path if the first attempt breaks down.
        let mut outcome = Err(LpError::Numerical);
        for segment in [PRICING_SEGMENT, usize::MAX] {
            outcome = self.solve(&cols, &b, &basis, first_artificial, segment);
            if !matches!(outcome, Err(LpError::Numerical)) || segment >= cols.len() {
                break;
            }
        }
        outcome
    }

    fn solve(
        &self,
        cols: &Columns,
        b: &[f64],
        basis: &[usize],
        first_artificial: usize,
        segment: usize,
    ) -> Result<LpSolution, LpError> {
        let n = self.num_vars();
        let mut simplex = Simplex::new(cols, b.to_vec(), basis.to_vec(), first_artificial, segment);
        if first_artificial < cols.len() {
            let mut phase1 = vec![0.0; cols.len()];
            phase1[first_artificial..].iter_mut().for_each(|c| *c = 1.0);
            simplex.run(&phase1, true)?;
            let infeasibility: f64 = simplex
                .basis
                .iter()
                .zip(&simplex.xb)
                .filter(|(&v, _)| v >= first_artificial)
                .map(|(_, &x)| x)
                .sum();
            if infeasibility > FEAS_EPS {
                return Err(LpError::Infeasible);
            }
            for (i, &v) in simplex.basis.iter().enumerate() {
                if v >= first_artificial {
                    simplex.xb[i] = 0.0;
                }
            }
        }

        let mut phase2 = vec![0.0; cols.len()];
        for (c, &obj) in phase2.iter_mut().zip(&self.objective) {
            *c = -obj;
        }
        simplex.run(&phase2, false)?;

        let mut values = vec![0.0; n];
        for (i, &v) in simplex.basis.iter().enumerate() {
            if v < n {
                values[v] = simplex.xb[i].max(0.0);
            }
        }
        if !self.satisfied_by(&values) {
            return Err(LpError::Numerical);
        }
        let objective = values.iter().zip(&self.objective).map(|(x, c)| x * c).sum();
        Ok(LpSolution {
            objective,
            values,
            iterations: simplex.iterations,
        })
    }
}

/// Sparse columns in one contiguous buffer.
struct Columns {
    start: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl Columns {
    fn new(cols: Vec<Vec<(usize, f64)>>) -> Self {
        let mut start = Vec::with_capacity(cols.len() + 1);
        let mut entries = Vec::new();
        start.push(0);
        for c in cols {
            entries.extend(c);
            start.push(entries.len());
        }
        Self { start, entries }
    }

    fn len(&self) -> usize {
        self.start.len() - 1
    }

    #[inline]
    fn col(&self, j: usize) -> &[(usize, f64)] {
        &self.entries[self.start[j]..self.start[j + 1]]
    }
}

impl LinearProgram {
    fn satisfied_by(&self, x: &[f64]) -> bool {
        self.rows.iter().all(|row| {
            let (mut act, mut scale) = (0.0, row.rhs.abs());
            for &(v, c) in &row.coeffs {
                act += c * x[v];
                scale = scale.max((c * x[v]).abs());
            }
            let tol = CHECK_EPS * (1.0 + scale);
            match row.relation {
                Relation::Le => act <= row.rhs + tol,
                Relation::Ge => act >= row.rhs - tol,
                Relation::Eq => (act - row.rhs).abs() <= tol,
            }
        })
    }
}

struct Simplex<'a> {
    cols: &'a Columns,
    b: Vec<f64>,
    m: usize,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    first_artificial: usize,
    segment: usize,
    iterations: usize,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn new(cols: &'a Columns, b: Vec<f64>, basis: Vec<usize>, first_artificial: usize, segment: usize) -> Self {
        let m = b.len();
        let mut is_basic = vec![false; cols.len()];
        basis.iter().for_each(|&v| is_basic[v] = true);
        // The starting basis is the identity (slacks and artificials).
        let mut binv = vec![0.0; m * m];
        (0..m).for_each(|i| binv[i * m + i] = 1.0);
        let xb = b.clone();
        Self {
            cols,
            b,
            m,
            basis,
            is_basic,
            binv,
            xb,
            first_artificial,
            segment,
            iterations: 0,
            since_refactor: 0,
        }
    }

    /// Minimizes `cost·x` from the current basis.
    fn run(&mut self, cost: &[f64], phase_one: bool) -> Result<(), LpError> {
        let m = self.m;
        let n = self.cols.len();
        let limit = 50 * (m + n) + 1000;
        let refactor_every = m.max(100);
        let mut degenerate = 0usize;
        let mut y = vec![0.0; m];
        let mut u = vec![0.0; m];
        let mut segment = 0;

        loop {
            if self.iterations > limit {
                return Err(LpError::IterationLimit);
            }
            if self.since_refactor >= refactor_every {
                self.refactor();
            }

            // Duals y = c_B B^-1.
            y.iter_mut().for_each(|v| *v = 0.0);
            for (i, &var) in self.basis.iter().enumerate() {
                let c = cost[var];
                if c != 0.0 {
                    let row = &self.binv[i * m..(i + 1) * m];
                    y.iter_mut().zip(row).for_each(|(yj, r)| *yj += c * r);
                }
            }

            let bland = degenerate >= DEGENERATE_STREAK;
            let entering = if bland {
                (0..n).find(|&j| self.priceable(j, phase_one) && self.reduced_cost(j, cost, &y) < -COST_EPS)
            } else {
                self.partial_dantzig(cost, &y, phase_one, &mut segment)
            };
            let Some(j) = entering else {
                return Ok(());
            };

            // u = B^-1 A_j
            u.iter_mut().for_each(|v| *v = 0.0);
            for &(r, v) in self.cols.col(j) {
                for (i, ui) in u.iter_mut().enumerate() {
                    *ui += self.binv[i * m + r] * v;
                }
            }

            let leave = if bland {
                self.ratio_test_bland(&u, phase_one)
            } else {
                self.ratio_test_harris(&u, phase_one)
            };
            let Some((r, ratio)) = leave else {
                return Err(LpError::Unbounded);
            };

            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, j, &u);
        }
    }

    /// Step length allowed by row `i` for direction `u`, if it blocks.
    /// Artificials left in the basis in phase two are pinned at zero.
    #[inline]
    fn row_ratio(&self, i: usize, ui: f64, phase_one: bool, slack: f64) -> Option<f64> {
        if !phase_one && self.basis[i] >= self.first_artificial {
            (ui.abs() > PIVOT_EPS).then(|| slack / ui.abs())
        } else {
            (ui > PIVOT_EPS).then(|| (self.xb[i].max(0.0) + slack) / ui)
        }
    }

    /// Minimum ratio with ties to the lowest variable index.
    fn ratio_test_bland(&self, u: &[f64], phase_one: bool) -> Option<(usize, f64)> {
        let mut leave: Option<(usize, f64)> = None;
        for (i, &ui) in u.iter().enumerate() {
            let Some(ratio) = self.row_ratio(i, ui, phase_one, 0.0) else {
                continue;
            };
            let better = match leave {
                None => true,
                Some((k, best)) => ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[i] < self.basis[k]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        leave
    }

    /// Harris's two-pass test: among rows whose ratio is within a small
    /// feasibility slack of the minimum, take the largest pivot.
    fn ratio_test_harris(&self, u: &[f64], phase_one: bool) -> Option<(usize, f64)> {
        let bound = u
            .iter()
            .enumerate()
            .filter_map(|(i, &ui)| self.row_ratio(i, ui, phase_one, HARRIS_TOL))
            .fold(f64::INFINITY, f64::min);
        if bound == f64::INFINITY {
            return None;
        }
        let mut leave: Option<(usize, f64)> = None;
        for (i, &ui) in u.iter().enumerate() {
            let Some(ratio) = self.row_ratio(i, ui, phase_one, 0.0) else {
                continue;
            };
            if ratio <= bound && leave.is_none_or(|(k, _)| ui.abs() > u[k].abs()) {
                leave = Some((i, ratio));
            }
        }
        leave
    }

    fn priceable(&self, j: usize, phase_one: bool) -> bool {
        !self.is_basic[j] && (phase_one || j < self.first_artificial)
    }

    #[inline]
    fn reduced_cost(&self, j: usize, cost: &[f64], y: &[f64]) -> f64 {
        cost[j] - self.cols.col(j).iter().map(|&(r, v)| y[r] * v).sum::<f64>()
    }

    /// Dantzig's rule over one segment of the columns at a time, starting
    /// where the previous search succeeded; a full sweep proves optimality.
    fn partial_dantzig(&self, cost: &[f64], y: &[f64], phase_one: bool, segment: &mut usize) -> Option<usize> {
        let n = self.cols.len();
        let size = self.segment.min(n);
        let count = n.div_ceil(size);
        for step in 0..count {
            let s = (*segment + step) % count;
            let mut best = (-COST_EPS, None);
            for j in s * size..((s + 1) * size).min(n) {
                if !self.priceable(j, phase_one) {
                    continue;
                }
                let d = self.reduced_cost(j, cost, y);
                if d < best.0 {
                    best = (d, Some(j));
                }
            }
            if best.1.is_some() {
                *segment = s;
                return best.1;
            }
        }
        None
    }

    fn pivot(&mut self, r: usize, entering: usize, u: &[f64]) {
        let m = self.m;
        let piv = u[r];
        {
            let row = &mut self.binv[r * m..(r + 1) * m];
            row.iter_mut().for_each(|v| *v /= piv);
        }
        self.xb[r] /= piv;
        let (pivot_row, xr) = (self.binv[r * m..(r + 1) * m].to_vec(), self.xb[r]);
        for (i, &f) in u.iter().enumerate().take(m) {
            if i == r || f == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            row.iter_mut().zip(&pivot_row).for_each(|(a, p)| *a -= f * p);
            self.xb[i] -= f * xr;
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[entering] = true;
        self.basis[r] = entering;
        self.iterations += 1;
        self.since_refactor += 1;
    }

    /// Recomputes B^-1 and x_B from scratch to shed accumulated rounding.
    fn refactor(&mut self) {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (i, &var) in self.basis.iter().enumerate() {
            for &(r, v) in self.cols.col(var) {
                a[r * m + i] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        (0..m).for_each(|i| inv[i * m + i] = 1.0);
        for c in 0..m {
            let p = (c..m)
                .max_by(|&x, &y| a[x * m + c].abs().total_cmp(&a[y * m + c].abs()))
                .unwrap();
            if a[p * m + c].abs() < 1e-14 {
                // Singular basis; keep the product-form inverse.
                self.since_refactor = 0;
                return;
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            // Basis columns are very sparse, so eliminate over the nonzero
            // entries of the pivot row only.
            let a_nz: Vec<(usize, f64)> = (c..m).map(|k| (k, a[c * m + k])).filter(|e| e.1 != 0.0).collect();
            let inv_nz: Vec<(usize, f64)> = (0..m).map(|k| (k, inv[c * m + k])).filter(|e| e.1 != 0.0).collect();
            for i in 0..m {
                let f = a[i * m + c];
                if i == c || f == 0.0 {
                    continue;
                }
                for &(k, v) in &a_nz {
                    a[i * m + k] -= f * v;
                }
                for &(k, v) in &inv_nz {
                    inv[i * m + k] -= f * v;
                }
            }
        }
        self.binv = inv;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&self.b).map(|(x, b)| x * b).sum();
            self.xb[i] = if v.abs() < 1e-13 { 0.0 } else { v };
        }
        self.since_refactor = 0;
    }
}
