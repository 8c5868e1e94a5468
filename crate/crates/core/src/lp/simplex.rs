//! Dense two-phase tableau simplex.
//!
//! Phase 1 minimizes the total infeasibility of the starting basis, phase 2
//! the objective. Pricing is steepest edge; after a run of degenerate pivots
//! it falls back to Bland's rule, which cannot cycle.
//!
//! Solves `min c'x  s.t.  A_eq x = b_eq,  A_le x <= b_le,  x >= 0`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A linear row `coeffs . x` compared against `rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row<T> {
    pub coeffs: Vec<T>,
    pub rhs: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub equalities: Vec<Row<T>>,
    pub inequalities: Vec<Row<T>>,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions<T> {
    pub max_pivots: usize,
    pub pivot_tol: T,
}

impl<T: Scalar> Default for SimplexOptions<T> {
    fn default() -> Self {
        Self {
            max_pivots: 200_000,
            pivot_tol: T::pivot_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimplexOutcome<T> {
    Optimal { x: Vec<T>, objective: T },
    Infeasible,
    Unbounded,
}

/// Degenerate pivots tolerated before switching to Bland's rule.
const STALL_LIMIT: usize = 50;

struct Tableau<T> {
    /// constraint rows followed by the cost row; last column is the rhs
    cells: Vec<T>,
    width: usize,
    rows: usize,
    basis: Vec<usize>,
    pivots: usize,
    /// first artificial column; artificials never re-enter the basis
    art_start: usize,
}

impl<T: Scalar> Tableau<T> {
    #[inline]
    fn at(&self, r: usize, c: usize) -> T {
        self.cells[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> T {
        self.at(r, self.width - 1)
    }

    fn cost_row(&self) -> usize {
        self.rows
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = T::one() / self.at(pr, pc);
        for c in 0..w {
            self.cells[pr * w + c] = self.cells[pr * w + c] * inv;
        }
        self.cells[pr * w + pc] = T::one();
        let (before, rest) = self.cells.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [T]| {
            let factor = row[pc];
            if factor != T::zero() {
                for (x, &p) in row.iter_mut().zip(prow.iter()) {
                    *x = *x - factor * p;
                }
                row[pc] = T::zero();
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    fn check_budget(&self, opts: &SimplexOptions<T>) -> Result<()> {
        if self.pivots >= opts.max_pivots {
            return Err(Error::IterationLimit { limit: opts.max_pivots });
        }
        Ok(())
    }

    /// Entering column for reduced costs `d` over the first `allowed` columns.
    ///
    /// Bland picks the lowest index with `d_j < 0`. Otherwise steepest edge:
    /// the most negative `d_j` per unit length of the edge direction
    /// `(1, B^-1 a_j)`. Normalizing keeps the search away from columns whose
    /// entries have blown up, which plain Dantzig pricing would favour.
    fn entering(&self, d: &[T], allowed: usize, bland: bool, tol: T) -> Option<usize> {
        if bland {
            return (0..allowed).find(|&c| d[c] < -tol);
        }
        let mut norms = vec![T::one(); allowed];
        for r in 0..self.rows {
            let row = &self.cells[r * self.width..r * self.width + allowed];
            for (n, &a) in norms.iter_mut().zip(row) {
                *n = *n + a * a;
            }
        }
        let mut best: Option<(usize, T)> = None;
        for (c, &n) in norms.iter().enumerate() {
            if d[c] < -tol {
                let score = d[c] * d[c] / n;
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((c, score));
                }
            }
        }
        best.map(|(c, _)| c)
    }

    /// Minimum-ratio row for entering column `pc`.
    ///
    /// Rows holding a negative basic value (only during phase 1) block where
    /// that value climbs back to zero. Ties go to the lowest basic index
    /// under Bland's rule and to the largest pivot otherwise.
    fn leaving(&self, pc: usize, bland: bool, tol: T) -> Option<(usize, T)> {
        let mut best: Option<(usize, T)> = None;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            let b = self.rhs(r);
            let ratio = if b >= -tol {
                if a <= tol {
                    continue;
                }
                // roundoff can leave a basic value slightly negative; read it as 0
                b.max(T::zero()) / a
            } else if a < -tol {
                b / a
            } else {
                continue;
            };
            let take = match best {
                None => true,
                Some((br, bratio)) => {
                    if ratio != bratio {
                        ratio < bratio
                    } else if bland {
                        self.basis[r] < self.basis[br]
                    } else {
                        a.abs() > self.at(br, pc).abs()
                    }
                }
            };
            if take {
                best = Some((r, ratio));
            }
        }
        best
    }

    /// Rows whose basic value is infeasible: artificials above zero and
    /// anything below zero.
    fn violations(&self, tol: T) -> Vec<(usize, T)> {
        (0..self.rows)
            .filter_map(|r| {
                let b = self.rhs(r);
                if b < -tol {
                    Some((r, -T::one()))
                } else if self.basis[r] >= self.art_start && b > tol {
                    Some((r, T::one()))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Phase 1: minimizes the total infeasibility of the current basis.
    /// Returns whether a feasible basis was reached.
    fn restore_feasibility(&mut self, scale: T, opts: &SimplexOptions<T>) -> Result<bool> {
        let tol = T::feas_tol() * scale;
        let mut stalled = 0usize;
        let mut d = vec![T::zero(); self.art_start];
        loop {
            let bad = self.violations(tol);
            if bad.is_empty() {
                return Ok(true);
            }
            self.check_budget(opts)?;
            d.iter_mut().for_each(|x| *x = T::zero());
            for &(r, sign) in &bad {
                // artificial rows shrink with +a_rj, negative rows grow with -a_rj
                for (c, x) in d.iter_mut().enumerate() {
                    *x = *x - sign * self.at(r, c);
                }
            }
            let bland = stalled >= STALL_LIMIT;
            let Some(pc) = self.entering(&d, self.art_start, bland, opts.pivot_tol) else {
                let residual: T = bad.iter().map(|&(r, _)| self.rhs(r).abs()).sum();
                return Ok(residual <= tol);
            };
            let Some((pr, ratio)) = self.leaving(pc, bland, opts.pivot_tol) else {
                // the infeasibility decreases without bound only if it is
                // already being driven past zero; treat as stalled
                return Ok(false);
            };
            stalled = if ratio > opts.pivot_tol { 0 } else { stalled + 1 };
            self.pivot(pr, pc);
        }
    }

    /// Phase 2 on the cost row. Returns `false` when unbounded.
    fn optimize(&mut self, opts: &SimplexOptions<T>) -> Result<bool> {
        let cost = self.cost_row();
        let allowed = self.art_start;
        let mut stalled = 0usize;
        loop {
            self.check_budget(opts)?;
            let bland = stalled >= STALL_LIMIT;
            let d: Vec<T> = (0..allowed).map(|c| self.at(cost, c)).collect();
            let Some(pc) = self.entering(&d, allowed, bland, opts.pivot_tol) else {
                return Ok(true);
            };
            let Some((pr, ratio)) = self.leaving(pc, bland, opts.pivot_tol) else {
                return Ok(false);
            };
            stalled = if ratio > opts.pivot_tol { 0 } else { stalled + 1 };
            self.pivot(pr, pc);
        }
    }

    /// Dual simplex from a dual-feasible basis: repeatedly fixes the most
    /// violated row (per unit row length) with the entering column that
    /// keeps every reduced cost nonnegative. Bland's rule (lowest basic
    /// index leaves, lowest column index enters on ties) takes over after a
    /// run of pivots that leave the objective unchanged. Returns whether a
    /// feasible, hence optimal, basis was reached.
    fn restore_primal(&mut self, scale: T, opts: &SimplexOptions<T>) -> Result<bool> {
        let tol = T::feas_tol() * scale;
        let cost = self.cost_row();
        let allowed = self.art_start;
        let mut stalled = 0usize;
        loop {
            self.check_budget(opts)?;
            let bland = stalled >= STALL_LIMIT;
            let violated = (0..self.rows).filter(|&r| self.rhs(r) < -tol);
            let leaving = if bland {
                violated.min_by_key(|&r| self.basis[r])
            } else {
                let mut best: Option<(usize, T)> = None;
                for r in violated {
                    let row = &self.cells[r * self.width..r * self.width + allowed];
                    let norm: T = row.iter().map(|&a| a * a).sum::<T>() + T::one();
                    let b = self.rhs(r);
                    let score = b * b / norm;
                    if best.is_none_or(|(_, s)| score > s) {
                        best = Some((r, score));
                    }
                }
                best.map(|(r, _)| r)
            };
            let Some(pr) = leaving else {
                return Ok(true);
            };
            let mut best: Option<(usize, T)> = None;
            for c in 0..allowed {
                let a = self.at(pr, c);
                if a >= -opts.pivot_tol {
                    continue;
                }
                let ratio = self.at(cost, c).max(T::zero()) / -a;
                let take = match best {
                    None => true,
                    Some((bc, bratio)) => {
                        if ratio != bratio {
                            ratio < bratio
                        } else if bland {
                            false
                        } else {
                            a.abs() > self.at(pr, bc).abs()
                        }
                    }
                };
                if take {
                    best = Some((c, ratio));
                }
            }
            let Some((pc, ratio)) = best else {
                return Ok(false);
            };
            stalled = if ratio > opts.pivot_tol { 0 } else { stalled + 1 };
            self.pivot(pr, pc);
        }
    }

    /// Pivots basic artificials out; rows with no usable pivot are redundant
    /// and removed.
    fn drop_artificials(&mut self, tol: T) {
        let mut r = 0;
        while r < self.rows {
            if self.basis[r] >= self.art_start {
                match (0..self.art_start).find(|&c| self.at(r, c).abs() > tol) {
                    Some(pc) => self.pivot(r, pc),
                    None => {
                        let w = self.width;
                        self.cells.drain(r * w..(r + 1) * w);
                        self.basis.remove(r);
                        self.rows -= 1;
                        continue;
                    }
                }
            }
            r += 1;
        }
    }
}

pub fn solve<T: Scalar>(lp: &LinearProgram<T>, opts: &SimplexOptions<T>) -> Result<SimplexOutcome<T>> {
    let n = lp.objective.len();
    if let Some(row) = lp
        .equalities
        .iter()
        .chain(&lp.inequalities)
        .find(|r| r.coeffs.len() != n)
    {
        return Err(Error::InvalidInstance(format!(
            "constraint row has {} coefficients, expected {n}",
            row.coeffs.len()
        )));
    }
    let scale = lp
        .equalities
        .iter()
        .chain(&lp.inequalities)
        .map(|r| r.rhs.abs())
        .fold(T::one(), T::max);
    let mut t = if lp.objective.iter().all(|&c| c >= T::zero()) {
        // the slack basis is dual feasible: walk up from the unconstrained
        // minimum, never touching rows that are already satisfied
        let mut t = slack_tableau(lp);
        set_cost_row(&mut t, &lp.objective);
        if !t.restore_primal(scale, opts)? {
            return Ok(SimplexOutcome::Infeasible);
        }
        t
    } else {
        let mut t = artificial_tableau(lp);
        if !t.restore_feasibility(scale, opts)? {
            return Ok(SimplexOutcome::Infeasible);
        }
        t.drop_artificials(opts.pivot_tol);
        set_cost_row(&mut t, &lp.objective);
        t
    };
    // polishes reduced costs left slightly negative by roundoff
    if !t.optimize(opts)? {
        return Ok(SimplexOutcome::Unbounded);
    }

    let mut x = vec![T::zero(); n];
    for r in 0..t.rows {
        if t.basis[r] < n {
            x[t.basis[r]] = t.rhs(r).max(T::zero());
        }
    }
    let objective = x.iter().zip(&lp.objective).map(|(&a, &b)| a * b).sum();
    Ok(SimplexOutcome::Optimal { x, objective })
}

/// Every row on its own slack; equalities become a pair of opposite
/// inequalities.
fn slack_tableau<T: Scalar>(lp: &LinearProgram<T>) -> Tableau<T> {
    let n = lp.objective.len();
    let rows: Vec<(Vec<T>, T)> = lp
        .equalities
        .iter()
        .flat_map(|r| {
            [
                (r.coeffs.clone(), r.rhs),
                (r.coeffs.iter().map(|&a| -a).collect(), -r.rhs),
            ]
        })
        .chain(lp.inequalities.iter().map(|r| (r.coeffs.clone(), r.rhs)))
        .collect();
    let m = rows.len();
    let art_start = n + m;
    let width = art_start + 1;
    let mut t = Tableau {
        cells: vec![T::zero(); (m + 1) * width],
        width,
        rows: m,
        basis: (n..n + m).collect(),
        pivots: 0,
        art_start,
    };
    for (r, (coeffs, rhs)) in rows.into_iter().enumerate() {
        t.cells[r * width..r * width + n].copy_from_slice(&coeffs);
        t.cells[r * width + n + r] = T::one();
        t.cells[r * width + width - 1] = rhs;
    }
    t
}

/// Inequalities on their slack, even a negative one; equalities on an
/// artificial.
fn artificial_tableau<T: Scalar>(lp: &LinearProgram<T>) -> Tableau<T> {
    let n = lp.objective.len();
    let all_rows: Vec<(&Row<T>, bool)> = lp
        .equalities
        .iter()
        .map(|r| (r, true))
        .chain(lp.inequalities.iter().map(|r| (r, false)))
        .collect();
    let m = all_rows.len();
    let n_slack = lp.inequalities.len();
    let art_start = n + n_slack;
    let width = art_start + lp.equalities.len() + 1;
    let mut t = Tableau {
        cells: vec![T::zero(); (m + 1) * width],
        width,
        rows: m,
        basis: vec![0; m],
        pivots: 0,
        art_start,
    };
    let (mut slack, mut art) = (0, 0);
    for (r, (row, eq)) in all_rows.iter().enumerate() {
        let sign = if *eq && row.rhs < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        for (c, &a) in row.coeffs.iter().enumerate() {
            t.cells[r * width + c] = sign * a;
        }
        t.cells[r * width + width - 1] = sign * row.rhs;
        if *eq {
            t.cells[r * width + art_start + art] = T::one();
            t.basis[r] = art_start + art;
            art += 1;
        } else {
            t.cells[r * width + n + slack] = T::one();
            t.basis[r] = n + slack;
            slack += 1;
        }
    }
    t
}

/// Reduced costs `c_j - c_B B^-1 a_j` for the current basis.
fn set_cost_row<T: Scalar>(t: &mut Tableau<T>, objective: &[T]) {
    let n = objective.len();
    let width = t.width;
    let cost = t.cost_row();
    let row = &mut t.cells[cost * width..(cost + 1) * width];
    row.fill(T::zero());
    row[..n].copy_from_slice(objective);
    for r in 0..t.rows {
        let b = t.basis[r];
        if b < n && objective[b] != T::zero() {
            let cb = objective[b];
            for c in 0..width {
                let v = t.at(r, c);
                t.cells[cost * width + c] = t.cells[cost * width + c] - cb * v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coeffs: &[f64], rhs: f64) -> Row<f64> {
        Row {
            coeffs: coeffs.to_vec(),
            rhs,
        }
    }

    fn optimum(lp: &LinearProgram<f64>) -> (Vec<f64>, f64) {
        match solve(lp, &SimplexOptions::default()).unwrap() {
            SimplexOutcome::Optimal { x, objective } => (x, objective),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
        let lp = LinearProgram {
            objective: vec![-3.0, -5.0],
            equalities: vec![],
            inequalities: vec![row(&[1.0, 0.0], 4.0), row(&[0.0, 2.0], 12.0), row(&[3.0, 2.0], 18.0)],
        };
        let (x, obj) = optimum(&lp);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 6.0).abs() < 1e-12);
        assert!((obj + 36.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_negative_rhs() {
        // min x + 2y, x + y = 3, -x <= -1, y >= 1 (written -y <= -1)
        let lp = LinearProgram {
            objective: vec![1.0, 2.0],
            equalities: vec![row(&[1.0, 1.0], 3.0)],
            inequalities: vec![row(&[-1.0, 0.0], -1.0), row(&[0.0, -1.0], -1.0)],
        };
        let (x, obj) = optimum(&lp);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!((obj - 4.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let infeasible = LinearProgram {
            objective: vec![1.0],
            equalities: vec![row(&[1.0], 2.0)],
            inequalities: vec![row(&[1.0], 1.0)],
        };
        assert_eq!(
            solve(&infeasible, &SimplexOptions::default()).unwrap(),
            SimplexOutcome::Infeasible
        );

        let unbounded = LinearProgram {
            objective: vec![-1.0, 0.0],
            equalities: vec![],
            inequalities: vec![row(&[1.0, -1.0], 1.0)],
        };
        assert_eq!(
            solve(&unbounded, &SimplexOptions::default()).unwrap(),
            SimplexOutcome::Unbounded
        );
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let lp = LinearProgram {
            objective: vec![1.0, 1.0],
            equalities: vec![row(&[1.0, 1.0], 1.0), row(&[2.0, 2.0], 2.0)],
            inequalities: vec![],
        };
        let (_, obj) = optimum(&lp);
        assert!((obj - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beale_cycling_example_terminates() {
        // classic instance that cycles under Dantzig's rule without anti-cycling
        let lp = LinearProgram {
            objective: vec![-0.75, 150.0, -0.02, 6.0],
            equalities: vec![],
            inequalities: vec![
                row(&[0.25, -60.0, -0.04, 9.0], 0.0),
                row(&[0.5, -90.0, -0.02, 3.0], 0.0),
                row(&[0.0, 0.0, 1.0, 0.0], 1.0),
            ],
        };
        let (_, obj) = optimum(&lp);
        assert!((obj + 0.05).abs() < 1e-12);
    }

    #[test]
    fn pivot_cap_is_reported() {
        let lp = LinearProgram {
            objective: vec![-3.0, -5.0],
            equalities: vec![],
            inequalities: vec![row(&[1.0, 0.0], 4.0), row(&[0.0, 2.0], 12.0), row(&[3.0, 2.0], 18.0)],
        };
        let opts = SimplexOptions {
            max_pivots: 1,
            pivot_tol: 1e-10,
        };
        assert_eq!(solve(&lp, &opts), Err(Error::IterationLimit { limit: 1 }));
    }
}
