//! Simple temporal network kept as a distance graph in closed form.
//!
//! Point 0 is the time origin. Every scheduled action owns two points, its
//! start and its end; entry `d[i][j]` is the tightest upper bound on
//! `t_j - t_i`. All arithmetic is exact rational arithmetic, so golden
//! matrices and schedules compare bit-for-bit. Rows are shared between a
//! parent network and its refinements and copied only when written.

use crate::pddl::{DurOp, DurationConstraint};
use num_rational::Rational64;
use std::cmp::Ordering;
use std::ops::Add;
use std::sync::Arc;

/// An upper bound on a time-point difference: a rational or +infinity.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Bound {
    Fin(Rational64),
    Inf,
}

impl Bound {
    pub fn fin(n: i64) -> Bound {
        Bound::Fin(Rational64::from_integer(n))
    }

    pub fn is_fin(&self) -> bool {
        matches!(self, Bound::Fin(_))
    }
}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Bound::Inf, Bound::Inf) => Ordering::Equal,
            (Bound::Inf, _) => Ordering::Greater,
            (_, Bound::Inf) => Ordering::Less,
            (Bound::Fin(a), Bound::Fin(b)) => a.cmp(b),
        }
    }
}

impl Add for Bound {
    type Output = Bound;
    fn add(self, rhs: Bound) -> Bound {
        match (self, rhs) {
            (Bound::Fin(a), Bound::Fin(b)) => Bound::Fin(a + b),
            _ => Bound::Inf,
        }
    }
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::Fin(r) => write!(f, "{}", crate::pddl::rational_to_string(*r)),
            Bound::Inf => write!(f, "inf"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Inconsistent;

/// Distance graph over time points, maintained transitively closed under an
/// incremental O(n^2) single-edge update.
#[derive(Clone, Debug)]
pub struct DGraph {
    /// Row i holds bounds on `t_j - t_i`. Rows may be shorter than the point
    /// count; missing entries are +infinity (no constraint yet).
    rows: Vec<Arc<Vec<Bound>>>,
    eps: Rational64,
}

impl DGraph {
    pub fn new(eps: Rational64) -> Self {
        DGraph { rows: vec![Arc::new(vec![Bound::fin(0)])], eps }
    }

    pub fn num_points(&self) -> usize {
        self.rows.len()
    }

    pub fn epsilon(&self) -> Rational64 {
        self.eps
    }

    pub fn bound(&self, i: usize, j: usize) -> Bound {
        if i == j {
            return Bound::Fin(Rational64::from_integer(0));
        }
        self.rows[i].get(j).copied().unwrap_or(Bound::Inf)
    }

    fn set(&mut self, i: usize, j: usize, v: Bound) {
        let n = self.rows.len();
        let row = Arc::make_mut(&mut self.rows[i]);
        if row.len() < n {
            row.resize(n, Bound::Inf);
            row[i] = Bound::fin(0);
        }
        row[j] = v;
    }

    /// Adds an action's start/end points with its duration constraints and
    /// the requirement that the start comes at least epsilon after the
    /// origin. Returns `(start_point, end_point)`.
    pub fn add_action(&mut self, duration: &[DurationConstraint]) -> Result<(usize, usize), Inconsistent> {
        let n = self.rows.len();
        let (s, e) = (n, n + 1);
        let mut srow = vec![Bound::Inf; n + 2];
        let mut erow = vec![Bound::Inf; n + 2];
        srow[s] = Bound::fin(0);
        erow[e] = Bound::fin(0);
        self.rows.push(Arc::new(srow));
        self.rows.push(Arc::new(erow));
        // Durations are non-negative.
        self.tighten(e, s, Bound::fin(0))?;
        for dc in duration {
            match dc.op {
                DurOp::Eq => {
                    self.tighten(s, e, Bound::Fin(dc.value))?;
                    self.tighten(e, s, Bound::Fin(-dc.value))?;
                }
                DurOp::Le => self.tighten(s, e, Bound::Fin(dc.value))?,
                DurOp::Ge => self.tighten(e, s, Bound::Fin(-dc.value))?,
            }
        }
        self.tighten(s, 0, Bound::Fin(-self.eps))?;
        Ok((s, e))
    }

    /// Requires `t_before + eps <= t_after`.
    pub fn ensure_precedes(&mut self, before: usize, after: usize) -> Result<(), Inconsistent> {
        self.tighten(after, before, Bound::Fin(-self.eps))
    }

    /// True when `t_before + eps <= t_after` can still be satisfied.
    pub fn can_precede(&self, before: usize, after: usize) -> bool {
        self.bound(before, after) >= Bound::Fin(self.eps)
    }

    /// True when some schedule places `t_mid` at least epsilon after
    /// `t_lo` and at least epsilon before `t_hi`.
    pub fn can_fall_between(&self, lo: usize, mid: usize, hi: usize) -> bool {
        let eps = Bound::Fin(self.eps);
        let two_eps = Bound::Fin(self.eps + self.eps);
        self.bound(lo, mid) >= eps && self.bound(mid, hi) >= eps && self.bound(lo, hi) >= two_eps
    }

    /// Tightens the bound on `t_j - t_i` to at most `w` and propagates.
    /// Leaves the graph untouched and reports inconsistency if the new
    /// constraint would create a negative cycle.
    pub fn tighten(&mut self, i: usize, j: usize, w: Bound) -> Result<(), Inconsistent> {
        if w >= self.bound(i, j) {
            return Ok(());
        }
        if self.bound(j, i) + w < Bound::fin(0) {
            return Err(Inconsistent);
        }
        self.propagate(i, j, w);
        Ok(())
    }

    /// Single-edge incremental closure: with edge (u -> v) tightened to `w`,
    /// every pair improves through `d[i][u] + w + d[v][j]`. O(n^2).
    fn propagate(&mut self, u: usize, v: usize, w: Bound) {
        let n = self.rows.len();
        let vrow = self.rows[v].clone();
        let vbound = |j: usize| -> Bound {
            if j == v {
                Bound::fin(0)
            } else {
                vrow.get(j).copied().unwrap_or(Bound::Inf)
            }
        };
        for i in 0..n {
            let diu = self.bound(i, u);
            if !diu.is_fin() {
                continue;
            }
            let base = diu + w;
            if !base.is_fin() {
                continue;
            }
            for j in 0..n {
                if i == j {
                    continue;
                }
                let cand = base + vbound(j);
                if cand < self.bound(i, j) {
                    self.set(i, j, cand);
                }
            }
        }
    }

    /// Earliest-start schedule: for the k-th added action, start time and
    /// duration. Start of action k is `-d[start][0]`, its duration
    /// `d[start][0] - d[end][0]`.
    pub fn schedule(&self) -> Vec<(Rational64, Rational64)> {
        let mut out = Vec::new();
        let mut s = 1;
        while s + 1 < self.rows.len() {
            let e = s + 1;
            let ds0 = match self.bound(s, 0) {
                Bound::Fin(r) => r,
                Bound::Inf => Rational64::from_integer(0),
            };
            let de0 = match self.bound(e, 0) {
                Bound::Fin(r) => r,
                Bound::Inf => ds0,
            };
            out.push((-ds0, ds0 - de0));
            s += 2;
        }
        out
    }

    /// Whole matrix, row-major, for diagnostics: `inf` for missing bounds.
    pub fn dump(&self) -> String {
        let n = self.rows.len();
        let mut s = String::new();
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                row.push(self.bound(i, j).to_string());
            }
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// True when no time point precedes itself. The incremental updates
    /// reject inconsistent constraints, so this holds by construction; the
    /// check exists for audits against reference implementations.
    pub fn is_consistent(&self) -> bool {
        (0..self.rows.len()).all(|i| self.rows[i].get(i).copied().unwrap_or(Bound::fin(0)) >= Bound::fin(0))
    }

    /// Number of rows physically shared with `other` (same allocation).
    pub fn shared_rows_with(&self, other: &DGraph) -> usize {
        self.rows
            .iter()
            .zip(&other.rows)
            .filter(|(a, b)| Arc::ptr_eq(a, b))
            .count()
    }

    /// Approximate heap footprint, for memory accounting.
    pub fn approx_bytes(&self) -> usize {
        self.rows.iter().map(|r| r.len() * std::mem::size_of::<Bound>() + 16).sum()
    }
}
