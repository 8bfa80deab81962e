//! Additive reachability heuristics: a cost/effort table over ground
//! literals computed by fixpoint, plus formula evaluation for ranking
//! partial plans.

use crate::bindings::BindingSet;
use crate::ground::{GLit, GroundStore};
use crate::pddl::{EffTime, Formula, Literal, Tau, Term, TimedCond, VarId, PRED_EQ};
use std::collections::HashMap;
use std::fmt;

/// Non-negative integer extended with infinity.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Xint {
    Fin(u64),
    Inf,
}

impl Xint {
    pub const ZERO: Xint = Xint::Fin(0);

    pub fn is_finite(self) -> bool {
        matches!(self, Xint::Fin(_))
    }

    pub fn plus(self, other: Xint) -> Xint {
        match (self, other) {
            (Xint::Fin(a), Xint::Fin(b)) => Xint::Fin(a.saturating_add(b)),
            _ => Xint::Inf,
        }
    }
}

impl fmt::Display for Xint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Xint::Fin(v) => write!(f, "{v}"),
            Xint::Inf => write!(f, "inf"),
        }
    }
}

/// A (cost, effort) pair ordered lexicographically: cost estimates plan
/// quality, effort estimates remaining refinement work.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CostEffort {
    pub cost: Xint,
    pub effort: Xint,
}

impl CostEffort {
    pub const ZERO: CostEffort = CostEffort { cost: Xint::ZERO, effort: Xint::ZERO };
    pub const INF: CostEffort = CostEffort { cost: Xint::Inf, effort: Xint::Inf };

    pub fn new(cost: u64, effort: u64) -> CostEffort {
        CostEffort { cost: Xint::Fin(cost), effort: Xint::Fin(effort) }
    }

    pub fn plus(self, other: CostEffort) -> CostEffort {
        CostEffort { cost: self.cost.plus(other.cost), effort: self.effort.plus(other.effort) }
    }

    pub fn lex_min(self, other: CostEffort) -> CostEffort {
        if (self.cost, self.effort) <= (other.cost, other.effort) {
            self
        } else {
            other
        }
    }

    pub fn is_finite(self) -> bool {
        self.cost.is_finite()
    }
}

/// Ranking modes selectable from the command line.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum HeurMode {
    Add,
    AddReuse,
    OpenConds,
    Flaws,
}

impl HeurMode {
    pub fn parse(s: &str) -> Option<HeurMode> {
        match s {
            "add" => Some(HeurMode::Add),
            "add-r" => Some(HeurMode::AddReuse),
            "oc" => Some(HeurMode::OpenConds),
            "flaws" => Some(HeurMode::Flaws),
            _ => None,
        }
    }

    pub fn needs_table(self) -> bool {
        matches!(self, HeurMode::Add | HeurMode::AddReuse)
    }
}

/// Cost/effort estimates for every literal that some ground action can
/// assert. Literals outside the table fall back to their initial-state
/// value.
#[derive(Default)]
pub struct HeurTable {
    entries: HashMap<GLit, CostEffort>,
}

impl HeurTable {
    pub fn build(store: &GroundStore) -> HeurTable {
        let mut entries: HashMap<GLit, CostEffort> = HashMap::new();
        for action in &store.actions {
            for eff in &action.effects {
                let seed = if store.holds_initially(&eff.literal) {
                    CostEffort::new(0, 1)
                } else {
                    CostEffort::INF
                };
                entries.entry(eff.literal.clone()).or_insert(seed);
            }
        }
        let mut table = HeurTable { entries };
        loop {
            let mut changed = false;
            for action in &store.actions {
                for (prec, own_tau) in endpoint_groups(store, action) {
                    let mut base = CostEffort::ZERO;
                    for tc in &prec {
                        base = base.plus(table.formula_value(store, &tc.formula, None));
                        if !base.is_finite() {
                            break;
                        }
                    }
                    if !base.is_finite() {
                        continue;
                    }
                    let act = base.plus(CostEffort::new(1, 1));
                    for eff in &action.effects {
                        if store.durative && eff.tau != own_tau {
                            continue;
                        }
                        let mut cand = act;
                        for tc in &eff.condition {
                            cand = cand.plus(table.formula_value(store, &tc.formula, None));
                        }
                        let cur = table.entries[&eff.literal];
                        let next = cur.lex_min(cand);
                        if next != cur {
                            table.entries.insert(eff.literal.clone(), next);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        table
    }

    /// Value of a single ground literal.
    pub fn lit_value(&self, store: &GroundStore, lit: &GLit) -> CostEffort {
        if lit.pred == PRED_EQ {
            return if (lit.args[0] == lit.args[1]) == lit.positive {
                CostEffort::new(0, 1)
            } else {
                CostEffort::INF
            };
        }
        if let Some(&v) = self.entries.get(lit) {
            return v;
        }
        if store.holds_initially(lit) {
            CostEffort::new(0, 1)
        } else {
            CostEffort::INF
        }
    }

    /// Value of a literal that may contain plan variables: the minimum over
    /// type-consistent instantiations that respect per-variable exclusions.
    pub fn open_lit_value(
        &self,
        store: &GroundStore,
        lit: &Literal,
        bindings: Option<&BindingSet>,
    ) -> CostEffort {
        let lit = match bindings {
            Some(b) => Literal {
                pred: lit.pred,
                args: lit.args.iter().map(|&t| b.resolve(t)).collect(),
                positive: lit.positive,
            },
            None => lit.clone(),
        };
        if let Some(glit) = GLit::from_literal(&lit) {
            return self.lit_value(store, &glit);
        }
        let bindings = match bindings {
            Some(b) => b,
            None => return CostEffort::INF,
        };
        let mut best = CostEffort::INF;
        let mut args: Vec<u32> = lit.args.iter().map(|_| 0).collect();
        self.min_over_args(store, bindings, &lit, 0, &mut args, &mut best);
        best
    }

    fn min_over_args(
        &self,
        store: &GroundStore,
        bindings: &BindingSet,
        lit: &Literal,
        idx: usize,
        args: &mut Vec<u32>,
        best: &mut CostEffort,
    ) {
        if idx == lit.args.len() {
            let glit = GLit { pred: lit.pred, args: args.clone(), positive: lit.positive };
            *best = best.lex_min(self.lit_value(store, &glit));
            return;
        }
        match lit.args[idx] {
            Term::Obj(o) => {
                args[idx] = o;
                self.min_over_args(store, bindings, lit, idx + 1, args, best);
            }
            Term::Var(v) => {
                for o in bindings.possible_values(v, store) {
                    args[idx] = o;
                    self.min_over_args(store, bindings, lit, idx + 1, args, best);
                }
            }
        }
    }

    /// Additive value of a condition formula: conjunctions sum, disjunctions
    /// take the cheapest branch (with that branch's effort), existentials
    /// minimize over instantiations.
    pub fn formula_value(
        &self,
        store: &GroundStore,
        f: &Formula,
        bindings: Option<&BindingSet>,
    ) -> CostEffort {
        match f {
            Formula::Lit(lit) => self.open_lit_value(store, lit, bindings),
            Formula::Not(_) => {
                self.formula_value(store, &crate::pddl::to_nnf(f), bindings)
            }
            Formula::And(cs) => {
                let mut total = CostEffort::ZERO;
                for c in cs {
                    total = total.plus(self.formula_value(store, c, bindings));
                    if !total.is_finite() {
                        return CostEffort::INF;
                    }
                }
                total
            }
            Formula::Or(ds) => {
                let mut best = CostEffort::INF;
                for d in ds {
                    best = best.lex_min(self.formula_value(store, d, bindings));
                }
                best
            }
            Formula::Exists(qs, body) => {
                if bindings.is_some() {
                    // Bound variables are plan variables; minimizing over
                    // their possible values happens per literal.
                    return self.formula_value(store, body, bindings);
                }
                let n = 1 + formula_max_var(f).unwrap_or(0) as usize;
                let mut best = CostEffort::INF;
                for inst in crate::ground::existential_instances(store, qs, body, n) {
                    best = best.lex_min(self.formula_value(store, &inst, None));
                }
                best
            }
            Formula::Forall(qs, body) => {
                // Universals are expanded during grounding; any survivor is
                // summed over its instances.
                let n = 1 + formula_max_var(f).unwrap_or(0) as usize;
                let mut total = CostEffort::ZERO;
                for inst in crate::ground::existential_instances(store, qs, body, n) {
                    total = total.plus(self.formula_value(store, &inst, bindings));
                }
                total
            }
        }
    }

    /// Sum over condition segments.
    pub fn segments_value(
        &self,
        store: &GroundStore,
        segments: &[TimedCond],
        bindings: Option<&BindingSet>,
    ) -> CostEffort {
        let mut total = CostEffort::ZERO;
        for tc in segments {
            total = total.plus(self.formula_value(store, &tc.formula, bindings));
        }
        total
    }

    /// Sorted `literal cost effort` lines for diagnostics.
    pub fn dump(&self, store: &GroundStore) -> Vec<String> {
        let names = store.names();
        let mut lines: Vec<String> = self
            .entries
            .iter()
            .map(|(lit, v)| {
                format!("{} {} {}", names.literal(&lit.to_literal(), &[]), v.cost, v.effort)
            })
            .collect();
        lines.sort();
        lines
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Precondition groups per endpoint: classical actions have one group; a
/// durative action's start effects depend on start and invariant conditions
/// while its end effects depend on all of them.
fn endpoint_groups(
    store: &GroundStore,
    action: &crate::ground::GroundAction,
) -> Vec<(Vec<TimedCond>, EffTime)> {
    if !store.durative {
        return vec![(action.precondition.clone(), EffTime::Start)];
    }
    let start: Vec<TimedCond> = action
        .precondition
        .iter()
        .filter(|tc| tc.tau != Tau::End)
        .cloned()
        .collect();
    let all = action.precondition.clone();
    vec![(start, EffTime::Start), (all, EffTime::End)]
}

pub fn formula_max_var(f: &Formula) -> Option<VarId> {
    match f {
        Formula::Lit(lit) => lit
            .args
            .iter()
            .filter_map(|t| match t {
                Term::Var(v) => Some(*v),
                Term::Obj(_) => None,
            })
            .max(),
        Formula::Not(inner) => formula_max_var(inner),
        Formula::And(cs) | Formula::Or(cs) => cs.iter().filter_map(formula_max_var).max(),
        Formula::Exists(qs, body) | Formula::Forall(qs, body) => {
            let qmax = qs.iter().map(|q| q.var).max();
            qmax.into_iter().chain(formula_max_var(body)).max()
        }
    }
}
