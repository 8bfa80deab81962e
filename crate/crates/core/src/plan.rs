//! Partial plans: steps, causal links, ordering stores, flaw bookkeeping,
//! and refinement generation.

use crate::bindings::BindingSet;
use crate::ground::{GroundAction, GroundStore, GLit};
use crate::heur::{HeurMode, HeurTable, Xint};
use crate::pddl::*;
use crate::stn::DGraph;
use num_rational::Rational64;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

/// Plan-level step ids for the two dummy actions.
pub const A0: u32 = 0;
pub const AINF: u32 = 1;

/// Effect index marking a causal link supported by the initial conditions.
pub const INIT_EFF: u32 = u32::MAX;

/// Shared planning context: preprocessing artifacts plus mode switches.
pub struct PlanCtx<'a> {
    pub store: &'a GroundStore,
    pub lifted: bool,
    pub epsilon: Rational64,
}

impl<'a> PlanCtx<'a> {
    pub fn new(store: &'a GroundStore, lifted: bool, epsilon: Rational64) -> PlanCtx<'a> {
        PlanCtx { store, lifted, epsilon }
    }

    pub fn durative(&self) -> bool {
        self.store.durative
    }

    fn bindings_ref<'b>(&self, plan: &'b Plan) -> Option<&'b BindingSet> {
        if self.lifted {
            Some(&plan.bindings)
        } else {
            None
        }
    }
}

/// An effect as it appears on a plan step: ground in ground mode, possibly
/// containing plan variables in lifted mode.
#[derive(Clone, Debug)]
pub struct PEffect {
    pub tau: EffTime,
    pub condition: Vec<TimedCond>,
    pub literal: Literal,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum StepKind {
    Init,
    Goal,
    Real,
}

/// One step of a plan. Dummies carry no effects; the goal step's
/// precondition is the problem goal.
#[derive(Clone, Debug)]
pub struct Step {
    pub kind: StepKind,
    pub schema: Option<SchemaId>,
    pub ground_id: Option<u32>,
    pub args: Vec<Term>,
    pub duration: Vec<DurationConstraint>,
    pub precondition: Vec<TimedCond>,
    pub effects: Vec<PEffect>,
}

impl Step {
    fn init() -> Step {
        Step {
            kind: StepKind::Init,
            schema: None,
            ground_id: None,
            args: Vec::new(),
            duration: Vec::new(),
            precondition: Vec::new(),
            effects: Vec::new(),
        }
    }

    fn goal(store: &GroundStore) -> Step {
        Step {
            kind: StepKind::Goal,
            schema: None,
            ground_id: None,
            args: Vec::new(),
            duration: Vec::new(),
            precondition: store.goal.clone(),
            effects: Vec::new(),
        }
    }

    fn from_ground(action: &Arc<GroundAction>) -> Step {
        Step {
            kind: StepKind::Real,
            schema: Some(action.schema),
            ground_id: Some(action.id),
            args: action.args.iter().map(|&o| Term::Obj(o)).collect(),
            duration: action.duration.clone(),
            precondition: action.precondition.clone(),
            effects: action
                .effects
                .iter()
                .map(|e| PEffect {
                    tau: e.tau,
                    condition: e.condition.clone(),
                    literal: e.literal.to_literal(),
                })
                .collect(),
        }
    }

    pub fn display(&self, store: &GroundStore, bindings: &BindingSet) -> String {
        let names = store.names();
        match self.kind {
            StepKind::Init => "<init>".to_string(),
            StepKind::Goal => "<goal>".to_string(),
            StepKind::Real => {
                let schema = &store.domain.schemas[self.schema.unwrap() as usize];
                let mut s = String::new();
                s.push('(');
                s.push_str(&schema.name);
                for &arg in &self.args {
                    s.push(' ');
                    match bindings.resolve(arg) {
                        Term::Obj(o) => s.push_str(names.obj(o)),
                        Term::Var(v) => s.push_str(&format!("?v{v}")),
                    }
                }
                s.push(')');
                s
            }
        }
    }
}

/// An unresolved condition: a literal or a composite (disjunction or
/// existential) attached to a step at annotation tau.
#[derive(Clone, Debug)]
pub struct OpenCond {
    pub step: u32,
    pub tau: Tau,
    pub formula: Formula,
    pub seq: u64,
}

impl OpenCond {
    pub fn as_literal(&self) -> Option<&Literal> {
        match &self.formula {
            Formula::Lit(l) => Some(l),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CausalLink {
    pub producer: u32,
    /// Effect index in the producer, or INIT_EFF for initial-condition links.
    pub eff: u32,
    pub consumer: u32,
    pub tau: Tau,
    pub lit: Literal,
    pub seq: u64,
}

/// A causal link together with an effect that could clobber it.
#[derive(Clone, Debug)]
pub struct Threat {
    pub link: u32,
    pub step: u32,
    pub eff: u32,
    pub seq: u64,
}

/// Transitive-closure bit matrix over real steps; the dummies are implicit
/// (the init step precedes everything, everything precedes the goal step).
#[derive(Clone, Debug, Default)]
pub struct BitOrdering {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitOrdering {
    pub fn new() -> BitOrdering {
        BitOrdering::default()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn add_step(&mut self) -> usize {
        let n = self.n + 1;
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        for i in 0..self.n {
            for w in 0..self.words {
                bits[i * words + w] = self.bits[i * self.words + w];
            }
        }
        self.n = n;
        self.words = words;
        self.bits = bits;
        n - 1
    }

    fn bit(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    fn set_bit(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
    }

    /// Does the closure entail step a strictly before step b? Takes plan
    /// step ids (real steps are ids >= 2).
    pub fn precedes(&self, a: u32, b: u32) -> bool {
        if a == b {
            return false;
        }
        if a == A0 || b == AINF {
            return true;
        }
        if b == A0 || a == AINF {
            return false;
        }
        self.bit(a as usize - 2, b as usize - 2)
    }

    /// Could a come strictly before b in some linearization?
    pub fn can_precede(&self, a: u32, b: u32) -> bool {
        a != b && !self.precedes(b, a)
    }

    /// Asserts a before b, updating the closure. A no-op when already
    /// entailed; an error when the reverse is entailed or a is b.
    pub fn order(&mut self, a: u32, b: u32) -> Result<(), ()> {
        if a == b {
            return Err(());
        }
        if self.precedes(a, b) {
            return Ok(());
        }
        if self.precedes(b, a) {
            return Err(());
        }
        let (i, j) = (a as usize - 2, b as usize - 2);
        // All (u, v) with u == i or u before i, and v == j or j before v.
        let mut preds: Vec<usize> = vec![i];
        for u in 0..self.n {
            if self.bit(u, i) {
                preds.push(u);
            }
        }
        let mut row_j: Vec<u64> = Vec::with_capacity(self.words);
        for w in 0..self.words {
            row_j.push(self.bits[j * self.words + w]);
        }
        for u in preds {
            self.set_bit(u, j);
            for w in 0..self.words {
                self.bits[u * self.words + w] |= row_j[w];
            }
        }
        Ok(())
    }

    /// Length (in steps) of the longest chain of real steps.
    pub fn longest_chain(&self) -> usize {
        let mut best = 0usize;
        let mut memo: Vec<Option<usize>> = vec![None; self.n];
        for i in 0..self.n {
            best = best.max(self.chain_from(i, &mut memo));
        }
        best
    }

    fn chain_from(&self, i: usize, memo: &mut Vec<Option<usize>>) -> usize {
        if let Some(v) = memo[i] {
            return v;
        }
        let mut len = 1;
        for j in 0..self.n {
            if self.bit(i, j) {
                len = len.max(1 + self.chain_from(j, memo));
            }
        }
        memo[i] = Some(len);
        len
    }

    pub fn approx_bytes(&self) -> usize {
        self.bits.len() * 8 + 32
    }
}

#[derive(Clone, Debug)]
pub enum Orderings {
    Bit(BitOrdering),
    Stn(DGraph),
}

impl Orderings {
    pub fn approx_bytes(&self) -> usize {
        match self {
            Orderings::Bit(b) => b.approx_bytes(),
            Orderings::Stn(d) => d.approx_bytes(),
        }
    }
}

/// Time point owned by a step's start or end (durative mode). Step k >= 2
/// owns points 2k-3 and 2k-2; the dummies own no points.
pub fn start_point(step: u32) -> usize {
    2 * step as usize - 3
}

pub fn end_point(step: u32) -> usize {
    2 * step as usize - 2
}

fn effect_point(step: u32, tau: EffTime) -> usize {
    match tau {
        EffTime::Start => start_point(step),
        EffTime::End => end_point(step),
    }
}

/// Where a condition with annotation tau attaches on its consumer: the end
/// point for at-end conditions, the start point otherwise.
fn attach_point(step: u32, tau: Tau) -> usize {
    match tau {
        Tau::End => end_point(step),
        _ => start_point(step),
    }
}

/// Upper end of the window a causal link must protect: at-start conditions
/// are safe once the consumer has started; invariant and at-end conditions
/// must stay unclobbered through the consumer's end.
fn window_end_point(step: u32, tau: Tau) -> usize {
    match tau {
        Tau::Start => start_point(step),
        _ => end_point(step),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FlawRef {
    Open(usize),
    Threat(usize),
}

/// An immutable partial plan. Refinements clone and extend; failed
/// refinements are discarded rather than returned.
#[derive(Clone, Debug)]
pub struct Plan {
    pub id: u64,
    pub steps: Vec<Arc<Step>>,
    pub links: Vec<CausalLink>,
    pub orderings: Orderings,
    pub bindings: BindingSet,
    pub open: Vec<OpenCond>,
    pub threats: Vec<Threat>,
    next_seq: u64,
    /// Conditional effects already linked through, whose conditions have
    /// been demanded as open conditions on their step.
    activated: BTreeSet<(u32, u32)>,
}

impl Plan {
    pub fn initial(ctx: &PlanCtx<'_>) -> Plan {
        let mut bindings = BindingSet::new();
        if ctx.lifted {
            // Goal quantifier variables were numbered from zero by the
            // parser, so allocating them first makes ids line up.
            for qv in &ctx.store.problem.goal_vars {
                bindings.alloc(qv.ty);
            }
        }
        let orderings = if ctx.durative() {
            Orderings::Stn(DGraph::new(ctx.epsilon))
        } else {
            Orderings::Bit(BitOrdering::new())
        };
        let mut plan = Plan {
            id: 0,
            steps: vec![Arc::new(Step::init()), Arc::new(Step::goal(ctx.store))],
            links: Vec::new(),
            orderings,
            bindings,
            open: Vec::new(),
            threats: Vec::new(),
            next_seq: 0,
            activated: BTreeSet::new(),
        };
        let goal = plan.steps[AINF as usize].clone();
        for tc in &goal.precondition {
            plan.push_open(AINF, tc.tau, &tc.formula);
        }
        plan
    }

    pub fn g(&self) -> u32 {
        (self.steps.len() - 2) as u32
    }

    pub fn is_solution(&self) -> bool {
        self.open.is_empty() && self.threats.is_empty()
    }

    pub fn flaw_count(&self) -> usize {
        self.open.len() + self.threats.len()
    }

    fn bump_seq(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    /// Decomposes a condition into open conditions: conjunctions split into
    /// one flaw per conjunct; disjunctions and existentials stay composite.
    fn push_open(&mut self, step: u32, tau: Tau, f: &Formula) {
        match f {
            Formula::And(cs) => {
                for c in cs.iter().rev() {
                    self.push_open(step, tau, c);
                }
            }
            _ => {
                let seq = self.bump_seq();
                self.open.push(OpenCond { step, tau, formula: f.clone(), seq });
            }
        }
    }

    fn child(&self) -> Plan {
        let mut c = self.clone();
        c.id = 0;
        c
    }

    /// The most recently added step that still has open conditions; open
    /// conditions of that step are the local flaws.
    pub fn local_step(&self) -> Option<u32> {
        self.open.iter().map(|oc| oc.step).max()
    }

    pub fn can_precede(&self, a: u32, b: u32) -> bool {
        match &self.orderings {
            Orderings::Bit(bo) => bo.can_precede(a, b),
            Orderings::Stn(_) => unreachable!("point-level queries in durative mode"),
        }
    }

    /// Could the given effect of `step` occur strictly inside the protected
    /// window of `link`?
    pub fn threat_possible(&self, link: &CausalLink, step: u32, tau: EffTime) -> bool {
        match &self.orderings {
            Orderings::Bit(bo) => {
                let _ = tau;
                if step == link.producer || step == link.consumer {
                    return false;
                }
                !bo.precedes(step, link.producer) && !bo.precedes(link.consumer, step)
            }
            Orderings::Stn(d) => {
                let t_pt = effect_point(step, tau);
                if link.producer == A0 {
                    if link.consumer == AINF {
                        return true;
                    }
                    let hi = window_end_point(link.consumer, link.tau);
                    return t_pt != hi && d.can_precede(t_pt, hi);
                }
                let lo = effect_point(
                    link.producer,
                    self.steps[link.producer as usize].effects[link.eff as usize].tau,
                );
                if link.consumer == AINF {
                    return t_pt != lo && d.can_precede(lo, t_pt);
                }
                let hi = window_end_point(link.consumer, link.tau);
                if t_pt == lo || t_pt == hi {
                    return false;
                }
                d.can_fall_between(lo, t_pt, hi)
            }
        }
    }

    /// Does `lit` unify (same predicate and polarity) with `other` under the
    /// current bindings?
    fn literals_unifiable(&self, ctx: &PlanCtx<'_>, a: &Literal, b: &Literal) -> bool {
        if a.pred != b.pred || a.positive != b.positive {
            return false;
        }
        if ctx.lifted {
            self.bindings.unify_all(ctx.store, &a.args, &b.args).is_some()
        } else {
            a.args == b.args
        }
    }

    /// Recomputes the threat list, carrying over insertion sequence numbers
    /// from the parent so LIFO/FIFO flaw orders remain stable.
    fn refresh_threats(&mut self, ctx: &PlanCtx<'_>, parent_seqs: &HashMap<(u32, u32, u32), u64>) {
        let mut found: Vec<Threat> = Vec::new();
        for (li, link) in self.links.iter().enumerate() {
            let negated = link.lit.negated();
            for sid in 2..self.steps.len() as u32 {
                let step = self.steps[sid as usize].clone();
                for (ei, eff) in step.effects.iter().enumerate() {
                    if sid == link.producer && ei as u32 == link.eff {
                        continue;
                    }
                    if !self.literals_unifiable(ctx, &eff.literal, &negated) {
                        continue;
                    }
                    if !self.threat_possible(link, sid, eff.tau) {
                        continue;
                    }
                    found.push(Threat { link: li as u32, step: sid, eff: ei as u32, seq: 0 });
                }
            }
        }
        for t in &mut found {
            match parent_seqs.get(&(t.link, t.step, t.eff)) {
                Some(&s) => t.seq = s,
                None => t.seq = self.bump_seq(),
            }
        }
        self.threats = found;
    }

    fn threat_seq_map(&self) -> HashMap<(u32, u32, u32), u64> {
        self.threats.iter().map(|t| ((t.link, t.step, t.eff), t.seq)).collect()
    }

    /// All consistent successors resolving the given flaw.
    pub fn resolve(&self, ctx: &PlanCtx<'_>, flaw: FlawRef) -> Vec<Plan> {
        match flaw {
            FlawRef::Threat(ti) => self.resolve_threat(ctx, ti),
            FlawRef::Open(oi) => self.resolve_open(ctx, oi),
        }
    }

    pub fn count_refinements(&self, ctx: &PlanCtx<'_>, flaw: FlawRef) -> usize {
        self.resolve(ctx, flaw).len()
    }

    fn resolve_threat(&self, ctx: &PlanCtx<'_>, ti: usize) -> Vec<Plan> {
        let threat = &self.threats[ti];
        let link = self.links[threat.link as usize].clone();
        let eff_tau = self.steps[threat.step as usize].effects[threat.eff as usize].tau;
        let seqs = self.threat_seq_map();
        let mut out = Vec::new();

        // Demotion: the threatening effect before the producing effect.
        let mut demoted = self.child();
        let ok = match &mut demoted.orderings {
            Orderings::Bit(bo) => bo.order(threat.step, link.producer).is_ok(),
            Orderings::Stn(d) => {
                let t_pt = effect_point(threat.step, eff_tau);
                let p_pt = if link.producer == A0 {
                    0
                } else {
                    effect_point(
                        link.producer,
                        self.steps[link.producer as usize].effects[link.eff as usize].tau,
                    )
                };
                d.ensure_precedes(t_pt, p_pt).is_ok()
            }
        };
        if ok {
            demoted.refresh_threats(ctx, &seqs);
            out.push(demoted);
        }

        // Promotion: the threatening effect after the protected window.
        if link.consumer != AINF {
            let mut promoted = self.child();
            let ok = match &mut promoted.orderings {
                Orderings::Bit(bo) => bo.order(link.consumer, threat.step).is_ok(),
                Orderings::Stn(d) => {
                    let t_pt = effect_point(threat.step, eff_tau);
                    let w_pt = window_end_point(link.consumer, link.tau);
                    d.ensure_precedes(w_pt, t_pt).is_ok()
                }
            };
            if ok {
                promoted.refresh_threats(ctx, &seqs);
                out.push(promoted);
            }
        }

        // Separation: one refinement per argument position whose
        // non-codesignation is consistent.
        if ctx.lifted {
            let eff_lit = self.steps[threat.step as usize].effects[threat.eff as usize].literal.clone();
            let negated = link.lit.negated();
            for i in 0..eff_lit.args.len() {
                if let Some(b) = self.bindings.separate(ctx.store, eff_lit.args[i], negated.args[i]) {
                    let mut separated = self.child();
                    separated.bindings = b;
                    separated.refresh_threats(ctx, &seqs);
                    out.push(separated);
                }
            }
        }
        out
    }

    /// Is this threat resolvable by separation (making it an s-flaw rather
    /// than an n-flaw)?
    pub fn threat_separable(&self, ctx: &PlanCtx<'_>, threat: &Threat) -> bool {
        if !ctx.lifted {
            return false;
        }
        let link = &self.links[threat.link as usize];
        let eff_lit = &self.steps[threat.step as usize].effects[threat.eff as usize].literal;
        let negated = link.lit.negated();
        (0..eff_lit.args.len())
            .any(|i| self.bindings.separate(ctx.store, eff_lit.args[i], negated.args[i]).is_some())
    }

    fn resolve_open(&self, ctx: &PlanCtx<'_>, oi: usize) -> Vec<Plan> {
        let oc = self.open[oi].clone();
        match &oc.formula {
            Formula::Lit(lit) if lit.pred == PRED_EQ => self.resolve_equality(ctx, oi, lit),
            Formula::Lit(lit) => self.resolve_literal(ctx, oi, lit),
            Formula::Or(ds) => {
                let mut out = Vec::new();
                for d in ds {
                    let simplified = self.simplify_branch(ctx, d);
                    if simplified.is_false() {
                        continue;
                    }
                    let mut c = self.child();
                    c.open.remove(oi);
                    c.push_open(oc.step, oc.tau, &simplified);
                    c.refresh_threats(ctx, &self.threat_seq_map());
                    out.push(c);
                }
                out
            }
            Formula::Exists(qs, body) => {
                if ctx.lifted {
                    // Bound variables are already plan variables; commit to
                    // the body and let unification bind them.
                    let mut c = self.child();
                    c.open.remove(oi);
                    c.push_open(oc.step, oc.tau, body);
                    c.refresh_threats(ctx, &self.threat_seq_map());
                    return vec![c];
                }
                let n = 1 + crate::heur::formula_max_var(&oc.formula).unwrap_or(0) as usize;
                let mut out = Vec::new();
                for inst in crate::ground::existential_instances(ctx.store, qs, body, n) {
                    if inst.is_false() {
                        continue;
                    }
                    let mut c = self.child();
                    c.open.remove(oi);
                    c.push_open(oc.step, oc.tau, &inst);
                    c.refresh_threats(ctx, &self.threat_seq_map());
                    out.push(c);
                }
                out
            }
            // Conjunctions are split on insertion; a surviving one is
            // decomposed in place.
            Formula::And(_) => {
                let mut c = self.child();
                c.open.remove(oi);
                let f = oc.formula.clone();
                c.push_open(oc.step, oc.tau, &f);
                vec![c]
            }
            Formula::Not(_) | Formula::Forall(_, _) => Vec::new(),
        }
    }

    /// Re-simplifies a chosen disjunct at its new conjunctive position.
    fn simplify_branch(&self, ctx: &PlanCtx<'_>, f: &Formula) -> Formula {
        if ctx.lifted {
            return f.clone();
        }
        let n = 1 + crate::heur::formula_max_var(f).map_or(0, |v| v as usize);
        let mut asg = vec![None; n];
        crate::ground::simplify(f, &mut asg, ctx.store, ctx.store.strip_statics)
    }

    fn resolve_equality(&self, ctx: &PlanCtx<'_>, oi: usize, lit: &Literal) -> Vec<Plan> {
        let (a, b) = (lit.args[0], lit.args[1]);
        if ctx.lifted {
            let refined = if lit.positive {
                self.bindings.unify(ctx.store, a, b)
            } else {
                self.bindings.separate(ctx.store, a, b)
            };
            match refined {
                Some(bset) => {
                    let mut c = self.child();
                    c.bindings = bset;
                    c.open.remove(oi);
                    c.refresh_threats(ctx, &self.threat_seq_map());
                    vec![c]
                }
                None => Vec::new(),
            }
        } else {
            let holds = match (a, b) {
                (Term::Obj(x), Term::Obj(y)) => (x == y) == lit.positive,
                _ => false,
            };
            if holds {
                let mut c = self.child();
                c.open.remove(oi);
                vec![c]
            } else {
                Vec::new()
            }
        }
    }

    fn resolve_literal(&self, ctx: &PlanCtx<'_>, oi: usize, lit: &Literal) -> Vec<Plan> {
        let oc = self.open[oi].clone();
        let seqs = self.threat_seq_map();
        let mut out = Vec::new();
        self.link_to_init(ctx, oi, &oc, lit, &seqs, &mut out);
        self.link_to_existing(ctx, oi, &oc, lit, &seqs, &mut out);
        self.link_to_new(ctx, oi, &oc, lit, &seqs, &mut out);
        out
    }

    fn add_link(
        &self,
        c: &mut Plan,
        producer: u32,
        eff: u32,
        oc: &OpenCond,
        lit: &Literal,
    ) {
        let seq = c.bump_seq();
        c.links.push(CausalLink {
            producer,
            eff,
            consumer: oc.step,
            tau: oc.tau,
            lit: lit.clone(),
            seq,
        });
    }

    /// Demands a linked conditional effect's condition on its step, once.
    fn activate_condition(&self, c: &mut Plan, step: u32, eff: u32) {
        let effect = self.steps[step as usize].effects[eff as usize].clone();
        if effect.condition.is_empty() || !c.activated.insert((step, eff)) {
            return;
        }
        for tc in &effect.condition {
            c.push_open(step, tc.tau, &tc.formula);
        }
    }

    fn link_to_init(
        &self,
        ctx: &PlanCtx<'_>,
        oi: usize,
        oc: &OpenCond,
        lit: &Literal,
        seqs: &HashMap<(u32, u32, u32), u64>,
        out: &mut Vec<Plan>,
    ) {
        if !ctx.lifted {
            if let Some(glit) = GLit::from_literal(lit) {
                if ctx.store.holds_initially(&glit) {
                    let mut c = self.child();
                    c.open.remove(oi);
                    self.add_link(&mut c, A0, INIT_EFF, oc, lit);
                    c.refresh_threats(ctx, seqs);
                    out.push(c);
                }
            }
            return;
        }
        // Lifted: one refinement per full instantiation of the free
        // variables under which the literal holds initially.
        let resolved: Vec<Term> = lit.args.iter().map(|&t| self.bindings.resolve(t)).collect();
        let free: Vec<VarId> = {
            let mut seen = Vec::new();
            for t in &resolved {
                if let Term::Var(v) = t {
                    if !seen.contains(v) {
                        seen.push(*v);
                    }
                }
            }
            seen
        };
        let mut assignment: Vec<(VarId, ObjId)> = Vec::new();
        self.enumerate_init_bindings(ctx, oi, oc, lit, &resolved, &free, 0, &mut assignment, seqs, out);
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate_init_bindings(
        &self,
        ctx: &PlanCtx<'_>,
        oi: usize,
        oc: &OpenCond,
        lit: &Literal,
        resolved: &[Term],
        free: &[VarId],
        depth: usize,
        assignment: &mut Vec<(VarId, ObjId)>,
        seqs: &HashMap<(u32, u32, u32), u64>,
        out: &mut Vec<Plan>,
    ) {
        if depth == free.len() {
            let ground: Vec<ObjId> = resolved
                .iter()
                .map(|t| match t {
                    Term::Obj(o) => *o,
                    Term::Var(v) => assignment.iter().find(|(w, _)| w == v).unwrap().1,
                })
                .collect();
            let glit = GLit { pred: lit.pred, args: ground, positive: lit.positive };
            if !ctx.store.holds_initially(&glit) {
                return;
            }
            let mut bset = self.bindings.clone();
            for &(v, o) in assignment.iter() {
                bset = match bset.unify(ctx.store, Term::Var(v), Term::Obj(o)) {
                    Some(b) => b,
                    None => return,
                };
            }
            let mut c = self.child();
            c.bindings = bset;
            c.open.remove(oi);
            self.add_link(&mut c, A0, INIT_EFF, oc, lit);
            c.refresh_threats(ctx, seqs);
            out.push(c);
            return;
        }
        let v = free[depth];
        for o in self.bindings.possible_values(v, ctx.store) {
            assignment.push((v, o));
            self.enumerate_init_bindings(ctx, oi, oc, lit, resolved, free, depth + 1, assignment, seqs, out);
            assignment.pop();
        }
    }

    fn link_to_existing(
        &self,
        ctx: &PlanCtx<'_>,
        oi: usize,
        oc: &OpenCond,
        lit: &Literal,
        seqs: &HashMap<(u32, u32, u32), u64>,
        out: &mut Vec<Plan>,
    ) {
        for sid in 2..self.steps.len() as u32 {
            if sid == oc.step && !ctx.durative() {
                continue;
            }
            let step = self.steps[sid as usize].clone();
            for (ei, eff) in step.effects.iter().enumerate() {
                if !self.literals_unifiable(ctx, &eff.literal, lit) {
                    continue;
                }
                if let Some(c) = self.build_link(ctx, oi, oc, lit, sid, ei as u32, seqs) {
                    out.push(c);
                }
            }
        }
    }

    fn link_to_new(
        &self,
        ctx: &PlanCtx<'_>,
        oi: usize,
        oc: &OpenCond,
        lit: &Literal,
        seqs: &HashMap<(u32, u32, u32), u64>,
        out: &mut Vec<Plan>,
    ) {
        if ctx.lifted {
            for (schema_id, schema) in ctx.store.domain.schemas.iter().enumerate() {
                let relevant = schema
                    .effects
                    .iter()
                    .any(|e| e.literal.pred == lit.pred && e.literal.positive == lit.positive);
                if !relevant {
                    continue;
                }
                // Instantiate once on scratch bindings to enumerate the
                // expanded effect instances; quantified effects expand to
                // one candidate per object tuple.
                let mut probe = self.bindings.clone();
                let step = instantiate_schema(ctx, schema_id as SchemaId, schema, &mut probe);
                for (ei, eff) in step.effects.iter().enumerate() {
                    if eff.literal.pred != lit.pred || eff.literal.positive != lit.positive {
                        continue;
                    }
                    if let Some(c) = self.build_lifted_step(
                        ctx,
                        oi,
                        oc,
                        lit,
                        schema_id as SchemaId,
                        ei as u32,
                        seqs,
                    ) {
                        out.push(c);
                    }
                }
            }
            return;
        }
        let glit = match GLit::from_literal(lit) {
            Some(g) => g,
            None => return,
        };
        if let Some(achievers) = ctx.store.achievers.get(&glit) {
            for &(aid, ei) in achievers {
                let action = &ctx.store.actions[aid as usize];
                if let Some(c) = self.add_ground_step(ctx, oi, oc, lit, action, ei, seqs) {
                    out.push(c);
                }
            }
        }
    }

    /// Links an existing step's effect to the open condition, adding the
    /// temporal constraint and any conditional-effect obligations.
    #[allow(clippy::too_many_arguments)]
    fn build_link(
        &self,
        ctx: &PlanCtx<'_>,
        oi: usize,
        oc: &OpenCond,
        lit: &Literal,
        producer: u32,
        eff: u32,
        seqs: &HashMap<(u32, u32, u32), u64>,
    ) -> Option<Plan> {
        let mut c = self.child();
        let eff_data = self.steps[producer as usize].effects[eff as usize].clone();
        if ctx.lifted {
            c.bindings = c.bindings.unify_all(ctx.store, &eff_data.literal.args, &lit.args)?;
        }
        match &mut c.orderings {
            Orderings::Bit(bo) => {
                if oc.step != AINF && bo.order(producer, oc.step).is_err() {
                    return None;
                }
            }
            Orderings::Stn(d) => {
                if oc.step != AINF {
                    let p_pt = effect_point(producer, eff_data.tau);
                    let a_pt = attach_point(oc.step, oc.tau);
                    if d.ensure_precedes(p_pt, a_pt).is_err() {
                        return None;
                    }
                }
            }
        }
        c.open.remove(oi);
        self.add_link(&mut c, producer, eff, oc, lit);
        self.activate_condition(&mut c, producer, eff);
        c.refresh_threats(ctx, seqs);
        Some(c)
    }

    fn add_ground_step(
        &self,
        ctx: &PlanCtx<'_>,
        oi: usize,
        oc: &OpenCond,
        lit: &Literal,
        action: &Arc<GroundAction>,
        eff: u32,
        seqs: &HashMap<(u32, u32, u32), u64>,
    ) -> Option<Plan> {
        let mut c = self.child();
        let step = Step::from_ground(action);
        let sid = c.steps.len() as u32;
        match &mut c.orderings {
            Orderings::Bit(bo) => {
                bo.add_step();
            }
            Orderings::Stn(d) => {
                d.add_action(&step.duration).ok()?;
            }
        }
        let eff_data = step.effects[eff as usize].clone();
        let precondition = step.precondition.clone();
        c.steps.push(Arc::new(step));
        match &mut c.orderings {
            Orderings::Bit(bo) => {
                if oc.step != AINF && bo.order(sid, oc.step).is_err() {
                    return None;
                }
            }
            Orderings::Stn(d) => {
                if oc.step != AINF {
                    let p_pt = effect_point(sid, eff_data.tau);
                    let a_pt = attach_point(oc.step, oc.tau);
                    if d.ensure_precedes(p_pt, a_pt).is_err() {
                        return None;
                    }
                }
            }
        }
        c.open.remove(oi);
        self.add_link(&mut c, sid, eff, oc, lit);
        for tc in &precondition {
            c.push_open(sid, tc.tau, &tc.formula);
        }
        if !eff_data.condition.is_empty() && c.activated.insert((sid, eff)) {
            for tc in &eff_data.condition {
                c.push_open(sid, tc.tau, &tc.formula);
            }
        }
        c.refresh_threats(ctx, seqs);
        Some(c)
    }

    #[allow(clippy::too_many_arguments)]
    fn build_lifted_step(
        &self,
        ctx: &PlanCtx<'_>,
        oi: usize,
        oc: &OpenCond,
        lit: &Literal,
        schema_id: SchemaId,
        target_eff: u32,
        seqs: &HashMap<(u32, u32, u32), u64>,
    ) -> Option<Plan> {
        let schema = &ctx.store.domain.schemas[schema_id as usize];
        let mut c = self.child();
        let step = instantiate_schema(ctx, schema_id, schema, &mut c.bindings);
        let eff_data = step.effects[target_eff as usize].clone();
        c.bindings = c.bindings.unify_all(ctx.store, &eff_data.literal.args, &lit.args)?;
        let sid = c.steps.len() as u32;
        match &mut c.orderings {
            Orderings::Bit(bo) => {
                bo.add_step();
                if oc.step != AINF && bo.order(sid, oc.step).is_err() {
                    return None;
                }
            }
            Orderings::Stn(d) => {
                d.add_action(&step.duration).ok()?;
                if oc.step != AINF {
                    let p_pt = effect_point(sid, eff_data.tau);
                    let a_pt = attach_point(oc.step, oc.tau);
                    if d.ensure_precedes(p_pt, a_pt).is_err() {
                        return None;
                    }
                }
            }
        }
        let precondition = step.precondition.clone();
        c.steps.push(Arc::new(step));
        c.open.remove(oi);
        self.add_link(&mut c, sid, target_eff, oc, lit);
        for tc in &precondition {
            c.push_open(sid, tc.tau, &tc.formula);
        }
        if !eff_data.condition.is_empty() && c.activated.insert((sid, target_eff)) {
            for tc in &eff_data.condition {
                c.push_open(sid, tc.tau, &tc.formula);
            }
        }
        c.refresh_threats(ctx, seqs);
        Some(c)
    }

    /// Plan rank under the chosen heuristic mode: (f, effort).
    pub fn rank(&self, ctx: &PlanCtx<'_>, table: &HeurTable, mode: HeurMode) -> (Xint, Xint) {
        let g = Xint::Fin(self.g() as u64);
        match mode {
            HeurMode::OpenConds => (g.plus(Xint::Fin(self.open.len() as u64)), Xint::ZERO),
            HeurMode::Flaws => (g.plus(Xint::Fin(self.flaw_count() as u64)), Xint::ZERO),
            HeurMode::Add | HeurMode::AddReuse => {
                let bindings = ctx.bindings_ref(self);
                let mut cost = Xint::ZERO;
                let mut effort = Xint::ZERO;
                for oc in &self.open {
                    let v = table.formula_value(ctx.store, &oc.formula, bindings);
                    effort = effort.plus(v.effort);
                    if mode == HeurMode::AddReuse && self.reusable(ctx, oc) {
                        continue;
                    }
                    cost = cost.plus(v.cost);
                }
                (g.plus(cost), effort)
            }
        }
    }

    /// Reuse test for the adjusted additive heuristic: some existing step
    /// (other than the consumer) has an effect unifying with the condition
    /// and is not already ordered after the consumer.
    fn reusable(&self, ctx: &PlanCtx<'_>, oc: &OpenCond) -> bool {
        let lit = match oc.as_literal() {
            Some(l) => l,
            None => return false,
        };
        if lit.pred == PRED_EQ {
            return false;
        }
        for sid in 2..self.steps.len() as u32 {
            if sid == oc.step {
                continue;
            }
            let step = &self.steps[sid as usize];
            for eff in &step.effects {
                if !self.literals_unifiable(ctx, &eff.literal, lit) {
                    continue;
                }
                let orderable = match &self.orderings {
                    Orderings::Bit(bo) => !bo.precedes(oc.step, sid),
                    Orderings::Stn(d) => {
                        let e_pt = effect_point(sid, eff.tau);
                        let a_pt = attach_point(oc.step, oc.tau);
                        d.can_precede(e_pt, a_pt)
                    }
                };
                if orderable {
                    return true;
                }
            }
        }
        false
    }

    /// Conservative unsafety test for an open condition: some existing
    /// effect could clobber the condition before its attach point, so any
    /// causal link supporting it would start out threatened.
    pub fn open_cond_unsafe(&self, ctx: &PlanCtx<'_>, oc: &OpenCond) -> bool {
        let lit = match oc.as_literal() {
            Some(l) => l,
            None => return false,
        };
        if lit.pred == PRED_EQ {
            return false;
        }
        let negated = lit.negated();
        for sid in 2..self.steps.len() as u32 {
            if sid == oc.step {
                continue;
            }
            let step = &self.steps[sid as usize];
            for eff in &step.effects {
                if !self.literals_unifiable(ctx, &eff.literal, &negated) {
                    continue;
                }
                let possible = match &self.orderings {
                    Orderings::Bit(bo) => !bo.precedes(oc.step, sid),
                    Orderings::Stn(d) => {
                        let e_pt = effect_point(sid, eff.tau);
                        if oc.step == AINF {
                            true
                        } else {
                            d.can_precede(e_pt, window_end_point(oc.step, oc.tau))
                        }
                    }
                };
                if possible {
                    return true;
                }
            }
        }
        false
    }

    pub fn approx_bytes(&self) -> usize {
        let mut n = std::mem::size_of::<Plan>();
        n += self.steps.len() * 8;
        n += self.links.len() * std::mem::size_of::<CausalLink>();
        n += self.open.len() * 64;
        n += self.threats.len() * std::mem::size_of::<Threat>();
        n += self.orderings.approx_bytes();
        n += self.bindings.approx_bytes();
        n
    }
}

/// Instantiates a schema with fresh plan variables for parameters and
/// existential variables, expanding universal quantifiers over objects.
/// Allocation order is deterministic, so instantiating twice from equal
/// binding sets yields identically numbered variables.
fn instantiate_schema(
    ctx: &PlanCtx<'_>,
    schema_id: SchemaId,
    schema: &ActionSchema,
    bindings: &mut BindingSet,
) -> Step {
    let mut map: Vec<Option<Term>> = vec![None; schema.vars.len()];
    for (i, decl) in schema.vars.iter().enumerate().take(schema.n_params) {
        map[i] = Some(Term::Var(bindings.alloc(decl.ty)));
    }
    let mut precondition = Vec::new();
    for tc in &schema.precondition {
        let f = lift_formula(ctx, &tc.formula, &mut map, bindings, schema);
        if !f.is_true() {
            precondition.push(TimedCond { tau: tc.tau, formula: f });
        }
    }
    let mut effects = Vec::new();
    for eff in &schema.effects {
        expand_lifted_effect(ctx, eff, &mut map, bindings, schema, 0, &mut effects);
    }
    Step {
        kind: StepKind::Real,
        schema: Some(schema_id),
        ground_id: None,
        args: (0..schema.n_params).map(|i| map[i].unwrap()).collect(),
        duration: schema.duration.clone(),
        precondition,
        effects,
    }
}

fn lift_term(t: Term, map: &mut Vec<Option<Term>>, bindings: &mut BindingSet, schema: &ActionSchema) -> Term {
    match t {
        Term::Obj(o) => Term::Obj(o),
        Term::Var(v) => {
            if map[v as usize].is_none() {
                // An existential variable reached before its quantifier
                // (defensive); allocate on first sight.
                map[v as usize] = Some(Term::Var(bindings.alloc(schema.vars[v as usize].ty)));
            }
            map[v as usize].unwrap()
        }
    }
}

fn lift_formula(
    ctx: &PlanCtx<'_>,
    f: &Formula,
    map: &mut Vec<Option<Term>>,
    bindings: &mut BindingSet,
    schema: &ActionSchema,
) -> Formula {
    match f {
        Formula::Lit(lit) => Formula::Lit(Literal {
            pred: lit.pred,
            args: lit.args.iter().map(|&t| lift_term(t, map, bindings, schema)).collect(),
            positive: lit.positive,
        }),
        Formula::Not(_) => lift_formula(ctx, &to_nnf(f), map, bindings, schema),
        Formula::And(cs) => {
            let mut parts = Vec::with_capacity(cs.len());
            for c in cs {
                let g = lift_formula(ctx, c, map, bindings, schema);
                if g.is_true() {
                    continue;
                }
                match g {
                    Formula::And(inner) => parts.extend(inner),
                    other => parts.push(other),
                }
            }
            match parts.len() {
                0 => Formula::TRUE,
                1 => parts.into_iter().next().unwrap(),
                _ => Formula::And(parts),
            }
        }
        Formula::Or(ds) => Formula::Or(
            ds.iter().map(|d| lift_formula(ctx, d, map, bindings, schema)).collect(),
        ),
        Formula::Exists(qs, body) => {
            let mut mapped = Vec::with_capacity(qs.len());
            for q in qs {
                let pv = bindings.alloc(q.ty);
                map[q.var as usize] = Some(Term::Var(pv));
                mapped.push(QuantVar { var: pv, ty: q.ty });
            }
            let b = lift_formula(ctx, body, map, bindings, schema);
            for q in qs {
                map[q.var as usize] = None;
            }
            Formula::Exists(mapped, Box::new(b))
        }
        Formula::Forall(qs, body) => {
            let mut parts = Vec::new();
            expand_lifted_forall(ctx, qs, body, map, bindings, schema, 0, &mut parts);
            match parts.len() {
                0 => Formula::TRUE,
                1 => parts.into_iter().next().unwrap(),
                _ => Formula::And(parts),
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn expand_lifted_forall(
    ctx: &PlanCtx<'_>,
    qs: &[QuantVar],
    body: &Formula,
    map: &mut Vec<Option<Term>>,
    bindings: &mut BindingSet,
    schema: &ActionSchema,
    depth: usize,
    out: &mut Vec<Formula>,
) {
    if depth == qs.len() {
        let g = lift_formula(ctx, body, map, bindings, schema);
        if !g.is_true() {
            out.push(g);
        }
        return;
    }
    let q = qs[depth];
    for i in 0..ctx.store.objects_by_type[q.ty as usize].len() {
        let obj = ctx.store.objects_by_type[q.ty as usize][i];
        map[q.var as usize] = Some(Term::Obj(obj));
        expand_lifted_forall(ctx, qs, body, map, bindings, schema, depth + 1, out);
    }
    map[q.var as usize] = None;
}

#[allow(clippy::too_many_arguments)]
fn expand_lifted_effect(
    ctx: &PlanCtx<'_>,
    eff: &SchemaEffect,
    map: &mut Vec<Option<Term>>,
    bindings: &mut BindingSet,
    schema: &ActionSchema,
    depth: usize,
    out: &mut Vec<PEffect>,
) {
    if depth == eff.forall.len() {
        let mut condition = Vec::new();
        for tc in &eff.condition {
            let f = lift_formula(ctx, &tc.formula, map, bindings, schema);
            if !f.is_true() {
                condition.push(TimedCond { tau: tc.tau, formula: f });
            }
        }
        let literal = Literal {
            pred: eff.literal.pred,
            args: eff.literal.args.iter().map(|&t| lift_term(t, map, bindings, schema)).collect(),
            positive: eff.literal.positive,
        };
        out.push(PEffect { tau: eff.tau, condition, literal });
        return;
    }
    let q = eff.forall[depth];
    for i in 0..ctx.store.objects_by_type[q.ty as usize].len() {
        let obj = ctx.store.objects_by_type[q.ty as usize][i];
        map[q.var as usize] = Some(Term::Obj(obj));
        expand_lifted_effect(ctx, eff, map, bindings, schema, depth + 1, out);
    }
    map[q.var as usize] = None;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::ground_problem;
    use crate::pddl::{parse_domain, parse_problem};

    fn build(domain: &str, problem: &str, strip: bool) -> GroundStore {
        let d = Arc::new(parse_domain(domain).expect("domain"));
        let p = Arc::new(parse_problem(problem, &d).expect("problem"));
        ground_problem(d, p, strip)
    }

    fn ctx(store: &GroundStore) -> PlanCtx<'_> {
        PlanCtx::new(store, false, Rational64::new(1, 100))
    }

    fn lifted_ctx(store: &GroundStore) -> PlanCtx<'_> {
        PlanCtx::new(store, true, Rational64::new(1, 100))
    }

    const CHAIN_DOMAIN: &str = "
        (define (domain chain)
          (:requirements :strips)
          (:predicates (p0) (p1) (p2))
          (:action reset :effect (p0))
          (:action s01 :precondition (p0) :effect (p1))
          (:action s12 :precondition (p1) :effect (p2)))";

    const CHAIN_PROBLEM: &str = "
        (define (problem chain1)
          (:domain chain)
          (:init (p0))
          (:goal (p2)))";

    #[test]
    fn bit_ordering_closure_and_cycles() {
        let mut bo = BitOrdering::new();
        for _ in 0..4 {
            bo.add_step();
        }
        bo.order(2, 3).unwrap();
        bo.order(3, 4).unwrap();
        assert!(bo.precedes(2, 4));
        assert!(bo.order(4, 2).is_err());
        assert!(bo.order(2, 4).is_ok());
        bo.order(4, 5).unwrap();
        assert!(bo.precedes(2, 5));
        assert!(bo.precedes(3, 5));
        assert!(!bo.precedes(5, 2));
        assert_eq!(bo.longest_chain(), 4);
    }

    #[test]
    fn bit_ordering_dummies_are_implicit() {
        let mut bo = BitOrdering::new();
        bo.add_step();
        assert!(bo.precedes(A0, 2));
        assert!(bo.precedes(2, AINF));
        assert!(bo.precedes(A0, AINF));
        assert!(!bo.precedes(2, A0));
        assert!(bo.can_precede(A0, 2));
        assert!(!bo.can_precede(2, A0));
        assert!(bo.order(AINF, 2).is_err());
        assert!(bo.order(2, A0).is_err());
    }

    #[test]
    fn chain_problem_refines_to_solution() {
        let store = build(CHAIN_DOMAIN, CHAIN_PROBLEM, true);
        let ctx = ctx(&store);
        let p0 = Plan::initial(&ctx);
        assert_eq!(p0.open.len(), 1);
        assert!(!p0.is_solution());

        let succ1 = p0.resolve(&ctx, FlawRef::Open(0));
        assert_eq!(succ1.len(), 1);
        let p1 = &succ1[0];
        assert_eq!(p1.steps.len(), 3);
        assert_eq!(p1.links.len(), 1);
        assert_eq!(p1.open.len(), 1);
        assert_eq!(p1.g(), 1);

        let succ2 = p1.resolve(&ctx, FlawRef::Open(0));
        assert_eq!(succ2.len(), 1);
        let p2 = &succ2[0];
        assert_eq!(p2.steps.len(), 4);

        // (p0) holds initially and reset can also achieve it.
        let succ3 = p2.resolve(&ctx, FlawRef::Open(0));
        assert_eq!(succ3.len(), 2);
        let p3 = succ3.iter().find(|c| c.steps.len() == 4).unwrap();
        assert!(p3.is_solution());
        assert_eq!(p3.links.len(), 3);
        let init_links =
            p3.links.iter().filter(|l| l.producer == A0 && l.eff == INIT_EFF).count();
        assert_eq!(init_links, 1);
    }

    const THREAT_DOMAIN: &str = "
        (define (domain tdom)
          (:requirements :strips)
          (:predicates (p) (q))
          (:action addq :effect (q))
          (:action delq :effect (and (p) (not (q)))))";

    const THREAT_PROBLEM: &str = "
        (define (problem t1)
          (:domain tdom)
          (:init )
          (:goal (and (p) (q))))";

    #[test]
    fn threat_detected_and_resolved_by_demotion() {
        let store = build(THREAT_DOMAIN, THREAT_PROBLEM, true);
        let ctx = ctx(&store);
        let p0 = Plan::initial(&ctx);
        assert_eq!(p0.open.len(), 2);

        // Support p with a new delq, then q with a new addq.
        let oi_p = p0.open.iter().position(|oc| oc.seq == 0).unwrap();
        let p1 = p0.resolve(&ctx, FlawRef::Open(oi_p)).remove(0);
        let p2 = p1.resolve(&ctx, FlawRef::Open(0)).remove(0);
        assert_eq!(p2.threats.len(), 1);
        assert!(!p2.is_solution());

        let resolved = p2.resolve(&ctx, FlawRef::Threat(0));
        assert_eq!(resolved.len(), 1);
        let done = &resolved[0];
        assert!(done.is_solution());
        match &done.orderings {
            Orderings::Bit(bo) => {
                let delq = done
                    .steps
                    .iter()
                    .position(|s| {
                        s.effects.iter().any(|e| !e.literal.positive)
                    })
                    .unwrap() as u32;
                let addq = if delq == 2 { 3 } else { 2 };
                assert!(bo.precedes(delq, addq));
            }
            Orderings::Stn(_) => panic!("classical problem must use the bit store"),
        }
    }

    #[test]
    fn dead_disjunct_is_dropped_when_chosen() {
        let domain = "
            (define (domain ddom)
              (:requirements :strips :equality :typing)
              (:types thing)
              (:predicates (p ?t - thing))
              (:action mk :parameters (?t - thing) :effect (p ?t)))";
        let problem = "
            (define (problem d1)
              (:domain ddom)
              (:objects o1 o2 - thing)
              (:init )
              (:goal (or (= o1 o2) (p o1))))";
        let store = build(domain, problem, true);
        let ctx = ctx(&store);
        let p0 = Plan::initial(&ctx);
        assert_eq!(p0.open.len(), 1);
        assert!(matches!(p0.open[0].formula, Formula::Or(_)));
        // The equality disjunct is false, so only (p o1) survives.
        let succ = p0.resolve(&ctx, FlawRef::Open(0));
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].open.len(), 1);
        assert!(succ[0].open[0].as_literal().is_some());
    }

    #[test]
    fn conditional_effect_link_demands_its_condition() {
        let domain = "
            (define (domain paintd)
              (:requirements :strips :conditional-effects)
              (:predicates (wet) (painted) (smudged))
              (:action spray :effect (wet))
              (:action paint
                :effect (and (painted) (when (wet) (smudged)))))";
        let problem = "
            (define (problem paint1)
              (:domain paintd)
              (:init (wet))
              (:goal (smudged)))";
        let store = build(domain, problem, true);
        let ctx = ctx(&store);
        let p0 = Plan::initial(&ctx);
        let succ = p0.resolve(&ctx, FlawRef::Open(0));
        assert_eq!(succ.len(), 1);
        let p1 = &succ[0];
        assert_eq!(p1.open.len(), 1);
        let oc = &p1.open[0];
        assert_eq!(oc.step, 2);
        assert_eq!(oc.as_literal().unwrap().pred, store.pred_named("wet"));

        // Linking through the same conditional effect again must not demand
        // the condition twice.
        let p2 = p1.resolve(&ctx, FlawRef::Open(0)).remove(0);
        assert!(p2.is_solution());
    }

    #[test]
    fn durative_step_supports_its_own_end_condition() {
        let domain = "
            (define (domain selfd)
              (:requirements :durative-actions)
              (:predicates (q) (done))
              (:durative-action run
                :parameters ()
                :duration (= ?duration 2)
                :condition (at end (q))
                :effect (and (at start (q)) (at end (done)))))";
        let problem = "
            (define (problem self1)
              (:domain selfd)
              (:init )
              (:goal (done)))";
        let store = build(domain, problem, true);
        let ctx = ctx(&store);
        let p0 = Plan::initial(&ctx);
        let p1 = p0.resolve(&ctx, FlawRef::Open(0)).remove(0);
        assert_eq!(p1.open.len(), 1);
        assert_eq!(p1.open[0].tau, Tau::End);

        let succ = p1.resolve(&ctx, FlawRef::Open(0));
        let self_link = succ
            .iter()
            .find(|c| c.links.iter().any(|l| l.producer == 2 && l.consumer == 2));
        assert!(self_link.is_some());
        let done = self_link.unwrap();
        assert!(done.is_solution());
        match &done.orderings {
            Orderings::Stn(d) => {
                let sched = d.schedule();
                assert_eq!(sched[0].1, Rational64::from_integer(2));
            }
            Orderings::Bit(_) => panic!("durative problem must use the temporal store"),
        }
    }

    #[test]
    fn lifted_init_link_enumerates_holding_instantiations() {
        let domain = "
            (define (domain rooms)
              (:requirements :strips :typing)
              (:types room)
              (:predicates (at ?r - room) (door ?a ?b - room))
              (:action move
                :parameters (?from ?to - room)
                :precondition (and (at ?from) (door ?from ?to))
                :effect (and (at ?to) (not (at ?from)))))";
        let problem = "
            (define (problem line3)
              (:domain rooms)
              (:objects ra rb rc - room)
              (:init (at ra) (door ra rb) (door rb ra) (door rb rc) (door rc rb))
              (:goal (at rc)))";
        let store = build(domain, problem, false);
        let ctx = lifted_ctx(&store);
        let p0 = Plan::initial(&ctx);
        // One new-step refinement: a move instance with ?to unified to rc.
        let p1 = p0.resolve(&ctx, FlawRef::Open(0)).remove(0);
        assert_eq!(p1.steps.len(), 3);
        assert_eq!(p1.open.len(), 2);

        let door_oc = p1
            .open
            .iter()
            .position(|oc| oc.as_literal().unwrap().pred == store.pred_named("door"))
            .unwrap();
        let succ = p1.resolve(&ctx, FlawRef::Open(door_oc));
        // (door ?from rc) holds initially only for ?from = rb.
        assert_eq!(succ.len(), 1);
        let from = succ[0].bindings.resolve(succ[0].steps[2].args[0]);
        assert_eq!(from, Term::Obj(store.obj_named("rb")));
    }

    #[test]
    fn lifted_threat_offers_separation() {
        let domain = "
            (define (domain sep)
              (:requirements :strips :typing)
              (:types obj)
              (:predicates (q ?o - obj) (p ?o - obj))
              (:action addq :parameters (?o - obj) :effect (q ?o))
              (:action clear :parameters (?o - obj)
                :effect (and (p ?o) (not (q ?o)))))";
        let problem = "
            (define (problem sep1)
              (:domain sep)
              (:objects o1 o2 - obj)
              (:init )
              (:goal (and (q o1) (exists (?y - obj) (p ?y)))))";
        let store = build(domain, problem, false);
        let ctx = lifted_ctx(&store);
        let p0 = Plan::initial(&ctx);

        let q_oc = p0
            .open
            .iter()
            .position(|oc| oc.as_literal().map(|l| l.pred) == Some(store.pred_named("q")))
            .unwrap();
        let p1 = p0.resolve(&ctx, FlawRef::Open(q_oc)).remove(0);
        let ex_oc = p1.open.iter().position(|oc| oc.as_literal().is_none()).unwrap();
        let p2 = p1.resolve(&ctx, FlawRef::Open(ex_oc)).remove(0);
        let p_oc = p2
            .open
            .iter()
            .position(|oc| oc.as_literal().map(|l| l.pred) == Some(store.pred_named("p")))
            .unwrap();
        let p3 = p2.resolve(&ctx, FlawRef::Open(p_oc)).remove(0);
        assert_eq!(p3.threats.len(), 1);
        assert!(p3.threat_separable(&ctx, &p3.threats[0]));

        let succ = p3.resolve(&ctx, FlawRef::Threat(0));
        // Demotion plus one separation; promotion hits the goal step.
        assert_eq!(succ.len(), 2);
        let separated = succ
            .iter()
            .find(|c| match &c.orderings {
                Orderings::Bit(bo) => !bo.precedes(3, 2) && !bo.precedes(2, 3),
                Orderings::Stn(_) => false,
            })
            .expect("separation child");
        assert!(separated.threats.is_empty());
        let clear_arg = separated.steps[3].args[0];
        let vals = match clear_arg {
            Term::Var(v) => separated.bindings.possible_values(v, &store),
            Term::Obj(o) => vec![o],
        };
        assert_eq!(vals, vec![store.obj_named("o2")]);
    }

    #[test]
    fn reuse_zeroes_cost_but_not_effort() {
        let domain = "
            (define (domain chain)
              (:requirements :strips)
              (:predicates (p0) (p1) (p2))
              (:action reset :effect (p0))
              (:action s01 :precondition (p0) :effect (p1))
              (:action s12 :precondition (p1) :effect (p2)))";
        let problem = "
            (define (problem chain2)
              (:domain chain)
              (:init (p0))
              (:goal (and (p1) (p2))))";
        let store = build(domain, problem, true);
        let ctx = ctx(&store);
        let table = HeurTable::build(&store);
        let p0 = Plan::initial(&ctx);

        let p2_oc = p0
            .open
            .iter()
            .position(|oc| oc.as_literal().unwrap().pred == store.pred_named("p2"))
            .unwrap();
        let p1 = p0.resolve(&ctx, FlawRef::Open(p2_oc)).remove(0);
        let mid_oc = p1
            .open
            .iter()
            .position(|oc| oc.step == 2)
            .unwrap();
        let p2 = p1.resolve(&ctx, FlawRef::Open(mid_oc)).remove(0);
        // Remaining: (p1) on the goal step and (p0) on the new s01 step;
        // s01 itself can supply (p1) by reuse.
        assert_eq!(p2.open.len(), 2);
        let (f_add, e_add) = p2.rank(&ctx, &table, HeurMode::Add);
        let (f_addr, e_addr) = p2.rank(&ctx, &table, HeurMode::AddReuse);
        assert_eq!(f_add, Xint::Fin(3));
        assert_eq!(f_addr, Xint::Fin(2));
        assert_eq!(e_add, Xint::Fin(3));
        assert_eq!(e_addr, e_add);
    }

    #[test]
    fn rank_counts_flaws_in_flaw_modes() {
        let store = build(THREAT_DOMAIN, THREAT_PROBLEM, true);
        let ctx = ctx(&store);
        let table = HeurTable::build(&store);
        let p0 = Plan::initial(&ctx);
        let (f_oc, e_oc) = p0.rank(&ctx, &table, HeurMode::OpenConds);
        assert_eq!(f_oc, Xint::Fin(2));
        assert_eq!(e_oc, Xint::ZERO);
        let (f_fl, _) = p0.rank(&ctx, &table, HeurMode::Flaws);
        assert_eq!(f_fl, Xint::Fin(2));
    }

    #[test]
    fn unsafe_open_condition_detected() {
        let store = build(THREAT_DOMAIN, THREAT_PROBLEM, true);
        let ctx = ctx(&store);
        let p0 = Plan::initial(&ctx);
        let oi_p = p0
            .open
            .iter()
            .position(|oc| oc.as_literal().unwrap().pred == store.pred_named("p"))
            .unwrap();
        let p1 = p0.resolve(&ctx, FlawRef::Open(oi_p)).remove(0);
        // delq is in the plan; its (not (q)) effect makes the remaining
        // open (q) unsafe, while delq's own (p) supply stays safe.
        let q_oc = p1.open.iter().find(|oc| oc.step == AINF).unwrap();
        assert!(p1.open_cond_unsafe(&ctx, q_oc));
    }
}
