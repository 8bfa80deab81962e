//! Grounding: schema instantiation over typed objects, static-predicate
//! detection, and reachability-preserving simplification.

use crate::pddl::*;
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

pub type GroundId = u32;

/// A ground literal in compact form, used as a key for achiever and
/// heuristic tables.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct GLit {
    pub pred: PredId,
    pub args: Vec<ObjId>,
    pub positive: bool,
}

impl GLit {
    pub fn negated(&self) -> GLit {
        GLit { pred: self.pred, args: self.args.clone(), positive: !self.positive }
    }

    pub fn atom(&self) -> GroundAtom {
        GroundAtom { pred: self.pred, args: self.args.clone() }
    }

    pub fn from_literal(lit: &Literal) -> Option<GLit> {
        let mut args = Vec::with_capacity(lit.args.len());
        for a in &lit.args {
            args.push(a.as_obj()?);
        }
        Some(GLit { pred: lit.pred, args, positive: lit.positive })
    }

    pub fn to_literal(&self) -> Literal {
        Literal::new(self.pred, self.args.iter().map(|&o| Term::Obj(o)).collect(), self.positive)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GroundEffect {
    pub tau: EffTime,
    /// Remaining condition after static conjuncts were evaluated; empty
    /// means the effect is unconditional.
    pub condition: Vec<TimedCond>,
    pub literal: GLit,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GroundAction {
    pub id: GroundId,
    pub schema: SchemaId,
    pub args: Vec<ObjId>,
    pub precondition: Vec<TimedCond>,
    pub effects: Vec<GroundEffect>,
    pub duration: Vec<DurationConstraint>,
}

impl GroundAction {
    pub fn display(&self, names: &Names<'_>, domain: &Domain) -> String {
        let schema = &domain.schemas[self.schema as usize];
        let mut s = String::new();
        s.push('(');
        s.push_str(&schema.name);
        for &a in &self.args {
            s.push(' ');
            s.push_str(names.obj(a));
        }
        s.push(')');
        s
    }
}

/// Everything the planner derives from a parsed domain/problem pair.
pub struct GroundStore {
    pub domain: Arc<Domain>,
    pub problem: Arc<Problem>,
    pub actions: Vec<Arc<GroundAction>>,
    /// statics[p] is true when predicate p appears in no schema effect.
    pub statics: Vec<bool>,
    pub init: HashSet<GroundAtom>,
    pub init_ordered: Vec<GroundAtom>,
    pub objects_by_type: Vec<Vec<ObjId>>,
    /// Ground effect literal -> (action, effect index) pairs that assert it.
    pub achievers: HashMap<GLit, Vec<(GroundId, u32)>>,
    pub durative: bool,
    /// Goal condition segments (annotated at start), already simplified.
    pub goal: Vec<TimedCond>,
    /// True when statically-true conjuncts were stripped (ground mode).
    pub strip_statics: bool,
}

impl GroundStore {
    pub fn names(&self) -> Names<'_> {
        Names { domain: &self.domain, problem: Some(&self.problem) }
    }

    pub fn holds_initially(&self, lit: &GLit) -> bool {
        if lit.pred == PRED_EQ {
            return (lit.args[0] == lit.args[1]) == lit.positive;
        }
        self.init.contains(&lit.atom()) == lit.positive
    }

    pub fn objects_of(&self, ty: TypeId) -> &[ObjId] {
        &self.objects_by_type[ty as usize]
    }

    pub fn is_static(&self, pred: PredId) -> bool {
        self.statics[pred as usize]
    }

    /// Predicate id by name; panics when absent. Intended for tests and
    /// diagnostics.
    pub fn pred_named(&self, name: &str) -> PredId {
        self.domain.predicates.iter().position(|p| p.name == name).expect("predicate") as PredId
    }

    /// Object or constant id by name; panics when absent.
    pub fn obj_named(&self, name: &str) -> ObjId {
        let nc = self.domain.constants.len();
        if let Some(i) = self.domain.constants.iter().position(|c| c.name == name) {
            return i as ObjId;
        }
        (nc + self.problem.objects.iter().position(|o| o.name == name).expect("object")) as ObjId
    }
}

/// Predicates that appear in no schema effect literal. The built-in
/// equality is always static.
pub fn detect_static_predicates(domain: &Domain) -> Vec<bool> {
    let mut statics = vec![true; domain.predicates.len()];
    for schema in &domain.schemas {
        for eff in &schema.effects {
            statics[eff.literal.pred as usize] = false;
        }
    }
    statics[PRED_EQ as usize] = true;
    statics
}

/// Grounds the problem. With `strip_statics` (ground planning mode),
/// statically-true literal conjuncts disappear from preconditions and goals;
/// static open conditions then never arise during search.
pub fn ground_problem(domain: Arc<Domain>, problem: Arc<Problem>, strip_statics: bool) -> GroundStore {
    let statics = detect_static_predicates(&domain);
    let init: HashSet<GroundAtom> = problem.init.iter().cloned().collect();
    let n_objects = problem.num_objects(&domain);

    let mut objects_by_type: Vec<Vec<ObjId>> = vec![Vec::new(); domain.types.len()];
    for obj in 0..n_objects {
        let mut ty = problem.object_type(&domain, obj);
        loop {
            objects_by_type[ty as usize].push(obj);
            if ty == TYPE_OBJECT {
                break;
            }
            ty = domain.types[ty as usize].parent;
        }
    }

    let mut store = GroundStore {
        domain: domain.clone(),
        problem: problem.clone(),
        actions: Vec::new(),
        statics,
        init,
        init_ordered: problem.init.clone(),
        objects_by_type,
        achievers: HashMap::new(),
        durative: domain.has_durative(),
        goal: Vec::new(),
        strip_statics,
    };

    for (sid, schema) in domain.schemas.iter().enumerate() {
        let mut asg: Vec<Option<ObjId>> = vec![None; schema.vars.len()];
        enumerate_params(&mut store, sid as SchemaId, schema, &mut asg, 0);
    }

    for (aid, action) in store.actions.iter().enumerate() {
        for (eid, eff) in action.effects.iter().enumerate() {
            store
                .achievers
                .entry(eff.literal.clone())
                .or_default()
                .push((aid as GroundId, eid as u32));
        }
    }

    // Goal: quantifier variables live in problem.goal_vars.
    let mut goal_asg: Vec<Option<ObjId>> = vec![None; problem.goal_vars.len()];
    let goal = simplify(&problem.goal, &mut goal_asg, &store, true);
    if !goal.is_true() {
        store.goal.push(TimedCond { tau: Tau::Start, formula: goal });
    }
    store
}

fn enumerate_params(
    store: &mut GroundStore,
    sid: SchemaId,
    schema: &ActionSchema,
    asg: &mut Vec<Option<ObjId>>,
    depth: usize,
) {
    if depth == schema.n_params {
        if let Some(action) = instantiate(store, sid, schema, asg) {
            let mut action = action;
            action.id = store.actions.len() as GroundId;
            store.actions.push(Arc::new(action));
        }
        return;
    }
    let ty = schema.vars[depth].ty;
    for i in 0..store.objects_by_type[ty as usize].len() {
        let obj = store.objects_by_type[ty as usize][i];
        asg[depth] = Some(obj);
        enumerate_params(store, sid, schema, asg, depth + 1);
    }
    asg[depth] = None;
}

fn instantiate(
    store: &GroundStore,
    sid: SchemaId,
    schema: &ActionSchema,
    asg: &mut Vec<Option<ObjId>>,
) -> Option<GroundAction> {
    if !duration_satisfiable(&schema.duration) {
        return None;
    }
    let mut precondition = Vec::new();
    for tc in &schema.precondition {
        let f = simplify(&tc.formula, asg, store, store.strip_statics);
        if f.is_false() {
            return None;
        }
        if !f.is_true() {
            precondition.push(TimedCond { tau: tc.tau, formula: f });
        }
    }
    let mut effects = Vec::new();
    for eff in &schema.effects {
        expand_effect(store, schema, eff, asg, 0, &mut effects);
    }
    Some(GroundAction {
        id: 0,
        schema: sid,
        args: (0..schema.n_params).map(|i| asg[i].unwrap()).collect(),
        precondition,
        effects,
        duration: schema.duration.clone(),
    })
}

fn duration_satisfiable(duration: &[DurationConstraint]) -> bool {
    use num_rational::Rational64;
    let mut lo = Rational64::from_integer(0);
    let mut hi: Option<Rational64> = None;
    for dc in duration {
        match dc.op {
            DurOp::Ge => lo = lo.max(dc.value),
            DurOp::Le => hi = Some(hi.map_or(dc.value, |h: Rational64| h.min(dc.value))),
            DurOp::Eq => {
                lo = lo.max(dc.value);
                hi = Some(hi.map_or(dc.value, |h: Rational64| h.min(dc.value)));
            }
        }
    }
    hi.map_or(true, |h| lo <= h)
}

fn expand_effect(
    store: &GroundStore,
    schema: &ActionSchema,
    eff: &SchemaEffect,
    asg: &mut Vec<Option<ObjId>>,
    depth: usize,
    out: &mut Vec<GroundEffect>,
) {
    if depth == eff.forall.len() {
        let mut condition = Vec::new();
        for tc in &eff.condition {
            // Static conjuncts of effect conditions are decided now: a
            // false one means the effect can never fire.
            let f = simplify(&tc.formula, asg, store, true);
            if f.is_false() {
                return;
            }
            if !f.is_true() {
                condition.push(TimedCond { tau: tc.tau, formula: f });
            }
        }
        let lit = subst_literal(&eff.literal, asg);
        let glit = GLit::from_literal(&lit).expect("effect literals are fully instantiated");
        out.push(GroundEffect { tau: eff.tau, condition, literal: glit });
        return;
    }
    let q = eff.forall[depth];
    for i in 0..store.objects_by_type[q.ty as usize].len() {
        let obj = store.objects_by_type[q.ty as usize][i];
        asg[q.var as usize] = Some(obj);
        expand_effect(store, schema, eff, asg, depth + 1, out);
    }
    asg[q.var as usize] = None;
}

pub fn subst_term(t: Term, asg: &[Option<ObjId>]) -> Term {
    match t {
        Term::Obj(o) => Term::Obj(o),
        Term::Var(v) => match asg.get(v as usize).copied().flatten() {
            Some(o) => Term::Obj(o),
            None => Term::Var(v),
        },
    }
}

pub fn subst_literal(lit: &Literal, asg: &[Option<ObjId>]) -> Literal {
    Literal {
        pred: lit.pred,
        args: lit.args.iter().map(|&t| subst_term(t, asg)).collect(),
        positive: lit.positive,
    }
}

/// Substitutes the assignment, expands universal quantifiers over the typed
/// object universe, and evaluates ground equalities and false ground static
/// literals at conjunctive positions. A true static literal is dropped only
/// when `strip_statics`; otherwise it stays, to be closed by a link later.
/// Disjuncts and existential bodies are substituted but structurally
/// preserved: their dead branches are left for the heuristic and for
/// refinement-time checks.
pub fn simplify(
    f: &Formula,
    asg: &mut Vec<Option<ObjId>>,
    store: &GroundStore,
    strip_statics: bool,
) -> Formula {
    simplify_at(f, asg, store, strip_statics, true)
}

fn simplify_at(
    f: &Formula,
    asg: &mut Vec<Option<ObjId>>,
    store: &GroundStore,
    strip_statics: bool,
    conjunctive: bool,
) -> Formula {
    match f {
        Formula::Lit(lit) => {
            let lit = subst_literal(lit, asg);
            if conjunctive && lit.is_ground() {
                if let Some(glit) = GLit::from_literal(&lit) {
                    if glit.pred == PRED_EQ || store.is_static(glit.pred) {
                        if !store.holds_initially(&glit) {
                            return Formula::FALSE;
                        }
                        if glit.pred == PRED_EQ || strip_statics {
                            return Formula::TRUE;
                        }
                    }
                }
            }
            Formula::Lit(lit)
        }
        Formula::Not(_) => {
            // Pre-NNF input is tolerated; normalize on the fly.
            simplify_at(&crate::pddl::to_nnf(f), asg, store, strip_statics, conjunctive)
        }
        Formula::And(cs) => {
            let mut parts = Vec::with_capacity(cs.len());
            for c in cs {
                let g = simplify_at(c, asg, store, strip_statics, conjunctive);
                if g.is_false() {
                    return Formula::FALSE;
                }
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
        Formula::Or(ds) => {
            let parts: Vec<Formula> = ds
                .iter()
                .map(|d| simplify_at(d, asg, store, strip_statics, false))
                .collect();
            Formula::Or(parts)
        }
        Formula::Exists(qs, body) => {
            if qs.iter().any(|q| store.objects_by_type[q.ty as usize].is_empty()) {
                return Formula::FALSE;
            }
            let b = simplify_at(body, asg, store, strip_statics, false);
            Formula::Exists(qs.clone(), Box::new(b))
        }
        Formula::Forall(qs, body) => {
            let mut parts = Vec::new();
            if expand_forall(qs, body, asg, store, strip_statics, conjunctive, 0, &mut parts).is_err() {
                return Formula::FALSE;
            }
            match parts.len() {
                0 => Formula::TRUE,
                1 => parts.into_iter().next().unwrap(),
                _ => Formula::And(parts),
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn expand_forall(
    qs: &[QuantVar],
    body: &Formula,
    asg: &mut Vec<Option<ObjId>>,
    store: &GroundStore,
    strip_statics: bool,
    conjunctive: bool,
    depth: usize,
    out: &mut Vec<Formula>,
) -> Result<(), ()> {
    if depth == qs.len() {
        let g = simplify_at(body, asg, store, strip_statics, conjunctive);
        if g.is_false() {
            return Err(());
        }
        if !g.is_true() {
            out.push(g);
        }
        return Ok(());
    }
    let q = qs[depth];
    for i in 0..store.objects_by_type[q.ty as usize].len() {
        let obj = store.objects_by_type[q.ty as usize][i];
        asg[q.var as usize] = Some(obj);
        let r = expand_forall(qs, body, asg, store, strip_statics, conjunctive, depth + 1, out);
        if r.is_err() {
            asg[q.var as usize] = None;
            return Err(());
        }
    }
    asg[q.var as usize] = None;
    Ok(())
}

/// All instantiations of an existential's bound variables, each yielding the
/// substituted and simplified body. Used when a composite open condition is
/// resolved by branching.
pub fn existential_instances(
    store: &GroundStore,
    qs: &[QuantVar],
    body: &Formula,
    n_vars: usize,
) -> Vec<Formula> {
    let mut asg: Vec<Option<ObjId>> = vec![None; n_vars];
    let mut out = Vec::new();
    instantiate_rec(store, qs, body, &mut asg, 0, &mut out);
    out
}

fn instantiate_rec(
    store: &GroundStore,
    qs: &[QuantVar],
    body: &Formula,
    asg: &mut Vec<Option<ObjId>>,
    depth: usize,
    out: &mut Vec<Formula>,
) {
    if depth == qs.len() {
        out.push(simplify_at(body, asg, store, store.strip_statics, true));
        return;
    }
    let q = qs[depth];
    for i in 0..store.objects_by_type[q.ty as usize].len() {
        let obj = store.objects_by_type[q.ty as usize][i];
        asg[q.var as usize] = Some(obj);
        instantiate_rec(store, qs, body, asg, depth + 1, out);
    }
    asg[q.var as usize] = None;
}
