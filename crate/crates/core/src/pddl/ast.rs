//! Abstract syntax for domains, problems, formulas and action schemata.

use num_rational::Rational64;
use std::collections::BTreeSet;
use std::fmt;

pub type TypeId = u32;
pub type PredId = u32;
pub type ObjId = u32;
pub type VarId = u32;
pub type SchemaId = u32;

/// Root of the type hierarchy; every other type descends from it.
pub const TYPE_OBJECT: TypeId = 0;
/// The built-in equality predicate. Always static.
pub const PRED_EQ: PredId = 0;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Term {
    Obj(ObjId),
    Var(VarId),
}

impl Term {
    pub fn as_obj(&self) -> Option<ObjId> {
        match self {
            Term::Obj(o) => Some(*o),
            Term::Var(_) => None,
        }
    }
}

/// An atomic formula with polarity. Arguments may be objects or variables;
/// which variable table the `Var` ids index into depends on context (schema
/// parameters, quantifier bindings, or plan variables in lifted mode).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Literal {
    pub pred: PredId,
    pub args: Vec<Term>,
    pub positive: bool,
}

impl Literal {
    pub fn new(pred: PredId, args: Vec<Term>, positive: bool) -> Self {
        Literal { pred, args, positive }
    }

    pub fn negated(&self) -> Literal {
        Literal { pred: self.pred, args: self.args.clone(), positive: !self.positive }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| matches!(t, Term::Obj(_)))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct QuantVar {
    pub var: VarId,
    pub ty: TypeId,
}

/// First-order condition formula. After [`crate::pddl::to_nnf`] the `Not`
/// variant is gone and negation lives only in literal polarity.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Formula {
    Lit(Literal),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Exists(Vec<QuantVar>, Box<Formula>),
    Forall(Vec<QuantVar>, Box<Formula>),
}

impl Formula {
    /// The trivially true formula (empty conjunction).
    pub const TRUE: Formula = Formula::And(Vec::new());
    /// The trivially false formula (empty disjunction).
    pub const FALSE: Formula = Formula::Or(Vec::new());

    pub fn is_true(&self) -> bool {
        matches!(self, Formula::And(cs) if cs.is_empty())
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Formula::Or(ds) if ds.is_empty())
    }
}

/// Temporal annotation of a condition: at start, over the open interval, or
/// at end. Classical preconditions are all `Start`; goals are `Start`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Tau {
    Start,
    Invariant,
    End,
}

impl fmt::Display for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tau::Start => write!(f, "s"),
            Tau::Invariant => write!(f, "i"),
            Tau::End => write!(f, "e"),
        }
    }
}

/// Temporal annotation of an effect. Classical effects are all `End`
/// (a classical action is a durative action of duration zero with its
/// preconditions at the start and its effects at the end).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum EffTime {
    Start,
    End,
}

/// A condition formula together with its temporal annotation. An action's
/// precondition and a conditional effect's condition are conjunctions of
/// these segments.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct TimedCond {
    pub tau: Tau,
    pub formula: Formula,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum DurOp {
    Eq,
    Le,
    Ge,
}

/// `?duration <op> value` with a rational constant value.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct DurationConstraint {
    pub op: DurOp,
    pub value: Rational64,
}

/// One effect of an action schema: a single literal, optionally universally
/// quantified and conditional, anchored at the start or end of the action.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SchemaEffect {
    pub tau: EffTime,
    pub forall: Vec<QuantVar>,
    pub condition: Vec<TimedCond>,
    pub literal: Literal,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VarDecl {
    pub name: String,
    pub ty: TypeId,
}

/// An action schema. `vars` holds the parameters first (`n_params` of them)
/// followed by one entry per quantifier binding anywhere in the schema, so
/// every `VarId` in its formulas indexes into `vars`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ActionSchema {
    pub name: String,
    pub n_params: usize,
    pub vars: Vec<VarDecl>,
    pub durative: bool,
    pub duration: Vec<DurationConstraint>,
    pub precondition: Vec<TimedCond>,
    pub effects: Vec<SchemaEffect>,
}

impl ActionSchema {
    pub fn params(&self) -> &[VarDecl] {
        &self.vars[..self.n_params]
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TypeDef {
    pub name: String,
    pub parent: TypeId,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PredDecl {
    pub name: String,
    pub arg_types: Vec<TypeId>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ObjDecl {
    pub name: String,
    pub ty: TypeId,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Domain {
    pub name: String,
    pub requirements: BTreeSet<String>,
    /// Index 0 is always `object`.
    pub types: Vec<TypeDef>,
    /// Index 0 is always the built-in `=`.
    pub predicates: Vec<PredDecl>,
    pub constants: Vec<ObjDecl>,
    pub schemas: Vec<ActionSchema>,
}

impl Domain {
    pub fn is_subtype(&self, mut ty: TypeId, ancestor: TypeId) -> bool {
        loop {
            if ty == ancestor {
                return true;
            }
            if ty == TYPE_OBJECT {
                return false;
            }
            ty = self.types[ty as usize].parent;
        }
    }

    pub fn has_durative(&self) -> bool {
        self.schemas.iter().any(|s| s.durative)
    }
}

/// A fully ground atom, as found in initial states.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct GroundAtom {
    pub pred: PredId,
    pub args: Vec<ObjId>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Problem {
    pub name: String,
    pub domain_name: String,
    /// Problem objects only; their `ObjId`s continue after the domain's
    /// constants, so id `domain.constants.len() + k` is `objects[k]`.
    pub objects: Vec<ObjDecl>,
    pub init: Vec<GroundAtom>,
    pub goal_vars: Vec<VarDecl>,
    pub goal: Formula,
}

impl Problem {
    pub fn object_name<'a>(&'a self, domain: &'a Domain, obj: ObjId) -> &'a str {
        let nc = domain.constants.len() as u32;
        if obj < nc {
            &domain.constants[obj as usize].name
        } else {
            &self.objects[(obj - nc) as usize].name
        }
    }

    pub fn object_type(&self, domain: &Domain, obj: ObjId) -> TypeId {
        let nc = domain.constants.len() as u32;
        if obj < nc {
            domain.constants[obj as usize].ty
        } else {
            self.objects[(obj - nc) as usize].ty
        }
    }

    pub fn num_objects(&self, domain: &Domain) -> u32 {
        (domain.constants.len() + self.objects.len()) as u32
    }
}

/// Formats a rational as PDDL text: an integer when the denominator is 1, a
/// decimal when it divides a power of ten, `a/b` otherwise.
pub fn rational_to_string(r: Rational64) -> String {
    let (n, d) = (*r.numer(), *r.denom());
    if d == 1 {
        return n.to_string();
    }
    let mut scale = 1i64;
    for _ in 0..12 {
        scale = match scale.checked_mul(10) {
            Some(s) => s,
            None => break,
        };
        if scale % d == 0 {
            let v = n * (scale / d);
            let sign = if v < 0 { "-" } else { "" };
            let a = v.unsigned_abs();
            let whole = a / scale.unsigned_abs() as u64;
            let frac = a % scale.unsigned_abs() as u64;
            let frac_str = format!("{:0width$}", frac, width = scale.ilog10() as usize);
            let frac_str = frac_str.trim_end_matches('0');
            return format!("{sign}{whole}.{frac_str}");
        }
    }
    format!("{n}/{d}")
}

/// Name-resolution view over a domain and (optionally) a problem, used by
/// display and unparse helpers.
#[derive(Clone, Copy)]
pub struct Names<'a> {
    pub domain: &'a Domain,
    pub problem: Option<&'a Problem>,
}

impl<'a> Names<'a> {
    pub fn obj(&self, obj: ObjId) -> &'a str {
        let nc = self.domain.constants.len() as u32;
        if obj < nc {
            &self.domain.constants[obj as usize].name
        } else {
            let p = self.problem.expect("problem object without problem context");
            &p.objects[(obj - nc) as usize].name
        }
    }

    pub fn pred(&self, pred: PredId) -> &'a str {
        &self.domain.predicates[pred as usize].name
    }

    pub fn term(&self, t: Term, vars: &[VarDecl]) -> String {
        match t {
            Term::Obj(o) => self.obj(o).to_string(),
            Term::Var(v) => match vars.get(v as usize) {
                Some(d) => d.name.clone(),
                None => format!("?_{v}"),
            },
        }
    }

    pub fn literal(&self, lit: &Literal, vars: &[VarDecl]) -> String {
        let mut inner = String::new();
        inner.push('(');
        inner.push_str(self.pred(lit.pred));
        for a in &lit.args {
            inner.push(' ');
            inner.push_str(&self.term(*a, vars));
        }
        inner.push(')');
        if lit.positive {
            inner
        } else {
            format!("(not {inner})")
        }
    }

    pub fn formula(&self, f: &Formula, vars: &[VarDecl]) -> String {
        match f {
            Formula::Lit(l) => self.literal(l, vars),
            Formula::Not(inner) => format!("(not {})", self.formula(inner, vars)),
            Formula::And(cs) => {
                if cs.is_empty() {
                    "(and)".to_string()
                } else {
                    let parts: Vec<_> = cs.iter().map(|c| self.formula(c, vars)).collect();
                    format!("(and {})", parts.join(" "))
                }
            }
            Formula::Or(ds) => {
                if ds.is_empty() {
                    "(or)".to_string()
                } else {
                    let parts: Vec<_> = ds.iter().map(|d| self.formula(d, vars)).collect();
                    format!("(or {})", parts.join(" "))
                }
            }
            Formula::Exists(qs, body) => {
                format!("(exists ({}) {})", self.quant_list(qs, vars), self.formula(body, vars))
            }
            Formula::Forall(qs, body) => {
                format!("(forall ({}) {})", self.quant_list(qs, vars), self.formula(body, vars))
            }
        }
    }

    fn quant_list(&self, qs: &[QuantVar], vars: &[VarDecl]) -> String {
        let parts: Vec<_> = qs
            .iter()
            .map(|q| {
                let name = vars
                    .get(q.var as usize)
                    .map(|d| d.name.clone())
                    .unwrap_or_else(|| format!("?_{}", q.var));
                format!("{} - {}", name, self.domain.types[q.ty as usize].name)
            })
            .collect();
        parts.join(" ")
    }

    pub fn ground_atom(&self, atom: &GroundAtom) -> String {
        let mut s = String::new();
        s.push('(');
        s.push_str(self.pred(atom.pred));
        for a in &atom.args {
            s.push(' ');
            s.push_str(self.obj(*a));
        }
        s.push(')');
        s
    }
}

fn typed_list(names: &[(String, TypeId)], types: &[TypeDef]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < names.len() {
        let mut j = i;
        while j + 1 < names.len() && names[j + 1].1 == names[i].1 {
            j += 1;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        let group: Vec<_> = names[i..=j].iter().map(|(n, _)| n.clone()).collect();
        out.push_str(&group.join(" "));
        out.push_str(" - ");
        out.push_str(&types[names[i].1 as usize].name);
        i = j + 1;
    }
    out
}

/// Renders a domain back to PDDL text that reparses to a structurally
/// identical `Domain`.
pub fn unparse_domain(domain: &Domain) -> String {
    let names = Names { domain, problem: None };
    let mut s = String::new();
    s.push_str(&format!("(define (domain {})\n", domain.name));
    if !domain.requirements.is_empty() {
        let flags: Vec<_> = domain.requirements.iter().cloned().collect();
        s.push_str(&format!("  (:requirements {})\n", flags.join(" ")));
    }
    if domain.types.len() > 1 {
        let list: Vec<_> = domain.types[1..]
            .iter()
            .map(|t| (t.name.clone(), t.parent))
            .collect();
        s.push_str(&format!("  (:types {})\n", typed_list(&list, &domain.types)));
    }
    if !domain.constants.is_empty() {
        let list: Vec<_> = domain.constants.iter().map(|c| (c.name.clone(), c.ty)).collect();
        s.push_str(&format!("  (:constants {})\n", typed_list(&list, &domain.types)));
    }
    if domain.predicates.len() > 1 {
        s.push_str("  (:predicates");
        for p in &domain.predicates[1..] {
            let args: Vec<_> = p
                .arg_types
                .iter()
                .enumerate()
                .map(|(i, ty)| (format!("?a{i}"), *ty))
                .collect();
            if args.is_empty() {
                s.push_str(&format!(" ({})", p.name));
            } else {
                s.push_str(&format!(" ({} {})", p.name, typed_list(&args, &domain.types)));
            }
        }
        s.push_str(")\n");
    }
    for schema in &domain.schemas {
        s.push_str(&unparse_schema(schema, &names));
    }
    s.push_str(")\n");
    s
}

fn unparse_schema(schema: &ActionSchema, names: &Names<'_>) -> String {
    let mut s = String::new();
    let kw = if schema.durative { ":durative-action" } else { ":action" };
    s.push_str(&format!("  ({} {}\n", kw, schema.name));
    let params: Vec<_> = schema.params().iter().map(|p| (p.name.clone(), p.ty)).collect();
    s.push_str(&format!(
        "   :parameters ({})\n",
        typed_list(&params, &names.domain.types)
    ));
    if schema.durative {
        let parts: Vec<_> = schema
            .duration
            .iter()
            .map(|dc| {
                let op = match dc.op {
                    DurOp::Eq => "=",
                    DurOp::Le => "<=",
                    DurOp::Ge => ">=",
                };
                format!("({op} ?duration {})", rational_to_string(dc.value))
            })
            .collect();
        let dur = if parts.len() == 1 {
            parts.into_iter().next().unwrap()
        } else {
            format!("(and {})", parts.join(" "))
        };
        s.push_str(&format!("   :duration {dur}\n"));
        s.push_str(&format!(
            "   :condition {}\n",
            unparse_condition(&schema.precondition, schema, names, true)
        ));
    } else if !schema.precondition.is_empty() {
        s.push_str(&format!(
            "   :precondition {}\n",
            unparse_condition(&schema.precondition, schema, names, false)
        ));
    }
    s.push_str(&format!("   :effect {})\n", unparse_effects(schema, names)));
    s
}

fn wrap_tau(tau: Tau, inner: &str) -> String {
    match tau {
        Tau::Start => format!("(at start {inner})"),
        Tau::Invariant => format!("(over all {inner})"),
        Tau::End => format!("(at end {inner})"),
    }
}

fn unparse_condition(
    conds: &[TimedCond],
    schema: &ActionSchema,
    names: &Names<'_>,
    annotate: bool,
) -> String {
    let parts: Vec<_> = conds
        .iter()
        .map(|tc| {
            let inner = names.formula(&tc.formula, &schema.vars);
            if annotate {
                wrap_tau(tc.tau, &inner)
            } else {
                inner
            }
        })
        .collect();
    if parts.len() == 1 {
        parts.into_iter().next().unwrap()
    } else {
        format!("(and {})", parts.join(" "))
    }
}

fn unparse_effects(schema: &ActionSchema, names: &Names<'_>) -> String {
    let parts: Vec<_> = schema
        .effects
        .iter()
        .map(|e| {
            let mut inner = names.literal(&e.literal, &schema.vars);
            if !e.condition.is_empty() {
                let cond = unparse_condition(&e.condition, schema, names, schema.durative);
                inner = format!("(when {cond} {inner})");
            }
            if !e.forall.is_empty() {
                let qs: Vec<_> = e
                    .forall
                    .iter()
                    .map(|q| {
                        format!(
                            "{} - {}",
                            schema.vars[q.var as usize].name,
                            names.domain.types[q.ty as usize].name
                        )
                    })
                    .collect();
                inner = format!("(forall ({}) {})", qs.join(" "), inner);
            }
            if schema.durative {
                let tau = match e.tau {
                    EffTime::Start => Tau::Start,
                    EffTime::End => Tau::End,
                };
                wrap_tau(tau, &inner)
            } else {
                inner
            }
        })
        .collect();
    if parts.len() == 1 {
        parts.into_iter().next().unwrap()
    } else {
        format!("(and {})", parts.join(" "))
    }
}
