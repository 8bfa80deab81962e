//! Standalone plan validation. Works directly on the parsed domain and
//! problem, sharing nothing with the planner beyond the parser, so a
//! planner bug cannot hide behind a matching validator bug.

use crate::pddl::*;
use num_rational::Rational64;
use std::collections::HashSet;

/// One step of a plan under validation. Classical plans leave `start` and
/// `duration` empty and are executed in list order.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannedStep {
    pub name: String,
    pub args: Vec<String>,
    pub start: Option<Rational64>,
    pub duration: Option<Rational64>,
}

/// Parses plan text as produced by the planner: `1: (name args)` lines for
/// classical plans, `time: (name args) [duration]` for durative ones.
/// Blank lines and `;` comments are ignored.
pub fn parse_plan_file(text: &str) -> Result<Vec<PlannedStep>, String> {
    let mut out = Vec::new();
    let mut classical = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let err = |m: &str| format!("line {}: {}", lineno + 1, m);
        let (head, rest) = line.split_once(':').ok_or_else(|| err("missing ':'"))?;
        let rest = rest.trim();
        let open = rest.find('(').ok_or_else(|| err("missing '('"))?;
        let close = rest.find(')').ok_or_else(|| err("missing ')'"))?;
        let mut words = rest[open + 1..close].split_whitespace();
        let name = words.next().ok_or_else(|| err("empty action"))?.to_string();
        let args: Vec<String> = words.map(str::to_string).collect();
        let tail = rest[close + 1..].trim();
        let duration = if tail.is_empty() {
            None
        } else {
            let inner = tail
                .strip_prefix('[')
                .and_then(|t| t.strip_suffix(']'))
                .ok_or_else(|| err("expected [duration]"))?;
            Some(parse_number(inner.trim()).ok_or_else(|| err("bad duration"))?)
        };
        if duration.is_some() {
            let start = parse_number(head.trim()).ok_or_else(|| err("bad start time"))?;
            out.push(PlannedStep { name, args, start: Some(start), duration });
        } else {
            let index: usize =
                head.trim().parse().map_err(|_| err("bad step index"))?;
            classical.push((index, PlannedStep { name, args, start: None, duration: None }));
        }
    }
    if !classical.is_empty() {
        if !out.is_empty() {
            return Err("mixed classical and durative plan lines".to_string());
        }
        classical.sort_by_key(|(i, _)| *i);
        return Ok(classical.into_iter().map(|(_, s)| s).collect());
    }
    Ok(out)
}

/// Parses a decimal ("4", "0.01", "-2.5") or "n/d" rational.
pub fn parse_number(s: &str) -> Option<Rational64> {
    if let Some((whole, frac)) = s.split_once('.') {
        let w: i64 = if whole.is_empty() { 0 } else { whole.parse().ok()? };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let denom = 10i64.checked_pow(frac.len() as u32)?;
        let f: i64 = frac.parse().ok()?;
        let sign = if s.trim_start().starts_with('-') { -1 } else { 1 };
        Some(Rational64::new(w.abs() * sign, 1) + Rational64::new(f * sign, denom))
    } else if let Some((n, d)) = s.split_once('/') {
        Some(Rational64::new(n.parse().ok()?, d.parse().ok()?))
    } else {
        Some(Rational64::from_integer(s.parse().ok()?))
    }
}

struct Eval<'a> {
    domain: &'a Domain,
    problem: &'a Problem,
    objects_by_type: Vec<Vec<ObjId>>,
}

impl<'a> Eval<'a> {
    fn new(domain: &'a Domain, problem: &'a Problem) -> Eval<'a> {
        let n = problem.num_objects(domain);
        let mut objects_by_type: Vec<Vec<ObjId>> = vec![Vec::new(); domain.types.len()];
        for obj in 0..n {
            let mut ty = problem.object_type(domain, obj);
            loop {
                objects_by_type[ty as usize].push(obj);
                if ty == TYPE_OBJECT {
                    break;
                }
                ty = domain.types[ty as usize].parent;
            }
        }
        Eval { domain, problem, objects_by_type }
    }

    fn obj_id(&self, name: &str) -> Option<ObjId> {
        let nc = self.domain.constants.len();
        if let Some(i) = self.domain.constants.iter().position(|c| c.name == name) {
            return Some(i as ObjId);
        }
        self.problem.objects.iter().position(|o| o.name == name).map(|i| (nc + i) as ObjId)
    }

    fn ground(&self, lit: &Literal, asg: &[Option<ObjId>]) -> GroundAtom {
        GroundAtom {
            pred: lit.pred,
            args: lit
                .args
                .iter()
                .map(|t| match t {
                    Term::Obj(o) => *o,
                    Term::Var(v) => asg[*v as usize].expect("unbound variable"),
                })
                .collect(),
        }
    }

    fn holds(&self, f: &Formula, asg: &mut Vec<Option<ObjId>>, state: &HashSet<GroundAtom>) -> bool {
        match f {
            Formula::Lit(lit) => {
                let atom = self.ground(lit, asg);
                let truth = if lit.pred == PRED_EQ {
                    atom.args[0] == atom.args[1]
                } else {
                    state.contains(&atom)
                };
                truth == lit.positive
            }
            Formula::Not(inner) => !self.holds(inner, asg, state),
            Formula::And(cs) => cs.iter().all(|c| self.holds(c, asg, state)),
            Formula::Or(ds) => ds.iter().any(|d| self.holds(d, asg, state)),
            Formula::Exists(qs, body) => self.quant(qs, body, asg, state, 0, false),
            Formula::Forall(qs, body) => self.quant(qs, body, asg, state, 0, true),
        }
    }

    fn quant(
        &self,
        qs: &[QuantVar],
        body: &Formula,
        asg: &mut Vec<Option<ObjId>>,
        state: &HashSet<GroundAtom>,
        depth: usize,
        universal: bool,
    ) -> bool {
        if depth == qs.len() {
            return self.holds(body, asg, state);
        }
        let q = qs[depth];
        if q.var as usize >= asg.len() {
            asg.resize(q.var as usize + 1, None);
        }
        for i in 0..self.objects_by_type[q.ty as usize].len() {
            let obj = self.objects_by_type[q.ty as usize][i];
            asg[q.var as usize] = Some(obj);
            let sub = self.quant(qs, body, asg, state, depth + 1, universal);
            if sub != universal {
                asg[q.var as usize] = None;
                return sub;
            }
        }
        asg[q.var as usize] = None;
        universal
    }

    /// Expanded (adds, deletes) of one schema effect in the given state,
    /// honoring universal quantification and conditions.
    fn effect_changes(
        &self,
        eff: &SchemaEffect,
        asg: &mut Vec<Option<ObjId>>,
        state: &HashSet<GroundAtom>,
        tau: Option<EffTime>,
        adds: &mut Vec<GroundAtom>,
        dels: &mut Vec<GroundAtom>,
    ) {
        if let Some(t) = tau {
            if eff.tau != t {
                return;
            }
        }
        self.expand_effect(eff, asg, state, 0, adds, dels);
    }

    fn expand_effect(
        &self,
        eff: &SchemaEffect,
        asg: &mut Vec<Option<ObjId>>,
        state: &HashSet<GroundAtom>,
        depth: usize,
        adds: &mut Vec<GroundAtom>,
        dels: &mut Vec<GroundAtom>,
    ) {
        if depth == eff.forall.len() {
            for tc in &eff.condition {
                if !self.holds(&tc.formula, asg, state) {
                    return;
                }
            }
            let atom = GroundAtom {
                pred: eff.literal.pred,
                args: eff
                    .literal
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Obj(o) => *o,
                        Term::Var(v) => asg[*v as usize].expect("unbound effect variable"),
                    })
                    .collect(),
            };
            if eff.literal.positive {
                adds.push(atom);
            } else {
                dels.push(atom);
            }
            return;
        }
        let q = eff.forall[depth];
        if q.var as usize >= asg.len() {
            asg.resize(q.var as usize + 1, None);
        }
        for i in 0..self.objects_by_type[q.ty as usize].len() {
            let obj = self.objects_by_type[q.ty as usize][i];
            asg[q.var as usize] = Some(obj);
            self.expand_effect(eff, asg, state, depth + 1, adds, dels);
        }
        asg[q.var as usize] = None;
    }

    /// Resolves a plan step to its schema and a parameter assignment,
    /// checking arity and argument types.
    fn bind_step(&self, step: &PlannedStep) -> Result<(SchemaId, Vec<Option<ObjId>>), String> {
        let sid = self
            .domain
            .schemas
            .iter()
            .position(|s| s.name == step.name)
            .ok_or_else(|| format!("unknown action ({})", step.name))?;
        let schema = &self.domain.schemas[sid];
        if step.args.len() != schema.n_params {
            return Err(format!(
                "action ({}) expects {} arguments, got {}",
                step.name,
                schema.n_params,
                step.args.len()
            ));
        }
        let mut asg: Vec<Option<ObjId>> = vec![None; schema.vars.len()];
        for (i, arg) in step.args.iter().enumerate() {
            let obj =
                self.obj_id(arg).ok_or_else(|| format!("unknown object {arg} in ({})", step.name))?;
            let ty = self.problem.object_type(self.domain, obj);
            if !self.domain.is_subtype(ty, schema.vars[i].ty) {
                return Err(format!("object {arg} has the wrong type for ({})", step.name));
            }
            asg[i] = Some(obj);
        }
        Ok((sid as SchemaId, asg))
    }
}

/// Executes a classical plan in list order and checks every precondition,
/// conditional effect, and finally the goal, under closed-world semantics.
pub fn validate_classical(
    domain: &Domain,
    problem: &Problem,
    steps: &[PlannedStep],
) -> Result<(), String> {
    let eval = Eval::new(domain, problem);
    let mut state: HashSet<GroundAtom> = problem.init.iter().cloned().collect();
    for (i, step) in steps.iter().enumerate() {
        let culprit = || format!("step {} ({})", i + 1, step.name);
        let (sid, mut asg) = eval.bind_step(step).map_err(|e| format!("{}: {e}", culprit()))?;
        let schema = &domain.schemas[sid as usize];
        if schema.durative {
            return Err(format!("{}: durative action in a classical plan", culprit()));
        }
        for tc in &schema.precondition {
            if !eval.holds(&tc.formula, &mut asg, &state) {
                return Err(format!("{}: precondition violated", culprit()));
            }
        }
        let mut adds = Vec::new();
        let mut dels = Vec::new();
        for eff in &schema.effects {
            eval.effect_changes(eff, &mut asg, &state, None, &mut adds, &mut dels);
        }
        for d in dels {
            state.remove(&d);
        }
        for a in adds {
            state.insert(a);
        }
    }
    let mut goal_asg: Vec<Option<ObjId>> = vec![None; problem.goal_vars.len()];
    if !eval.holds(&problem.goal, &mut goal_asg, &state) {
        return Err("goal not satisfied in the final state".to_string());
    }
    Ok(())
}

struct Event {
    time: Rational64,
    step: usize,
    tau: EffTime,
}

/// Simulates a timed plan: duration constraints, start/end/invariant
/// conditions, epsilon separation of interfering endpoints, and the goal.
pub fn validate_durative(
    domain: &Domain,
    problem: &Problem,
    steps: &[PlannedStep],
    epsilon: Rational64,
) -> Result<(), String> {
    let eval = Eval::new(domain, problem);
    let zero = Rational64::from_integer(0);
    let mut bound: Vec<(SchemaId, Vec<Option<ObjId>>)> = Vec::new();
    let mut window: Vec<(Rational64, Rational64)> = Vec::new();
    for (i, step) in steps.iter().enumerate() {
        let culprit = || format!("step {} ({})", i + 1, step.name);
        let (sid, asg) = eval.bind_step(step).map_err(|e| format!("{}: {e}", culprit()))?;
        let schema = &domain.schemas[sid as usize];
        if !schema.durative {
            return Err(format!("{}: classical action in a timed plan", culprit()));
        }
        let start = step.start.ok_or_else(|| format!("{}: missing start time", culprit()))?;
        let duration =
            step.duration.ok_or_else(|| format!("{}: missing duration", culprit()))?;
        if start <= zero {
            return Err(format!("{}: must start after time zero", culprit()));
        }
        if duration <= zero {
            return Err(format!("{}: duration must be positive", culprit()));
        }
        for dc in &schema.duration {
            let ok = match dc.op {
                DurOp::Eq => duration == dc.value,
                DurOp::Le => duration <= dc.value,
                DurOp::Ge => duration >= dc.value,
            };
            if !ok {
                return Err(format!("{}: duration constraint violated", culprit()));
            }
        }
        bound.push((sid, asg));
        window.push((start, start + duration));
    }

    // Epsilon separation: endpoints that interact must not be scheduled
    // closer than epsilon apart.
    for i in 0..steps.len() {
        for j in 0..steps.len() {
            for (ti, tau_i) in [(window[i].0, EffTime::Start), (window[i].1, EffTime::End)] {
                for (tj, tau_j) in [(window[j].0, EffTime::Start), (window[j].1, EffTime::End)] {
                    if i == j && tau_i == tau_j {
                        continue;
                    }
                    let gap = if ti > tj { ti - tj } else { tj - ti };
                    if gap >= epsilon || gap == zero && i == j {
                        continue;
                    }
                    if endpoints_interfere(&eval, &bound[i], tau_i, &bound[j], tau_j) {
                        return Err(format!(
                            "steps {} and {} schedule interfering endpoints within epsilon",
                            i + 1,
                            j + 1
                        ));
                    }
                }
            }
        }
    }

    let mut events: Vec<Event> = Vec::new();
    for (i, &(start, end)) in window.iter().enumerate() {
        events.push(Event { time: start, step: i, tau: EffTime::Start });
        events.push(Event { time: end, step: i, tau: EffTime::End });
    }
    events.sort_by(|a, b| a.time.cmp(&b.time));

    let mut state: HashSet<GroundAtom> = problem.init.iter().cloned().collect();
    let mut k = 0;
    while k < events.len() {
        let t = events[k].time;
        let mut batch = Vec::new();
        while k < events.len() && events[k].time == t {
            batch.push(&events[k]);
            k += 1;
        }
        // Conditions first, against the state before any simultaneous
        // effect applies.
        for ev in &batch {
            let (sid, asg) = &bound[ev.step];
            let schema = &domain.schemas[*sid as usize];
            let want = match ev.tau {
                EffTime::Start => Tau::Start,
                EffTime::End => Tau::End,
            };
            for tc in &schema.precondition {
                if tc.tau == want && !eval.holds(&tc.formula, &mut asg.clone(), &state) {
                    return Err(format!(
                        "step {} ({}) violates its {} condition",
                        ev.step + 1,
                        steps[ev.step].name,
                        tc.tau
                    ));
                }
            }
        }
        let mut adds = Vec::new();
        let mut dels = Vec::new();
        for ev in &batch {
            let (sid, asg) = &bound[ev.step];
            let schema = &domain.schemas[*sid as usize];
            for eff in &schema.effects {
                eval.effect_changes(eff, &mut asg.clone(), &state, Some(ev.tau), &mut adds, &mut dels);
            }
        }
        for d in dels {
            state.remove(&d);
        }
        for a in adds {
            state.insert(a);
        }
        // Invariants hold over the open interval, so they must hold in the
        // state right after any event batch inside the window.
        for (i, &(start, end)) in window.iter().enumerate() {
            if start <= t && t < end {
                let (sid, asg) = &bound[i];
                let schema = &domain.schemas[*sid as usize];
                for tc in &schema.precondition {
                    if tc.tau == Tau::Invariant && !eval.holds(&tc.formula, &mut asg.clone(), &state)
                    {
                        return Err(format!(
                            "step {} ({}) violates its invariant condition",
                            i + 1,
                            steps[i].name
                        ));
                    }
                }
            }
        }
    }
    let mut goal_asg: Vec<Option<ObjId>> = vec![None; problem.goal_vars.len()];
    if !eval.holds(&problem.goal, &mut goal_asg, &state) {
        return Err("goal not satisfied in the final state".to_string());
    }
    Ok(())
}

/// Do these two endpoints interact (one's effects touch the other's
/// conditions or effects)? Used for the epsilon separation check.
fn endpoints_interfere(
    eval: &Eval<'_>,
    a: &(SchemaId, Vec<Option<ObjId>>),
    tau_a: EffTime,
    b: &(SchemaId, Vec<Option<ObjId>>),
    tau_b: EffTime,
) -> bool {
    let atoms = |s: &(SchemaId, Vec<Option<ObjId>>), tau: EffTime| -> Vec<(GroundAtom, bool)> {
        let schema = &eval.domain.schemas[s.0 as usize];
        let mut out = Vec::new();
        for eff in &schema.effects {
            if eff.tau != tau || !eff.forall.is_empty() {
                continue;
            }
            if eff.literal.args.iter().any(|t| matches!(t, Term::Var(v) if s.1[*v as usize].is_none()))
            {
                continue;
            }
            out.push((eval.ground(&eff.literal, &s.1), eff.literal.positive));
        }
        // Quantified effects: expand over objects unconditionally (their
        // conditions could fire, so treat them as potential writers).
        for eff in &schema.effects {
            if eff.tau != tau || eff.forall.is_empty() {
                continue;
            }
            let mut asg = s.1.clone();
            let mut adds = Vec::new();
            let mut dels = Vec::new();
            expand_unconditionally(eval, eff, &mut asg, 0, &mut adds, &mut dels);
            out.extend(adds.into_iter().map(|a| (a, true)));
            out.extend(dels.into_iter().map(|d| (d, false)));
        }
        out
    };
    let eff_a = atoms(a, tau_a);
    let eff_b = atoms(b, tau_b);
    // Effect/effect interference: same atom written with opposite signs.
    for (atom_a, pos_a) in &eff_a {
        for (atom_b, pos_b) in &eff_b {
            if atom_a == atom_b && pos_a != pos_b {
                return true;
            }
        }
    }
    // Effect/condition interference in both directions.
    let cond_mentions = |s: &(SchemaId, Vec<Option<ObjId>>), tau: EffTime, atom: &GroundAtom| -> bool {
        let schema = &eval.domain.schemas[s.0 as usize];
        let want = match tau {
            EffTime::Start => Tau::Start,
            EffTime::End => Tau::End,
        };
        schema
            .precondition
            .iter()
            .filter(|tc| tc.tau == want)
            .any(|tc| formula_mentions(eval, &tc.formula, &s.1, atom))
    };
    eff_a.iter().any(|(atom, _)| cond_mentions(b, tau_b, atom))
        || eff_b.iter().any(|(atom, _)| cond_mentions(a, tau_a, atom))
}

fn expand_unconditionally(
    eval: &Eval<'_>,
    eff: &SchemaEffect,
    asg: &mut Vec<Option<ObjId>>,
    depth: usize,
    adds: &mut Vec<GroundAtom>,
    dels: &mut Vec<GroundAtom>,
) {
    if depth == eff.forall.len() {
        let atom = GroundAtom {
            pred: eff.literal.pred,
            args: eff
                .literal
                .args
                .iter()
                .map(|t| match t {
                    Term::Obj(o) => *o,
                    Term::Var(v) => asg[*v as usize].expect("unbound effect variable"),
                })
                .collect(),
        };
        if eff.literal.positive {
            adds.push(atom);
        } else {
            dels.push(atom);
        }
        return;
    }
    let q = eff.forall[depth];
    if q.var as usize >= asg.len() {
        asg.resize(q.var as usize + 1, None);
    }
    for i in 0..eval.objects_by_type[q.ty as usize].len() {
        let obj = eval.objects_by_type[q.ty as usize][i];
        asg[q.var as usize] = Some(obj);
        expand_unconditionally(eval, eff, asg, depth + 1, adds, dels);
    }
    asg[q.var as usize] = None;
}

fn formula_mentions(
    eval: &Eval<'_>,
    f: &Formula,
    asg: &[Option<ObjId>],
    atom: &GroundAtom,
) -> bool {
    match f {
        Formula::Lit(lit) => {
            if lit.pred != atom.pred {
                return false;
            }
            lit.args.iter().zip(&atom.args).all(|(t, &o)| match t {
                Term::Obj(x) => *x == o,
                Term::Var(v) => asg.get(*v as usize).copied().flatten().map_or(true, |x| x == o),
            })
        }
        Formula::Not(inner) => formula_mentions(eval, inner, asg, atom),
        Formula::And(cs) | Formula::Or(cs) => {
            cs.iter().any(|c| formula_mentions(eval, c, asg, atom))
        }
        Formula::Exists(_, body) | Formula::Forall(_, body) => {
            formula_mentions(eval, body, asg, atom)
        }
    }
}

/// Validates steps as classical when no step carries a start time, timed
/// otherwise.
pub fn validate(
    domain: &Domain,
    problem: &Problem,
    steps: &[PlannedStep],
    epsilon: Rational64,
) -> Result<(), String> {
    if steps.iter().any(|s| s.start.is_some()) {
        validate_durative(domain, problem, steps, epsilon)
    } else {
        validate_classical(domain, problem, steps)
    }
}
