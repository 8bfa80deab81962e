//! Turns a finished plan into printable text: one line per step, plus the
//! schedule data a caller needs for reports.

use crate::bindings::BindingSet;
use crate::pddl::{rational_to_string, Term};
use crate::plan::{Orderings, Plan, PlanCtx, StepKind};
use num_rational::Rational64;

#[derive(Clone, Debug)]
pub struct RenderedStep {
    pub name: String,
    pub args: Vec<String>,
    pub start: Option<Rational64>,
    pub duration: Option<Rational64>,
}

/// A rendered solution. `lines` is what gets printed; `steps` carries the
/// same information structured, in the same order.
#[derive(Clone, Debug)]
pub struct SolutionView {
    pub lines: Vec<String>,
    pub steps: Vec<RenderedStep>,
    pub n_steps: usize,
    /// Longest chain length for unit-duration plans, latest end time for
    /// timed ones.
    pub makespan: Rational64,
}

impl SolutionView {
    pub fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

pub fn render_solution(ctx: &PlanCtx<'_>, plan: &Plan) -> SolutionView {
    let bindings = ground_leftovers(ctx, plan);
    let real: Vec<u32> = (2..plan.steps.len() as u32).collect();
    match &plan.orderings {
        Orderings::Bit(ord) => {
            let mut remaining = real;
            let mut sequence = Vec::new();
            while !remaining.is_empty() {
                let pick = remaining
                    .iter()
                    .position(|&s| !remaining.iter().any(|&t| t != s && ord.precedes(t, s)))
                    .expect("ordering contains a cycle");
                sequence.push(remaining.remove(pick));
            }
            let mut lines = Vec::new();
            let mut steps = Vec::new();
            for (i, &sid) in sequence.iter().enumerate() {
                let (name, args) = step_parts(ctx, plan, &bindings, sid);
                lines.push(format!("{}: ({})", i + 1, join_name(&name, &args)));
                steps.push(RenderedStep { name, args, start: None, duration: None });
            }
            let n_steps = steps.len();
            SolutionView {
                lines,
                steps,
                n_steps,
                makespan: Rational64::from_integer(ord.longest_chain() as i64),
            }
        }
        Orderings::Stn(graph) => {
            let schedule = graph.schedule();
            let mut order: Vec<u32> = real;
            order.sort_by_key(|&sid| (schedule[sid as usize - 2].0, sid));
            let mut lines = Vec::new();
            let mut steps = Vec::new();
            let mut makespan = Rational64::from_integer(0);
            for &sid in &order {
                let (start, duration) = schedule[sid as usize - 2];
                makespan = makespan.max(start + duration);
                let (name, args) = step_parts(ctx, plan, &bindings, sid);
                lines.push(format!(
                    "{}: ({}) [{}]",
                    rational_to_string(start),
                    join_name(&name, &args),
                    rational_to_string(duration)
                ));
                steps.push(RenderedStep { name, args, start: Some(start), duration: Some(duration) });
            }
            let n_steps = steps.len();
            SolutionView { lines, steps, n_steps, makespan }
        }
    }
}

/// A solved lifted plan may leave variables unconstrained; any object of the
/// right type works, so commit each to its first possible value.
fn ground_leftovers(ctx: &PlanCtx<'_>, plan: &Plan) -> BindingSet {
    let mut bindings = plan.bindings.clone();
    for step in &plan.steps {
        for &arg in &step.args {
            if let Term::Var(v) = bindings.resolve(arg) {
                let choices = bindings.possible_values(v, ctx.store);
                let obj = *choices.first().expect("variable with no possible value");
                bindings = bindings
                    .unify(ctx.store, Term::Var(v), Term::Obj(obj))
                    .expect("possible value failed to unify");
            }
        }
    }
    bindings
}

fn step_parts(
    ctx: &PlanCtx<'_>,
    plan: &Plan,
    bindings: &BindingSet,
    sid: u32,
) -> (String, Vec<String>) {
    let step = &plan.steps[sid as usize];
    debug_assert_eq!(step.kind, StepKind::Real);
    let names = ctx.store.names();
    let schema = &ctx.store.domain.schemas[step.schema.expect("real step") as usize];
    let args = step
        .args
        .iter()
        .map(|&arg| match bindings.resolve(arg) {
            Term::Obj(o) => names.obj(o).to_string(),
            Term::Var(v) => format!("?v{v}"),
        })
        .collect();
    (schema.name.clone(), args)
}

fn join_name(name: &str, args: &[String]) -> String {
    let mut s = name.to_string();
    for a in args {
        s.push(' ');
        s.push_str(a);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flaw::Strategy;
    use crate::ground::ground_problem;
    use crate::heur::{HeurMode, HeurTable};
    use crate::pddl::{parse_domain, parse_problem};
    use crate::search::{AStar, Limits, SearchStatus, Searcher};
    use std::sync::Arc;

    fn solve(domain: &str, problem: &str, lifted: bool) -> (crate::ground::GroundStore, Plan) {
        let d = Arc::new(parse_domain(domain).unwrap());
        let p = Arc::new(parse_problem(problem, &d).unwrap());
        let store = ground_problem(d, p, true);
        let table = HeurTable::build(&store);
        let ctx = PlanCtx::new(&store, lifted, Rational64::new(1, 100));
        let strategy = Strategy::parse("UCPOP").unwrap();
        let mut search =
            AStar::new(&ctx, &strategy, HeurMode::AddReuse, Some(&table), 0, Limits::default());
        assert_eq!(search.run(None), SearchStatus::Solved);
        let plan = search.take_solution().unwrap();
        drop(search);
        (store, plan)
    }

    const ROOMS: &str = "
        (define (domain rooms)
          (:requirements :strips :typing)
          (:types room)
          (:predicates (at ?r - room) (door ?a ?b - room) (visited ?r - room))
          (:action move
            :parameters (?from ?to - room)
            :precondition (and (at ?from) (door ?from ?to))
            :effect (and (at ?to) (visited ?to) (not (at ?from))))
          (:action mark
            :parameters (?r - room)
            :precondition (at ?r)
            :effect (visited ?r)))";

    const LINE3: &str = "
        (define (problem line3)
          (:domain rooms)
          (:objects ra rb rc - room)
          (:init (at ra) (door ra rb) (door rb ra) (door rb rc) (door rc rb))
          (:goal (at rc)))";

    #[test]
    fn classical_lines_are_ordered_and_one_based() {
        let (store, plan) = solve(ROOMS, LINE3, false);
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let view = render_solution(&ctx, &plan);
        assert_eq!(view.lines, vec!["1: (move ra rb)", "2: (move rb rc)"]);
        assert_eq!(view.n_steps, 2);
        assert_eq!(view.makespan, Rational64::from_integer(2));
        assert!(view.steps.iter().all(|s| s.start.is_none()));
    }

    #[test]
    fn classical_output_validates() {
        let (store, plan) = solve(ROOMS, LINE3, false);
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let view = render_solution(&ctx, &plan);
        let steps = crate::validate::parse_plan_file(&view.text()).unwrap();
        crate::validate::validate(&store.domain, &store.problem, &steps, ctx.epsilon).unwrap();
    }

    const TIMED: &str = "
        (define (domain timed)
          (:requirements :typing :durative-actions)
          (:predicates (p) (done))
          (:durative-action a1
            :parameters ()
            :duration (and (>= ?duration 3) (<= ?duration 7))
            :condition (at end (p))
            :effect (at end (done)))
          (:durative-action a2
            :parameters ()
            :duration (= ?duration 4)
            :effect (at end (p))))";

    const TIMED_PROBLEM: &str = "
        (define (problem timed1)
          (:domain timed)
          (:init )
          (:goal (done)))";

    #[test]
    fn timed_lines_carry_start_and_duration() {
        let (store, plan) = solve(TIMED, TIMED_PROBLEM, false);
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let view = render_solution(&ctx, &plan);
        assert_eq!(view.n_steps, 2);
        for line in &view.lines {
            assert!(line.contains(": (a"), "unexpected line {line}");
            assert!(line.ends_with(']'), "unexpected line {line}");
        }
        let steps = crate::validate::parse_plan_file(&view.text()).unwrap();
        crate::validate::validate(&store.domain, &store.problem, &steps, ctx.epsilon).unwrap();
        let latest = view
            .steps
            .iter()
            .map(|s| s.start.unwrap() + s.duration.unwrap())
            .max()
            .unwrap();
        assert_eq!(view.makespan, latest);
    }

    #[test]
    fn lifted_leftover_variables_are_grounded() {
        let (store, plan) = solve(ROOMS, LINE3, true);
        let ctx = PlanCtx::new(&store, true, Rational64::new(1, 100));
        let view = render_solution(&ctx, &plan);
        let steps = crate::validate::parse_plan_file(&view.text()).unwrap();
        crate::validate::validate(&store.domain, &store.problem, &steps, ctx.epsilon).unwrap();
        for s in &view.steps {
            for a in &s.args {
                assert!(!a.starts_with('?'), "unbound arg {a} in output");
            }
        }
    }
}
