//! Best-first search over partial plans, plus a round-robin scheduler that
//! interleaves several flaw selection strategies with doubling budgets.

use crate::flaw::{Selector, Strategy};
use crate::heur::{HeurMode, HeurTable, Xint};
use crate::plan::{FlawRef, Plan, PlanCtx};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::time::Instant;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LimitKind {
    Nodes,
    Memory,
    Time,
}

/// Hard resource limits for one search. All default to unlimited.
#[derive(Clone, Copy, Default)]
pub struct Limits {
    pub max_generated: Option<u64>,
    pub max_bytes: Option<usize>,
    pub deadline: Option<Instant>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SearchStatus {
    Solved,
    Suspended,
    Exhausted,
    Limit(LimitKind),
}

struct Entry {
    f: Xint,
    effort: Xint,
    g: u32,
    seq: u64,
    plan: Plan,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Max-heap: greater means expanded earlier. Prefer small f, then small
    // effort, then large g, then first-inserted.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .cmp(&self.f)
            .then_with(|| other.effort.cmp(&self.effort))
            .then_with(|| self.g.cmp(&other.g))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Anything the round-robin scheduler can drive: report how many plans it
/// has generated and explored, and run until a cumulative generation target.
pub trait Searcher {
    fn generated(&self) -> u64;
    fn explored(&self) -> u64;
    fn run(&mut self, until: Option<u64>) -> SearchStatus;
}

/// A* over the plan space for one flaw selection strategy.
pub struct AStar<'a> {
    ctx: &'a PlanCtx<'a>,
    table: Option<&'a HeurTable>,
    fallback_table: HeurTable,
    mode: HeurMode,
    selector: Selector<'a>,
    limits: Limits,
    /// When false, the effort component is dropped from the ranking key.
    pub use_effort: bool,
    queue: BinaryHeap<Entry>,
    pending: VecDeque<Plan>,
    solution: Option<Plan>,
    pub generated: u64,
    pub explored: u64,
    next_id: u64,
    insert_seq: u64,
    bytes: usize,
    /// When set, one line per expansion describing the selected flaw.
    pub trace: Option<Vec<String>>,
}

impl<'a> AStar<'a> {
    pub fn new(
        ctx: &'a PlanCtx<'a>,
        strategy: &'a Strategy,
        mode: HeurMode,
        table: Option<&'a HeurTable>,
        seed: u64,
        limits: Limits,
    ) -> AStar<'a> {
        if (mode.needs_table() || strategy.needs_table()) && table.is_none() {
            panic!("heuristic table required by mode or strategy");
        }
        let mut pending = VecDeque::new();
        pending.push_back(Plan::initial(ctx));
        AStar {
            ctx,
            table,
            fallback_table: HeurTable::default(),
            mode,
            selector: Selector::new(strategy, seed),
            limits,
            use_effort: true,
            queue: BinaryHeap::new(),
            pending,
            solution: None,
            generated: 0,
            explored: 0,
            next_id: 0,
            insert_seq: 0,
            bytes: 0,
            trace: None,
        }
    }

    pub fn solution(&self) -> Option<&Plan> {
        self.solution.as_ref()
    }

    pub fn take_solution(&mut self) -> Option<Plan> {
        self.solution.take()
    }

    fn table_ref(&self) -> &HeurTable {
        self.table.unwrap_or(&self.fallback_table)
    }

    fn prunes_infinite(&self) -> bool {
        matches!(self.mode, HeurMode::Add | HeurMode::AddReuse)
    }

    fn step(&mut self, until: Option<u64>) -> Option<SearchStatus> {
        while let Some(front) = self.pending.front() {
            let (f, effort) = front.rank(self.ctx, self.table_ref(), self.mode);
            if self.prunes_infinite() && !f.is_finite() {
                self.pending.pop_front();
                continue;
            }
            if let Some(t) = until {
                if self.generated >= t {
                    return Some(SearchStatus::Suspended);
                }
            }
            if let Some(n) = self.limits.max_generated {
                if self.generated >= n {
                    return Some(SearchStatus::Limit(LimitKind::Nodes));
                }
            }
            let mut plan = self.pending.pop_front().unwrap();
            plan.id = self.next_id;
            self.next_id += 1;
            self.bytes += plan.approx_bytes();
            if let Some(mb) = self.limits.max_bytes {
                if self.bytes > mb {
                    return Some(SearchStatus::Limit(LimitKind::Memory));
                }
            }
            let effort = if self.use_effort { effort } else { Xint::ZERO };
            let entry = Entry { f, effort, g: plan.g(), seq: self.insert_seq, plan };
            self.insert_seq += 1;
            self.generated += 1;
            self.queue.push(entry);
        }
        if let Some(d) = self.limits.deadline {
            if Instant::now() >= d {
                return Some(SearchStatus::Limit(LimitKind::Time));
            }
        }
        let entry = match self.queue.pop() {
            None => return Some(SearchStatus::Exhausted),
            Some(e) => e,
        };
        self.bytes = self.bytes.saturating_sub(entry.plan.approx_bytes());
        self.explored += 1;
        let plan = entry.plan;
        if plan.is_solution() {
            self.solution = Some(plan);
            return Some(SearchStatus::Solved);
        }
        let flaw = self
            .selector
            .select(self.ctx, &plan, self.table)
            .expect("a flawed plan always yields a flaw");
        if let Some(trace) = &mut self.trace {
            trace.push(describe_flaw(self.ctx, &plan, flaw));
        }
        let children = plan.resolve(self.ctx, flaw);
        self.pending.extend(children);
        None
    }
}

impl<'a> Searcher for AStar<'a> {
    fn generated(&self) -> u64 {
        self.generated
    }

    fn explored(&self) -> u64 {
        self.explored
    }

    fn run(&mut self, until: Option<u64>) -> SearchStatus {
        if self.solution.is_some() {
            return SearchStatus::Solved;
        }
        loop {
            if let Some(status) = self.step(until) {
                return status;
            }
        }
    }
}

/// One line describing a flaw, used for selection traces.
pub fn describe_flaw(ctx: &PlanCtx<'_>, plan: &Plan, flaw: FlawRef) -> String {
    let names = ctx.store.names();
    match flaw {
        FlawRef::Open(i) => {
            let oc = &plan.open[i];
            format!("open {} @{}{}", names.formula(&oc.formula, &[]), oc.step, oc.tau)
        }
        FlawRef::Threat(i) => {
            let t = &plan.threats[i];
            let link = &plan.links[t.link as usize];
            format!(
                "threat {} [{}->{}] by {}",
                names.literal(&link.lit, &[]),
                link.producer,
                link.consumer,
                t.step
            )
        }
    }
}

/// One strategy's generation count for one round of the schedule.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Cell {
    /// Plans generated during the round.
    Ran(u64),
    /// Strategy was already retired when its turn came.
    Retired,
    /// The round ended (solution or hard limit) before this strategy's turn.
    Unreached,
}

/// What the round-robin scheduler did: per-round generation counts, final
/// per-strategy totals, and which strategy (if any) found a solution.
#[derive(Clone, Debug)]
pub struct ScheduleReport {
    pub rounds: Vec<Vec<Cell>>,
    pub totals: Vec<u64>,
    pub grand_total: u64,
    pub solved: Option<usize>,
    pub limit: Option<LimitKind>,
}

/// Runs the searchers round-robin. Every strategy's cumulative budget after
/// round i is `base * 2^(i-1)`, truncated to its cap; a strategy is retired
/// when it reaches its cap or exhausts its search space. The scheduler
/// stops at the first solution, when time runs out, or when everyone is
/// retired. `progress`, when given, is called after each turn with
/// (round, strategy index, generated so far, explored so far).
pub fn round_robin(
    workers: &mut [&mut dyn Searcher],
    caps: &[Option<u64>],
    base: u64,
    mut progress: Option<&mut dyn FnMut(u32, usize, u64, u64)>,
) -> ScheduleReport {
    let n = workers.len();
    assert_eq!(caps.len(), n);
    let mut retired = vec![false; n];
    let mut rounds: Vec<Vec<Cell>> = Vec::new();
    let mut solved = None;
    let mut limit = None;
    let mut round: u32 = 0;
    'rounds: while retired.iter().any(|r| !r) {
        round += 1;
        let allowance = base.saturating_mul(1u64.checked_shl(round - 1).unwrap_or(u64::MAX));
        let mut cells = vec![Cell::Unreached; n];
        for i in 0..n {
            if retired[i] {
                cells[i] = Cell::Retired;
                continue;
            }
            let target = match caps[i] {
                Some(c) => allowance.min(c),
                None => allowance,
            };
            let before = workers[i].generated();
            if target <= before {
                retired[i] = true;
                cells[i] = Cell::Retired;
                continue;
            }
            let status = workers[i].run(Some(target));
            cells[i] = Cell::Ran(workers[i].generated() - before);
            if let Some(p) = progress.as_deref_mut() {
                p(round, i, workers[i].generated(), workers[i].explored());
            }
            match status {
                SearchStatus::Solved => {
                    solved = Some(i);
                    rounds.push(cells);
                    break 'rounds;
                }
                SearchStatus::Exhausted => retired[i] = true,
                SearchStatus::Limit(k) => {
                    limit.get_or_insert(k);
                    if k == LimitKind::Time {
                        rounds.push(cells);
                        break 'rounds;
                    }
                    retired[i] = true;
                }
                SearchStatus::Suspended => {
                    if caps[i].is_some_and(|c| workers[i].generated() >= c) {
                        retired[i] = true;
                    }
                }
            }
        }
        rounds.push(cells);
    }
    let totals: Vec<u64> = workers.iter().map(|w| w.generated()).collect();
    let grand_total = totals.iter().sum();
    ScheduleReport { rounds, totals, grand_total, solved, limit }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::{ground_problem, GroundStore};
    use crate::pddl::{parse_domain, parse_problem};
    use num_rational::Rational64;
    use std::sync::Arc;

    fn store_for(domain: &str, problem: &str) -> GroundStore {
        let d = Arc::new(parse_domain(domain).unwrap());
        let p = Arc::new(parse_problem(problem, &d).unwrap());
        ground_problem(d, p, true)
    }

    const CHAIN_DOMAIN: &str = "
        (define (domain chain)
          (:requirements :strips)
          (:predicates (p0) (p1) (p2))
          (:action s01 :precondition (p0) :effect (p1))
          (:action s12 :precondition (p1) :effect (p2)))";

    #[test]
    fn astar_solves_a_serial_chain() {
        let store = store_for(
            CHAIN_DOMAIN,
            "(define (problem c) (:domain chain) (:init (p0)) (:goal (p2)))",
        );
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let table = HeurTable::build(&store);
        let strategy = Strategy::parse("UCPOP").unwrap();
        let mut search =
            AStar::new(&ctx, &strategy, HeurMode::Add, Some(&table), 0, Limits::default());
        assert_eq!(search.run(None), SearchStatus::Solved);
        let plan = search.solution().unwrap();
        assert!(plan.is_solution());
        assert_eq!(plan.g(), 2);
        assert!(search.explored <= search.generated);
    }

    #[test]
    fn satisfied_goal_is_found_immediately() {
        let store = store_for(
            CHAIN_DOMAIN,
            "(define (problem c) (:domain chain) (:init (p0) (p2)) (:goal (p2)))",
        );
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let strategy = Strategy::parse("UCPOP").unwrap();
        let mut search = AStar::new(&ctx, &strategy, HeurMode::Flaws, None, 0, Limits::default());
        assert_eq!(search.run(None), SearchStatus::Solved);
        // The first expansion links the goal to the initial conditions.
        assert!(search.explored <= 2);
        assert_eq!(search.solution().unwrap().g(), 0);
    }

    #[test]
    fn unreachable_goal_prunes_initial_plan_under_add() {
        let store = store_for(
            CHAIN_DOMAIN,
            "(define (problem c) (:domain chain) (:init ) (:goal (p2)))",
        );
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let table = HeurTable::build(&store);
        let strategy = Strategy::parse("UCPOP").unwrap();
        let mut search =
            AStar::new(&ctx, &strategy, HeurMode::Add, Some(&table), 0, Limits::default());
        assert_eq!(search.run(None), SearchStatus::Exhausted);
        assert_eq!(search.generated, 0);
        assert_eq!(search.explored, 0);
    }

    #[test]
    fn suspension_preserves_state_across_resumes() {
        let store = store_for(
            CHAIN_DOMAIN,
            "(define (problem c) (:domain chain) (:init (p0)) (:goal (p2)))",
        );
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let table = HeurTable::build(&store);
        let strategy = Strategy::parse("UCPOP").unwrap();
        let mut search =
            AStar::new(&ctx, &strategy, HeurMode::Add, Some(&table), 0, Limits::default());
        let mut budget = 1;
        loop {
            match search.run(Some(budget)) {
                SearchStatus::Solved => break,
                SearchStatus::Suspended => {
                    assert!(search.generated <= budget);
                    budget += 1;
                }
                other => panic!("unexpected status {other:?}"),
            }
        }
        assert_eq!(search.solution().unwrap().g(), 2);
    }

    #[test]
    fn node_limit_stops_search() {
        let store = store_for(
            CHAIN_DOMAIN,
            "(define (problem c) (:domain chain) (:init (p0)) (:goal (p2)))",
        );
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let strategy = Strategy::parse("UCPOP").unwrap();
        let limits = Limits { max_generated: Some(1), ..Limits::default() };
        let mut search = AStar::new(&ctx, &strategy, HeurMode::Flaws, None, 0, limits);
        assert_eq!(search.run(None), SearchStatus::Limit(LimitKind::Nodes));
    }

    struct Stub {
        generated: u64,
        solve_at: Option<u64>,
    }

    impl Searcher for Stub {
        fn generated(&self) -> u64 {
            self.generated
        }

        fn explored(&self) -> u64 {
            0
        }

        fn run(&mut self, until: Option<u64>) -> SearchStatus {
            let target = until.unwrap_or(u64::MAX);
            match self.solve_at {
                Some(s) if s <= target => {
                    self.generated = s;
                    SearchStatus::Solved
                }
                _ => {
                    self.generated = target;
                    SearchStatus::Suspended
                }
            }
        }
    }

    #[test]
    fn round_robin_doubles_budgets_and_retires_capped_strategies() {
        let mut a = Stub { generated: 0, solve_at: None };
        let mut b = Stub { generated: 0, solve_at: Some(5000) };
        let mut workers: Vec<&mut dyn Searcher> = vec![&mut a, &mut b];
        let report = round_robin(&mut workers, &[Some(1500), None], 1000, None);
        assert_eq!(
            report.rounds,
            vec![
                vec![Cell::Ran(1000), Cell::Ran(1000)],
                vec![Cell::Ran(500), Cell::Ran(1000)],
                vec![Cell::Retired, Cell::Ran(2000)],
                vec![Cell::Retired, Cell::Ran(1000)],
            ]
        );
        assert_eq!(report.solved, Some(1));
        assert_eq!(report.totals, vec![1500, 5000]);
        assert_eq!(report.grand_total, 6500);
    }

    #[test]
    fn round_robin_fails_when_every_strategy_retires() {
        let mut a = Stub { generated: 0, solve_at: None };
        let mut b = Stub { generated: 0, solve_at: None };
        let mut workers: Vec<&mut dyn Searcher> = vec![&mut a, &mut b];
        let report = round_robin(&mut workers, &[Some(1000), Some(2000)], 1000, None);
        assert_eq!(report.solved, None);
        assert_eq!(report.totals, vec![1000, 2000]);
        assert_eq!(
            report.rounds,
            vec![
                vec![Cell::Ran(1000), Cell::Ran(1000)],
                vec![Cell::Retired, Cell::Ran(1000)],
            ]
        );
    }
}
