//! Flaw selection strategies: typed selection criteria with optional
//! refinement bounds, preset strategies, and the selection procedure.

use crate::heur::{HeurTable, Xint};
use crate::plan::{FlawRef, Plan, PlanCtx};
use crate::pddl::PRED_EQ;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fmt;

/// Flaw classes a criterion can match. Threats are `N` (non-separable) or
/// `S` (separable), never both. Open conditions are always `O` and may
/// additionally be `T` (static predicate), `L` (local to the most recently
/// added step with open conditions), or `U` (some effect in the plan could
/// threaten any causal link supporting them).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum FlawType {
    N,
    S,
    O,
    T,
    L,
    U,
}

impl FlawType {
    fn letter(self) -> char {
        match self {
            FlawType::N => 'n',
            FlawType::S => 's',
            FlawType::O => 'o',
            FlawType::T => 't',
            FlawType::L => 'l',
            FlawType::U => 'u',
        }
    }

    fn from_letter(c: char) -> Option<FlawType> {
        match c.to_ascii_lowercase() {
            'n' => Some(FlawType::N),
            's' => Some(FlawType::S),
            'o' => Some(FlawType::O),
            't' => Some(FlawType::T),
            'l' => Some(FlawType::L),
            'u' => Some(FlawType::U),
            _ => None,
        }
    }

    fn is_open_cond(self) -> bool {
        !matches!(self, FlawType::N | FlawType::S)
    }
}

/// How to order the flaws matched by one criterion. Ties always fall back
/// to last-in-first-out on flaw insertion order.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FlawOrder {
    Lifo,
    Fifo,
    Random,
    LeastRefined,
    New,
    MostCost,
    LeastCost,
    MostWork,
    LeastWork,
}

impl FlawOrder {
    fn name(self) -> &'static str {
        match self {
            FlawOrder::Lifo => "LIFO",
            FlawOrder::Fifo => "FIFO",
            FlawOrder::Random => "R",
            FlawOrder::LeastRefined => "LR",
            FlawOrder::New => "New",
            FlawOrder::MostCost => "MC_add",
            FlawOrder::LeastCost => "LC_add",
            FlawOrder::MostWork => "MW_add",
            FlawOrder::LeastWork => "LW_add",
        }
    }

    fn from_name(s: &str) -> Option<FlawOrder> {
        match s.to_ascii_lowercase().as_str() {
            "lifo" => Some(FlawOrder::Lifo),
            "fifo" => Some(FlawOrder::Fifo),
            "r" => Some(FlawOrder::Random),
            "lr" => Some(FlawOrder::LeastRefined),
            "new" => Some(FlawOrder::New),
            "mc_add" => Some(FlawOrder::MostCost),
            "lc_add" => Some(FlawOrder::LeastCost),
            "mw_add" => Some(FlawOrder::MostWork),
            "lw_add" => Some(FlawOrder::LeastWork),
            _ => None,
        }
    }

    /// Heuristic value orders apply only to open conditions, as does New.
    fn needs_open_conds(self) -> bool {
        matches!(
            self,
            FlawOrder::New
                | FlawOrder::MostCost
                | FlawOrder::LeastCost
                | FlawOrder::MostWork
                | FlawOrder::LeastWork
        )
    }

    fn needs_table(self) -> bool {
        matches!(
            self,
            FlawOrder::MostCost | FlawOrder::LeastCost | FlawOrder::MostWork | FlawOrder::LeastWork
        )
    }
}

/// One selection criterion: the flaw types it matches, an optional bound on
/// the number of refinements a matching flaw may have, and the order used
/// to pick among matches.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Criterion {
    pub types: Vec<FlawType>,
    pub max_refinements: Option<u32>,
    pub order: FlawOrder,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, t) in self.types.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", t.letter())?;
        }
        f.write_str("}")?;
        if let Some(k) = self.max_refinements {
            write!(f, "<={k}")?;
        }
        f.write_str(self.order.name())
    }
}

/// An ordered list of criteria. Selection walks the list and picks from the
/// first criterion matching any flaw of the current plan.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Strategy {
    pub criteria: Vec<Criterion>,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.criteria.iter().enumerate() {
            if i > 0 {
                f.write_str(" / ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

fn crit(types: &[FlawType], max: Option<u32>, order: FlawOrder) -> Criterion {
    Criterion { types: types.to_vec(), max_refinements: max, order }
}

/// Named preset strategies, matched case-insensitively.
pub fn preset(name: &str) -> Option<Strategy> {
    use FlawOrder::*;
    use FlawType::*;
    let criteria = match name.to_ascii_lowercase().as_str() {
        "ucpop" => vec![crit(&[N, S], None, Lifo), crit(&[O], None, Lifo)],
        "dsep" => vec![crit(&[N], None, Lifo), crit(&[O], None, Lifo), crit(&[S], None, Lifo)],
        "dunf" => vec![
            crit(&[N, S], Some(0), Lifo),
            crit(&[N, S], Some(1), Lifo),
            crit(&[O], None, Lifo),
            crit(&[N, S], None, Lifo),
        ],
        "lcfr" => vec![crit(&[N, S, O], None, LeastRefined)],
        "lcfr-dsep" => vec![crit(&[N, O], None, LeastRefined), crit(&[S], None, LeastRefined)],
        "zlifo" => vec![
            crit(&[N], None, Lifo),
            crit(&[O], Some(0), Lifo),
            crit(&[O], Some(1), New),
            crit(&[O], None, Lifo),
            crit(&[S], None, Lifo),
        ],
        "static-first" => {
            vec![crit(&[T], None, Lifo), crit(&[N, S], None, Lifo), crit(&[O], None, Lifo)]
        }
        "lcfr-loc" => vec![crit(&[N, S, L], None, LeastRefined)],
        "mc" => vec![crit(&[N, S], None, LeastRefined), crit(&[O], None, MostCost)],
        "mc-loc" => vec![crit(&[N, S], None, LeastRefined), crit(&[L], None, MostCost)],
        "mw" => vec![crit(&[N, S], None, LeastRefined), crit(&[O], None, MostWork)],
        "mw-loc" => vec![crit(&[N, S], None, LeastRefined), crit(&[L], None, MostWork)],
        "lcfr-conf" => {
            vec![crit(&[N, S, U], None, LeastRefined), crit(&[O], None, LeastRefined)]
        }
        "lcfr-loc-conf" => {
            vec![crit(&[N, S, U], None, LeastRefined), crit(&[L], None, LeastRefined)]
        }
        "mw-loc-conf" => vec![
            crit(&[N, S], None, LeastRefined),
            crit(&[U], None, MostWork),
            crit(&[L], None, MostWork),
        ],
        _ => return None,
    };
    Some(Strategy { criteria })
}

impl Strategy {
    /// Parses either a preset name or criterion notation such as
    /// `{n,s}LIFO / {o}<=1New`.
    pub fn parse(input: &str) -> Result<Strategy, String> {
        if let Some(s) = preset(input.trim()) {
            return Ok(s);
        }
        let mut criteria = Vec::new();
        for part in input.split('/') {
            criteria.push(parse_criterion(part.trim())?);
        }
        if criteria.is_empty() {
            return Err("empty strategy".to_string());
        }
        Ok(Strategy { criteria })
    }

    /// A strategy is complete when every kind of flaw that can arise is
    /// matched by some unbounded criterion. Ground planning never produces
    /// separable threats or static open conditions, so those classes are
    /// exempt there.
    pub fn check_complete(&self, lifted: bool) -> Result<(), String> {
        let unbounded =
            |t: FlawType| self.criteria.iter().any(|c| c.max_refinements.is_none() && c.types.contains(&t));
        if !unbounded(FlawType::N) {
            return Err("incomplete strategy: non-separable threats are not covered".to_string());
        }
        if lifted && !unbounded(FlawType::S) {
            return Err("incomplete strategy: separable threats are not covered".to_string());
        }
        if !unbounded(FlawType::O) && !unbounded(FlawType::L) {
            return Err("incomplete strategy: open conditions are not covered".to_string());
        }
        Ok(())
    }

    pub fn needs_table(&self) -> bool {
        self.criteria.iter().any(|c| c.order.needs_table())
    }
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    let bytes: Vec<char> = s.chars().collect();
    let mut i = 0;
    let skip_ws = |i: &mut usize| {
        while *i < bytes.len() && bytes[*i].is_whitespace() {
            *i += 1;
        }
    };
    skip_ws(&mut i);
    if i >= bytes.len() || bytes[i] != '{' {
        return Err(format!("expected '{{' in criterion: {s}"));
    }
    i += 1;
    let mut types = Vec::new();
    loop {
        skip_ws(&mut i);
        if i >= bytes.len() {
            return Err(format!("unterminated flaw type set: {s}"));
        }
        match FlawType::from_letter(bytes[i]) {
            Some(t) => {
                if !types.contains(&t) {
                    types.push(t);
                }
                i += 1;
            }
            None => return Err(format!("unknown flaw type '{}' in: {s}", bytes[i])),
        }
        skip_ws(&mut i);
        if i < bytes.len() && bytes[i] == ',' {
            i += 1;
            continue;
        }
        if i < bytes.len() && bytes[i] == '}' {
            i += 1;
            break;
        }
        return Err(format!("expected ',' or '}}' in criterion: {s}"));
    }
    skip_ws(&mut i);
    let mut max_refinements = None;
    if i + 1 < bytes.len() && bytes[i] == '<' && bytes[i + 1] == '=' {
        i += 2;
        skip_ws(&mut i);
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if start == i {
            return Err(format!("expected a bound after '<=': {s}"));
        }
        let digits: String = bytes[start..i].iter().collect();
        max_refinements =
            Some(digits.parse::<u32>().map_err(|_| format!("bad bound in criterion: {s}"))?);
    }
    skip_ws(&mut i);
    let word: String = bytes[i..]
        .iter()
        .take_while(|c| c.is_ascii_alphanumeric() || **c == '_')
        .collect();
    i += word.chars().count();
    skip_ws(&mut i);
    if i != bytes.len() {
        return Err(format!("trailing input after criterion: {s}"));
    }
    let order =
        FlawOrder::from_name(&word).ok_or_else(|| format!("unknown flaw order '{word}' in: {s}"))?;
    if order.needs_open_conds() && types.iter().any(|t| !t.is_open_cond()) {
        return Err(format!("order {} applies only to open-condition flaw types: {s}", order.name()));
    }
    Ok(Criterion { types, max_refinements, order })
}

/// Per-flaw data computed on demand during selection by generating the
/// flaw's refinements.
#[derive(Clone, Copy)]
struct FlawInfo {
    count: usize,
    adds_step: bool,
}

/// Picks flaws for a fixed strategy; random orders derive their stream from
/// the seed and the plan id, so selection is reproducible and independent
/// of exploration order.
pub struct Selector<'a> {
    pub strategy: &'a Strategy,
    pub seed: u64,
}

impl<'a> Selector<'a> {
    pub fn new(strategy: &'a Strategy, seed: u64) -> Selector<'a> {
        Selector { strategy, seed }
    }

    /// Selects the flaw to work on, or None for a solution plan. A table is
    /// required when the strategy ranks by heuristic values.
    pub fn select(
        &self,
        ctx: &PlanCtx<'_>,
        plan: &Plan,
        table: Option<&HeurTable>,
    ) -> Option<FlawRef> {
        if plan.flaw_count() == 0 {
            return None;
        }
        let all: Vec<FlawRef> = (0..plan.threats.len())
            .map(FlawRef::Threat)
            .chain((0..plan.open.len()).map(FlawRef::Open))
            .collect();
        let local = plan.local_step();
        let mut cache: HashMap<usize, FlawInfo> = HashMap::new();
        let mut info = |f: FlawRef| -> FlawInfo {
            let key = match f {
                FlawRef::Open(i) => i * 2,
                FlawRef::Threat(i) => i * 2 + 1,
            };
            *cache.entry(key).or_insert_with(|| {
                let children = plan.resolve(ctx, f);
                FlawInfo {
                    count: children.len(),
                    adds_step: children.iter().any(|c| c.steps.len() > plan.steps.len()),
                }
            })
        };

        for criterion in &self.strategy.criteria {
            let mut matching: Vec<FlawRef> = Vec::new();
            for &f in &all {
                if !self.type_match(ctx, plan, f, criterion, local) {
                    continue;
                }
                if let Some(k) = criterion.max_refinements {
                    if info(f).count as u32 > k {
                        continue;
                    }
                }
                matching.push(f);
            }
            if matching.is_empty() {
                continue;
            }
            return Some(self.pick(ctx, plan, criterion, matching, table, &mut info));
        }
        // A complete strategy always matches; keep a newest-first fallback
        // so ill-formed custom strategies degrade rather than stall.
        all.into_iter().max_by_key(|&f| flaw_seq(plan, f))
    }

    fn type_match(
        &self,
        ctx: &PlanCtx<'_>,
        plan: &Plan,
        flaw: FlawRef,
        criterion: &Criterion,
        local: Option<u32>,
    ) -> bool {
        match flaw {
            FlawRef::Threat(ti) => {
                let sep = plan.threat_separable(ctx, &plan.threats[ti]);
                criterion.types.iter().any(|t| match t {
                    FlawType::N => !sep,
                    FlawType::S => sep,
                    _ => false,
                })
            }
            FlawRef::Open(oi) => {
                let oc = &plan.open[oi];
                criterion.types.iter().any(|t| match t {
                    FlawType::O => true,
                    FlawType::T => {
                        ctx.lifted
                            && oc.as_literal().is_some_and(|l| {
                                l.pred != PRED_EQ && ctx.store.is_static(l.pred)
                            })
                    }
                    FlawType::L => local == Some(oc.step),
                    FlawType::U => plan.open_cond_unsafe(ctx, oc),
                    FlawType::N | FlawType::S => false,
                })
            }
        }
    }

    fn pick(
        &self,
        ctx: &PlanCtx<'_>,
        plan: &Plan,
        criterion: &Criterion,
        matching: Vec<FlawRef>,
        table: Option<&HeurTable>,
        info: &mut dyn FnMut(FlawRef) -> FlawInfo,
    ) -> FlawRef {
        let seq = |f: FlawRef| flaw_seq(plan, f);
        match criterion.order {
            FlawOrder::Lifo => matching.into_iter().max_by_key(|&f| seq(f)).unwrap(),
            FlawOrder::Fifo => matching.into_iter().min_by_key(|&f| seq(f)).unwrap(),
            FlawOrder::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ plan.id);
                matching[rng.gen_range(0..matching.len())]
            }
            FlawOrder::LeastRefined => {
                let mut best = matching[0];
                let mut best_key = (info(best).count, u64::MAX - seq(best));
                for &f in &matching[1..] {
                    let key = (info(f).count, u64::MAX - seq(f));
                    if key < best_key {
                        best = f;
                        best_key = key;
                    }
                }
                best
            }
            FlawOrder::New => {
                let fresh: Vec<FlawRef> =
                    matching.iter().copied().filter(|&f| info(f).adds_step).collect();
                let pool = if fresh.is_empty() { matching } else { fresh };
                pool.into_iter().max_by_key(|&f| seq(f)).unwrap()
            }
            FlawOrder::MostCost
            | FlawOrder::LeastCost
            | FlawOrder::MostWork
            | FlawOrder::LeastWork => {
                let table = table.expect("value-ordered strategies require a heuristic table");
                let value = |f: FlawRef| -> Xint {
                    let oc = match f {
                        FlawRef::Open(i) => &plan.open[i],
                        FlawRef::Threat(_) => unreachable!("value orders match open conditions only"),
                    };
                    let bindings = if ctx.lifted { Some(&plan.bindings) } else { None };
                    let v = table.formula_value(ctx.store, &oc.formula, bindings);
                    match criterion.order {
                        FlawOrder::MostCost | FlawOrder::LeastCost => v.cost,
                        _ => v.effort,
                    }
                };
                let descending = matches!(criterion.order, FlawOrder::MostCost | FlawOrder::MostWork);
                let mut best = matching[0];
                let mut best_val = value(best);
                for &f in &matching[1..] {
                    let v = value(f);
                    let better = if descending { v > best_val } else { v < best_val };
                    if better || (v == best_val && seq(f) > seq(best)) {
                        best = f;
                        best_val = v;
                    }
                }
                best
            }
        }
    }
}

fn flaw_seq(plan: &Plan, f: FlawRef) -> u64 {
    match f {
        FlawRef::Open(i) => plan.open[i].seq,
        FlawRef::Threat(i) => plan.threats[i].seq,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::ground_problem;
    use crate::pddl::{parse_domain, parse_problem};
    use num_rational::Rational64;
    use std::sync::Arc;

    #[test]
    fn notation_round_trips() {
        let cases = [
            "{n,s}LIFO / {o}LIFO",
            "{n}LIFO / {o}<=0LIFO / {o}<=1New / {o}LIFO / {s}LIFO",
            "{n,s,o}LR",
            "{n,s}LR / {o}MC_add",
            "{t}LIFO / {n,s}LIFO / {o}LIFO",
            "{n,s,u}LR / {l}LR",
            "{o}FIFO / {n}R / {o}LW_add / {o}LC_add / {o}MW_add",
        ];
        for c in cases {
            let s = Strategy::parse(c).expect(c);
            assert_eq!(s.to_string(), c);
            assert_eq!(Strategy::parse(&s.to_string()).unwrap(), s);
        }
    }

    #[test]
    fn presets_match_their_notation() {
        let expect = [
            ("UCPOP", "{n,s}LIFO / {o}LIFO"),
            ("DSep", "{n}LIFO / {o}LIFO / {s}LIFO"),
            ("DUnf", "{n,s}<=0LIFO / {n,s}<=1LIFO / {o}LIFO / {n,s}LIFO"),
            ("LCFR", "{n,s,o}LR"),
            ("LCFR-DSep", "{n,o}LR / {s}LR"),
            ("ZLIFO", "{n}LIFO / {o}<=0LIFO / {o}<=1New / {o}LIFO / {s}LIFO"),
            ("Static-First", "{t}LIFO / {n,s}LIFO / {o}LIFO"),
            ("LCFR-Loc", "{n,s,l}LR"),
            ("MC", "{n,s}LR / {o}MC_add"),
            ("MC-Loc", "{n,s}LR / {l}MC_add"),
            ("MW", "{n,s}LR / {o}MW_add"),
            ("MW-Loc", "{n,s}LR / {l}MW_add"),
            ("LCFR-Conf", "{n,s,u}LR / {o}LR"),
            ("LCFR-Loc-Conf", "{n,s,u}LR / {l}LR"),
            ("MW-Loc-Conf", "{n,s}LR / {u}MW_add / {l}MW_add"),
        ];
        for (name, notation) in expect {
            let s = Strategy::parse(name).expect(name);
            assert_eq!(s.to_string(), notation, "{name}");
            assert_eq!(Strategy::parse(&name.to_ascii_uppercase()).unwrap(), s);
            assert_eq!(Strategy::parse(&name.to_ascii_lowercase()).unwrap(), s);
        }
    }

    #[test]
    fn completeness_checks() {
        let ok = Strategy::parse("UCPOP").unwrap();
        ok.check_complete(false).unwrap();
        ok.check_complete(true).unwrap();

        let no_threats = Strategy::parse("{o}LIFO").unwrap();
        assert!(no_threats.check_complete(false).is_err());

        let bounded_threats = Strategy::parse("{n,s}<=1LIFO / {o}LIFO").unwrap();
        assert!(bounded_threats.check_complete(false).is_err());

        let ground_only = Strategy::parse("{n}LIFO / {o}LIFO").unwrap();
        ground_only.check_complete(false).unwrap();
        assert!(ground_only.check_complete(true).is_err());

        let local_covers = Strategy::parse("{n,s,l}LR").unwrap();
        local_covers.check_complete(true).unwrap();
    }

    #[test]
    fn value_orders_reject_threat_types() {
        assert!(Strategy::parse("{n}MC_add").is_err());
        assert!(Strategy::parse("{n,o}New").is_err());
        assert!(Strategy::parse("{u,l}MW_add").is_ok());
    }

    #[test]
    fn bad_notation_is_rejected() {
        for bad in ["", "{x}LIFO", "{n LIFO", "{n}SOON", "{n}<=LIFO", "{o}LIFO extra"] {
            assert!(Strategy::parse(bad).is_err(), "{bad}");
        }
    }

    const DOMAIN: &str = "
        (define (domain chain)
          (:requirements :strips)
          (:predicates (p0) (p1) (p2) (r))
          (:action reset :effect (p0))
          (:action s01 :precondition (p0) :effect (p1))
          (:action s12 :precondition (p1) :effect (p2))
          (:action mkr :effect (r)))";

    const PROBLEM: &str = "
        (define (problem c)
          (:domain chain)
          (:init (p0))
          (:goal (and (p2) (r))))";

    fn setup() -> (Arc<crate::ground::GroundStore>, Strategy) {
        let d = Arc::new(parse_domain(DOMAIN).unwrap());
        let p = Arc::new(parse_problem(PROBLEM, &d).unwrap());
        let store = Arc::new(ground_problem(d, p, true));
        (store, Strategy::parse("UCPOP").unwrap())
    }

    #[test]
    fn lifo_picks_most_recent_open_condition() {
        let (store, strategy) = setup();
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let plan = Plan::initial(&ctx);
        let selector = Selector::new(&strategy, 0);
        let picked = selector.select(&ctx, &plan, None).unwrap();
        match picked {
            FlawRef::Open(i) => {
                let max_seq = plan.open.iter().map(|o| o.seq).max().unwrap();
                assert_eq!(plan.open[i].seq, max_seq);
            }
            FlawRef::Threat(_) => panic!("no threats yet"),
        }
    }

    #[test]
    fn fifo_and_lifo_disagree_on_initial_goals() {
        let (store, _) = setup();
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let plan = Plan::initial(&ctx);
        let lifo = Strategy::parse("{n}LIFO / {o}LIFO").unwrap();
        let fifo = Strategy::parse("{n}LIFO / {o}FIFO").unwrap();
        let a = Selector::new(&lifo, 0).select(&ctx, &plan, None).unwrap();
        let b = Selector::new(&fifo, 0).select(&ctx, &plan, None).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn least_refined_prefers_forced_flaws() {
        let (store, _) = setup();
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let plan = Plan::initial(&ctx);
        // Support (p2) with a new s12 step, then (p1) with a new s01 step.
        // The remaining (p0) has two refinements (initial conditions or a
        // new reset step) while the older (r) has just one (a new mkr), so
        // least-refined picks (r) despite (p0) being more recent.
        let p2_flaw = plan
            .open
            .iter()
            .position(|o| o.as_literal().unwrap().pred == store.pred_named("p2"))
            .unwrap();
        let mid = plan.resolve(&ctx, crate::plan::FlawRef::Open(p2_flaw)).remove(0);
        let p1_flaw = mid
            .open
            .iter()
            .position(|o| o.as_literal().unwrap().pred == store.pred_named("p1"))
            .unwrap();
        let deep = mid.resolve(&ctx, crate::plan::FlawRef::Open(p1_flaw)).remove(0);
        let lr = Strategy::parse("{n,s,o}LR").unwrap();
        let picked = Selector::new(&lr, 0).select(&ctx, &deep, None).unwrap();
        match picked {
            FlawRef::Open(i) => {
                assert_eq!(deep.open[i].as_literal().unwrap().pred, store.pred_named("r"));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn random_order_is_deterministic_per_seed_and_plan() {
        let (store, _) = setup();
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let plan = Plan::initial(&ctx);
        let strategy = Strategy::parse("{n}LIFO / {o}R").unwrap();
        let s1 = Selector::new(&strategy, 7);
        let s2 = Selector::new(&strategy, 7);
        assert_eq!(s1.select(&ctx, &plan, None), s2.select(&ctx, &plan, None));
    }

    #[test]
    fn bounded_criterion_skips_flaws_over_the_bound() {
        let (store, _) = setup();
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let plan = Plan::initial(&ctx);
        // Both goal conditions have exactly one refinement (one new step
        // each, no init support), so a <=0 bound matches nothing and the
        // second criterion decides.
        let strategy = Strategy::parse("{n}LIFO / {o}<=0FIFO / {o}LIFO").unwrap();
        let picked = Selector::new(&strategy, 0).select(&ctx, &plan, None).unwrap();
        let max_seq = plan.open.iter().map(|o| o.seq).max().unwrap();
        match picked {
            FlawRef::Open(i) => assert_eq!(plan.open[i].seq, max_seq),
            _ => panic!(),
        }
    }

    #[test]
    fn threats_selected_before_open_conditions_under_ucpop() {
        let d = Arc::new(
            parse_domain(
                "
            (define (domain tdom)
              (:requirements :strips)
              (:predicates (p) (q) (g))
              (:action addq :effect (q))
              (:action delq :effect (and (p) (not (q))))
              (:action mkg :effect (g)))",
            )
            .unwrap(),
        );
        let p = Arc::new(
            parse_problem(
                "
            (define (problem t)
              (:domain tdom)
              (:init )
              (:goal (and (p) (q) (g))))",
                &d,
            )
            .unwrap(),
        );
        let store = ground_problem(d, p, true);
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let strategy = Strategy::parse("UCPOP").unwrap();
        let selector = Selector::new(&strategy, 0);

        let plan = Plan::initial(&ctx);
        let p_flaw = plan
            .open
            .iter()
            .position(|o| o.as_literal().unwrap().pred == store.pred_named("p"))
            .unwrap();
        let mid = plan.resolve(&ctx, FlawRef::Open(p_flaw)).remove(0);
        let q_flaw = mid
            .open
            .iter()
            .position(|o| o.as_literal().unwrap().pred == store.pred_named("q"))
            .unwrap();
        let threatened = mid.resolve(&ctx, FlawRef::Open(q_flaw)).remove(0);
        assert_eq!(threatened.threats.len(), 1);
        assert!(threatened.open.len() >= 1);
        let picked = selector.select(&ctx, &threatened, None).unwrap();
        assert!(matches!(picked, FlawRef::Threat(0)));
    }

    #[test]
    fn mw_order_prefers_high_effort_conditions() {
        let (store, _) = setup();
        let ctx = PlanCtx::new(&store, false, Rational64::new(1, 100));
        let table = HeurTable::build(&store);
        let plan = Plan::initial(&ctx);
        // Efforts: (p2) needs s12 then s01 (effort 3+... deeper), (r) needs
        // mkr over p1 (shallower); MW picks (p2), LW picks (r).
        let mw = Strategy::parse("{n,s}LR / {o}MW_add").unwrap();
        let lw = Strategy::parse("{n,s}LR / {o}LW_add").unwrap();
        let hi = Selector::new(&mw, 0).select(&ctx, &plan, Some(&table)).unwrap();
        let lo = Selector::new(&lw, 0).select(&ctx, &plan, Some(&table)).unwrap();
        let pred_of = |f: FlawRef| match f {
            FlawRef::Open(i) => plan.open[i].as_literal().unwrap().pred,
            _ => panic!(),
        };
        assert_eq!(pred_of(hi), store.pred_named("p2"));
        assert_eq!(pred_of(lo), store.pred_named("r"));
    }
}
