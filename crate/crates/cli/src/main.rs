//! Command-line front end: solve, validate, dump heuristic tables, or
//! benchmark a directory of problems.

use clap::Parser;
use num_rational::Rational64;
use pocl_core::flaw::Strategy;
use pocl_core::ground::{ground_problem, GroundStore};
use pocl_core::heur::{HeurMode, HeurTable};
use pocl_core::output::{render_solution, SolutionView};
use pocl_core::pddl::{parse_domain, parse_problem, rational_to_string, Domain, Problem};
use pocl_core::plan::{Plan, PlanCtx};
use pocl_core::search::{round_robin, AStar, LimitKind, Limits, SearchStatus, Searcher};
use pocl_core::validate::{parse_number, parse_plan_file, validate};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

#[derive(Parser)]
#[command(name = "pocl", version, about = "Partial-order causal-link planner")]
struct Args {
    /// Domain file.
    #[arg(long)]
    domain: PathBuf,

    /// Problem file. Not needed with --bench.
    #[arg(long)]
    problem: Option<PathBuf>,

    /// Flaw selection strategy, a preset or raw notation, with an optional
    /// node cap as "name:cap". Repeat for a schedule; the default schedule
    /// is MW-Loc, MW-Loc-Conf, LCFR-Loc, LCFR-Loc-Conf with standard caps.
    #[arg(long = "strategy", value_name = "STRATEGY[:CAP]")]
    strategies: Vec<String>,

    /// Plan ranking: add, add-r, oc, or flaws.
    #[arg(long, default_value = "add-r")]
    heuristic: String,

    /// Minimum separation between distinct time points.
    #[arg(long, default_value = "0.01")]
    epsilon: String,

    /// Seed for randomized flaw orders.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Plan with partially bound actions instead of ground instances.
    #[arg(long)]
    lifted: bool,

    /// Stop a strategy after generating this many plans.
    #[arg(long, value_name = "N")]
    limit_nodes: Option<u64>,

    /// Cap the memory held in search queues, in megabytes.
    #[arg(long, value_name = "MB")]
    limit_mem: Option<usize>,

    /// Wall-clock limit in seconds.
    #[arg(long, value_name = "S")]
    time_limit: Option<u64>,

    /// First-round node allowance of the strategy schedule.
    #[arg(long, default_value_t = 1000, value_name = "N")]
    round_base: u64,

    /// Print per-round progress and solve statistics to stderr.
    #[arg(long)]
    verbose: bool,

    /// Print the heuristic table and exit.
    #[arg(long)]
    dump_table: bool,

    /// Check a plan file against the domain and problem, then exit.
    #[arg(long, value_name = "FILE")]
    validate: Option<PathBuf>,

    /// Solve every .pddl problem in a directory, one CSV row per problem.
    #[arg(long, value_name = "DIR")]
    bench: Option<PathBuf>,
}

fn main() {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => std::process::exit(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
    }
}

struct Config {
    strategies: Vec<(String, Strategy, Option<u64>)>,
    mode: HeurMode,
    epsilon: Rational64,
    seed: u64,
    lifted: bool,
    limits: Limits,
    round_base: u64,
    verbose: bool,
}

fn run(args: &Args) -> Result<i32, String> {
    let epsilon = parse_number(&args.epsilon)
        .filter(|e| *e > Rational64::from_integer(0))
        .ok_or("epsilon must be a positive number")?;
    let mode = HeurMode::parse(&args.heuristic)
        .ok_or_else(|| format!("unknown heuristic {}", args.heuristic))?;

    let domain_text = read(&args.domain)?;
    let domain =
        Arc::new(parse_domain(&domain_text).map_err(|e| format!("{}: {e}", args.domain.display()))?);

    let strategies = build_schedule(&args.strategies, args.lifted, domain.has_durative())?;

    let mut limits = Limits::default();
    limits.max_generated = args.limit_nodes;
    limits.max_bytes = args.limit_mem.map(|mb| mb * 1024 * 1024);
    limits.deadline = args.time_limit.map(|s| Instant::now() + Duration::from_secs(s));

    let config = Config {
        strategies,
        mode,
        epsilon,
        seed: args.seed,
        lifted: args.lifted,
        limits,
        round_base: args.round_base,
        verbose: args.verbose,
    };

    if let Some(dir) = &args.bench {
        return bench(&domain, dir, &config);
    }

    let problem_path = args.problem.as_ref().ok_or("--problem is required")?;
    let problem_text = read(problem_path)?;
    let problem = Arc::new(
        parse_problem(&problem_text, &domain)
            .map_err(|e| format!("{}: {e}", problem_path.display()))?,
    );

    if let Some(plan_path) = &args.validate {
        let plan_text = read(plan_path)?;
        let steps =
            parse_plan_file(&plan_text).map_err(|e| format!("{}: {e}", plan_path.display()))?;
        return Ok(match validate(&domain, &problem, &steps, epsilon) {
            Ok(()) => {
                println!("valid plan");
                0
            }
            Err(reason) => {
                println!("invalid plan: {reason}");
                1
            }
        });
    }

    let store = ground_problem(domain, problem, !config.lifted);

    if args.dump_table {
        for line in HeurTable::build(&store).dump(&store) {
            println!("{line}");
        }
        return Ok(0);
    }

    let started = Instant::now();
    let outcome = solve(&store, &config);
    match outcome.view {
        Some(view) => {
            print!("{}", view.text());
            if config.verbose {
                eprintln!(
                    "; solved by {} in {} ms: {} steps, makespan {}, {} generated, {} explored",
                    outcome.strategy.as_deref().unwrap_or("?"),
                    started.elapsed().as_millis(),
                    view.n_steps,
                    rational_to_string(view.makespan),
                    outcome.generated,
                    outcome.explored
                );
            }
            Ok(0)
        }
        None => {
            eprintln!(
                "no plan found ({}): {} generated, {} explored",
                outcome.failure, outcome.generated, outcome.explored
            );
            Ok(1)
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Splits "name[:cap]", allowing raw strategy notation before the colon.
fn parse_strategy_arg(arg: &str) -> Result<(String, Strategy, Option<u64>), String> {
    let (name, cap) = match arg.rsplit_once(':') {
        Some((head, tail)) if tail.chars().all(|c| c.is_ascii_digit()) && !tail.is_empty() => {
            let cap: u64 = tail.parse().map_err(|_| format!("bad cap in {arg}"))?;
            (head, Some(cap))
        }
        _ => (arg, None),
    };
    if cap == Some(0) {
        return Err(format!("cap must be positive in {arg}"));
    }
    let strategy = Strategy::parse(name)?;
    Ok((name.to_string(), strategy, cap))
}

fn build_schedule(
    args: &[String],
    lifted: bool,
    durative: bool,
) -> Result<Vec<(String, Strategy, Option<u64>)>, String> {
    let mut out = Vec::new();
    if args.is_empty() {
        let caps: [Option<u64>; 4] = if durative {
            [Some(12000), Some(100000), Some(240000), None]
        } else {
            [Some(10000), Some(100000), Some(200000), None]
        };
        for (name, cap) in ["MW-Loc", "MW-Loc-Conf", "LCFR-Loc", "LCFR-Loc-Conf"].iter().zip(caps)
        {
            out.push((name.to_string(), Strategy::parse(name).unwrap(), cap));
        }
    } else {
        for arg in args {
            out.push(parse_strategy_arg(arg)?);
        }
    }
    for (name, strategy, _) in &out {
        strategy.check_complete(lifted).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(out)
}

struct Outcome {
    view: Option<SolutionView>,
    strategy: Option<String>,
    failure: &'static str,
    generated: u64,
    explored: u64,
}

fn solve(store: &GroundStore, config: &Config) -> Outcome {
    let ctx = PlanCtx::new(store, config.lifted, config.epsilon);
    let needs_table = config.mode.needs_table()
        || config.strategies.iter().any(|(_, s, _)| s.needs_table());
    let table = needs_table.then(|| HeurTable::build(store));

    let mut workers: Vec<AStar<'_>> = config
        .strategies
        .iter()
        .map(|(_, strategy, _)| {
            AStar::new(&ctx, strategy, config.mode, table.as_ref(), config.seed, config.limits)
        })
        .collect();

    let (solved, failure) = if workers.len() == 1 {
        let status = workers[0].run(cap_of(config, 0));
        match status {
            SearchStatus::Solved => (Some(0), ""),
            SearchStatus::Exhausted => (None, "search space exhausted"),
            SearchStatus::Suspended => (None, "node cap reached"),
            SearchStatus::Limit(k) => (None, limit_name(k)),
        }
    } else {
        let caps: Vec<Option<u64>> = config.strategies.iter().map(|(_, _, c)| *c).collect();
        let names: Vec<&str> = config.strategies.iter().map(|(n, _, _)| n.as_str()).collect();
        let mut progress = |round: u32, i: usize, generated: u64, explored: u64| {
            eprintln!(
                "; round {round} {}: {generated} generated, {explored} explored",
                names[i]
            );
        };
        let report = {
            let mut refs: Vec<&mut dyn Searcher> =
                workers.iter_mut().map(|w| w as &mut dyn Searcher).collect();
            round_robin(
                &mut refs,
                &caps,
                config.round_base,
                config.verbose.then_some(&mut progress as &mut dyn FnMut(u32, usize, u64, u64)),
            )
        };
        let failure = match (report.solved, report.limit) {
            (Some(_), _) => "",
            (None, Some(k)) => limit_name(k),
            (None, None) => "every strategy retired",
        };
        (report.solved, failure)
    };

    let generated = workers.iter().map(|w| w.generated).sum();
    let explored = workers.iter().map(|w| w.explored).sum();
    let (view, strategy) = match solved {
        Some(i) => {
            let plan: Plan = workers[i].take_solution().expect("solved search has a plan");
            drop(workers);
            (Some(render_solution(&ctx, &plan)), Some(config.strategies[i].0.clone()))
        }
        None => (None, None),
    };
    Outcome { view, strategy, failure, generated, explored }
}

fn cap_of(config: &Config, i: usize) -> Option<u64> {
    config.strategies[i].2
}

fn limit_name(k: LimitKind) -> &'static str {
    match k {
        LimitKind::Nodes => "node limit reached",
        LimitKind::Memory => "memory limit reached",
        LimitKind::Time => "time limit reached",
    }
}

fn bench(domain: &Arc<Domain>, dir: &Path, config: &Config) -> Result<i32, String> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pddl"))
        .collect();
    files.sort();
    println!("problem,outcome,steps,makespan,generated,explored,wall_ms");
    let mut all_solved = true;
    for file in files {
        let name = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let started = Instant::now();
        let row = match bench_one(domain, &file, config) {
            Ok(None) => continue,
            Ok(Some(outcome)) => {
                let wall = started.elapsed().as_millis();
                match outcome.view {
                    Some(view) => format!(
                        "{name},solved,{},{},{},{},{wall}",
                        view.n_steps,
                        rational_to_string(view.makespan),
                        outcome.generated,
                        outcome.explored
                    ),
                    None => {
                        all_solved = false;
                        format!(
                            "{name},failure,,,{},{},{wall}",
                            outcome.generated, outcome.explored
                        )
                    }
                }
            }
            Err(e) => {
                all_solved = false;
                eprintln!("{name}: {e}");
                format!("{name},error,,,,,{}", started.elapsed().as_millis())
            }
        };
        println!("{row}");
    }
    Ok(if all_solved { 0 } else { 1 })
}

fn bench_one(domain: &Arc<Domain>, file: &Path, config: &Config) -> Result<Option<Outcome>, String> {
    let text = read(file)?;
    let problem = match parse_problem(&text, domain) {
        Ok(p) => Arc::new(p),
        Err(e) => {
            // Skip files that parse as domains rather than problems.
            if parse_domain(&text).is_ok() {
                return Ok(None);
            }
            return Err(format!("{}: {e}", file.display()));
        }
    };
    check_problem_domain(domain, &problem)?;
    let store = ground_problem(Arc::clone(domain), problem, !config.lifted);
    Ok(Some(solve(&store, config)))
}

fn check_problem_domain(domain: &Domain, problem: &Problem) -> Result<(), String> {
    if problem.domain_name != domain.name {
        return Err(format!(
            "problem {} is for domain {}, not {}",
            problem.name, problem.domain_name, domain.name
        ));
    }
    Ok(())
}
