//! Domain-independent partial-order causal-link (POCL) planner.
//!
//! The library is organized around plan-space search: a partial plan is a set
//! of actions, causal links, ordering constraints and (in lifted mode)
//! variable bindings. Search repairs flaws (open conditions and threatened
//! links) until a flawless plan falls out, guided by an additive reachability
//! heuristic and configurable flaw-selection strategies. Durative actions are
//! scheduled through a simple temporal network with exact rational arithmetic.

pub mod bindings;
pub mod flaw;
pub mod ground;
pub mod heur;
pub mod output;
pub mod pddl;
pub mod plan;
pub mod search;
pub mod stn;
pub mod validate;

pub use pddl::{parse_domain, parse_problem, Domain, Problem};
