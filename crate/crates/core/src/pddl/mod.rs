//! PDDL 2.1 frontend: lexer, recursive-descent parser, NNF normalization.
//!
//! The accepted fragment is level-3 PDDL without numeric fluents: STRIPS,
//! typing, equality, negative/disjunctive/quantified preconditions,
//! conditional effects, and durative actions with constant duration bounds.

mod ast;
mod lexer;
mod nnf;
mod parser;

pub use ast::*;
pub use nnf::{is_nnf, to_nnf};
pub use parser::{parse_domain, parse_problem, ParseError};
