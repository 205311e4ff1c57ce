//! Planning with action programs: a small program language over domain
//! actions, its per-state semantics, and a Monte Carlo tree search that only
//! explores what a program permits.

pub mod domain;
pub mod parser;
pub mod program;
pub mod search;
pub mod semantics;
pub mod rescue;
pub mod planner;
pub mod experiment;
