//! Knowledge-aware orchestration of model actions.
//!
//! A query is parsed, classified into domains, planned over merged PDDL
//! domains with best-first width search, assigned concrete models from a
//! capability graph under user constraints, and executed step by step with
//! a trace that doubles as the justification report.

pub mod bitset;
pub mod ckg;
pub mod cli;
pub mod config;
pub mod embed;
pub mod evalbench;
pub mod exec;
pub mod ingest;
pub mod nlu;
pub mod pddl;
pub mod pipeline;
pub mod planner;
pub mod selection;
