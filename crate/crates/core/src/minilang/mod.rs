//! A small imperative subject language used to produce the raw data every
//! localization family consumes: coverage, dynamic dependences, crash
//! stacks, mutants and predicate switches.

mod ast;
mod interp;
mod mutate;
mod parser;
mod suite;

pub use ast::{
    BinOp, Expr, ExprId, ExprKind, Function, PredicateId, Program, SourceFile, Stmt, StmtKind,
    UnOp,
};
pub use interp::{
    run, run_untraced, run_untraced_with_budget, run_with_flip, run_with_flip_untraced, AssertFailure, CrashKind, Event, ExecutionTrace, FlipOutcome, Outcome,
    PredicateInstance, StackFrame, MAX_CALL_DEPTH, STEP_BUDGET,
};
pub use mutate::{gen_mutants, Mutant, MutationOperator};
pub use parser::{parse, parse_files};
pub use suite::{TestCase, TestSuite, Value};

/// Runs every test of a suite against a program.
pub fn run_suite(program: &Program, suite: &TestSuite) -> Vec<ExecutionTrace> {
    suite.tests.iter().map(|t| run(program, t)).collect()
}
