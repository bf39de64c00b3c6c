//! Tracing tree-walking interpreter.
//!
//! Every statement execution becomes an [`Event`] that records the variables
//! it defines and uses, the events it data-depends on, and its dynamic control
//! parent. Conditionals additionally record a [`PredicateInstance`] so that a
//! single evaluation can later be switched with [`run_with_flip`].

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::suite::{TestCase, Value};
use crate::model::ProgramElement;

pub const STEP_BUDGET: u64 = 1_000_000;
pub const MAX_CALL_DEPTH: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrashKind {
    DivisionByZero,
    IndexOutOfBounds,
    Overflow,
    StepBudget,
    StackOverflow,
    TypeError,
    UndefinedVariable,
    UnknownFunction,
    ArityMismatch,
}

/// One active frame at the moment of a crash; depth 1 is the crash point.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StackFrame {
    pub function: String,
    pub element: ProgramElement,
    pub depth: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AssertFailure {
    /// An `assert` statement in the program evaluated to false.
    Statement(ProgramElement),
    /// The test's expected value differs from the returned one.
    ResultMismatch { expected: Value, actual: Value },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Pass,
    AssertFail(AssertFailure),
    Crash {
        kind: CrashKind,
        stack: Vec<StackFrame>,
    },
}

impl Outcome {
    pub fn is_pass(&self) -> bool {
        matches!(self, Outcome::Pass)
    }

    pub fn is_crash(&self) -> bool {
        matches!(self, Outcome::Crash { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub element: ProgramElement,
    pub defs: Vec<String>,
    pub uses: Vec<String>,
    /// Latest prior events defining what this event used.
    pub data_deps: Vec<usize>,
    pub control_parent: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateInstance {
    pub pred: PredicateId,
    /// Per-predicate evaluation counter, starting at 0.
    pub occurrence: u32,
    /// Branch actually taken (after any forced switch).
    pub branch: bool,
    pub event: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionTrace {
    pub test_id: String,
    pub outcome: Outcome,
    /// Value returned by the entry function, when it returned.
    pub result: Option<Value>,
    pub covered: BTreeSet<ProgramElement>,
    pub events: Vec<Event>,
    pub predicate_instances: Vec<PredicateInstance>,
    /// Event that raised the failure, or produced the mismatching result.
    pub failure_event: Option<usize>,
    /// Statement executions, counting the one that exhausted the budget.
    pub steps: u64,
}

impl ExecutionTrace {
    pub fn passed(&self) -> bool {
        self.outcome.is_pass()
    }

    pub fn crash_stack(&self) -> Option<&[StackFrame]> {
        match &self.outcome {
            Outcome::Crash { stack, .. } => Some(stack),
            _ => None,
        }
    }
}

/// Result of a forced single-predicate switch.
#[derive(Clone, Debug, PartialEq)]
pub enum FlipOutcome {
    Flipped(ExecutionTrace),
    /// The requested evaluation never happened; the run is unmodified.
    NotReached(ExecutionTrace),
}

pub fn run(program: &Program, test: &TestCase) -> ExecutionTrace {
    with_interp_stack(|| Interp::new(program, None, true).run(test))
}

/// Like [`run`] but records only the outcome and result: `covered`,
/// `events`, `predicate_instances` and `failure_event` stay empty. Used for
/// mutant and switched re-executions, which may run to the step budget.
pub fn run_untraced(program: &Program, test: &TestCase) -> ExecutionTrace {
    run_untraced_with_budget(program, test, STEP_BUDGET)
}

/// [`run_untraced`] with a step budget below [`STEP_BUDGET`].
pub fn run_untraced_with_budget(program: &Program, test: &TestCase, budget: u64) -> ExecutionTrace {
    with_interp_stack(|| {
        let mut interp = Interp::new(program, None, false);
        interp.budget = budget.min(STEP_BUDGET);
        interp.run(test)
    })
}

pub fn run_with_flip(
    program: &Program,
    test: &TestCase,
    pred: PredicateId,
    occurrence: u32,
) -> FlipOutcome {
    flip_run(program, test, pred, occurrence, true)
}

/// [`run_with_flip`] without dynamic trace data, as in [`run_untraced`].
pub fn run_with_flip_untraced(
    program: &Program,
    test: &TestCase,
    pred: PredicateId,
    occurrence: u32,
) -> FlipOutcome {
    flip_run(program, test, pred, occurrence, false)
}

fn flip_run(program: &Program, test: &TestCase, pred: PredicateId, occurrence: u32, record: bool) -> FlipOutcome {
    with_interp_stack(|| {
        let mut interp = Interp::new(program, Some((pred, occurrence)), record);
        let trace = interp.run(test);
        if interp.flipped {
            FlipOutcome::Flipped(trace)
        } else {
            FlipOutcome::NotReached(trace)
        }
    })
}

const INTERP_STACK_BYTES: usize = 256 << 20;

/// Runs `f` on a thread whose stack fits `MAX_CALL_DEPTH` nested calls.
fn with_interp_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(INTERP_STACK_BYTES)
            .spawn_scoped(scope, f)
            .expect("spawn interpreter thread")
            .join()
            .unwrap_or_else(|panic| std::panic::resume_unwind(panic))
    })
}

enum Flow {
    Normal,
    Return(Value, Option<usize>),
}

enum Trap {
    Crash(CrashKind, Vec<StackFrame>, usize),
    Assert(ProgramElement, usize),
}

struct FrameInfo<'p> {
    function: String,
    element: Option<&'p ProgramElement>,
    event: Option<usize>,
}

#[derive(Default)]
struct Env {
    vars: HashMap<String, (Value, Option<usize>)>,
}

struct Interp<'p> {
    program: &'p Program,
    events: Vec<Event>,
    preds: Vec<PredicateInstance>,
    occurrences: HashMap<PredicateId, u32>,
    flip: Option<(PredicateId, u32)>,
    flipped: bool,
    steps: u64,
    budget: u64,
    frames: Vec<FrameInfo<'p>>,
    record: bool,
}

type Exec<T> = std::result::Result<T, Trap>;

impl<'p> Interp<'p> {
    fn new(program: &'p Program, flip: Option<(PredicateId, u32)>, record: bool) -> Self {
        Interp {
            program,
            events: Vec::new(),
            preds: Vec::new(),
            occurrences: HashMap::new(),
            flip,
            flipped: false,
            steps: 0,
            budget: STEP_BUDGET,
            frames: Vec::new(),
            record,
        }
    }

    fn run(&mut self, test: &TestCase) -> ExecutionTrace {
        let called = self.call(&test.entry, test.args.clone(), None);
        let (outcome, result, failure_event) = match called {
            Ok((value, ret_event)) => {
                let producer = ret_event.or(self.events.len().checked_sub(1));
                match &test.expect {
                    Some(expected) if *expected != value => (
                        Outcome::AssertFail(AssertFailure::ResultMismatch {
                            expected: expected.clone(),
                            actual: value.clone(),
                        }),
                        Some(value),
                        producer,
                    ),
                    _ => (Outcome::Pass, Some(value), None),
                }
            }
            Err(Trap::Assert(element, ev)) => (
                Outcome::AssertFail(AssertFailure::Statement(element)),
                None,
                Some(ev),
            ),
            Err(Trap::Crash(kind, stack, ev)) => (
                Outcome::Crash { kind, stack },
                None,
                (ev != usize::MAX).then_some(ev),
            ),
        };
        ExecutionTrace {
            test_id: test.id.clone(),
            outcome,
            result,
            covered: self.events.iter().map(|e| e.element.clone()).collect(),
            events: std::mem::take(&mut self.events),
            predicate_instances: std::mem::take(&mut self.preds),
            failure_event: failure_event.filter(|_| self.record),
            steps: self.steps,
        }
    }

    fn crash(&self, kind: CrashKind) -> Trap {
        let stack = self
            .frames
            .iter()
            .rev()
            .filter_map(|f| f.element.map(|e| (f.function.clone(), e.clone())))
            .enumerate()
            .map(|(i, (function, element))| StackFrame {
                function,
                element,
                depth: i as u32 + 1,
            })
            .collect();
        let ev = self
            .frames
            .last()
            .and_then(|f| f.event)
            .unwrap_or(usize::MAX);
        Trap::Crash(kind, stack, ev)
    }

    fn call(
        &mut self,
        name: &str,
        args: Vec<Value>,
        call_event: Option<usize>,
    ) -> Exec<(Value, Option<usize>)> {
        let program = self.program;
        let Some(func) = program.function(name) else {
            return Err(self.crash(CrashKind::UnknownFunction));
        };
        if func.params.len() != args.len() {
            return Err(self.crash(CrashKind::ArityMismatch));
        }
        if self.frames.len() >= MAX_CALL_DEPTH {
            return Err(self.crash(CrashKind::StackOverflow));
        }
        let mut env = Env::default();
        for (p, v) in func.params.iter().zip(args) {
            env.vars.insert(p.clone(), (v, call_event));
        }
        self.frames.push(FrameInfo {
            function: func.name.clone(),
            element: None,
            event: None,
        });
        let flow = self.exec_block(&func.body, &mut env, call_event);
        self.frames.pop();
        match flow? {
            Flow::Normal => Ok((Value::Unit, None)),
            Flow::Return(v, ev) => Ok((v, ev)),
        }
    }

    fn exec_block(&mut self, stmts: &'p [Stmt], env: &mut Env, ctrl: Option<usize>) -> Exec<Flow> {
        for s in stmts {
            if let Flow::Return(v, ev) = self.exec(s, env, ctrl)? {
                return Ok(Flow::Return(v, ev));
            }
        }
        Ok(Flow::Normal)
    }

    fn new_event(&mut self, element: &'p ProgramElement, ctrl: Option<usize>) -> Exec<usize> {
        if !self.record {
            if let Some(frame) = self.frames.last_mut() {
                frame.element = Some(element);
            }
            self.steps += 1;
            if self.steps > self.budget {
                return Err(self.crash(CrashKind::StepBudget));
            }
            return Ok(0);
        }
        let idx = self.events.len();
        self.events.push(Event {
            element: element.clone(),
            defs: Vec::new(),
            uses: Vec::new(),
            data_deps: Vec::new(),
            control_parent: ctrl,
        });
        if let Some(frame) = self.frames.last_mut() {
            frame.element = Some(element);
            frame.event = Some(idx);
        }
        self.steps += 1;
        if self.steps > self.budget {
            return Err(self.crash(CrashKind::StepBudget));
        }
        Ok(idx)
    }

    fn define(&mut self, env: &mut Env, name: &str, value: Value, ev: usize) {
        if !self.record {
            env.vars.insert(name.to_string(), (value, None));
            return;
        }
        env.vars.insert(name.to_string(), (value, Some(ev)));
        let defs = &mut self.events[ev].defs;
        if !defs.iter().any(|d| d == name) {
            defs.push(name.to_string());
        }
    }

    fn depend(&mut self, ev: usize, on: Option<usize>) {
        if let Some(on) = on.filter(|_| self.record) {
            let deps = &mut self.events[ev].data_deps;
            if !deps.contains(&on) {
                deps.push(on);
            }
        }
    }

    fn lookup(&mut self, env: &Env, name: &str, ev: usize) -> Exec<Value> {
        let Some((value, def)) = env.vars.get(name) else {
            return Err(self.crash(CrashKind::UndefinedVariable));
        };
        let (value, def) = (value.clone(), *def);
        if !self.record {
            return Ok(value);
        }
        let uses = &mut self.events[ev].uses;
        if !uses.iter().any(|u| u == name) {
            uses.push(name.to_string());
        }
        self.depend(ev, def);
        Ok(value)
    }

    fn branch(&mut self, pred: PredicateId, taken: bool, ev: usize) -> bool {
        let occ = self.occurrences.entry(pred).or_insert(0);
        let occurrence = *occ;
        *occ += 1;
        let mut branch = taken;
        if self.flip == Some((pred, occurrence)) {
            branch = !branch;
            self.flipped = true;
        }
        if !self.record {
            return branch;
        }
        self.preds.push(PredicateInstance {
            pred,
            occurrence,
            branch,
            event: ev,
        });
        branch
    }

    fn exec(&mut self, stmt: &'p Stmt, env: &mut Env, ctrl: Option<usize>) -> Exec<Flow> {
        let ev = self.new_event(&stmt.element, ctrl)?;
        match &stmt.kind {
            StmtKind::Var { name, init } => {
                let v = match init {
                    Some(e) => self.eval(e, env, ev)?,
                    None => Value::Int(0),
                };
                self.define(env, name, v, ev);
            }
            StmtKind::Assign { name, value } => {
                let v = self.eval(value, env, ev)?;
                if !env.vars.contains_key(name) {
                    return Err(self.crash(CrashKind::UndefinedVariable));
                }
                self.define(env, name, v, ev);
            }
            StmtKind::IndexAssign { name, index, value } => {
                let arr = self.lookup(env, name, ev)?;
                let i = self.eval(index, env, ev)?;
                let v = self.eval(value, env, ev)?;
                let (Value::Array(mut items), Value::Int(i)) = (arr, i) else {
                    return Err(self.crash(CrashKind::TypeError));
                };
                let Some(slot) = usize::try_from(i).ok().and_then(|i| items.get_mut(i)) else {
                    return Err(self.crash(CrashKind::IndexOutOfBounds));
                };
                *slot = v;
                self.define(env, name, Value::Array(items), ev);
            }
            StmtKind::If {
                pred,
                cond,
                then_body,
                else_body,
            } => {
                let c = self.eval_bool(cond, env, ev)?;
                let body = if self.branch(*pred, c, ev) {
                    then_body
                } else {
                    else_body
                };
                return self.exec_block(body, env, Some(ev));
            }
            StmtKind::While { pred, cond, body } => {
                let mut cond_ev = ev;
                loop {
                    let c = self.eval_bool(cond, env, cond_ev)?;
                    if !self.branch(*pred, c, cond_ev) {
                        break;
                    }
                    if let Flow::Return(v, r) = self.exec_block(body, env, Some(cond_ev))? {
                        return Ok(Flow::Return(v, r));
                    }
                    // The next test of the loop condition depends on this one.
                    cond_ev = self.new_event(&stmt.element, Some(cond_ev))?;
                }
            }
            StmtKind::Return(value) => {
                let v = match value {
                    Some(e) => self.eval(e, env, ev)?,
                    None => Value::Unit,
                };
                return Ok(Flow::Return(v, Some(ev)));
            }
            StmtKind::Assert(cond) => {
                if !self.eval_bool(cond, env, ev)? {
                    return Err(Trap::Assert(stmt.element.clone(), ev));
                }
            }
            StmtKind::Expr(e) => {
                self.eval(e, env, ev)?;
            }
            StmtKind::Skip => {}
        }
        Ok(Flow::Normal)
    }

    fn eval_bool(&mut self, e: &Expr, env: &Env, ev: usize) -> Exec<bool> {
        match self.eval(e, env, ev)? {
            Value::Bool(b) => Ok(b),
            _ => Err(self.crash(CrashKind::TypeError)),
        }
    }

    fn eval_int(&mut self, e: &Expr, env: &Env, ev: usize) -> Exec<i64> {
        match self.eval(e, env, ev)? {
            Value::Int(i) => Ok(i),
            _ => Err(self.crash(CrashKind::TypeError)),
        }
    }

    fn eval(&mut self, e: &Expr, env: &Env, ev: usize) -> Exec<Value> {
        match &e.kind {
            ExprKind::Int(v) => Ok(Value::Int(*v)),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Var(name) => self.lookup(env, name, ev),
            ExprKind::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.eval(item, env, ev)?);
                }
                Ok(Value::Array(out))
            }
            ExprKind::Unary(UnOp::Neg, inner) => {
                let v = self.eval_int(inner, env, ev)?;
                v.checked_neg()
                    .map(Value::Int)
                    .ok_or_else(|| self.crash(CrashKind::Overflow))
            }
            ExprKind::Unary(UnOp::Not, inner) => Ok(Value::Bool(!self.eval_bool(inner, env, ev)?)),
            ExprKind::Binary(BinOp::And, l, r) => {
                Ok(Value::Bool(self.eval_bool(l, env, ev)? && self.eval_bool(r, env, ev)?))
            }
            ExprKind::Binary(BinOp::Or, l, r) => {
                Ok(Value::Bool(self.eval_bool(l, env, ev)? || self.eval_bool(r, env, ev)?))
            }
            ExprKind::Binary(op @ (BinOp::Eq | BinOp::Ne), l, r) => {
                let (a, b) = (self.eval(l, env, ev)?, self.eval(r, env, ev)?);
                if std::mem::discriminant(&a) != std::mem::discriminant(&b) {
                    return Err(self.crash(CrashKind::TypeError));
                }
                Ok(Value::Bool((a == b) == (*op == BinOp::Eq)))
            }
            ExprKind::Binary(op, l, r) => {
                let a = self.eval_int(l, env, ev)?;
                let b = self.eval_int(r, env, ev)?;
                self.arith(*op, a, b)
            }
            ExprKind::Index(arr, idx) => {
                let a = self.eval(arr, env, ev)?;
                let i = self.eval_int(idx, env, ev)?;
                let Value::Array(items) = a else {
                    return Err(self.crash(CrashKind::TypeError));
                };
                usize::try_from(i)
                    .ok()
                    .and_then(|i| items.get(i).cloned())
                    .ok_or_else(|| self.crash(CrashKind::IndexOutOfBounds))
            }
            ExprKind::Call(name, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, env, ev)?);
                }
                if name == "len" {
                    return match vals.as_slice() {
                        [Value::Array(items)] => Ok(Value::Int(items.len() as i64)),
                        [_] => Err(self.crash(CrashKind::TypeError)),
                        _ => Err(self.crash(CrashKind::ArityMismatch)),
                    };
                }
                let (v, ret_ev) = self.call(name, vals, Some(ev))?;
                self.depend(ev, ret_ev);
                Ok(v)
            }
        }
    }

    fn arith(&self, op: BinOp, a: i64, b: i64) -> Exec<Value> {
        let overflow = || self.crash(CrashKind::Overflow);
        let v = match op {
            BinOp::Add => Value::Int(a.checked_add(b).ok_or_else(overflow)?),
            BinOp::Sub => Value::Int(a.checked_sub(b).ok_or_else(overflow)?),
            BinOp::Mul => Value::Int(a.checked_mul(b).ok_or_else(overflow)?),
            BinOp::Div | BinOp::Mod if b == 0 => return Err(self.crash(CrashKind::DivisionByZero)),
            BinOp::Div => Value::Int(a.checked_div(b).ok_or_else(overflow)?),
            BinOp::Mod => Value::Int(a.checked_rem(b).ok_or_else(overflow)?),
            BinOp::Lt => Value::Bool(a < b),
            BinOp::Le => Value::Bool(a <= b),
            BinOp::Gt => Value::Bool(a > b),
            BinOp::Ge => Value::Bool(a >= b),
            BinOp::Eq | BinOp::Ne | BinOp::And | BinOp::Or => unreachable!("handled by eval"),
        };
        Ok(v)
    }
}
