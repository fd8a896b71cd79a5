use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_tree, explain, resolve_preconditions, tick, Goal, Reservations, ResolveError, Status, Task};
use crate::simworld::{apply, perturb, ApplyError, PerturbationScript, Primitive, WorldState};

pub const DEFAULT_TICK_BUDGET: usize = 200;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error(transparent)]
    Infeasible(#[from] ApplyError),
    /// Actuation failed without changing the world; retrying may succeed.
    #[error("transient failure of {0}")]
    Transient(String),
}

/// Runs primitives against the world.
pub trait Executor {
    fn execute(&mut self, w: &WorldState, p: &Primitive) -> Result<WorldState, ExecError>;
}

/// Symbolic executor that fails each primitive with a fixed probability.
#[derive(Clone, Debug)]
pub struct SimExecutor {
    pub failure_probability: f64,
    rng: ChaCha8Rng,
}

impl SimExecutor {
    pub fn new(failure_probability: f64, seed: u64) -> Self {
        Self {
            failure_probability,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn reliable() -> Self {
        Self::new(0.0, 0)
    }
}

impl Executor for SimExecutor {
    fn execute(&mut self, w: &WorldState, p: &Primitive) -> Result<WorldState, ExecError> {
        if self.failure_probability > 0.0 && self.rng.random_bool(self.failure_probability.min(1.0)) {
            return Err(ExecError::Transient(p.to_string()));
        }
        Ok(apply(w, p)?)
    }
}

/// Fails the first attempt of every distinct primitive.
#[derive(Clone, Debug, Default)]
pub struct FailOnceExecutor {
    seen: BTreeSet<String>,
}

impl Executor for FailOnceExecutor {
    fn execute(&mut self, w: &WorldState, p: &Primitive) -> Result<WorldState, ExecError> {
        if self.seen.insert(p.to_string()) {
            return Err(ExecError::Transient(p.to_string()));
        }
        Ok(apply(w, p)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Succeeded,
    /// Stopped with a stated reason.
    Failed { reason: String },
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Succeeded)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Succeeded => f.write_str("succeeded"),
            Outcome::Failed { reason } => write!(f, "failed: {reason}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    /// Goal being worked on.
    pub goal: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitive: Option<String>,
    /// `ok`, `transient` or `infeasible`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub task: String,
    pub outcome: Outcome,
    pub ticks: usize,
    /// Primitives that changed the world, in order.
    pub primitives: Vec<Primitive>,
    pub transient_failures: usize,
    /// Primitives the tree chose that the world rejected.
    pub infeasible_executions: usize,
    pub invariant_violations: Vec<String>,
    pub perturbation_errors: Vec<String>,
    pub trace: Vec<TickRecord>,
    pub world: WorldState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecOptions {
    pub budget: usize,
    pub perturbations: Option<PerturbationScript>,
}

impl Default for ExecOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_TICK_BUDGET,
            perturbations: None,
        }
    }
}

/// A task being executed one tick at a time against a world owned by the
/// caller. Between ticks the world may change arbitrarily.
#[derive(Clone, Debug)]
pub struct Execution {
    pub task: Task,
    pub budget: usize,
    res: Reservations,
    report: ExecutionReport,
    finished: bool,
}

impl Execution {
    pub fn new(task: Task, world: &WorldState, budget: usize) -> Self {
        let report = ExecutionReport {
            task: task.name.clone(),
            outcome: Outcome::Failed {
                reason: format!("tick budget of {budget} exhausted"),
            },
            ticks: 0,
            primitives: Vec::new(),
            transient_failures: 0,
            infeasible_executions: 0,
            invariant_violations: Vec::new(),
            perturbation_errors: Vec::new(),
            trace: Vec::new(),
            world: world.clone(),
        };
        Self {
            task,
            budget,
            res: Reservations::default(),
            report,
            finished: budget == 0,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn ticks(&self) -> usize {
        self.report.ticks
    }

    pub fn report(&self) -> &ExecutionReport {
        &self.report
    }

    /// Goals the next tick would work on and the tree outline for them,
    /// leaving reservations untouched.
    pub fn preview(&self, w: &WorldState) -> Result<(Vec<Goal>, String), ResolveError> {
        let mut res = self.res.clone();
        let goals = resolve_preconditions(&self.task, w, &mut res)?;
        let tree = explain(&build_tree(&goals, w), w);
        Ok((goals, tree))
    }

    /// Records a perturbation applied by the caller before the next tick.
    pub fn perturbation_error(&mut self, e: String) {
        self.report.perturbation_errors.push(e);
    }

    /// One tick: validate, resolve preconditions, rebuild and tick the tree,
    /// run the chosen primitive. `None` once finished.
    pub fn step(&mut self, w: &mut WorldState, executor: &mut dyn Executor) -> Option<TickRecord> {
        if self.finished {
            return None;
        }
        let t = self.report.ticks;
        self.report.ticks += 1;
        let r = &mut self.report;
        if let Err(v) = w.validate() {
            r.invariant_violations.push(format!("tick {t}: {v}"));
        }
        let goals = match resolve_preconditions(&self.task, w, &mut self.res) {
            Ok(g) => g,
            Err(e) => {
                r.outcome = Outcome::Failed { reason: e.to_string() };
                self.finished = true;
                return None;
            }
        };
        let current = goals.iter().find(|g| !g.holds(w)).map(ToString::to_string).unwrap_or_default();
        let mut rec = TickRecord { tick: t, goal: current, primitive: None, result: None };
        match tick(&build_tree(&goals, w), w) {
            Status::Success if self.task.holds(w) => {
                r.outcome = Outcome::Succeeded;
                self.finished = true;
            }
            Status::Success => {
                // a satisfied prefix; the next tick resolves the remaining goals
            }
            Status::Failure { reason } => {
                r.outcome = Outcome::Failed { reason: reason.to_string() };
                self.finished = true;
            }
            Status::Running { primitive } => {
                rec.primitive = Some(primitive.to_string());
                match executor.execute(w, &primitive) {
                    Ok(n) => {
                        *w = n;
                        r.primitives.push(primitive);
                        rec.result = Some("ok".into());
                    }
                    Err(ExecError::Transient(_)) => {
                        r.transient_failures += 1;
                        rec.result = Some("transient".into());
                    }
                    Err(ExecError::Infeasible(_)) => {
                        r.infeasible_executions += 1;
                        rec.result = Some("infeasible".into());
                    }
                }
                if let Err(v) = w.validate() {
                    r.invariant_violations.push(format!("tick {t}: {v}"));
                }
            }
        }
        if self.report.ticks >= self.budget {
            self.finished = true;
        }
        self.report.trace.push(rec.clone());
        Some(rec)
    }

    pub fn into_report(mut self, w: &WorldState) -> ExecutionReport {
        self.report.world = w.clone();
        self.report
    }
}

/// Ticks the task's tree until it succeeds, fails with a reason or the
/// budget runs out. The tree is rebuilt from the current world every
/// tick, so external changes are picked up.
pub fn execute(task: &Task, world: &WorldState, executor: &mut dyn Executor, opts: &ExecOptions) -> ExecutionReport {
    let mut w = world.clone();
    let mut run = Execution::new(task.clone(), &w, opts.budget);
    while !run.is_finished() {
        if let Some(script) = &opts.perturbations {
            let t = run.ticks();
            for p in script.due(t) {
                match perturb(&w, p) {
                    Ok(n) => w = n,
                    Err(e) => run.perturbation_error(format!("tick {t}: {e}")),
                }
            }
        }
        run.step(&mut w, executor);
    }
    run.into_report(&w)
}
