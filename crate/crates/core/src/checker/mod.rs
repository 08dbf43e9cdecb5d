//! Bounded verification of algorithms against every fair adversary, and of
//! impossibility claims against every bounded-palette algorithm.
//!
//! Both directions explore the same product graph: execution states paired
//! with the problem monitor and per-robot idle counters, with robots sorted
//! into a canonical order. Because the idle counters live in the state, any
//! cycle of the graph is a window-fair infinite execution, so non-termination
//! arguments reduce to cycle detection.

mod game;
mod product;

use std::fmt;

use thiserror::Error;

use crate::algorithms::{Algorithm, AlgorithmError, Table};
use crate::engine::{AdversaryChoice, Configuration, Decider, Engine, EngineError, ExecState, RobotModel, Scheduler};
use crate::graph::EmbeddedGraph;
use crate::problems::{ProblemError, ProblemSpec, Verdict};

pub use game::{verify_impossibility, StrategyTree};
pub use product::ProductState;
use product::{explore, Exploration, Product, Transition};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("invalid bounds: {0}")]
    Bounds(String),
    #[error("replay diverged: {0}")]
    Replay(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    /// Longest execution prefix explored, in steps.
    pub max_depth: usize,
    /// Every live robot is activated at least once in any `window`
    /// consecutive rounds (ASYNC: events).
    pub window: usize,
    /// Largest palette the impossibility search quantifies over.
    pub palette: u8,
}

impl Bounds {
    pub fn new(max_depth: usize, window: usize, palette: u8) -> Self {
        Self { max_depth, window, palette }
    }

    fn validate(&self, scheduler: Scheduler, robots: usize) -> Result<(), CheckError> {
        if self.max_depth == 0 || self.window == 0 || self.palette == 0 {
            return Err(CheckError::Bounds("bounds must be positive".into()));
        }
        if self.window > self.max_depth {
            return Err(CheckError::Bounds("fairness window exceeds depth".into()));
        }
        if self.window > u8::MAX as usize {
            return Err(CheckError::Bounds("fairness window too large".into()));
        }
        if scheduler == Scheduler::Async && self.window < robots {
            return Err(CheckError::Bounds(format!(
                "an ASYNC window below the robot count ({robots}) starves someone"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "depth={} window={} palette={}", self.max_depth, self.window, self.palette)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WitnessKind {
    /// The last step violates the problem.
    Violation { reason: String },
    /// The steps from `cycle_start` on return to the state they started in,
    /// without progress and without satisfying the problem.
    Lasso { cycle_start: usize },
    /// The steps from `cycle_start` on return to the state they started in
    /// and make progress on the way: a sample of correct perpetual behavior.
    FairCycle { cycle_start: usize },
}

/// A concrete adversary schedule from an initial configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub initial: Configuration,
    pub choices: Vec<AdversaryChoice>,
    /// Configurations before and after every choice.
    pub trace: Vec<Configuration>,
    pub kind: WitnessKind,
}

impl Witness {
    /// Re-executes the witness with `algo` and confirms it ends as claimed.
    pub fn replay(
        &self,
        problem: &ProblemSpec,
        model: RobotModel,
        scheduler: Scheduler,
        window: usize,
        algo: &dyn Decider,
    ) -> Result<Verdict, CheckError> {
        let engine = Engine::new(&problem.arena, model, scheduler, problem.faults);
        let product = Product { engine, problem, window };
        let mut state = product
            .initial_states()?
            .into_iter()
            .find(|s| s.config == self.initial)
            .ok_or_else(|| CheckError::Replay("witness does not start in an initial configuration".into()))?;
        let mut cycle_entry = None;
        for (i, choice) in self.choices.iter().enumerate() {
            if let WitnessKind::Lasso { cycle_start } | WitnessKind::FairCycle { cycle_start } = self.kind {
                if i == cycle_start {
                    cycle_entry = Some(state.canonical().0);
                }
            }
            if let WitnessKind::Lasso { cycle_start } = self.kind {
                if i >= cycle_start && product.satisfied(&state) {
                    return Err(CheckError::Replay(format!("step {i} of the cycle satisfies the problem")));
                }
            }
            match product.apply(&state, choice, algo)? {
                Transition::Violation(reason) => {
                    return if i + 1 == self.choices.len() && matches!(self.kind, WitnessKind::Violation { .. }) {
                        Ok(Verdict::Violated { reason, step: i + 1 })
                    } else {
                        Err(CheckError::Replay(format!("unexpected violation at step {}: {reason}", i + 1)))
                    };
                }
                Transition::Next { state: next, progress } => {
                    if progress && cycle_entry.is_some() && matches!(self.kind, WitnessKind::Lasso { .. }) {
                        return Err(CheckError::Replay(format!("step {} of the cycle makes progress", i + 1)));
                    }
                    state = next;
                }
            }
        }
        match (&self.kind, cycle_entry) {
            (WitnessKind::Lasso { .. }, Some(entry)) if entry == state.canonical().0 => {
                Ok(Verdict::Violated { reason: "fair cycle without progress".into(), step: self.choices.len() })
            }
            (WitnessKind::FairCycle { .. }, Some(entry)) if entry == state.canonical().0 => Ok(Verdict::Pending),
            _ => Err(CheckError::Replay("witness does not end as claimed".into())),
        }
    }

    /// The witness in the engine's trace format, one line per step.
    pub fn to_text(&self, g: &EmbeddedGraph) -> String {
        let mut out = String::new();
        match &self.kind {
            WitnessKind::Violation { reason } => out.push_str(&format!("violation: {reason}\n")),
            WitnessKind::Lasso { cycle_start } => {
                out.push_str(&format!("lasso: cycle without progress starts after step {cycle_start}\n"))
            }
            WitnessKind::FairCycle { cycle_start } => {
                out.push_str(&format!("lasso: progressing cycle starts after step {cycle_start}\n"))
            }
        }
        out.push_str(&crate::engine::trace_line(g, 0, "init", &self.trace[0]));
        out.push('\n');
        for (i, choice) in self.choices.iter().enumerate() {
            let desc = choice.describe(g).replace(' ', ";");
            out.push_str(&crate::engine::trace_line(g, i as u64 + 1, &desc, &self.trace[i + 1]));
            out.push('\n');
        }
        out
    }
}

/// Evidence for a perpetual task: the fair cycles all make progress.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LassoSummary {
    /// Nontrivial strongly connected components of the reachable graph.
    pub cyclic_components: usize,
    /// One reachable fair cycle that makes progress.
    pub sample: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Solved {
        lassos: Option<LassoSummary>,
    },
    Violated(Witness),
    Impossible(StrategyTree),
    /// The bound was hit, or (impossibility mode) an algorithm survived.
    Inconclusive {
        reason: String,
        candidate: Option<Table>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub outcome: Outcome,
    /// Product states visited (summed over all searches for impossibility).
    pub explored: usize,
    pub bounds: Bounds,
    pub problem: String,
    pub model: RobotModel,
    pub scheduler: Scheduler,
    pub algorithm: Option<String>,
}

impl Certificate {
    pub fn tag(&self) -> &'static str {
        match self.outcome {
            Outcome::Solved { .. } => "Solved",
            Outcome::Violated(_) => "Violated",
            Outcome::Impossible(_) => "Impossible",
            Outcome::Inconclusive { .. } => "Inconclusive",
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self.outcome, Outcome::Solved { .. })
    }

    pub fn is_impossible(&self) -> bool {
        matches!(self.outcome, Outcome::Impossible(_))
    }

    pub fn to_text(&self, g: &EmbeddedGraph) -> String {
        let mut out = format!(
            "certificate {}\nproblem {}\nmodel {}\nscheduler {}\n",
            self.tag(),
            self.problem,
            self.model,
            self.scheduler
        );
        if let Some(a) = &self.algorithm {
            out.push_str(&format!("algorithm {a}\n"));
        }
        out.push_str(&format!("bounds {}\nexplored {}\n", self.bounds, self.explored));
        match &self.outcome {
            Outcome::Solved { lassos: Some(l) } => {
                out.push_str(&format!("cyclic-components {}\n", l.cyclic_components));
                if let Some(w) = &l.sample {
                    out.push_str("sample-lasso\n");
                    out.push_str(&indent(&w.to_text(g), 2));
                }
            }
            Outcome::Solved { lassos: None } => {}
            Outcome::Violated(w) => out.push_str(&w.to_text(g)),
            Outcome::Impossible(tree) => {
                out.push_str(&format!(
                    "claim no algorithm with at most {} colors solves {} within {} steps\n",
                    self.bounds.palette, self.problem, self.bounds.max_depth
                ));
                out.push_str(&tree.to_text(g));
            }
            Outcome::Inconclusive { reason, candidate } => {
                out.push_str(&format!("reason {reason}\n"));
                if let Some(t) = candidate {
                    out.push_str("candidate\n");
                    out.push_str(&indent(&t.to_text(), 2));
                }
            }
        }
        out
    }
}

pub(crate) fn indent(text: &str, by: usize) -> String {
    let pad = " ".repeat(by);
    text.lines().map(|l| format!("{pad}{l}\n")).collect()
}

/// Turns a path of canonical choices into a concrete witness.
fn concretize(
    product: &Product<'_>,
    ex: &Exploration,
    root: usize,
    canonical: &[AdversaryChoice],
    algo: &dyn Decider,
    mut kind: WitnessKind,
) -> Result<Witness, CheckError> {
    let (_, start) = ex
        .roots
        .iter()
        .find(|(r, _)| *r == root)
        .ok_or_else(|| CheckError::Replay("path does not start at a root".into()))?;
    let mut state = start.clone();
    let mut order = state.canonical().1;
    let mut choices = Vec::new();
    let mut trace = vec![state.config.clone()];
    for choice in canonical {
        let concrete = product::relabel(choice, &order);
        match product.apply(&state, &concrete, algo)? {
            Transition::Next { state: next, .. } => {
                order = next.canonical().1;
                state = next;
                trace.push(state.config.clone());
            }
            Transition::Violation(reason) => {
                // reasons name robots; report them with concrete ids
                kind = WitnessKind::Violation { reason };
                // no successor state; still show where the robots went
                let after = product.engine.step(&state.exec(), &concrete, algo)?;
                trace.push(after.config);
            }
        }
        choices.push(concrete);
    }
    Ok(Witness { initial: start.config.clone(), choices, trace, kind })
}

/// A witness for the first problem found in `ex`: a violation or a fair cycle
/// without progress that never satisfies the problem.
fn find_witness(product: &Product<'_>, ex: &Exploration, algo: &dyn Decider) -> Result<Option<Witness>, CheckError> {
    if let Some((node, choice, reason)) = &ex.violation {
        let (root, mut path) = ex.path_to(*node);
        path.push(choice.clone());
        return concretize(product, ex, root, &path, algo, WitnessKind::Violation { reason: reason.clone() }).map(Some);
    }
    let stuck = |e: &product::Edge| !e.progress;
    let comps = ex.cyclic_components(|v| !ex.satisfied[v], stuck);
    let entry = comps.iter().flat_map(|c| c.iter().map(move |&v| (ex.depth[v], v, c))).min_by_key(|&(d, v, _)| (d, v));
    let Some((_, entry, comp)) = entry else {
        return Ok(None);
    };
    let (root, mut path) = ex.path_to(entry);
    let cycle_start = path.len();
    let cycle =
        ex.cycle_from(entry, comp, stuck, None).ok_or_else(|| CheckError::Replay("component without cycle".into()))?;
    path.extend(cycle);
    concretize(product, ex, root, &path, algo, WitnessKind::Lasso { cycle_start }).map(Some)
}

fn lasso_summary(product: &Product<'_>, ex: &Exploration, algo: &dyn Decider) -> Result<LassoSummary, CheckError> {
    let comps = ex.cyclic_components(|_| true, |_| true);
    let mut sample = None;
    'outer: for comp in &comps {
        for &v in comp {
            for (k, e) in ex.edges[v].iter().enumerate() {
                if e.progress && comp.binary_search(&e.to).is_ok() {
                    let entry = *comp.iter().min_by_key(|&&u| (ex.depth[u], u)).unwrap();
                    let (root, mut path) = ex.path_to(entry);
                    let cycle_start = path.len();
                    if let Some(cycle) = ex.cycle_from(entry, comp, |_| true, Some((v, k))) {
                        path.extend(cycle);
                        sample =
                            Some(concretize(product, ex, root, &path, algo, WitnessKind::FairCycle { cycle_start })?);
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(LassoSummary { cyclic_components: comps.len(), sample })
}

/// Checks `algo` against every window-fair adversary up to `bounds.max_depth`.
pub fn verify_solution(
    algo: &Algorithm,
    problem: &ProblemSpec,
    model: RobotModel,
    scheduler: Scheduler,
    bounds: Bounds,
) -> Result<Certificate, CheckError> {
    algo.check_model(model)?;
    bounds.validate(scheduler, problem.robots())?;
    let engine = Engine::new(&problem.arena, model, scheduler, problem.faults);
    let product = Product { engine, problem, window: bounds.window };
    let ex = explore(&product, algo, bounds.max_depth)?;
    let outcome = match find_witness(&product, &ex, algo)? {
        Some(w) => Outcome::Violated(w),
        None if ex.frontier_open => Outcome::Inconclusive {
            reason: format!("executions continue past {} steps", bounds.max_depth),
            candidate: None,
        },
        None if problem.is_perpetual() => Outcome::Solved { lassos: Some(lasso_summary(&product, &ex, algo)?) },
        None => Outcome::Solved { lassos: None },
    };
    Ok(Certificate {
        outcome,
        explored: ex.nodes.len(),
        bounds,
        problem: problem.name.to_string(),
        model,
        scheduler,
        algorithm: Some(algo.name()),
    })
}

/// Execution states reachable under window-fair adversaries, with robot ids
/// quotiented away.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateGraph {
    pub states: Vec<ExecState>,
    pub transitions: Vec<(usize, AdversaryChoice, usize)>,
    /// Some execution continues past the depth bound.
    pub truncated: bool,
}

impl StateGraph {
    /// Distinct successor states of `state`.
    pub fn successors(&self, state: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.transitions.iter().filter(|t| t.0 == state).map(|t| t.2).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

pub fn reachable_states(
    algo: &Algorithm,
    problem: &ProblemSpec,
    model: RobotModel,
    scheduler: Scheduler,
    bounds: Bounds,
) -> Result<StateGraph, CheckError> {
    algo.check_model(model)?;
    bounds.validate(scheduler, problem.robots())?;
    let engine = Engine::new(&problem.arena, model, scheduler, problem.faults);
    let product = Product { engine, problem, window: bounds.window };
    let ex = explore(&product, algo, bounds.max_depth)?;
    let project = |s: &ProductState| {
        let bare = ProductState {
            idle: vec![0; s.idle.len()],
            monitor: crate::problems::MonitorState {
                stage: 0,
                crash_before_meeting: false,
                robots: vec![0; s.idle.len()],
            },
            ..s.clone()
        };
        bare.canonical().0.exec()
    };
    let mut states: Vec<ExecState> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut id_of = |s: ExecState, states: &mut Vec<ExecState>| {
        *index.entry(s.clone()).or_insert_with(|| {
            states.push(s);
            states.len() - 1
        })
    };
    let ids: Vec<usize> = ex.nodes.iter().map(|n| id_of(project(n), &mut states)).collect();
    let mut transitions = Vec::new();
    for (from, edges) in ex.edges.iter().enumerate() {
        for e in edges {
            transitions.push((ids[from], e.choice.clone(), ids[e.to]));
        }
    }
    transitions.sort();
    transitions.dedup();
    Ok(StateGraph { states, transitions, truncated: ex.frontier_open || ex.violation.is_some() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::builtin_for;
    use crate::engine::ModelTag;
    use crate::problems::{bundled_problem, ProblemName};

    #[test]
    fn bounds_are_validated() {
        let check = |b: Bounds, s| b.validate(s, 2).is_ok();
        assert!(check(Bounds::new(10, 3, 2), Scheduler::Ssync));
        assert!(!check(Bounds::new(0, 1, 1), Scheduler::Fsync));
        assert!(!check(Bounds::new(2, 3, 1), Scheduler::Ssync));
        assert!(!check(Bounds::new(300, 256, 1), Scheduler::Ssync));
        assert!(!check(Bounds::new(10, 1, 1), Scheduler::Async));
        assert!(check(Bounds::new(10, 2, 1), Scheduler::Async));
    }

    #[test]
    fn violations_come_with_a_replayable_witness() {
        let p = bundled_problem(ProblemName::Suir);
        let algo = builtin_for("suir-oblot", &p).unwrap();
        let c = verify_solution(&algo, &p, RobotModel::oblot(), Scheduler::Ssync, Bounds::new(10, 2, 1)).unwrap();
        let Outcome::Violated(w) = &c.outcome else { panic!("{}", c.tag()) };
        assert_eq!(w.trace.len(), w.choices.len() + 1);
        let v = w.replay(&p, RobotModel::oblot(), Scheduler::Ssync, 2, &algo).unwrap();
        assert!(matches!(v, Verdict::Violated { .. }), "{v:?}");
        let text = c.to_text(p.graph());
        assert!(text.starts_with("certificate Violated\nproblem SUIR\n"), "{text}");
    }

    #[test]
    fn depth_bound_makes_a_run_inconclusive() {
        let p = bundled_problem(ProblemName::MoveOnce);
        let algo = builtin_for("move-once-fsta", &p).unwrap();
        let model = RobotModel::new(ModelTag::Fsta, 2).unwrap();
        let c = verify_solution(&algo, &p, model, Scheduler::Async, Bounds::new(3, 3, 2)).unwrap();
        assert_eq!(c.tag(), "Inconclusive");
        let c = verify_solution(&algo, &p, model, Scheduler::Async, Bounds::new(12, 3, 2)).unwrap();
        assert!(c.is_solved());
    }

    #[test]
    fn algorithms_must_fit_the_model() {
        let p = bundled_problem(ProblemName::MoveOnce);
        let algo = builtin_for("move-once-fsta", &p).unwrap();
        let err = verify_solution(&algo, &p, RobotModel::oblot(), Scheduler::Fsync, Bounds::new(5, 1, 1));
        assert!(matches!(err, Err(CheckError::Algorithm(_))));
    }

    #[test]
    fn fsync_state_graph_is_a_path() {
        let p = bundled_problem(ProblemName::Suir);
        let algo = builtin_for("suir-oblot", &p).unwrap();
        let g = reachable_states(&algo, &p, RobotModel::oblot(), Scheduler::Fsync, Bounds::new(8, 1, 1)).unwrap();
        assert!(!g.truncated);
        assert!(g.states.len() >= 2);
        let gathered = g.successors(0);
        assert!(!gathered.is_empty());
    }
}
