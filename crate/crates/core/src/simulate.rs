//! Single executions under a concrete adversary, judged as they run.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{
    trace_line, Activation, AdversaryChoice, Decider, Engine, EngineError, Event, ExecState, RobotModel, Scheduler,
};
use crate::problems::{ProblemError, ProblemSpec, Verdict};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("script step {step}: {reason}")]
    Script { step: usize, reason: String },
    #[error("no adversary move available at step {0}")]
    Stuck(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Adversary {
    /// Every live robot in every round; ASYNC: all Looks, then all Acts.
    /// Never crashes anyone; ambiguous hops take the first vertex.
    Full,
    /// Uniform over the legal choices at each step.
    Random(u64),
    /// One choice per step, in the text form of [`AdversaryChoice::describe`].
    Script(Vec<String>),
}

impl Adversary {
    /// Parses `full`, `random:<seed>` or `script:<path>`; the script file is
    /// read through `read`.
    pub fn parse(text: &str, read: impl FnOnce(&str) -> std::io::Result<String>) -> Result<Self, String> {
        match text.split_once(':') {
            None if text == "full" => Ok(Adversary::Full),
            Some(("random", seed)) => seed.parse().map(Adversary::Random).map_err(|_| format!("bad seed `{seed}`")),
            Some(("script", path)) => {
                let body = read(path).map_err(|e| format!("cannot read script `{path}`: {e}"))?;
                Ok(Adversary::Script(script_lines(&body)))
            }
            _ => Err(format!("unknown adversary `{text}` (expected full, random:<seed> or script:<path>)")),
        }
    }
}

/// Non-empty lines with `#` comments removed.
pub fn script_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone)]
pub struct Run {
    /// One line per configuration, starting with the initial one.
    pub trace: Vec<String>,
    pub verdict: Verdict,
    pub steps: usize,
}

fn full_choice(state: &ExecState, choices: &[AdversaryChoice]) -> Option<AdversaryChoice> {
    let calm = choices.iter().filter(|c| c.crash.is_none());
    let live: Vec<usize> = state.config.live().collect();
    let wanted = |c: &&AdversaryChoice| match &c.activation {
        Activation::Round(rs) => *rs == live,
        Activation::Event(Event::Look(r)) => state.pending[*r].is_none(),
        Activation::Event(_) => !live.iter().any(|&r| state.pending[r].is_none()),
    };
    calm.clone().find(wanted).or_else(|| calm.clone().next()).cloned()
}

/// Runs `algo` for at most `rounds` steps, stopping early once the verdict
/// is final: a violation, or satisfaction of a terminal task.
pub fn simulate(
    problem: &ProblemSpec,
    model: RobotModel,
    scheduler: Scheduler,
    algo: &dyn Decider,
    adversary: &Adversary,
    rounds: usize,
) -> Result<Run, SimError> {
    let engine = Engine::new(&problem.arena, model, scheduler, problem.faults);
    let g = problem.graph();
    let monitor = problem.monitor();
    let mut state = ExecState::new(problem.initial[0].clone());
    let mut mstate = monitor.init(&state.config)?;
    let mut trace = vec![trace_line(g, 0, "init", &state.config)];
    let mut rng = match adversary {
        Adversary::Random(seed) => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };
    let limit = match adversary {
        Adversary::Script(lines) => lines.len().min(rounds),
        _ => rounds,
    };
    let mut verdict = Verdict::Pending;
    let mut steps = 0;
    while steps < limit {
        if !problem.is_perpetual() && monitor.is_satisfied(&mstate, &state.config) {
            verdict = Verdict::Satisfied;
            break;
        }
        let step = steps + 1;
        let choice = match adversary {
            Adversary::Script(lines) => {
                AdversaryChoice::parse(&lines[steps], g).map_err(|reason| SimError::Script { step, reason })?
            }
            Adversary::Full => {
                full_choice(&state, &engine.enumerate_choices(&state, algo)?).ok_or(SimError::Stuck(step))?
            }
            Adversary::Random(_) => {
                let choices = engine.enumerate_choices(&state, algo)?;
                choices.choose(rng.as_mut().expect("seeded")).cloned().ok_or(SimError::Stuck(step))?
            }
        };
        let next = engine.step(&state, &choice, algo).map_err(|e| match (adversary, e) {
            (Adversary::Script(_), EngineError::RejectedChoice(reason)) => SimError::Script { step, reason },
            (_, e) => SimError::Engine(e),
        })?;
        steps = step;
        let event = choice.describe(g).replace(' ', ";");
        trace.push(trace_line(g, steps as u64, &event, &next.config));
        match monitor.advance(&mstate, &state.config, &next.config) {
            Ok(m) => mstate = m,
            Err(reason) => {
                verdict = Verdict::Violated { reason, step: steps };
                break;
            }
        }
        state = next;
    }
    if verdict == Verdict::Pending && !problem.is_perpetual() && monitor.is_satisfied(&mstate, &state.config) {
        verdict = Verdict::Satisfied;
    }
    Ok(Run { trace, verdict, steps })
}
