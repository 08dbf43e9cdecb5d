//! The four separation problems as scenario data plus trace verdicts.
//!
//! A problem is judged by a [`Monitor`]: a small deterministic automaton fed one
//! configuration change at a time. The same monitor drives offline trace
//! judging and the checker's product exploration.

use std::fmt;

use thiserror::Error;

use crate::engine::{Configuration, RobotId};
use crate::graph::{Arena, EmbeddedGraph, GraphBuilder, GraphError, SymmetryMode, VertexId};
use crate::text::{records, ParseError, Record};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("invalid problem data: {0}")]
    Invalid(String),
    #[error("trace does not start in an initial configuration")]
    NotInitial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemName {
    MoveOnce,
    NegIl,
    Osp,
    Suir,
}

impl ProblemName {
    pub const ALL: [ProblemName; 4] = [ProblemName::MoveOnce, ProblemName::NegIl, ProblemName::Osp, ProblemName::Suir];

    pub fn parse(name: &str) -> Result<Self, ProblemError> {
        match name {
            "moveOnce" | "move-once" => Ok(ProblemName::MoveOnce),
            "negIL" | "neg-il" | "¬IL" => Ok(ProblemName::NegIl),
            "OSP" | "osp" => Ok(ProblemName::Osp),
            "SUIR" | "suir" => Ok(ProblemName::Suir),
            other => Err(ProblemError::UnknownProblem(other.to_string())),
        }
    }

    pub fn bundled(self) -> &'static str {
        match self {
            ProblemName::MoveOnce => include_str!("../scenarios/move_once.scn"),
            ProblemName::NegIl => include_str!("../scenarios/neg_il.scn"),
            ProblemName::Osp => include_str!("../scenarios/osp.scn"),
            ProblemName::Suir => include_str!("../scenarios/suir.scn"),
        }
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemName::MoveOnce => "moveOnce",
            ProblemName::NegIl => "negIL",
            ProblemName::Osp => "OSP",
            ProblemName::Suir => "SUIR",
        })
    }
}

/// A required sequence of placements; the last `period` stages repeat forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSequence {
    pub stages: Vec<Vec<VertexId>>,
    pub period: Option<usize>,
}

impl StageSequence {
    fn successor(&self, stage: usize) -> Option<usize> {
        if stage + 1 < self.stages.len() {
            Some(stage + 1)
        } else {
            self.period.map(|p| self.stages.len() - p)
        }
    }

    /// Unrolls the required sequence to `len` placements.
    pub fn unroll(&self, len: usize) -> Vec<Vec<VertexId>> {
        let mut out = Vec::new();
        let mut stage = Some(0);
        while let Some(s) = stage {
            if out.len() == len {
                break;
            }
            out.push(self.stages[s].clone());
            stage = self.successor(s);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProblemKind {
    /// Stutter-free placements must follow a fixed (possibly periodic) sequence.
    Sequence(StageSequence),
    /// One designated robot hops once onto `target`; nobody else ever moves.
    MoveOnce { designated: VertexId, target: VertexId },
    /// Gather at `middle`, or at the crashed robot's vertex if a crash
    /// happened before the robots met.
    Rendezvous { middle: VertexId },
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: ProblemName,
    pub arena: Arena,
    pub initial: Vec<Configuration>,
    pub kind: ProblemKind,
    pub faults: usize,
}

impl ProblemSpec {
    pub fn graph(&self) -> &EmbeddedGraph {
        self.arena.graph()
    }

    pub fn robots(&self) -> usize {
        self.initial[0].robots()
    }

    pub fn with_symmetry(mut self, mode: SymmetryMode) -> Self {
        self.arena = Arena::new(self.arena.graph().clone(), mode);
        self
    }

    pub fn with_faults(mut self, faults: usize) -> Self {
        self.faults = faults;
        self
    }

    /// Perpetual tasks are never satisfied; they must keep making progress.
    pub fn is_perpetual(&self) -> bool {
        matches!(&self.kind, ProblemKind::Sequence(s) if s.period.is_some())
    }

    pub fn monitor(&self) -> Monitor<'_> {
        Monitor { problem: self }
    }

    /// Problem section of a scenario file.
    pub fn to_records(&self) -> String {
        let g = self.graph();
        let mut out = format!("problem {}\n", self.name);
        for cfg in &self.initial {
            let assigns: Vec<String> =
                cfg.placement.iter().enumerate().map(|(r, &v)| format!("{r}={}", g.name(v))).collect();
            out.push_str(&format!("initial {}\n", assigns.join(" ")));
        }
        if let ProblemKind::Sequence(seq) = &self.kind {
            let stages: Vec<String> = seq.stages.iter().map(|s| placement_text(g, s)).collect();
            out.push_str(&format!("sequence {}", stages.join(" -> ")));
            if let Some(p) = seq.period {
                out.push_str(&format!(" period {p}"));
            }
            out.push('\n');
        }
        out.push_str(&format!("faults {}\n", self.faults));
        out
    }
}

/// `[v,w,...]` with vertex names.
pub fn placement_text(g: &EmbeddedGraph, placement: &[VertexId]) -> String {
    let names: Vec<&str> = placement.iter().map(|&v| g.name(v)).collect();
    format!("[{}]", names.join(","))
}

/// Accumulates the problem section of a scenario file.
#[derive(Debug, Default, Clone)]
pub struct ProblemBuilder {
    name: Option<(ProblemName, usize)>,
    initial: Vec<(Vec<(RobotId, String)>, usize)>,
    sequence: Option<(Vec<Vec<String>>, Option<usize>, usize)>,
    faults: Option<usize>,
}

fn parse_placement(text: &str, rec: &Record<'_>) -> Result<Vec<String>, ParseError> {
    let inner = text
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| rec.error(format!("expected [v,...], found `{text}`")))?;
    Ok(inner.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect())
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn has_problem(&self) -> bool {
        self.name.is_some()
    }

    pub fn problem_name(&self) -> Option<ProblemName> {
        self.name.map(|(n, _)| n)
    }

    /// Consumes `problem`, `initial`, `sequence` and `faults` records.
    pub fn accept(&mut self, rec: &Record<'_>) -> Result<bool, ParseError> {
        match rec.keyword() {
            "problem" => {
                let args = rec.expect_args(1)?;
                let name = ProblemName::parse(args[0].text).map_err(|e| args[0].error(e.to_string()))?;
                self.name = Some((name, rec.line));
            }
            "initial" => {
                let mut assigns = Vec::new();
                for tok in rec.args() {
                    let (r, v) = tok.text.split_once('=').ok_or_else(|| tok.error("expected <robot>=<vertex>"))?;
                    let r = r.parse().map_err(|_| tok.error(format!("bad robot id `{r}`")))?;
                    assigns.push((r, v.to_string()));
                }
                if assigns.is_empty() {
                    return Err(rec.error("`initial` needs at least one robot"));
                }
                self.initial.push((assigns, rec.line));
            }
            "sequence" => {
                let args = rec.args();
                let mut stages = Vec::new();
                let mut period = None;
                let mut i = 0;
                while i < args.len() {
                    match args[i].text {
                        "->" => {}
                        "period" => {
                            let p = args
                                .get(i + 1)
                                .ok_or_else(|| args[i].error("`period` needs a length"))?
                                .parse::<usize>("period length")?;
                            period = Some(p);
                            i += 1;
                        }
                        text => stages.push(parse_placement(text, rec)?),
                    }
                    i += 1;
                }
                self.sequence = Some((stages, period, rec.line));
            }
            "faults" => {
                let args = rec.expect_args(1)?;
                self.faults = Some(args[0].parse("fault budget")?);
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn build(&self, arena: Arena) -> Result<ProblemSpec, ProblemError> {
        let g = arena.graph();
        let (name, _) = self.name.ok_or_else(|| ProblemError::Invalid("missing `problem` record".into()))?;
        let vertex = |n: &str, line: usize| {
            g.vertex(n).ok_or_else(|| ProblemError::Parse(ParseError::new(line, 1, format!("unknown vertex `{n}`"))))
        };
        let mut initial = Vec::new();
        for (assigns, line) in &self.initial {
            let n = assigns.len();
            let mut placement = vec![usize::MAX; n];
            for (r, v) in assigns {
                if *r >= n || placement[*r] != usize::MAX {
                    return Err(ParseError::new(*line, 1, "robot ids must be 0..n-1, each once").into());
                }
                placement[*r] = vertex(v, *line)?;
            }
            initial.push(Configuration::new(placement));
        }
        if initial.is_empty() {
            return Err(ProblemError::Invalid("no initial configuration".into()));
        }
        let robots = initial[0].robots();
        if initial.iter().any(|c| c.robots() != robots) {
            return Err(ProblemError::Invalid("initial configurations differ in robot count".into()));
        }
        let faults = self.faults.unwrap_or(0);

        let kind = match name {
            ProblemName::NegIl | ProblemName::Osp => {
                let (stages, period, line) = self
                    .sequence
                    .as_ref()
                    .ok_or_else(|| ProblemError::Invalid(format!("{name} needs a `sequence` record")))?;
                let stages = stages
                    .iter()
                    .map(|s| {
                        let mut vs = s.iter().map(|v| vertex(v, *line)).collect::<Result<Vec<_>, _>>()?;
                        vs.sort_unstable();
                        Ok(vs)
                    })
                    .collect::<Result<Vec<_>, ProblemError>>()?;
                if stages.len() < 2 || stages.iter().any(|s| s.len() != robots) {
                    return Err(ProblemError::Invalid("sequence stages must place every robot".into()));
                }
                match (name, period) {
                    (ProblemName::Osp, None) => {
                        return Err(ProblemError::Invalid("OSP is perpetual and needs a period".into()))
                    }
                    (ProblemName::NegIl, Some(_)) => {
                        return Err(ProblemError::Invalid("negIL is a terminal task without period".into()))
                    }
                    (_, Some(p)) if *p == 0 || *p >= stages.len() => {
                        return Err(ProblemError::Invalid("period must be in 1..len".into()))
                    }
                    _ => {}
                }
                if initial.iter().any(|c| c.positions() != stages[0]) {
                    return Err(ProblemError::Invalid("initial configuration differs from the first stage".into()));
                }
                ProblemKind::Sequence(StageSequence { stages, period: *period })
            }
            ProblemName::MoveOnce => move_once_roles(g, &initial)?,
            ProblemName::Suir => {
                let middles: Vec<VertexId> = g.vertices().filter(|&v| g.degree(v) == 2).collect();
                if middles.len() != 1 || robots != 2 {
                    return Err(ProblemError::Invalid("SUIR needs two robots and exactly one degree-2 node".into()));
                }
                ProblemKind::Rendezvous { middle: middles[0] }
            }
        };
        Ok(ProblemSpec { name, arena, initial, kind, faults })
    }
}

/// Derives the mover from the arena: of two non-adjacent degree-2 vertices,
/// exactly one must have a degree-2 neighbor.
fn move_once_roles(g: &EmbeddedGraph, initial: &[Configuration]) -> Result<ProblemKind, ProblemError> {
    let mut roles = None;
    for cfg in initial {
        let [x, y] = cfg.placement[..] else {
            return Err(ProblemError::Invalid("moveOnce places exactly two robots".into()));
        };
        if g.adjacent(x, y) || x == y || g.degree(x) != 2 || g.degree(y) != 2 {
            return Err(ProblemError::Invalid(
                "moveOnce robots sit on distinct, non-adjacent degree-2 vertices".into(),
            ));
        }
        let deg2 =
            |v: VertexId| -> Vec<VertexId> { g.neighbors(v).iter().copied().filter(|&w| g.degree(w) == 2).collect() };
        let found = match (deg2(x).as_slice(), deg2(y).as_slice()) {
            ([t], []) => (x, *t),
            ([], [t]) => (y, *t),
            _ => return Err(ProblemError::Invalid("exactly one robot must have a single degree-2 neighbor".into())),
        };
        if roles.is_some_and(|r| r != found) {
            return Err(ProblemError::Invalid("initial configurations disagree on the mover".into()));
        }
        roles = Some(found);
    }
    let (designated, target) = roles.expect("initial is nonempty");
    Ok(ProblemKind::MoveOnce { designated, target })
}

/// Parses a scenario text that carries a graph section and a problem section.
/// Other records are ignored.
pub fn parse_problem(text: &str, mode: SymmetryMode) -> Result<ProblemSpec, ProblemError> {
    let mut graph = GraphBuilder::new();
    let mut problem = ProblemBuilder::new();
    for rec in records(text) {
        if !graph.accept(&rec)? {
            problem.accept(&rec)?;
        }
    }
    problem.build(Arena::new(graph.build()?, mode))
}

/// One of the four bundled problems.
pub fn builtin_problem(name: &str) -> Result<ProblemSpec, ProblemError> {
    let name = ProblemName::parse(name)?;
    parse_problem(name.bundled(), SymmetryMode::Automorphic)
}

pub fn bundled_problem(name: ProblemName) -> ProblemSpec {
    parse_problem(name.bundled(), SymmetryMode::Automorphic).expect("bundled scenario data is valid")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Violated { reason: String, step: usize },
    Pending,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Satisfied => f.write_str("Satisfied"),
            Verdict::Violated { reason, step } => write!(f, "Violated at step {step}: {reason}"),
            Verdict::Pending => f.write_str("Pending"),
        }
    }
}

/// Monitor memory. `robots` is per-robot data and is permuted together with
/// robots when states are compared up to anonymity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MonitorState {
    pub stage: u16,
    pub crash_before_meeting: bool,
    pub robots: Vec<u8>,
}

const DESIGNATED: u8 = 1;
const MOVED: u8 = 2;

/// Incremental judge for one problem.
#[derive(Debug, Clone, Copy)]
pub struct Monitor<'a> {
    problem: &'a ProblemSpec,
}

impl<'a> Monitor<'a> {
    pub fn init(&self, config: &Configuration) -> Result<MonitorState, ProblemError> {
        if !self.problem.initial.iter().any(|c| c.positions() == config.positions()) {
            return Err(ProblemError::NotInitial);
        }
        let mut robots = vec![0; config.robots()];
        if let ProblemKind::MoveOnce { designated, .. } = self.problem.kind {
            for (r, &v) in config.placement.iter().enumerate() {
                if v == designated {
                    robots[r] = DESIGNATED;
                }
            }
        }
        let mut state = MonitorState { stage: 0, crash_before_meeting: false, robots };
        if matches!(self.problem.kind, ProblemKind::Rendezvous { .. }) && config.crash_count() > 0 && !gathered(config)
        {
            state.crash_before_meeting = true;
        }
        Ok(state)
    }

    /// Feeds one transition. `Err` carries the violation reason.
    pub fn advance(
        &self,
        state: &MonitorState,
        prev: &Configuration,
        next: &Configuration,
    ) -> Result<MonitorState, String> {
        let g = self.problem.graph();
        if self.is_satisfied(state, prev) && prev.positions() != next.positions() {
            return Err("robots left the goal configuration".into());
        }
        let mut out = state.clone();
        match &self.problem.kind {
            ProblemKind::Sequence(seq) => {
                let before = prev.positions();
                let after = next.positions();
                if before == after {
                    return Ok(out);
                }
                let stage = state.stage as usize;
                match seq.successor(stage) {
                    Some(s) if seq.stages[s] == after => out.stage = s as u16,
                    Some(s) => {
                        return Err(format!(
                            "formed {} where {} was required",
                            placement_text(g, &after),
                            placement_text(g, &seq.stages[s])
                        ))
                    }
                    None => return Err(format!("left the final configuration for {}", placement_text(g, &after))),
                }
            }
            ProblemKind::MoveOnce { target, .. } => {
                for r in 0..next.robots() {
                    if prev.placement[r] == next.placement[r] {
                        continue;
                    }
                    let flags = state.robots[r];
                    if flags & DESIGNATED == 0 {
                        return Err(format!("robot {r} was not supposed to move"));
                    }
                    if flags & MOVED != 0 {
                        return Err(format!("robot {r} moved a second time"));
                    }
                    if next.placement[r] != *target {
                        return Err(format!(
                            "robot {r} moved to {} instead of {}",
                            g.name(next.placement[r]),
                            g.name(*target)
                        ));
                    }
                    out.robots[r] |= MOVED;
                }
            }
            ProblemKind::Rendezvous { .. } => {
                let was_gathered = gathered(prev);
                if was_gathered && !gathered(next) {
                    return Err("robots separated after gathering".into());
                }
                if !was_gathered && next.crash_count() > prev.crash_count() {
                    out.crash_before_meeting = true;
                }
            }
        }
        Ok(out)
    }

    pub fn is_satisfied(&self, state: &MonitorState, config: &Configuration) -> bool {
        match &self.problem.kind {
            ProblemKind::Sequence(seq) => seq.period.is_none() && state.stage as usize == seq.stages.len() - 1,
            ProblemKind::MoveOnce { .. } => state.robots.iter().any(|&f| f & MOVED != 0),
            ProblemKind::Rendezvous { middle } => {
                if !gathered(config) {
                    return false;
                }
                let at = config.placement[0];
                if state.crash_before_meeting {
                    (0..config.robots()).any(|r| config.crashed[r] && config.placement[r] == at)
                } else {
                    at == *middle
                }
            }
        }
    }
}

fn gathered(config: &Configuration) -> bool {
    config.placement.windows(2).all(|w| w[0] == w[1])
}

/// Collapses adjacent configurations with equal placements (lights ignored).
pub fn stutter_free(trace: &[Configuration]) -> Vec<Configuration> {
    let mut out: Vec<Configuration> = Vec::new();
    for cfg in trace {
        if out.last().is_none_or(|last| last.positions() != cfg.positions()) {
            out.push(cfg.clone());
        }
    }
    out
}

/// Judges a finite trace. `crash_log` marks a robot as crashed from the given
/// step on, for traces whose configurations do not record crashes themselves.
///
/// Violated verdicts are final. A Satisfied verdict for a terminal task turns
/// into Violated only if the robots later leave the satisfying configuration.
pub fn judge_trace(
    problem: &ProblemSpec,
    trace: &[Configuration],
    crash_log: Option<(RobotId, usize)>,
) -> Result<Verdict, ProblemError> {
    let mut trace: Vec<Configuration> = trace.to_vec();
    if let Some((robot, step)) = crash_log {
        for cfg in trace.iter_mut().skip(step) {
            cfg.crashed[robot] = true;
        }
    }
    let first = trace.first().ok_or(ProblemError::NotInitial)?;
    let monitor = problem.monitor();
    let mut state = monitor.init(first)?;
    for (i, pair) in trace.windows(2).enumerate() {
        match monitor.advance(&state, &pair[0], &pair[1]) {
            Ok(s) => state = s,
            Err(reason) => return Ok(Verdict::Violated { reason, step: i + 1 }),
        }
    }
    let last = trace.last().unwrap();
    Ok(if monitor.is_satisfied(&state, last) { Verdict::Satisfied } else { Verdict::Pending })
}
