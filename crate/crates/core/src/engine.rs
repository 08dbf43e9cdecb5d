//! Look-compute-move semantics for the four robot models and three schedulers.
//!
//! Every nondeterministic point of an execution is an explicit
//! [`AdversaryChoice`]: who is activated (or which ASYNC event fires), whether a
//! robot crashes, and which member of a symmetric neighbor orbit a mover lands on.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::{Arena, CanonicalSnapshot, Cell, Color, Decoration, EmbeddedGraph, VertexId, ViewKey};

pub type RobotId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelTag {
    Oblot,
    Fsta,
    Fcom,
    Lumi,
}

impl ModelTag {
    pub const ALL: [ModelTag; 4] = [ModelTag::Oblot, ModelTag::Fsta, ModelTag::Fcom, ModelTag::Lumi];

    /// Internal memory: the robot reads its own light.
    pub fn sees_own_color(self) -> bool {
        matches!(self, ModelTag::Fsta | ModelTag::Lumi)
    }

    /// External communication: other robots read the light.
    pub fn sees_others_colors(self) -> bool {
        matches!(self, ModelTag::Fcom | ModelTag::Lumi)
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelTag::Oblot => "OBLOT",
            ModelTag::Fsta => "FSTA",
            ModelTag::Fcom => "FCOM",
            ModelTag::Lumi => "LUMI",
        })
    }
}

impl FromStr for ModelTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "OBLOT" => Ok(ModelTag::Oblot),
            "FSTA" => Ok(ModelTag::Fsta),
            "FCOM" => Ok(ModelTag::Fcom),
            "LUMI" => Ok(ModelTag::Lumi),
            _ => Err(format!("unknown robot model `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RobotModel {
    pub tag: ModelTag,
    pub palette: u8,
}

impl RobotModel {
    pub fn new(tag: ModelTag, palette: u8) -> Result<Self, EngineError> {
        match (tag, palette) {
            (ModelTag::Oblot, 1) => Ok(Self { tag, palette }),
            (ModelTag::Oblot, _) => Err(EngineError::Contract("OBLOT robots have exactly one color".into())),
            (_, p) if p >= 2 => Ok(Self { tag, palette }),
            _ => Err(EngineError::Contract(format!("{tag} needs a palette of at least two colors"))),
        }
    }

    pub fn oblot() -> Self {
        Self { tag: ModelTag::Oblot, palette: 1 }
    }
}

impl fmt::Display for RobotModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.tag, self.palette)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheduler {
    Fsync,
    Ssync,
    Async,
}

impl Scheduler {
    pub const ALL: [Scheduler; 3] = [Scheduler::Fsync, Scheduler::Ssync, Scheduler::Async];

    pub fn letter(self) -> char {
        match self {
            Scheduler::Fsync => 'F',
            Scheduler::Ssync => 'S',
            Scheduler::Async => 'A',
        }
    }
}

impl fmt::Display for Scheduler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheduler::Fsync => "FSYNC",
            Scheduler::Ssync => "SSYNC",
            Scheduler::Async => "ASYNC",
        })
    }
}

impl FromStr for Scheduler {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "FSYNC" | "F" => Ok(Scheduler::Fsync),
            "SSYNC" | "S" => Ok(Scheduler::Ssync),
            "ASYNC" | "A" => Ok(Scheduler::Async),
            _ => Err(format!("unknown scheduler `{s}`")),
        }
    }
}

/// Robot placement, lights and crash status. Robot ids are bookkeeping only.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub placement: Vec<VertexId>,
    pub colors: Vec<Color>,
    pub crashed: Vec<bool>,
}

impl Configuration {
    /// All lights off, nobody crashed.
    pub fn new(placement: Vec<VertexId>) -> Self {
        let n = placement.len();
        Self { placement, colors: vec![0; n], crashed: vec![false; n] }
    }

    pub fn robots(&self) -> usize {
        self.placement.len()
    }

    pub fn live(&self) -> impl Iterator<Item = RobotId> + '_ {
        (0..self.robots()).filter(|&r| !self.crashed[r])
    }

    pub fn crash_count(&self) -> usize {
        self.crashed.iter().filter(|&&c| c).count()
    }

    /// Occupied vertices as a sorted multiset; robots are anonymous.
    pub fn positions(&self) -> Vec<VertexId> {
        let mut p = self.placement.clone();
        p.sort_unstable();
        p
    }

    /// What `observer` perceives of every vertex under `model`. Multiplicities
    /// are always visible; other robots' lights only when they are external.
    /// The observer's own light is never part of the decoration.
    pub fn decoration(&self, n_vertices: usize, observer: RobotId, model: RobotModel) -> Decoration {
        let mut deco = vec![Cell::default(); n_vertices];
        for r in 0..self.robots() {
            let cell = &mut deco[self.placement[r]];
            cell.count += 1;
            if r != observer && model.tag.sees_others_colors() {
                cell.colors.push(self.colors[r]);
            }
        }
        for cell in &mut deco {
            cell.colors.sort_unstable();
        }
        deco
    }

    pub fn validate(&self, g: &EmbeddedGraph, model: RobotModel) -> Result<(), EngineError> {
        if self.colors.len() != self.robots() || self.crashed.len() != self.robots() {
            return Err(EngineError::Contract("configuration vectors differ in length".into()));
        }
        if let Some(&v) = self.placement.iter().find(|&&v| v >= g.len()) {
            return Err(EngineError::Contract(format!("vertex index {v} out of range")));
        }
        if let Some(&c) = self.colors.iter().find(|&&c| c >= model.palette) {
            return Err(EngineError::Contract(format!("color {c} outside palette of {}", model.palette)));
        }
        Ok(())
    }

    /// Placement as vertex names by robot, e.g. `[m0,m2]`.
    pub fn describe_placement(&self, g: &EmbeddedGraph) -> String {
        let names: Vec<&str> = self.placement.iter().map(|&v| g.name(v)).collect();
        format!("[{}]", names.join(","))
    }
}

/// A robot's snapshot, in the canonical frame of its disoriented view.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct View {
    pub key: ViewKey,
    pub own_color: Option<Color>,
    /// Neighbor orbits of the observer, as canonical-frame vertices.
    pub orbits: Vec<Vec<VertexId>>,
}

impl View {
    /// Identifies the decision slot an algorithm table is indexed by.
    pub fn slot(&self) -> Slot {
        Slot { key: self.key.clone(), own_color: self.own_color }
    }
}

/// `(canonical key, own color when visible)`: the domain of an algorithm.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub key: ViewKey,
    pub own_color: Option<Color>,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.key)?;
        if let Some(c) = self.own_color {
            write!(f, " own={c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    Stay,
    Orbit(usize),
}

/// What happens to the robot's light. `Keep` leaves the register untouched,
/// which matters for FCOM robots that cannot read their own light.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Light {
    Keep,
    Set(Color),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub mv: Move,
    pub light: Light,
}

impl Action {
    pub fn stay(color: Color) -> Self {
        Self { mv: Move::Stay, light: Light::Set(color) }
    }

    pub fn idle() -> Self {
        Self { mv: Move::Stay, light: Light::Keep }
    }

    /// Rewrites `Keep` as an explicit color whenever the robot can read its own
    /// light, so equal behaviors compare equal.
    pub fn normalized(self, view: &View, model: RobotModel) -> Self {
        let light = match (self.light, view.own_color, model.tag) {
            (_, _, ModelTag::Oblot) => Light::Set(0),
            (Light::Keep, Some(c), _) => Light::Set(c),
            (l, _, _) => l,
        };
        Self { mv: self.mv, light }
    }

    pub fn check(&self, view: &View, model: RobotModel) -> Result<(), EngineError> {
        if let Move::Orbit(i) = self.mv {
            if i >= view.orbits.len() {
                return Err(EngineError::IllegalAction(format!("orbit {i} does not exist in view {}", view.key)));
            }
        }
        if let Light::Set(c) = self.light {
            if c >= model.palette {
                return Err(EngineError::IllegalAction(format!("color {c} outside palette of {}", model.palette)));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mv {
            Move::Stay => f.write_str("move=stay")?,
            Move::Orbit(i) => write!(f, "move=orbit-{i}")?,
        }
        match self.light {
            Light::Keep => f.write_str(" color=keep"),
            Light::Set(c) => write!(f, " color={c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecideError {
    #[error("no action bound for slot {0}")]
    Unbound(Slot),
    #[error("algorithm undefined here: {0}")]
    Undefined(String),
}

/// Anything that maps views to actions.
pub trait Decider {
    fn decide(&self, arena: &Arena, view: &View) -> Result<Action, DecideError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("rejected adversary choice: {0}")]
    RejectedChoice(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("illegal action: {0}")]
    IllegalAction(String),
    #[error(transparent)]
    Decide(#[from] DecideError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Event {
    Look(RobotId),
    #[cfg(not(feature = "split-act"))]
    Act(RobotId),
    #[cfg(feature = "split-act")]
    Paint(RobotId),
    #[cfg(feature = "split-act")]
    Hop(RobotId),
}

impl Event {
    pub fn robot(self) -> RobotId {
        match self {
            Event::Look(r) => r,
            #[cfg(not(feature = "split-act"))]
            Event::Act(r) => r,
            #[cfg(feature = "split-act")]
            Event::Paint(r) | Event::Hop(r) => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Activation {
    /// Robots taking a full LCM cycle this round (FSYNC/SSYNC).
    Round(Vec<RobotId>),
    /// A single ASYNC event.
    Event(Event),
}

/// One adversary move. `picks` resolves every mover whose target orbit has
/// more than one vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AdversaryChoice {
    pub activation: Activation,
    pub crash: Option<RobotId>,
    pub picks: Vec<(RobotId, VertexId)>,
}

impl AdversaryChoice {
    pub fn round(robots: Vec<RobotId>) -> Self {
        Self { activation: Activation::Round(robots), crash: None, picks: Vec::new() }
    }

    pub fn event(event: Event) -> Self {
        Self { activation: Activation::Event(event), crash: None, picks: Vec::new() }
    }

    pub fn with_crash(mut self, robot: RobotId) -> Self {
        self.crash = Some(robot);
        self
    }

    pub fn with_pick(mut self, robot: RobotId, vertex: VertexId) -> Self {
        self.picks.push((robot, vertex));
        self.picks.sort_unstable();
        self
    }

    /// Text form, e.g. `activate=0,1 crash=1 pick=0:m1`.
    pub fn describe(&self, g: &EmbeddedGraph) -> String {
        let join = |rs: &[RobotId]| rs.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",");
        let mut out = match &self.activation {
            Activation::Round(rs) => format!("activate={}", join(rs)),
            Activation::Event(Event::Look(r)) => format!("look={r}"),
            #[cfg(not(feature = "split-act"))]
            Activation::Event(Event::Act(r)) => format!("act={r}"),
            #[cfg(feature = "split-act")]
            Activation::Event(Event::Paint(r)) => format!("paint={r}"),
            #[cfg(feature = "split-act")]
            Activation::Event(Event::Hop(r)) => format!("hop={r}"),
        };
        if let Some(c) = self.crash {
            out.push_str(&format!(" crash={c}"));
        }
        if !self.picks.is_empty() {
            let ps: Vec<String> = self.picks.iter().map(|(r, v)| format!("{r}:{}", g.name(*v))).collect();
            out.push_str(&format!(" pick={}", ps.join(",")));
        }
        out
    }

    /// Inverse of [`describe`](Self::describe).
    pub fn parse(text: &str, g: &EmbeddedGraph) -> Result<Self, String> {
        let mut activation = None;
        let mut crash = None;
        let mut picks = Vec::new();
        let robot = |s: &str| s.parse::<RobotId>().map_err(|_| format!("bad robot id `{s}`"));
        for field in text.split_whitespace() {
            let (name, value) = field.split_once('=').ok_or_else(|| format!("expected name=value, found `{field}`"))?;
            match name {
                "activate" => {
                    let mut rs =
                        value.split(',').filter(|s| !s.is_empty()).map(robot).collect::<Result<Vec<_>, _>>()?;
                    rs.sort_unstable();
                    rs.dedup();
                    activation = Some(Activation::Round(rs));
                }
                "look" => activation = Some(Activation::Event(Event::Look(robot(value)?))),
                #[cfg(not(feature = "split-act"))]
                "act" => activation = Some(Activation::Event(Event::Act(robot(value)?))),
                #[cfg(feature = "split-act")]
                "paint" => activation = Some(Activation::Event(Event::Paint(robot(value)?))),
                #[cfg(feature = "split-act")]
                "hop" => activation = Some(Activation::Event(Event::Hop(robot(value)?))),
                "crash" => crash = Some(robot(value)?),
                "pick" => {
                    for p in value.split(',') {
                        let (r, v) = p.split_once(':').ok_or_else(|| format!("expected robot:vertex, found `{p}`"))?;
                        let v = g.vertex(v).ok_or_else(|| format!("unknown vertex `{v}`"))?;
                        picks.push((robot(r)?, v));
                    }
                }
                other => return Err(format!("unknown choice field `{other}`")),
            }
        }
        picks.sort_unstable();
        Ok(Self { activation: activation.ok_or("choice names no activation")?, crash, picks })
    }
}

/// An ASYNC robot between its Look and its Act: the decision it took on a
/// stale snapshot, with the target orbit resolved to arena vertices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pending {
    pub action: Action,
    pub targets: Vec<VertexId>,
    /// Only used with split Act events: the light has already been set.
    pub painted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExecState {
    pub config: Configuration,
    pub pending: Vec<Option<Pending>>,
    pub round: u64,
}

impl ExecState {
    pub fn new(config: Configuration) -> Self {
        let n = config.robots();
        Self { config, pending: vec![None; n], round: 0 }
    }
}

/// A robot's decision for one step, with its target orbit made concrete.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub robot: RobotId,
    pub action: Action,
    pub targets: Vec<VertexId>,
}

/// The fixed rules of an execution: arena, model, scheduler and fault budget.
#[derive(Debug, Clone, Copy)]
pub struct Engine<'a> {
    pub arena: &'a Arena,
    pub model: RobotModel,
    pub scheduler: Scheduler,
    pub faults: usize,
}

impl<'a> Engine<'a> {
    pub fn new(arena: &'a Arena, model: RobotModel, scheduler: Scheduler, faults: usize) -> Self {
        Self { arena, model, scheduler, faults }
    }

    pub fn graph(&self) -> &'a EmbeddedGraph {
        self.arena.graph()
    }

    /// The view of `robot`, plus the canonicalization that produced it.
    pub fn snapshot(&self, config: &Configuration, robot: RobotId) -> Result<(View, CanonicalSnapshot), EngineError> {
        if config.crashed[robot] {
            return Err(EngineError::Contract(format!("crashed robot {robot} observed")));
        }
        let deco = config.decoration(self.graph().len(), robot, self.model);
        let snap = self.arena.canonicalize(&deco, config.placement[robot]);
        let view = View {
            key: snap.key.clone(),
            own_color: self.model.tag.sees_own_color().then(|| config.colors[robot]),
            orbits: snap.frame_orbits(),
        };
        Ok((view, snap))
    }

    pub fn observe(&self, config: &Configuration, robot: RobotId) -> Result<View, EngineError> {
        self.snapshot(config, robot).map(|(v, _)| v)
    }

    /// Looks, computes and resolves the target orbit for one robot.
    pub fn decide(&self, config: &Configuration, robot: RobotId, algo: &dyn Decider) -> Result<Decision, EngineError> {
        let (view, snap) = self.snapshot(config, robot)?;
        let action = algo.decide(self.arena, &view)?.normalized(&view, self.model);
        action.check(&view, self.model)?;
        let targets = match action.mv {
            Move::Stay => Vec::new(),
            Move::Orbit(i) => snap.orbits[i].clone(),
        };
        Ok(Decision { robot, action, targets })
    }

    fn check_crash(&self, config: &Configuration, crash: Option<RobotId>) -> Result<(), EngineError> {
        if let Some(c) = crash {
            if c >= config.robots() || config.crashed[c] {
                return Err(EngineError::RejectedChoice(format!("robot {c} cannot crash")));
            }
            if config.crash_count() >= self.faults {
                return Err(EngineError::RejectedChoice("fault budget exhausted".into()));
            }
        }
        Ok(())
    }

    /// Robots whose decision the given scheduling step needs, in id order.
    pub fn acting_robots(&self, state: &ExecState, activation: &Activation, crash: Option<RobotId>) -> Vec<RobotId> {
        match activation {
            Activation::Round(rs) => rs.iter().copied().filter(|&r| Some(r) != crash).collect(),
            Activation::Event(Event::Look(r)) if Some(*r) != crash && !state.config.crashed[*r] => vec![*r],
            Activation::Event(_) => Vec::new(),
        }
    }

    /// Every legal scheduling step (activation plus crash directive), in a fixed order.
    pub fn schedules(&self, state: &ExecState) -> Vec<(Activation, Option<RobotId>)> {
        let config = &state.config;
        let live: Vec<RobotId> = config.live().collect();
        let mut crashes = vec![None];
        if config.crash_count() < self.faults {
            crashes.extend(live.iter().map(|&r| Some(r)));
        }
        let mut out = Vec::new();
        match self.scheduler {
            Scheduler::Fsync => {
                for &c in &crashes {
                    out.push((Activation::Round(live.clone()), c));
                }
            }
            Scheduler::Ssync => {
                let mut subsets: Vec<Vec<RobotId>> = (1u32..(1 << live.len()))
                    .map(|mask| {
                        live.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &r)| r).collect()
                    })
                    .collect();
                subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
                for set in subsets {
                    for &c in &crashes {
                        out.push((Activation::Round(set.clone()), c));
                    }
                }
            }
            Scheduler::Async => {
                for &r in &live {
                    let event = match &state.pending[r] {
                        None => Event::Look(r),
                        #[cfg(not(feature = "split-act"))]
                        Some(_) => Event::Act(r),
                        #[cfg(feature = "split-act")]
                        Some(p) if !p.painted => Event::Paint(r),
                        #[cfg(feature = "split-act")]
                        Some(_) => Event::Hop(r),
                    };
                    for &c in &crashes {
                        if c != Some(r) {
                            out.push((Activation::Event(event), c));
                        }
                    }
                }
            }
        }
        out
    }

    /// Movers whose landing vertex the adversary must pick, with their candidates.
    pub fn ambiguous_moves(
        &self,
        state: &ExecState,
        activation: &Activation,
        decisions: &[Decision],
    ) -> Vec<(RobotId, Vec<VertexId>)> {
        match activation {
            Activation::Round(_) => {
                decisions.iter().filter(|d| d.targets.len() > 1).map(|d| (d.robot, d.targets.clone())).collect()
            }
            Activation::Event(ev) => match (ev, &state.pending[ev.robot()]) {
                #[cfg(not(feature = "split-act"))]
                (Event::Act(r), Some(p)) if p.targets.len() > 1 => vec![(*r, p.targets.clone())],
                #[cfg(feature = "split-act")]
                (Event::Hop(r), Some(p)) if p.targets.len() > 1 => vec![(*r, p.targets.clone())],
                _ => Vec::new(),
            },
        }
    }

    /// Exhaustive, duplicate-free list of legal choices in canonical order.
    pub fn enumerate_choices(
        &self,
        state: &ExecState,
        algo: &dyn Decider,
    ) -> Result<Vec<AdversaryChoice>, EngineError> {
        let mut out = Vec::new();
        for (activation, crash) in self.schedules(state) {
            let mut config = state.config.clone();
            if let Some(c) = crash {
                config.crashed[c] = true;
            }
            let decisions = self
                .acting_robots(state, &activation, crash)
                .into_iter()
                .map(|r| self.decide(&config, r, algo))
                .collect::<Result<Vec<_>, _>>()?;
            let ambiguous = self.ambiguous_moves(state, &activation, &decisions);
            for picks in pick_product(&ambiguous) {
                out.push(AdversaryChoice { activation: activation.clone(), crash, picks });
            }
        }
        Ok(out)
    }

    /// Applies one choice; dispatches on the scheduler.
    pub fn step(
        &self,
        state: &ExecState,
        choice: &AdversaryChoice,
        algo: &dyn Decider,
    ) -> Result<ExecState, EngineError> {
        match self.scheduler {
            Scheduler::Async => self.step_async(state, choice, algo),
            _ => self.step_sync(state, choice, algo),
        }
    }

    fn land(
        targets: &[VertexId],
        robot: RobotId,
        picks: &[(RobotId, VertexId)],
    ) -> Result<Option<VertexId>, EngineError> {
        let pick = picks.iter().find(|(r, _)| *r == robot).map(|&(_, v)| v);
        match (targets.len(), pick) {
            (0, None) => Ok(None),
            (1, None) => Ok(Some(targets[0])),
            (n, Some(v)) if n > 1 && targets.contains(&v) => Ok(Some(v)),
            (n, Some(v)) if n > 1 => {
                Err(EngineError::RejectedChoice(format!("vertex {v} is not in robot {robot}'s target orbit")))
            }
            (n, None) if n > 1 => Err(EngineError::RejectedChoice(format!("robot {robot} needs a vertex pick"))),
            _ => Err(EngineError::RejectedChoice(format!("robot {robot} needs no vertex pick"))),
        }
    }

    fn check_picks(picks: &[(RobotId, VertexId)], needed: &[RobotId]) -> Result<(), EngineError> {
        if let Some((r, _)) = picks.iter().find(|(r, _)| !needed.contains(r)) {
            return Err(EngineError::RejectedChoice(format!("unexpected pick for robot {r}")));
        }
        Ok(())
    }

    /// One FSYNC/SSYNC round: every acting robot looks at the same snapshot,
    /// then all lights and hops are applied together.
    pub fn step_sync(
        &self,
        state: &ExecState,
        choice: &AdversaryChoice,
        algo: &dyn Decider,
    ) -> Result<ExecState, EngineError> {
        if self.scheduler == Scheduler::Async {
            return Err(EngineError::Contract("step_sync under ASYNC".into()));
        }
        if state.pending.iter().any(Option::is_some) {
            return Err(EngineError::Contract("pending actions in a synchronous state".into()));
        }
        let Activation::Round(active) = &choice.activation else {
            return Err(EngineError::RejectedChoice("expected an activation set".into()));
        };
        let config = &state.config;
        if active.is_empty() {
            return Err(EngineError::RejectedChoice("empty activation set".into()));
        }
        if active.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EngineError::RejectedChoice("activation set must be sorted and distinct".into()));
        }
        if let Some(&r) = active.iter().find(|&&r| r >= config.robots() || config.crashed[r]) {
            return Err(EngineError::RejectedChoice(format!("robot {r} cannot be activated")));
        }
        if self.scheduler == Scheduler::Fsync && active.len() != config.live().count() {
            return Err(EngineError::RejectedChoice("FSYNC activates every live robot".into()));
        }
        self.check_crash(config, choice.crash)?;

        let mut pre = config.clone();
        if let Some(c) = choice.crash {
            pre.crashed[c] = true;
        }
        let acting = self.acting_robots(state, &choice.activation, choice.crash);
        let decisions = acting.iter().map(|&r| self.decide(&pre, r, algo)).collect::<Result<Vec<_>, _>>()?;
        let needed: Vec<RobotId> = decisions.iter().filter(|d| d.targets.len() > 1).map(|d| d.robot).collect();
        Self::check_picks(&choice.picks, &needed)?;

        let mut next = pre.clone();
        for d in &decisions {
            if let Light::Set(c) = d.action.light {
                next.colors[d.robot] = c;
            }
            if let Some(v) = Self::land(&d.targets, d.robot, &choice.picks)? {
                next.placement[d.robot] = v;
            }
        }
        Ok(ExecState { config: next, pending: state.pending.clone(), round: state.round + 1 })
    }

    /// One ASYNC event. Look stores a decision taken on the current snapshot;
    /// Act later applies that stale decision (light, then hop) atomically.
    pub fn step_async(
        &self,
        state: &ExecState,
        choice: &AdversaryChoice,
        algo: &dyn Decider,
    ) -> Result<ExecState, EngineError> {
        if self.scheduler != Scheduler::Async {
            return Err(EngineError::Contract("step_async outside ASYNC".into()));
        }
        let Activation::Event(event) = choice.activation else {
            return Err(EngineError::RejectedChoice("expected an ASYNC event".into()));
        };
        let r = event.robot();
        let config = &state.config;
        if r >= config.robots() || config.crashed[r] {
            return Err(EngineError::RejectedChoice(format!("robot {r} cannot be activated")));
        }
        self.check_crash(config, choice.crash)?;
        if choice.crash == Some(r) {
            return Err(EngineError::RejectedChoice("a robot cannot crash during its own event".into()));
        }
        let mut next = state.clone();
        if let Some(c) = choice.crash {
            next.config.crashed[c] = true;
            next.pending[c] = None;
        }
        match event {
            Event::Look(_) => {
                if state.pending[r].is_some() {
                    return Err(EngineError::RejectedChoice(format!("robot {r} must act before looking again")));
                }
                Self::check_picks(&choice.picks, &[])?;
                let d = self.decide(&next.config, r, algo)?;
                next.pending[r] = Some(Pending { action: d.action, targets: d.targets, painted: false });
            }
            #[cfg(not(feature = "split-act"))]
            Event::Act(_) => {
                let p = state.pending[r]
                    .clone()
                    .ok_or_else(|| EngineError::RejectedChoice(format!("robot {r} has nothing to act on")))?;
                let needed: Vec<RobotId> = if p.targets.len() > 1 { vec![r] } else { vec![] };
                Self::check_picks(&choice.picks, &needed)?;
                if let Light::Set(c) = p.action.light {
                    next.config.colors[r] = c;
                }
                if let Some(v) = Self::land(&p.targets, r, &choice.picks)? {
                    next.config.placement[r] = v;
                }
                next.pending[r] = None;
                next.round += 1;
            }
            #[cfg(feature = "split-act")]
            Event::Paint(_) => {
                let p = match &state.pending[r] {
                    Some(p) if !p.painted => p.clone(),
                    _ => return Err(EngineError::RejectedChoice(format!("robot {r} cannot paint now"))),
                };
                Self::check_picks(&choice.picks, &[])?;
                if let Light::Set(c) = p.action.light {
                    next.config.colors[r] = c;
                }
                next.pending[r] = Some(Pending { painted: true, ..p });
            }
            #[cfg(feature = "split-act")]
            Event::Hop(_) => {
                let p = match &state.pending[r] {
                    Some(p) if p.painted => p.clone(),
                    _ => return Err(EngineError::RejectedChoice(format!("robot {r} cannot hop now"))),
                };
                let needed: Vec<RobotId> = if p.targets.len() > 1 { vec![r] } else { vec![] };
                Self::check_picks(&choice.picks, &needed)?;
                if let Some(v) = Self::land(&p.targets, r, &choice.picks)? {
                    next.config.placement[r] = v;
                }
                next.pending[r] = None;
                next.round += 1;
            }
        }
        Ok(next)
    }
}

/// Cartesian product of per-robot vertex picks.
pub(crate) fn pick_product(ambiguous: &[(RobotId, Vec<VertexId>)]) -> Vec<Vec<(RobotId, VertexId)>> {
    let mut out = vec![Vec::new()];
    for (robot, targets) in ambiguous {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                targets.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push((*robot, v));
                    p
                })
            })
            .collect();
    }
    out
}

/// One line of the exported trace format.
pub fn trace_line(g: &EmbeddedGraph, round: u64, event: &str, config: &Configuration) -> String {
    let colors: Vec<String> = config.colors.iter().map(|c| c.to_string()).collect();
    let crashed: Vec<String> = (0..config.robots()).filter(|&r| config.crashed[r]).map(|r| r.to_string()).collect();
    format!(
        "round={round} event={event} placement={} colors=[{}] crashed={{{}}}",
        config.describe_placement(g),
        colors.join(","),
        crashed.join(",")
    )
}
