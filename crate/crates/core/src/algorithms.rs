//! Reference algorithms and the table representation the checker quantifies over.
//!
//! Builtins compute on the canonical frame of a [`View`]: the key's cells are
//! indexed by arena vertices after the canonicalizing symmetry, so distances in
//! the arena graph are distances in the frame.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::engine::{Action, DecideError, Decider, Light, ModelTag, Move, RobotModel, Slot, View};
use crate::graph::{Arena, Cell, Color, VertexId, ViewKey};
use crate::problems::{bundled_problem, ProblemKind, ProblemName, ProblemSpec};
use crate::text::{records, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgorithmError {
    #[error("unknown builtin algorithm `{0}`")]
    UnknownBuiltin(String),
    #[error("{algorithm} cannot run on {model}: {reason}")]
    IllegalForModel { algorithm: String, model: RobotModel, reason: String },
    #[error("{0}")]
    Unsuitable(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("table binds slot `{0}` twice")]
    DuplicateSlot(Slot),
}

/// Light assignment of the oscillation algorithm.
const OFF: Color = 0;
const COL_N: Color = 1;
const COL_F: Color = 2;
const COL_T: Color = 3;

/// The three placements of the interrupted-line task, frame-independent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegIlPlan {
    pub stages: [Vec<VertexId>; 3],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Builtin {
    SuirOblot,
    MoveOnceFsta,
    AlgoOspFcom,
    NegIlFcom(NegIlPlan),
}

impl Builtin {
    pub const NAMES: [&'static str; 4] = ["suir-oblot", "move-once-fsta", "algo-osp-fcom", "neg-il-fcom"];

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::SuirOblot => "suir-oblot",
            Builtin::MoveOnceFsta => "move-once-fsta",
            Builtin::AlgoOspFcom => "algo-osp-fcom",
            Builtin::NegIlFcom(_) => "neg-il-fcom",
        }
    }

    /// The problem the builtin was written for.
    pub fn problem(&self) -> ProblemName {
        match self {
            Builtin::SuirOblot => ProblemName::Suir,
            Builtin::MoveOnceFsta => ProblemName::MoveOnce,
            Builtin::AlgoOspFcom => ProblemName::Osp,
            Builtin::NegIlFcom(_) => ProblemName::NegIl,
        }
    }

    fn check_model(&self, model: RobotModel) -> Result<(), String> {
        match self {
            Builtin::SuirOblot => Ok(()),
            Builtin::MoveOnceFsta if !model.tag.sees_own_color() => Err("needs to read its own light".into()),
            Builtin::AlgoOspFcom | Builtin::NegIlFcom(_) if !model.tag.sees_others_colors() => {
                Err("needs to read other robots' lights".into())
            }
            Builtin::AlgoOspFcom if model.palette < 4 => Err("uses four colors".into()),
            Builtin::MoveOnceFsta | Builtin::NegIlFcom(_) if model.palette < 2 => Err("uses two colors".into()),
            _ => Ok(()),
        }
    }
}

/// The observer's snapshot read back from the canonical frame.
struct Frame<'a> {
    arena: &'a Arena,
    view: &'a View,
}

impl<'a> Frame<'a> {
    fn me(&self) -> VertexId {
        self.view.key.observer
    }

    fn cells(&self) -> &[Cell] {
        &self.view.key.cells
    }

    /// Occupied vertices with multiplicity, sorted.
    fn placement(&self) -> Vec<VertexId> {
        let mut out = Vec::new();
        for (v, cell) in self.cells().iter().enumerate() {
            out.extend(std::iter::repeat_n(v, cell.count as usize));
        }
        out
    }

    /// Vertices holding some robot other than the observer.
    fn others(&self) -> Vec<VertexId> {
        let me = self.me();
        self.cells().iter().enumerate().filter(|&(v, c)| c.count > u8::from(v == me)).map(|(v, _)| v).collect()
    }

    fn dist(&self, a: VertexId, b: VertexId) -> usize {
        self.arena.graph().distances_from(a)[b]
    }

    /// Placement after the observer hops to the representative of orbit `i`.
    fn after_move(&self, i: usize) -> Vec<VertexId> {
        let mut p = self.placement();
        let pos = p.iter().position(|&v| v == self.me()).expect("observer is placed");
        p[pos] = self.view.orbits[i][0];
        p.sort_unstable();
        p
    }

    /// First orbit whose members are one hop closer to `target`.
    fn orbit_toward(&self, target: VertexId) -> Option<usize> {
        let d = self.dist(self.me(), target);
        self.view.orbits.iter().position(|o| self.dist(o[0], target) + 1 == d)
    }

    fn orbit_away(&self, target: VertexId) -> Option<usize> {
        let d = self.dist(self.me(), target);
        self.view.orbits.iter().position(|o| self.dist(o[0], target) == d + 1)
    }
}

fn to_orbit(i: usize, color: Color) -> Action {
    Action { mv: Move::Orbit(i), light: Light::Set(color) }
}

impl Builtin {
    fn decide_in(&self, f: &Frame<'_>) -> Result<Action, DecideError> {
        match self {
            Builtin::SuirOblot => {
                let me = f.me();
                if f.cells()[me].count > 1 {
                    return Ok(Action::stay(0));
                }
                let others = f.others();
                let Some(&target) = others.first() else {
                    return Ok(Action::stay(0));
                };
                match f.orbit_toward(target) {
                    Some(i) => Ok(to_orbit(i, 0)),
                    None => Ok(Action::stay(0)),
                }
            }
            Builtin::MoveOnceFsta => {
                let own = f.view.own_color.ok_or_else(|| DecideError::Undefined("own light is not visible".into()))?;
                if own != 0 {
                    return Ok(Action::stay(1));
                }
                let g = f.arena.graph();
                let free_degree_two =
                    f.view.orbits.iter().position(|o| g.degree(o[0]) == 2 && f.cells()[o[0]].is_empty());
                Ok(match free_degree_two {
                    Some(i) => to_orbit(i, 1),
                    None => Action::stay(0),
                })
            }
            Builtin::AlgoOspFcom => osp_decide(f),
            Builtin::NegIlFcom(plan) => neg_il_decide(f, plan),
        }
    }
}

/// The oscillating algorithm: the middle robot never moves; the terminals take
/// turns, driven by the light of the other terminal.
fn osp_decide(f: &Frame<'_>) -> Result<Action, DecideError> {
    let me = f.me();
    let others = f.others();
    if others.len() != 2 || f.cells()[me].count != 1 || others.iter().any(|&v| f.cells()[v].count != 1) {
        return Err(DecideError::Undefined("expects three robots on distinct vertices".into()));
    }
    let between = |x: VertexId, m: VertexId, y: VertexId| f.dist(x, m) + f.dist(m, y) == f.dist(x, y);
    let (a, b) = (others[0], others[1]);
    if between(a, me, b) {
        return Ok(Action::stay(OFF));
    }
    let (middle, other) = if between(me, a, b) {
        (a, b)
    } else if between(me, b, a) {
        (b, a)
    } else {
        return Err(DecideError::Undefined("robots are not collinear".into()));
    };
    let d = f.dist(me, middle);
    let d_other = f.dist(other, middle);
    let c_other = *f.cells()[other]
        .colors
        .first()
        .ok_or_else(|| DecideError::Undefined("other terminal's light is not visible".into()))?;
    let toward = |color| {
        f.orbit_toward(middle)
            .map(|i| to_orbit(i, color))
            .ok_or_else(|| DecideError::Undefined("no vertex toward the middle robot".into()))
    };
    let away = |color| {
        f.orbit_away(middle)
            .map(|i| to_orbit(i, color))
            .ok_or_else(|| DecideError::Undefined("no vertex away from the middle robot".into()))
    };
    use std::cmp::Ordering::*;
    match (c_other, d.cmp(&d_other)) {
        (OFF, Greater) => toward(COL_N),
        (OFF, Less) => Ok(Action::stay(OFF)),
        (COL_N, Equal) => away(COL_N),
        (COL_N, Less) => Ok(Action::stay(COL_F)),
        (COL_F, Greater) => toward(COL_T),
        (COL_T, Equal) => away(OFF),
        _ => Ok(Action::idle()),
    }
}

/// Interrupted-line algorithm: the robot that can turn I into II moves and
/// lights up; the robot that can turn II into III does so once it sees the
/// lit robot, which removes the mirror ambiguity of II.
fn neg_il_decide(f: &Frame<'_>, plan: &NegIlPlan) -> Result<Action, DecideError> {
    let [first, second, third] = &plan.stages;
    let here = f.placement();
    let same = |p: &[VertexId], q: &[VertexId]| f.arena.equivalent_placements(p, q);
    if same(&here, first) {
        let mv = (0..f.view.orbits.len()).find(|&i| same(&f.after_move(i), second));
        return Ok(match mv {
            Some(i) => to_orbit(i, 1),
            None => Action::stay(0),
        });
    }
    if same(&here, second) {
        let lit: Vec<VertexId> = f.others().into_iter().filter(|&v| f.cells()[v].colors.contains(&1)).collect();
        if lit.is_empty() {
            return Ok(Action::stay(1));
        }
        let mv = (0..f.view.orbits.len())
            .find(|&i| f.view.orbits[i].iter().any(|v| lit.contains(v)) && same(&f.after_move(i), third));
        return Ok(match mv {
            Some(i) => to_orbit(i, 0),
            None => Action::stay(0),
        });
    }
    Ok(Action::stay(0))
}

impl NegIlPlan {
    pub fn from_problem(problem: &ProblemSpec) -> Result<Self, AlgorithmError> {
        match &problem.kind {
            ProblemKind::Sequence(seq) if seq.period.is_none() && seq.stages.len() == 3 => {
                Ok(Self { stages: [seq.stages[0].clone(), seq.stages[1].clone(), seq.stages[2].clone()] })
            }
            _ => Err(AlgorithmError::Unsuitable("neg-il-fcom needs a terminal three-stage sequence".into())),
        }
    }
}

/// A finite map from decision slots to actions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Table {
    pub entries: BTreeMap<Slot, Action>,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, slot: &Slot) -> Option<Action> {
        self.entries.get(slot).copied()
    }

    pub fn insert(&mut self, slot: Slot, action: Action) {
        self.entries.insert(slot, action);
    }

    /// Records `algo`'s decision on each of `views`.
    pub fn tabulate<'v>(
        arena: &Arena,
        model: RobotModel,
        algo: &dyn Decider,
        views: impl IntoIterator<Item = &'v View>,
    ) -> Result<Self, DecideError> {
        let mut table = Table::new();
        for view in views {
            let action = algo.decide(arena, view)?.normalized(view, model);
            table.insert(view.slot(), action);
        }
        Ok(table)
    }

    /// One `when` record per slot.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (slot, action) in &self.entries {
            out.push_str(&format!("when {slot} -> {action}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, AlgorithmError> {
        let mut table = Table::new();
        for rec in records(text) {
            if rec.keyword() != "when" {
                return Err(rec.error(format!("expected `when`, found `{}`", rec.keyword())).into());
            }
            let args = rec.args();
            let key_tok = args.first().ok_or_else(|| rec.error("missing view key"))?;
            let key: ViewKey = key_tok.text.parse().map_err(|e: String| key_tok.error(e))?;
            let mut rest = &args[1..];
            let mut own_color = None;
            if let Some(tok) = rest.first().filter(|t| t.text.starts_with("own=")) {
                own_color = Some(tok.text[4..].parse::<Color>().map_err(|_| tok.error("bad own color"))?);
                rest = &rest[1..];
            }
            let [arrow, mv, color] = rest else {
                return Err(rec.error("expected `-> move=<m> color=<c>`").into());
            };
            if arrow.text != "->" {
                return Err(arrow.error("expected `->`").into());
            }
            let mv = match mv.text.strip_prefix("move=") {
                Some("stay") => Move::Stay,
                Some(o) => Move::Orbit(
                    o.strip_prefix("orbit-")
                        .and_then(|i| i.parse().ok())
                        .ok_or_else(|| mv.error(format!("bad move `{o}`")))?,
                ),
                None => return Err(mv.error("expected move=<stay|orbit-i>").into()),
            };
            let light = match color.text.strip_prefix("color=") {
                Some("keep") => Light::Keep,
                Some(c) => Light::Set(c.parse().map_err(|_| color.error(format!("bad color `{c}`")))?),
                None => return Err(color.error("expected color=<c|keep>").into()),
            };
            let slot = Slot { key, own_color };
            if table.entries.contains_key(&slot) {
                return Err(AlgorithmError::DuplicateSlot(slot));
            }
            table.insert(slot, Action { mv, light });
        }
        Ok(table)
    }
}

impl Decider for Table {
    fn decide(&self, _arena: &Arena, view: &View) -> Result<Action, DecideError> {
        self.get(&view.slot()).ok_or_else(|| DecideError::Unbound(view.slot()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Algorithm {
    Builtin(Builtin),
    Table(Table),
}

impl Algorithm {
    pub fn name(&self) -> String {
        match self {
            Algorithm::Builtin(b) => b.name().to_string(),
            Algorithm::Table(t) => format!("table({} slots)", t.len()),
        }
    }

    /// Rejects algorithms that read information `model` hides or use more
    /// colors than it offers.
    pub fn check_model(&self, model: RobotModel) -> Result<(), AlgorithmError> {
        let fail = |reason: String| AlgorithmError::IllegalForModel { algorithm: self.name(), model, reason };
        match self {
            Algorithm::Builtin(b) => b.check_model(model).map_err(fail),
            Algorithm::Table(t) => {
                for (slot, action) in &t.entries {
                    if slot.own_color.is_some() != model.tag.sees_own_color() {
                        return Err(fail(format!("slot {slot} disagrees on own-light visibility")));
                    }
                    let hidden = !model.tag.sees_others_colors() && slot.key.cells.iter().any(|c| !c.colors.is_empty());
                    if hidden {
                        return Err(fail(format!("slot {slot} reads other robots' lights")));
                    }
                    match action.light {
                        Light::Set(c) if c >= model.palette => return Err(fail(format!("slot {slot} sets color {c}"))),
                        Light::Keep if model.tag == ModelTag::Oblot => {
                            return Err(fail("OBLOT robots have no light to keep".into()))
                        }
                        _ => {}
                    }
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl Decider for Algorithm {
    fn decide(&self, arena: &Arena, view: &View) -> Result<Action, DecideError> {
        match self {
            Algorithm::Builtin(b) => b.decide_in(&Frame { arena, view }),
            Algorithm::Table(t) => t.decide(arena, view),
        }
    }
}

/// A builtin by name; `neg-il-fcom` is bound to the bundled scenario.
pub fn builtin(name: &str) -> Result<Algorithm, AlgorithmError> {
    Ok(Algorithm::Builtin(match name {
        "suir-oblot" => Builtin::SuirOblot,
        "move-once-fsta" => Builtin::MoveOnceFsta,
        "algo-osp-fcom" => Builtin::AlgoOspFcom,
        "neg-il-fcom" => Builtin::NegIlFcom(NegIlPlan::from_problem(&bundled_problem(ProblemName::NegIl))?),
        other => return Err(AlgorithmError::UnknownBuiltin(other.to_string())),
    }))
}

/// A builtin bound to `problem`'s scenario data.
pub fn builtin_for(name: &str, problem: &ProblemSpec) -> Result<Algorithm, AlgorithmError> {
    match builtin(name)? {
        Algorithm::Builtin(Builtin::NegIlFcom(_)) => {
            Ok(Algorithm::Builtin(Builtin::NegIlFcom(NegIlPlan::from_problem(problem)?)))
        }
        other => Ok(other),
    }
}

/// Legal actions for one view, in a fixed order: moves (stay first, then each
/// orbit) crossed with lights. FCOM robots may also leave their unseen light
/// untouched; for robots that read their light that is just another color.
pub fn slot_domain(view: &View, model: RobotModel) -> Vec<Action> {
    let mut lights: Vec<Light> = match model.tag {
        ModelTag::Oblot => vec![Light::Set(0)],
        _ => (0..model.palette).map(Light::Set).collect(),
    };
    if model.tag == ModelTag::Fcom {
        lights.insert(0, Light::Keep);
    }
    let moves = std::iter::once(Move::Stay).chain((0..view.orbits.len()).map(Move::Orbit));
    moves.flat_map(|mv| lights.iter().map(move |&light| Action { mv, light })).collect()
}

/// The decision domain of every slot among `views`.
pub fn algorithm_space<'v>(
    model: RobotModel,
    views: impl IntoIterator<Item = &'v View>,
) -> BTreeMap<Slot, Vec<Action>> {
    views.into_iter().map(|v| (v.slot(), slot_domain(v, model))).collect()
}

/// Every view a robot can have in `problem` with `model`: all placements of
/// the problem's robots, all light assignments, every observer.
pub fn view_universe(problem: &ProblemSpec, model: RobotModel) -> Vec<View> {
    use crate::engine::{Configuration, Engine, Scheduler};
    let n = problem.robots();
    let nv = problem.graph().len();
    let engine = Engine::new(&problem.arena, model, Scheduler::Fsync, 0);
    let mut seen = BTreeMap::new();
    let total_places = nv.pow(n as u32);
    let total_colors = (model.palette as usize).pow(n as u32);
    for p in 0..total_places {
        let placement: Vec<VertexId> = (0..n).map(|r| p / nv.pow(r as u32) % nv).collect();
        if placement.windows(2).any(|w| w[0] > w[1]) {
            continue;
        }
        for c in 0..total_colors {
            let colors: Vec<Color> = (0..n)
                .map(|r| (c / (model.palette as usize).pow(r as u32) % model.palette as usize) as Color)
                .collect();
            let config = Configuration { placement: placement.clone(), colors, crashed: vec![false; n] };
            for r in 0..n {
                let view = engine.observe(&config, r).expect("live robot");
                seen.entry(view.slot()).or_insert(view);
            }
        }
    }
    seen.into_values().collect()
}
