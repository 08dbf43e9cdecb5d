//! Impossibility as a two-player game between the algorithm designer and the
//! adversary.
//!
//! The designer commits to one action per decision slot; the adversary
//! explores every fair schedule. Slots are bound lazily: a search under a
//! partial table ignores every schedule that would need an unbound slot, so
//! whatever violation or stuck cycle it still finds refutes *every* completion
//! of that table. Otherwise the search branches on the first slot it needed.
//!
//! Refutations remember which slots their witnesses actually consulted. When
//! the refutation under `slot = a` never looked at `slot`, it refutes every
//! choice for that slot and the remaining siblings are skipped.

use std::cell::RefCell;
use std::collections::BTreeSet;

use crate::algorithms::{slot_domain, Table};
use crate::engine::{Action, DecideError, Decider, Engine, ModelTag, RobotModel, Scheduler, Slot, View};
use crate::graph::{Arena, EmbeddedGraph};
use crate::problems::{ProblemSpec, Verdict};

use super::product::{explore, Product};
use super::{find_witness, indent, Bounds, Certificate, CheckError, Outcome, Witness};

/// The adversary's answer to every algorithm: branch on the action the
/// algorithm takes in a view; leaves carry a schedule that defeats it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrategyTree {
    Leaf(Witness),
    Branch { slot: Slot, view: View, children: Vec<(Action, StrategyTree)> },
}

impl StrategyTree {
    pub fn leaves(&self) -> usize {
        match self {
            StrategyTree::Leaf(_) => 1,
            StrategyTree::Branch { children, .. } => children.iter().map(|(_, t)| t.leaves()).sum(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            StrategyTree::Leaf(_) => 0,
            StrategyTree::Branch { children, .. } => 1 + children.iter().map(|(_, t)| t.depth()).max().unwrap_or(0),
        }
    }

    /// Follows `algo`'s decisions down the tree and replays the schedule at
    /// the leaf it reaches.
    pub fn replay(
        &self,
        problem: &ProblemSpec,
        model: RobotModel,
        scheduler: Scheduler,
        window: usize,
        algo: &dyn Decider,
    ) -> Result<Verdict, CheckError> {
        let mut node = self;
        loop {
            match node {
                StrategyTree::Leaf(w) => return w.replay(problem, model, scheduler, window, algo),
                StrategyTree::Branch { slot, view, children } => {
                    let action = algo
                        .decide(&problem.arena, view)
                        .map_err(crate::engine::EngineError::from)?
                        .normalized(view, model);
                    node = children.iter().find(|(a, _)| *a == action).map(|(_, t)| t).ok_or_else(|| {
                        CheckError::Replay(format!("action `{action}` at {slot} is outside the tree"))
                    })?;
                }
            }
        }
    }

    /// Indented text: `when <slot>` lines open a branch, `if <action>` lines
    /// select a child, leaves print their schedule.
    pub fn to_text(&self, g: &EmbeddedGraph) -> String {
        match self {
            StrategyTree::Leaf(w) => w.to_text(g),
            StrategyTree::Branch { slot, children, .. } => {
                let mut out = format!("when {slot}\n");
                for (action, child) in children {
                    out.push_str(&format!("  if {action}\n"));
                    out.push_str(&indent(&child.to_text(g), 4));
                }
                out
            }
        }
    }
}

/// Passes decisions through while noting every slot asked for.
struct Recording<'a> {
    inner: &'a Table,
    used: RefCell<BTreeSet<Slot>>,
}

impl Decider for Recording<'_> {
    fn decide(&self, arena: &Arena, view: &View) -> Result<Action, DecideError> {
        self.used.borrow_mut().insert(view.slot());
        self.inner.decide(arena, view)
    }
}

enum Search {
    /// The tree, plus the slots of the enclosing table it relies on.
    Refuted(StrategyTree, BTreeSet<Slot>),
    /// The table beat the adversary; `open` when only because of the bound.
    Survived { table: Table, open: bool },
}

struct Game<'a> {
    product: Product<'a>,
    model: RobotModel,
    max_depth: usize,
    explored: usize,
}

impl Game<'_> {
    fn refute(&mut self, table: &mut Table) -> Result<Search, CheckError> {
        let ex = explore(&self.product, table, self.max_depth)?;
        self.explored += ex.nodes.len();
        if let Some(w) = find_witness(&self.product, &ex, table)? {
            let deps = self.dependencies(&w, table);
            return Ok(Search::Refuted(StrategyTree::Leaf(w), deps));
        }
        let Some((slot, view)) = ex.unbound.first().cloned() else {
            return Ok(Search::Survived { table: table.clone(), open: ex.frontier_open });
        };
        let mut children = Vec::new();
        let mut deps = BTreeSet::new();
        for action in slot_domain(&view, self.model) {
            table.insert(slot.clone(), action);
            let result = self.refute(table)?;
            table.entries.remove(&slot);
            match result {
                Search::Refuted(tree, used) if !used.contains(&slot) => return Ok(Search::Refuted(tree, used)),
                Search::Refuted(tree, used) => {
                    deps.extend(used);
                    children.push((action, tree));
                }
                survived => return Ok(survived),
            }
        }
        deps.remove(&slot);
        Ok(Search::Refuted(StrategyTree::Branch { slot, view, children }, deps))
    }

    /// Slots the witness consults on replay; every bound slot if the replay
    /// cannot be completed, which only costs pruning.
    fn dependencies(&self, w: &Witness, table: &Table) -> BTreeSet<Slot> {
        let rec = Recording { inner: table, used: RefCell::new(BTreeSet::new()) };
        match w.replay(self.product.problem, self.model, self.product.engine.scheduler, self.product.window, &rec) {
            Ok(_) => rec.used.into_inner(),
            Err(_) => table.entries.keys().cloned().collect(),
        }
    }
}

/// Searches for an adversary strategy defeating every algorithm for `tag`
/// robots with at most `bounds.palette` colors (one color for OBLOT).
pub fn verify_impossibility(
    problem: &ProblemSpec,
    tag: ModelTag,
    scheduler: Scheduler,
    bounds: Bounds,
) -> Result<Certificate, CheckError> {
    let palette = if tag == ModelTag::Oblot { 1 } else { bounds.palette };
    let model = RobotModel::new(tag, palette)?;
    let bounds = Bounds { palette, ..bounds };
    bounds.validate(scheduler, problem.robots())?;
    let engine = Engine::new(&problem.arena, model, scheduler, problem.faults);
    let mut game = Game {
        product: Product { engine, problem, window: bounds.window },
        model,
        max_depth: bounds.max_depth,
        explored: 0,
    };
    let outcome = match game.refute(&mut Table::new())? {
        Search::Refuted(tree, _) => Outcome::Impossible(tree),
        Search::Survived { table, open } => Outcome::Inconclusive {
            reason: if open {
                format!("an algorithm survives the first {} steps", bounds.max_depth)
            } else {
                "an algorithm solves every fair execution".into()
            },
            candidate: Some(table),
        },
    };
    Ok(Certificate {
        outcome,
        explored: game.explored,
        bounds,
        problem: problem.name.to_string(),
        model,
        scheduler,
        algorithm: None,
    })
}
