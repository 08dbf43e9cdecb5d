//! The product of an execution with its problem monitor and fairness counters,
//! quotiented by robot anonymity.

use std::collections::HashMap;

use crate::engine::{
    pick_product, Activation, AdversaryChoice, Configuration, DecideError, Decider, Engine, EngineError, Event,
    ExecState, Pending, RobotId, Scheduler, Slot, View,
};
use crate::problems::{MonitorState, ProblemSpec};

use super::CheckError;

/// An execution state together with everything the verdict depends on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductState {
    pub config: Configuration,
    pub pending: Vec<Option<Pending>>,
    /// Rounds (or ASYNC events) since each robot was last activated.
    pub idle: Vec<u8>,
    pub monitor: MonitorState,
}

impl ProductState {
    pub fn exec(&self) -> ExecState {
        ExecState { config: self.config.clone(), pending: self.pending.clone(), round: 0 }
    }

    /// Sorts robots by their full record. `order[i]` is the old id of new robot `i`.
    pub fn canonical(&self) -> (ProductState, Vec<RobotId>) {
        let n = self.config.robots();
        let record = |r: RobotId| {
            (
                self.config.placement[r],
                self.config.colors[r],
                self.config.crashed[r],
                &self.pending[r],
                self.idle[r],
                self.monitor.robots[r],
            )
        };
        let mut order: Vec<RobotId> = (0..n).collect();
        order.sort_by(|&a, &b| record(a).cmp(&record(b)));
        let pick = |i: usize| order[i];
        let state = ProductState {
            config: Configuration {
                placement: (0..n).map(|i| self.config.placement[pick(i)]).collect(),
                colors: (0..n).map(|i| self.config.colors[pick(i)]).collect(),
                crashed: (0..n).map(|i| self.config.crashed[pick(i)]).collect(),
            },
            pending: (0..n).map(|i| self.pending[pick(i)].clone()).collect(),
            idle: (0..n).map(|i| self.idle[pick(i)]).collect(),
            monitor: MonitorState {
                robots: (0..n).map(|i| self.monitor.robots[pick(i)]).collect(),
                ..self.monitor.clone()
            },
        };
        (state, order)
    }
}

/// Renames robots in a choice: robot `r` becomes `map[r]`.
pub fn relabel(choice: &AdversaryChoice, map: &[RobotId]) -> AdversaryChoice {
    let activation = match &choice.activation {
        Activation::Round(rs) => {
            let mut rs: Vec<RobotId> = rs.iter().map(|&r| map[r]).collect();
            rs.sort_unstable();
            Activation::Round(rs)
        }
        Activation::Event(ev) => Activation::Event(match *ev {
            Event::Look(r) => Event::Look(map[r]),
            #[cfg(not(feature = "split-act"))]
            Event::Act(r) => Event::Act(map[r]),
            #[cfg(feature = "split-act")]
            Event::Paint(r) => Event::Paint(map[r]),
            #[cfg(feature = "split-act")]
            Event::Hop(r) => Event::Hop(map[r]),
        }),
    };
    let mut picks: Vec<(RobotId, usize)> = choice.picks.iter().map(|&(r, v)| (map[r], v)).collect();
    picks.sort_unstable();
    AdversaryChoice { activation, crash: choice.crash.map(|c| map[c]), picks }
}

#[derive(Debug, Clone)]
pub enum Transition {
    Next { state: ProductState, progress: bool },
    Violation(String),
}

/// Successors of one state. Schedules needing an unbound table slot are left
/// out; their slots are reported in `unbound`.
#[derive(Debug, Default)]
pub struct Expansion {
    pub edges: Vec<(AdversaryChoice, Transition)>,
    pub unbound: Vec<(Slot, View)>,
}

#[derive(Debug, Clone, Copy)]
pub struct Product<'a> {
    pub engine: Engine<'a>,
    pub problem: &'a ProblemSpec,
    pub window: usize,
}

impl<'a> Product<'a> {
    pub fn initial_states(&self) -> Result<Vec<ProductState>, CheckError> {
        let monitor = self.problem.monitor();
        self.problem
            .initial
            .iter()
            .map(|config| {
                let n = config.robots();
                Ok(ProductState {
                    config: config.clone(),
                    pending: vec![None; n],
                    idle: vec![0; n],
                    monitor: monitor.init(config)?,
                })
            })
            .collect()
    }

    /// Idle counters after a scheduling step, or `None` when the step would
    /// starve some live robot beyond the window.
    fn next_idle(&self, s: &ProductState, activation: &Activation, crash: Option<RobotId>) -> Option<Vec<u8>> {
        let config = &s.config;
        let mut idle = s.idle.clone();
        for r in 0..config.robots() {
            if config.crashed[r] || crash == Some(r) {
                idle[r] = 0;
                continue;
            }
            let active = match activation {
                Activation::Round(rs) => rs.contains(&r),
                Activation::Event(ev) => ev.robot() == r,
            };
            idle[r] = if active { 0 } else { idle[r].saturating_add(1) };
            if self.engine.scheduler != Scheduler::Fsync && idle[r] as usize >= self.window {
                return None;
            }
        }
        Some(idle)
    }

    fn finish(&self, s: &ProductState, next: ExecState, idle: Vec<u8>) -> Transition {
        match self.problem.monitor().advance(&s.monitor, &s.config, &next.config) {
            Err(reason) => Transition::Violation(reason),
            Ok(monitor) => {
                let progress = monitor != s.monitor;
                Transition::Next {
                    state: ProductState { config: next.config, pending: next.pending, idle, monitor },
                    progress,
                }
            }
        }
    }

    pub fn expand(&self, s: &ProductState, algo: &dyn Decider) -> Result<Expansion, CheckError> {
        let exec = s.exec();
        let mut out = Expansion::default();
        'schedule: for (activation, crash) in self.engine.schedules(&exec) {
            let Some(idle) = self.next_idle(s, &activation, crash) else {
                continue;
            };
            let mut seen = s.config.clone();
            if let Some(c) = crash {
                seen.crashed[c] = true;
            }
            let mut decisions = Vec::new();
            for r in self.engine.acting_robots(&exec, &activation, crash) {
                match self.engine.decide(&seen, r, algo) {
                    Ok(d) => decisions.push(d),
                    Err(EngineError::Decide(DecideError::Unbound(slot))) => {
                        if !out.unbound.iter().any(|(s, _)| *s == slot) {
                            let view = self.engine.observe(&seen, r)?;
                            out.unbound.push((slot, view));
                        }
                        continue 'schedule;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let ambiguous = self.engine.ambiguous_moves(&exec, &activation, &decisions);
            for picks in pick_product(&ambiguous) {
                let choice = AdversaryChoice { activation: activation.clone(), crash, picks };
                let next = self.engine.step(&exec, &choice, algo)?;
                out.edges.push((choice, self.finish(s, next, idle.clone())));
            }
        }
        Ok(out)
    }

    /// Applies one concrete choice, enforcing the fairness window.
    pub fn apply(
        &self,
        s: &ProductState,
        choice: &AdversaryChoice,
        algo: &dyn Decider,
    ) -> Result<Transition, CheckError> {
        let idle = self.next_idle(s, &choice.activation, choice.crash).ok_or_else(|| {
            CheckError::Replay(format!("choice `{}` breaks the fairness window", choice.describe(self.engine.graph())))
        })?;
        let next = self.engine.step(&s.exec(), choice, algo)?;
        Ok(self.finish(s, next, idle))
    }

    pub fn satisfied(&self, s: &ProductState) -> bool {
        self.problem.monitor().is_satisfied(&s.monitor, &s.config)
    }
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub to: usize,
    pub progress: bool,
    pub choice: AdversaryChoice,
}

/// Breadth-first exploration of the quotient product graph.
#[derive(Debug, Default)]
pub struct Exploration {
    pub nodes: Vec<ProductState>,
    pub depth: Vec<usize>,
    pub parent: Vec<Option<(usize, AdversaryChoice)>>,
    pub edges: Vec<Vec<Edge>>,
    pub satisfied: Vec<bool>,
    /// `(root node, concrete initial state)`.
    pub roots: Vec<(usize, ProductState)>,
    pub violation: Option<(usize, AdversaryChoice, String)>,
    pub frontier_open: bool,
    pub unbound: Vec<(Slot, View)>,
}

pub fn explore(product: &Product<'_>, algo: &dyn Decider, max_depth: usize) -> Result<Exploration, CheckError> {
    let mut ex = Exploration::default();
    let mut index: HashMap<ProductState, usize> = HashMap::new();
    for concrete in product.initial_states()? {
        let (canon, _) = concrete.canonical();
        let id = *index.entry(canon.clone()).or_insert_with(|| {
            ex.nodes.push(canon.clone());
            ex.depth.push(0);
            ex.parent.push(None);
            ex.edges.push(Vec::new());
            ex.satisfied.push(product.satisfied(&canon));
            ex.nodes.len() - 1
        });
        ex.roots.push((id, concrete));
    }
    let mut cursor = 0;
    while cursor < ex.nodes.len() {
        let id = cursor;
        cursor += 1;
        let at_bound = ex.depth[id] >= max_depth;
        let state = ex.nodes[id].clone();
        let expansion = product.expand(&state, algo)?;
        for (slot, view) in expansion.unbound {
            if !ex.unbound.iter().any(|(s, _)| *s == slot) {
                ex.unbound.push((slot, view));
            }
        }
        for (choice, transition) in expansion.edges {
            match transition {
                Transition::Violation(_) if at_bound => ex.frontier_open = true,
                Transition::Violation(reason) => {
                    ex.violation = Some((id, choice, reason));
                    return Ok(ex);
                }
                Transition::Next { state: next, progress } => {
                    let (canon, _) = next.canonical();
                    let target = match index.get(&canon) {
                        Some(&t) => t,
                        None if at_bound => {
                            ex.frontier_open = true;
                            continue;
                        }
                        None => {
                            ex.nodes.push(canon.clone());
                            ex.depth.push(ex.depth[id] + 1);
                            ex.parent.push(Some((id, choice.clone())));
                            ex.edges.push(Vec::new());
                            ex.satisfied.push(product.satisfied(&canon));
                            index.insert(canon, ex.nodes.len() - 1);
                            ex.nodes.len() - 1
                        }
                    };
                    ex.edges[id].push(Edge { to: target, progress, choice });
                }
            }
        }
    }
    Ok(ex)
}

impl Exploration {
    /// Choices from a root to `node`, following BFS parents.
    pub fn path_to(&self, node: usize) -> (usize, Vec<AdversaryChoice>) {
        let mut choices = Vec::new();
        let mut at = node;
        while let Some((p, c)) = &self.parent[at] {
            choices.push(c.clone());
            at = *p;
        }
        choices.reverse();
        (at, choices)
    }

    /// Strongly connected components of the subgraph kept by `keep_edge`,
    /// restricted to nodes kept by `keep_node`; only nontrivial ones.
    pub fn cyclic_components(
        &self,
        keep_node: impl Fn(usize) -> bool,
        keep_edge: impl Fn(&Edge) -> bool,
    ) -> Vec<Vec<usize>> {
        let n = self.edges.len();
        let succ = |v: usize| -> Vec<usize> {
            if !keep_node(v) {
                return Vec::new();
            }
            self.edges[v].iter().filter(|e| keep_edge(e) && keep_node(e.to)).map(|e| e.to).collect()
        };
        // iterative Tarjan
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut next_index = 0;
        let mut out = Vec::new();
        for root in 0..n {
            if index[root] != usize::MAX || !keep_node(root) {
                continue;
            }
            let mut call: Vec<(usize, Vec<usize>, usize)> = vec![(root, succ(root), 0)];
            index[root] = next_index;
            low[root] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some((v, ws, i)) = call.last_mut() {
                if *i < ws.len() {
                    let w = ws[*i];
                    *i += 1;
                    if index[w] == usize::MAX {
                        index[w] = next_index;
                        low[w] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        let sw = succ(w);
                        call.push((w, sw, 0));
                    } else if on_stack[w] {
                        let v = *v;
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    let v = *v;
                    call.pop();
                    if let Some((u, _, _)) = call.last() {
                        low[*u] = low[*u].min(low[v]);
                    }
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().unwrap();
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        let self_loop = comp.len() == 1 && succ(v).contains(&v);
                        if comp.len() > 1 || self_loop {
                            comp.sort_unstable();
                            out.push(comp);
                        }
                    }
                }
            }
        }
        out
    }

    /// Shortest cycle from `start` back to itself inside `members`, using
    /// edges accepted by `keep_edge`; when `through` is set, the cycle uses
    /// that edge (source node, edge index).
    pub fn cycle_from(
        &self,
        start: usize,
        members: &[usize],
        keep_edge: impl Fn(&Edge) -> bool,
        through: Option<(usize, usize)>,
    ) -> Option<Vec<AdversaryChoice>> {
        let inside = |v: usize| members.binary_search(&v).is_ok();
        let bfs = |from: usize, to: usize, allow_empty: bool| -> Option<Vec<AdversaryChoice>> {
            if allow_empty && from == to {
                return Some(Vec::new());
            }
            let mut prev: HashMap<usize, (usize, usize)> = HashMap::new();
            let mut queue = std::collections::VecDeque::from([from]);
            let mut seen = std::collections::HashSet::from([from]);
            while let Some(v) = queue.pop_front() {
                for (k, e) in self.edges[v].iter().enumerate() {
                    if !keep_edge(e) || !inside(e.to) {
                        continue;
                    }
                    if e.to == to {
                        let mut path = vec![e.choice.clone()];
                        let mut at = v;
                        while at != from {
                            let (p, pk) = prev[&at];
                            path.push(self.edges[p][pk].choice.clone());
                            at = p;
                        }
                        path.reverse();
                        return Some(path);
                    }
                    if seen.insert(e.to) {
                        prev.insert(e.to, (v, k));
                        queue.push_back(e.to);
                    }
                }
            }
            None
        };
        match through {
            None => bfs(start, start, false),
            Some((src, k)) => {
                let edge = &self.edges[src][k];
                let mut path = bfs(start, src, true)?;
                path.push(edge.choice.clone());
                path.extend(bfs(edge.to, start, true)?);
                Some(path)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::builtin_for;
    use crate::engine::{Engine, RobotModel};
    use crate::problems::{bundled_problem, ProblemName};

    fn tiny(edges: &[(usize, usize, bool)], n: usize) -> Exploration {
        let mut ex = Exploration { edges: vec![Vec::new(); n], ..Default::default() };
        for (k, &(from, to, progress)) in edges.iter().enumerate() {
            ex.edges[from].push(Edge { to, progress, choice: AdversaryChoice::round(vec![k]) });
        }
        ex
    }

    #[test]
    fn canonical_form_forgets_robot_ids() {
        let p = bundled_problem(ProblemName::Osp);
        let product =
            Product { engine: Engine::new(&p.arena, RobotModel::oblot(), Scheduler::Ssync, 0), problem: &p, window: 3 };
        let s = product.initial_states().unwrap().remove(0);
        let (canon, order) = s.canonical();
        assert_eq!(canon.canonical().0, canon);
        let mut swapped = s.clone();
        swapped.config.placement.swap(0, 2);
        swapped.idle = vec![1, 0, 2];
        swapped.monitor.robots.swap(0, 2);
        let mut unswapped = s.clone();
        unswapped.idle = vec![2, 0, 1];
        assert_eq!(swapped.canonical().0, unswapped.canonical().0);
        // `order` lists old ids
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn relabel_renames_every_field() {
        let c = AdversaryChoice::round(vec![0, 2]).with_crash(2).with_pick(0, 7);
        let r = relabel(&c, &[2, 1, 0]);
        assert_eq!(r, AdversaryChoice::round(vec![0, 2]).with_crash(0).with_pick(2, 7));
    }

    #[test]
    fn window_prunes_starving_schedules() {
        let p = bundled_problem(ProblemName::Suir);
        let algo = builtin_for("suir-oblot", &p).unwrap();
        let engine = Engine::new(&p.arena, RobotModel::oblot(), Scheduler::Ssync, 0);
        let product = Product { engine, problem: &p, window: 2 };
        let mut s = product.initial_states().unwrap().remove(0);
        assert_eq!(product.expand(&s, &algo).unwrap().edges.len(), 3);
        // robot 1 already waited a round: it must be in the next activation
        s.idle = vec![0, 1];
        let ex = product.expand(&s, &algo).unwrap();
        assert_eq!(ex.edges.len(), 2);
        assert!(ex.edges.iter().all(|(c, _)| matches!(&c.activation, Activation::Round(rs) if rs.contains(&1))));
        assert!(product.apply(&s, &AdversaryChoice::round(vec![0]), &algo).is_err());
    }

    #[test]
    fn components_and_cycles() {
        // 0 -> 1 -> 2 -> 1, 2 -> 3 -> 3 (self loop), 4 isolated
        let ex = tiny(&[(0, 1, false), (1, 2, true), (2, 1, false), (2, 3, false), (3, 3, false)], 5);
        let mut comps = ex.cyclic_components(|_| true, |_| true);
        comps.sort();
        assert_eq!(comps, vec![vec![1, 2], vec![3]]);
        assert_eq!(ex.cyclic_components(|v| v != 3, |e| !e.progress), Vec::<Vec<usize>>::new());
        let cycle = ex.cycle_from(1, &[1, 2], |_| true, None).unwrap();
        assert_eq!(cycle.len(), 2);
        // through the progress edge 1 -> 2 (edge index 0 of node 1), from node 2
        let through = ex.cycle_from(2, &[1, 2], |_| true, Some((1, 0))).unwrap();
        assert_eq!(through, vec![AdversaryChoice::round(vec![2]), AdversaryChoice::round(vec![1])]);
        assert!(ex.cycle_from(0, &[0, 1, 2], |_| true, None).is_none());
    }

    #[test]
    fn paths_follow_bfs_parents() {
        let p = bundled_problem(ProblemName::MoveOnce);
        let algo = builtin_for("move-once-fsta", &p).unwrap();
        let model = RobotModel::new(crate::engine::ModelTag::Fsta, 2).unwrap();
        let product = Product { engine: Engine::new(&p.arena, model, Scheduler::Async, 0), problem: &p, window: 3 };
        let ex = explore(&product, &algo, 12).unwrap();
        assert!(ex.violation.is_none() && !ex.frontier_open);
        for node in 0..ex.nodes.len() {
            let (root, path) = ex.path_to(node);
            assert!(ex.roots.iter().any(|(r, _)| *r == root));
            assert_eq!(path.len(), ex.depth[node]);
        }
    }
}
