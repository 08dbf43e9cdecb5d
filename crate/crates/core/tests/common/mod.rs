//! Independent oracles shared by the property suites and the acceptance run.
//!
//! Everything here is written against the public API only and deliberately
//! avoids the library's own shortcuts (backtracking symmetry search,
//! canonical quotienting) so that agreement means something.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use lcm_core::algorithms::{builtin_for, slot_domain, view_universe, Algorithm, Table};
use lcm_core::checker::{verify_solution, Bounds, Outcome, WitnessKind};
use lcm_core::engine::{Activation, Configuration, Decider, Engine, ExecState, ModelTag, RobotModel, Scheduler};
use lcm_core::graph::{Arena, Cell, Decoration, EmbeddedGraph, SymmetryMode, VertexId};
use lcm_core::problems::{bundled_problem, MonitorState, ProblemName, ProblemSpec, Verdict};

pub type Check = Result<(), String>;

/// Each builtin with the problem and model it was written for.
pub fn builtins() -> Vec<(ProblemSpec, RobotModel, Algorithm)> {
    let cases = [
        (ProblemName::Suir, "suir-oblot", RobotModel::oblot()),
        (ProblemName::MoveOnce, "move-once-fsta", RobotModel::new(ModelTag::Fsta, 2).unwrap()),
        (ProblemName::Osp, "algo-osp-fcom", RobotModel::new(ModelTag::Fcom, 4).unwrap()),
        (ProblemName::NegIl, "neg-il-fcom", RobotModel::new(ModelTag::Fcom, 2).unwrap()),
    ];
    cases
        .into_iter()
        .map(|(p, name, m)| {
            let problem = bundled_problem(p);
            let algo = builtin_for(name, &problem).unwrap();
            (problem, m, algo)
        })
        .collect()
}

/// Every table over the views of `p`, in odometer order.
pub fn all_tables(p: &ProblemSpec, model: RobotModel) -> Vec<Algorithm> {
    let views = view_universe(p, model);
    let domains: Vec<_> = views.iter().map(|v| slot_domain(v, model)).collect();
    let mut idx = vec![0; views.len()];
    let mut out = Vec::new();
    'outer: loop {
        let mut t = Table::new();
        for (i, v) in views.iter().enumerate() {
            t.insert(v.slot(), domains[i][idx[i]]);
        }
        out.push(Algorithm::Table(t));
        for i in 0..idx.len() {
            idx[i] += 1;
            if idx[i] < domains[i].len() {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }
    out
}

/// A total table over every view of `p`, picking actions by index.
pub fn table_from(p: &ProblemSpec, model: RobotModel, picks: &[usize]) -> Algorithm {
    let mut table = Table::new();
    for (i, view) in view_universe(p, model).iter().enumerate() {
        let domain = slot_domain(view, model);
        table.insert(view.slot(), domain[picks[i % picks.len()] % domain.len()]);
    }
    Algorithm::Table(table)
}

/// Compares the checker to the naive explorer on one instance and replays
/// whatever witness the checker produced. Returns the naive state count.
pub fn agree(
    p: &ProblemSpec,
    model: RobotModel,
    scheduler: Scheduler,
    window: usize,
    algo: &Algorithm,
) -> Result<usize, String> {
    let (naive, states) = naive_check(p, model, scheduler, window, algo);
    let cert = verify_solution(algo, p, model, scheduler, Bounds::new(80, window, 1)).map_err(|e| e.to_string())?;
    let ours = match &cert.outcome {
        Outcome::Solved { .. } => NaiveVerdict::Solved,
        Outcome::Violated(w) => {
            let replayed = w.replay(p, model, scheduler, window, algo).map_err(|e| e.to_string())?;
            if !matches!(replayed, Verdict::Violated { .. }) {
                return Err(format!("witness replays to {replayed}"));
            }
            match w.kind {
                WitnessKind::Violation { .. } => NaiveVerdict::Violated,
                _ => NaiveVerdict::Stuck,
            }
        }
        other => return Err(format!("unexpected outcome {other:?}")),
    };
    if ours != naive {
        return Err(format!("checker says {ours:?}, naive explorer {naive:?} ({states} states)"));
    }
    Ok(states)
}

pub fn all_problems() -> Vec<ProblemSpec> {
    ProblemName::ALL.iter().map(|&p| bundled_problem(p)).collect()
}

/// Every adjacency-preserving vertex permutation, by plain enumeration.
pub fn brute_force_automorphisms(g: &EmbeddedGraph) -> BTreeSet<Vec<VertexId>> {
    fn permute(prefix: &mut Vec<VertexId>, used: &mut Vec<bool>, g: &EmbeddedGraph, out: &mut BTreeSet<Vec<VertexId>>) {
        let n = g.len();
        if prefix.len() == n {
            out.insert(prefix.clone());
            return;
        }
        let v = prefix.len();
        for c in 0..n {
            // prune on adjacency with already-placed vertices only
            if used[c] || (0..v).any(|w| g.adjacent(v, w) != g.adjacent(c, prefix[w])) {
                continue;
            }
            used[c] = true;
            prefix.push(c);
            permute(prefix, used, g, out);
            prefix.pop();
            used[c] = false;
        }
    }
    let mut out = BTreeSet::new();
    permute(&mut Vec::new(), &mut vec![false; g.len()], g, &mut out);
    out
}

/// The arena group is exactly the automorphism group, and is a group.
pub fn check_group(arena: &Arena) -> Check {
    let g = arena.graph();
    let group: BTreeSet<Vec<VertexId>> = arena.group().iter().map(|s| s.permutation.clone()).collect();
    let oracle = brute_force_automorphisms(g);
    if group != oracle {
        return Err(format!("group has {} elements, brute force finds {}", group.len(), oracle.len()));
    }
    let identity: Vec<VertexId> = (0..g.len()).collect();
    if !group.contains(&identity) {
        return Err("identity missing".into());
    }
    for a in arena.group() {
        if !group.contains(&a.inverse().permutation) {
            return Err(format!("not closed under inverse: {:?}", a.permutation));
        }
        for b in arena.group() {
            if !group.contains(&a.compose(b).permutation) {
                return Err("not closed under composition".into());
            }
        }
    }
    Ok(())
}

pub fn act(perm: &[VertexId], deco: &Decoration) -> Decoration {
    let mut out = vec![Cell::default(); deco.len()];
    for (v, cell) in deco.iter().enumerate() {
        out[perm[v]] = cell.clone();
    }
    out
}

/// Decorations of up to `robots` robots with up to `colors` lights, seen by
/// robot 0 (whose own light is therefore not part of the decoration).
pub fn small_situations(g: &EmbeddedGraph, robots: usize, colors: u8) -> Vec<(Decoration, VertexId)> {
    let n = g.len();
    let mut out = Vec::new();
    let model = RobotModel::new(ModelTag::Lumi, colors.max(2)).unwrap();
    for k in 1..=robots {
        let mut placement = vec![0; k];
        loop {
            let mut cols = vec![0; k];
            loop {
                let colors8 = cols.iter().map(|&c| c as u8).collect();
                let cfg = Configuration { placement: placement.clone(), colors: colors8, crashed: vec![false; k] };
                out.push((cfg.decoration(n, 0, model), placement[0]));
                if !bump(&mut cols, colors as usize) {
                    break;
                }
            }
            if !bump(&mut placement, n) {
                break;
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Odometer increment; false once it wraps.
fn bump(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Keys are invariant under the group, and equal keys only arise from
/// situations the group relates.
pub fn check_keys(arena: &Arena, situations: &[(Decoration, VertexId)]) -> Check {
    let group: Vec<Vec<VertexId>> = brute_force_automorphisms(arena.graph()).into_iter().collect();
    let mut reps: HashMap<String, (Decoration, VertexId)> = HashMap::new();
    for (deco, obs) in situations {
        let key = arena.canonical_key(deco, *obs);
        for perm in &group {
            let moved = arena.canonical_key(&act(perm, deco), perm[*obs]);
            if moved != key {
                return Err(format!("key not invariant: {key} vs {moved}"));
            }
        }
        match reps.get(&key.to_string()) {
            None => {
                reps.insert(key.to_string(), (deco.clone(), *obs));
            }
            Some((rdeco, robs)) => {
                let related = group.iter().any(|p| p[*obs] == *robs && &act(p, deco) == rdeco);
                if !related {
                    return Err(format!("unrelated situations collide on key {key}"));
                }
            }
        }
    }
    Ok(())
}

/// Every reachable execution state under `scheduler` (breadth-first, capped).
pub fn reachable(engine: &Engine<'_>, problem: &ProblemSpec, algo: &dyn Decider, cap: usize) -> Vec<ExecState> {
    let mut seen = HashSet::new();
    let mut queue: VecDeque<ExecState> = problem.initial.iter().cloned().map(ExecState::new).collect();
    let mut out = Vec::new();
    while let Some(s) = queue.pop_front() {
        let key = (s.config.clone(), s.pending.clone());
        if !seen.insert(key) || out.len() >= cap {
            continue;
        }
        if let Ok(choices) = engine.enumerate_choices(&s, algo) {
            for c in choices {
                if let Ok(next) = engine.step(&s, &c, algo) {
                    queue.push_back(ExecState { round: 0, ..next });
                }
            }
        }
        out.push(s);
    }
    out
}

/// Other robots' lights are invisible without external lights, one's own
/// light without internal memory.
pub fn check_visibility(problem: &ProblemSpec, tag: ModelTag, configs: &[Configuration]) -> Check {
    let palette = if tag == ModelTag::Oblot { 1 } else { 2 };
    let model = RobotModel::new(tag, palette).unwrap();
    let engine = Engine::new(&problem.arena, model, Scheduler::Fsync, 0);
    for cfg in configs {
        for r in 0..cfg.robots() {
            let view = engine.observe(cfg, r).map_err(|e| e.to_string())?;
            if tag == ModelTag::Oblot {
                if view.own_color.is_some() || view.key.cells.iter().any(|c| !c.colors.is_empty()) {
                    return Err(format!("OBLOT view carries colors: {}", view.key));
                }
                continue;
            }
            for s in 0..cfg.robots() {
                let mut flipped = cfg.clone();
                flipped.colors[s] = 1 - flipped.colors[s].min(1);
                let after = engine.observe(&flipped, r).map_err(|e| e.to_string())?;
                let visible = if s == r { tag.sees_own_color() } else { tag.sees_others_colors() };
                if !visible && after != view {
                    return Err(format!("{tag}: robot {r} noticed robot {s}'s light"));
                }
                if visible && after == view {
                    return Err(format!("{tag}: robot {r} missed robot {s}'s light"));
                }
            }
        }
    }
    Ok(())
}

/// Every FSYNC move is an SSYNC move with the same outcome.
pub fn check_fsync_in_ssync(problem: &ProblemSpec, model: RobotModel, algo: &dyn Decider) -> Check {
    let f = Engine::new(&problem.arena, model, Scheduler::Fsync, problem.faults);
    let s = Engine::new(&problem.arena, model, Scheduler::Ssync, problem.faults);
    for state in reachable(&f, problem, algo, 500) {
        let fc = f.enumerate_choices(&state, algo).map_err(|e| e.to_string())?;
        let sc = s.enumerate_choices(&state, algo).map_err(|e| e.to_string())?;
        for c in &fc {
            if !sc.contains(c) {
                return Err(format!("FSYNC choice {} missing under SSYNC", c.describe(problem.graph())));
            }
            let a = f.step(&state, c, algo).map_err(|e| e.to_string())?;
            let b = s.step(&state, c, algo).map_err(|e| e.to_string())?;
            if a.config != b.config {
                return Err("same choice, different outcome".into());
            }
        }
    }
    Ok(())
}

/// Configuration with robot ids forgotten.
pub fn anonymous(state: &ExecState) -> Vec<String> {
    let c = &state.config;
    let mut out: Vec<String> = (0..c.robots())
        .map(|r| format!("{}:{}:{}:{:?}", c.placement[r], c.colors[r], c.crashed[r], state.pending[r]))
        .collect();
    out.sort();
    out
}

pub fn permute_state(state: &ExecState, perm: &[usize]) -> ExecState {
    let n = perm.len();
    let mut config = state.config.clone();
    let mut pending = state.pending.clone();
    for r in 0..n {
        config.placement[perm[r]] = state.config.placement[r];
        config.colors[perm[r]] = state.config.colors[r];
        config.crashed[perm[r]] = state.config.crashed[r];
        pending[perm[r]] = state.pending[r].clone();
    }
    ExecState { config, pending, round: state.round }
}

/// Renaming robots changes nothing observable: successor sets agree up to ids.
pub fn check_anonymity(
    problem: &ProblemSpec,
    model: RobotModel,
    scheduler: Scheduler,
    algo: &dyn Decider,
    perm: &[usize],
) -> Check {
    let engine = Engine::new(&problem.arena, model, scheduler, problem.faults);
    let succ = |s: &ExecState| -> Result<BTreeSet<Vec<String>>, String> {
        let choices = engine.enumerate_choices(s, algo).map_err(|e| e.to_string())?;
        choices.iter().map(|c| engine.step(s, c, algo).map(|n| anonymous(&n)).map_err(|e| e.to_string())).collect()
    };
    for state in reachable(&engine, problem, algo, 300) {
        let renamed = permute_state(&state, perm);
        if succ(&state)? != succ(&renamed)? {
            return Err(format!(
                "renaming robots changed the successors of {}",
                state.config.describe_placement(problem.graph())
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NaiveVerdict {
    Solved,
    Violated,
    Stuck,
}

/// Explores the concrete (unquotiented) product of executions, fairness
/// counters and monitor, then looks for violations and for cycles that stay
/// unsatisfied without progress. Returns the verdict and the state count.
pub fn naive_check(
    problem: &ProblemSpec,
    model: RobotModel,
    scheduler: Scheduler,
    window: usize,
    algo: &Algorithm,
) -> (NaiveVerdict, usize) {
    type Node = (Configuration, Vec<Option<lcm_core::engine::Pending>>, Vec<usize>, MonitorState);
    let engine = Engine::new(&problem.arena, model, scheduler, problem.faults);
    let monitor = problem.monitor();
    let mut index: HashMap<Node, usize> = HashMap::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut edges: Vec<Vec<(usize, bool)>> = Vec::new();
    let mut queue = VecDeque::new();
    for cfg in &problem.initial {
        let n = cfg.robots();
        let node: Node = (cfg.clone(), vec![None; n], vec![0; n], monitor.init(cfg).unwrap());
        if !index.contains_key(&node) {
            index.insert(node.clone(), nodes.len());
            nodes.push(node);
            edges.push(Vec::new());
            queue.push_back(nodes.len() - 1);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (cfg, pending, idle, mstate) = nodes[i].clone();
        let exec = ExecState { config: cfg.clone(), pending: pending.clone(), round: 0 };
        for choice in engine.enumerate_choices(&exec, algo).expect("total algorithm") {
            let mut next_idle = idle.clone();
            let mut starved = false;
            for r in 0..cfg.robots() {
                let active = match &choice.activation {
                    Activation::Round(rs) => rs.contains(&r),
                    Activation::Event(e) => e.robot() == r,
                };
                next_idle[r] = if cfg.crashed[r] || choice.crash == Some(r) || active { 0 } else { idle[r] + 1 };
                starved |= scheduler != Scheduler::Fsync && next_idle[r] >= window;
            }
            if starved {
                continue;
            }
            let next = engine.step(&exec, &choice, algo).expect("legal choice");
            let Ok(m) = monitor.advance(&mstate, &cfg, &next.config) else {
                return (NaiveVerdict::Violated, nodes.len());
            };
            let progress = m != mstate;
            let node: Node = (next.config, next.pending, next_idle, m);
            let j = *index.entry(node.clone()).or_insert_with(|| {
                nodes.push(node);
                edges.push(Vec::new());
                queue.push_back(nodes.len() - 1);
                nodes.len() - 1
            });
            edges[i].push((j, progress));
        }
    }
    let bad: Vec<bool> =
        nodes.iter().map(|(cfg, _, _, m)| problem.is_perpetual() || !monitor.is_satisfied(m, cfg)).collect();
    // a node is on a bad cycle if it can reach itself through bad nodes
    // along non-progress edges
    for start in 0..nodes.len() {
        if !bad[start] {
            continue;
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &(v, progress) in &edges[u] {
                if progress || !bad[v] {
                    continue;
                }
                if v == start {
                    return (NaiveVerdict::Stuck, nodes.len());
                }
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    (NaiveVerdict::Solved, nodes.len())
}

/// The arena of `problem` under the other symmetry mode.
pub fn isometric(problem: &ProblemSpec) -> Arena {
    Arena::new(problem.graph().clone(), SymmetryMode::Isometric)
}
