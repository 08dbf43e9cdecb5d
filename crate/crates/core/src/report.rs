//! Comparison table between model variants, derived from solvability verdicts.
//!
//! Facts are of two kinds: `solv(P, X)` — problem `P` is (not) solvable in
//! variant `X` — and `ge(X, Y)` — `X` is (not) at least as powerful as `Y`.
//! The closure starts from the supplied verdicts and the dominance axioms and
//! applies four rules until nothing changes:
//!
//! | rule         | premises                           | conclusion        |
//! |--------------|------------------------------------|-------------------|
//! | transitivity | `ge(X,Y)`, `ge(Y,Z)`               | `ge(X,Z)`         |
//! | upward       | `solv(P,Y)`, `ge(X,Y)`             | `solv(P,X)`       |
//! | downward     | `¬solv(P,X)`, `ge(X,Y)`            | `¬solv(P,Y)`      |
//! | separation   | `solv(P,X)`, `¬solv(P,Y)`          | `¬ge(Y,X)`        |
//!
//! Every fact keeps the justification it was first derived with, so each cell
//! of the table can be traced back to input verdicts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::engine::{ModelTag, Scheduler};
use crate::problems::ProblemName;
use crate::text::{records, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("contradiction on {fact}: derived both ways ({first}; {second})")]
    Contradiction { fact: String, first: String, second: String },
    #[error("bad provenance for {fact}: {reason}")]
    Provenance { fact: String, reason: String },
}

/// A model under a scheduler, e.g. `FSTA^S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variant {
    pub model: ModelTag,
    pub scheduler: Scheduler,
}

impl Variant {
    pub const fn new(model: ModelTag, scheduler: Scheduler) -> Self {
        Self { model, scheduler }
    }

    /// All twelve variants, scheduler-major (`F` first), models weakest first.
    pub fn all() -> Vec<Variant> {
        Scheduler::ALL.iter().flat_map(|&s| ModelTag::ALL.iter().map(move |&m| Variant::new(m, s))).collect()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.model, self.scheduler.letter())
    }
}

/// One input: `problem` is solvable (or not) in `variant`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LemmaVerdict {
    pub problem: ProblemName,
    pub variant: Variant,
    pub solvable: bool,
}

impl LemmaVerdict {
    pub fn new(problem: ProblemName, model: ModelTag, scheduler: Scheduler, solvable: bool) -> Self {
        Self { problem, variant: Variant::new(model, scheduler), solvable }
    }

    pub fn fact(&self) -> (Fact, bool) {
        (Fact::Solv(self.problem, self.variant), self.solvable)
    }
}

impl fmt::Display for LemmaVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.problem,
            self.variant.model,
            self.variant.scheduler.letter(),
            if self.solvable { "solvable" } else { "unsolvable" }
        )
    }
}

/// Parses one verdict per line: `<problem> <MODEL> <F|S|A> solvable|unsolvable`.
pub fn parse_verdicts(text: &str) -> Result<Vec<LemmaVerdict>, ReportError> {
    let mut out = Vec::new();
    for rec in records(text) {
        let problem = ProblemName::parse(rec.keyword()).map_err(|e| rec.tokens[0].error(e.to_string()))?;
        let args = rec.expect_args(3)?;
        let model: ModelTag = args[0].parse("a model tag")?;
        let scheduler: Scheduler = args[1].parse("a scheduler")?;
        let solvable = match args[2].text {
            "solvable" => true,
            "unsolvable" => false,
            other => return Err(args[2].error(format!("expected `solvable` or `unsolvable`, found `{other}`")).into()),
        };
        out.push(LemmaVerdict::new(problem, model, scheduler, solvable));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fact {
    /// First variant at least as powerful as the second.
    Ge(Variant, Variant),
    Solv(ProblemName, Variant),
}

impl Fact {
    pub fn render(&self, value: bool) -> String {
        let neg = if value { "" } else { "¬" };
        match self {
            Fact::Ge(x, y) => format!("{neg}ge({x}, {y})"),
            Fact::Solv(p, x) => format!("{neg}solv({p}, {x})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Transitivity,
    Upward,
    Downward,
    Separation,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Transitivity => "transitivity",
            Rule::Upward => "upward",
            Rule::Downward => "downward",
            Rule::Separation => "separation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Justification {
    /// Index into the input verdicts.
    Verdict(usize),
    Axiom(&'static str),
    Rule {
        rule: Rule,
        premises: Vec<(Fact, bool)>,
    },
}

impl fmt::Display for Justification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Justification::Verdict(i) => write!(f, "input verdict #{}", i + 1),
            Justification::Axiom(name) => write!(f, "axiom: {name}"),
            Justification::Rule { rule, premises } => {
                let ps: Vec<String> = premises.iter().map(|(fact, v)| fact.render(*v)).collect();
                write!(f, "{rule} from {}", ps.join(", "))
            }
        }
    }
}

const SCHEDULER_DOMINANCE: &str = "a stronger scheduler is at least as powerful";
const MODEL_DOMINANCE: &str = "more light capabilities are at least as powerful";
const REFLEXIVITY: &str = "reflexivity";
const FCOM_LUMI_F: &str = "FCOM^F ≡ LUMI^F (imported)";
const LUMI_S_A: &str = "LUMI^S ≡ LUMI^A (imported)";

/// The `ge` facts assumed without proof, each with its name.
pub fn axioms() -> Vec<(Fact, &'static str)> {
    use ModelTag::*;
    use Scheduler::*;
    let v = Variant::new;
    let mut out = Vec::new();
    for x in Variant::all() {
        out.push((Fact::Ge(x, x), REFLEXIVITY));
    }
    for m in ModelTag::ALL {
        out.push((Fact::Ge(v(m, Fsync), v(m, Ssync)), SCHEDULER_DOMINANCE));
        out.push((Fact::Ge(v(m, Ssync), v(m, Async)), SCHEDULER_DOMINANCE));
    }
    for k in Scheduler::ALL {
        for (hi, lo) in [(Lumi, Fsta), (Fsta, Oblot), (Lumi, Fcom), (Fcom, Oblot)] {
            out.push((Fact::Ge(v(hi, k), v(lo, k)), MODEL_DOMINANCE));
        }
    }
    for (a, b, name) in [(v(Fcom, Fsync), v(Lumi, Fsync), FCOM_LUMI_F), (v(Lumi, Ssync), v(Lumi, Async), LUMI_S_A)] {
        out.push((Fact::Ge(a, b), name));
        out.push((Fact::Ge(b, a), name));
    }
    out
}

/// Relation of a row variant to a column variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Greater,
    Less,
    Equivalent,
    Incomparable,
    Unresolved,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Greater => ">",
            Relation::Less => "<",
            Relation::Equivalent => "≡",
            Relation::Incomparable => "⊥",
            Relation::Unresolved => "?",
        }
    }

    pub fn flipped(self) -> Relation {
        match self {
            Relation::Greater => Relation::Less,
            Relation::Less => Relation::Greater,
            other => other,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone)]
pub struct RelationReport {
    pub verdicts: Vec<LemmaVerdict>,
    pub facts: BTreeMap<Fact, (bool, Justification)>,
}

impl RelationReport {
    pub fn value(&self, fact: Fact) -> Option<bool> {
        self.facts.get(&fact).map(|(v, _)| *v)
    }

    pub fn ge(&self, x: Variant, y: Variant) -> Option<bool> {
        self.value(Fact::Ge(x, y))
    }

    pub fn relation(&self, row: Variant, col: Variant) -> Relation {
        match (self.ge(row, col), self.ge(col, row)) {
            (Some(true), Some(true)) => Relation::Equivalent,
            (Some(true), Some(false)) => Relation::Greater,
            (Some(false), Some(true)) => Relation::Less,
            (Some(false), Some(false)) => Relation::Incomparable,
            _ => Relation::Unresolved,
        }
    }

    /// Input verdicts a fact ultimately rests on.
    pub fn cited_verdicts(&self, fact: Fact) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![fact];
        let mut seen = BTreeSet::new();
        while let Some(f) = stack.pop() {
            if !seen.insert(f) {
                continue;
            }
            match self.facts.get(&f).map(|(_, j)| j) {
                Some(Justification::Verdict(i)) => {
                    out.insert(*i);
                }
                Some(Justification::Rule { premises, .. }) => stack.extend(premises.iter().map(|(p, _)| *p)),
                _ => {}
            }
        }
        out
    }

    /// The derivation of a fact, one indented line per step.
    pub fn explain(&self, fact: Fact) -> String {
        let mut out = String::new();
        self.explain_into(fact, 0, &mut out);
        out
    }

    fn explain_into(&self, fact: Fact, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        match self.facts.get(&fact) {
            None => out.push_str(&format!("{pad}{} underived\n", fact.render(true))),
            Some((v, j)) => {
                out.push_str(&format!("{pad}{}  [{j}]\n", fact.render(*v)));
                if let Justification::Rule { premises, .. } = j {
                    for (p, _) in premises {
                        self.explain_into(*p, depth + 1, out);
                    }
                }
            }
        }
    }

    /// Checks that every recorded justification is sound: cited verdicts and
    /// axioms exist, and each rule's premises are present with the right values.
    pub fn check_provenance(&self) -> Result<(), ReportError> {
        let axioms = axioms();
        for (&fact, (value, just)) in &self.facts {
            let fail = |reason: String| ReportError::Provenance { fact: fact.render(*value), reason };
            match just {
                Justification::Verdict(i) => {
                    let v = self.verdicts.get(*i).ok_or_else(|| fail(format!("no input verdict #{}", i + 1)))?;
                    if v.fact() != (fact, *value) {
                        return Err(fail(format!("input verdict #{} says `{v}`", i + 1)));
                    }
                }
                Justification::Axiom(name) => {
                    if !*value || !axioms.iter().any(|(f, n)| *f == fact && n == name) {
                        return Err(fail(format!("`{name}` is not an axiom for this fact")));
                    }
                }
                Justification::Rule { rule, premises } => {
                    for (p, pv) in premises {
                        if self.value(*p) != Some(*pv) {
                            return Err(fail(format!("premise {} does not hold", p.render(*pv))));
                        }
                    }
                    if conclude(*rule, premises) != Some((fact, *value)) {
                        return Err(fail(format!("{rule} does not yield this from its premises")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether one more round of the rules adds nothing.
    pub fn is_fixpoint(&self) -> bool {
        let mut copy = self.clone();
        matches!(copy.round(), Ok(false))
    }

    /// Adds `fact = value`; `Ok(true)` when it is new.
    fn assert_fact(&mut self, fact: Fact, value: bool, just: Justification) -> Result<bool, ReportError> {
        match self.facts.get(&fact) {
            Some((v, _)) if *v == value => Ok(false),
            Some((v, j)) => Err(ReportError::Contradiction {
                fact: fact.render(true),
                first: format!("{} by {j}", fact.render(*v)),
                second: format!("{} by {just}", fact.render(value)),
            }),
            None => {
                self.facts.insert(fact, (value, just));
                Ok(true)
            }
        }
    }

    /// One pass of every rule over the current facts.
    fn round(&mut self) -> Result<bool, ReportError> {
        let mut derived = Vec::new();
        let known: Vec<(Fact, bool)> = self.facts.iter().map(|(f, (v, _))| (*f, *v)).collect();
        for &(a, av) in &known {
            for &(b, bv) in &known {
                for rule in [Rule::Transitivity, Rule::Upward, Rule::Downward, Rule::Separation] {
                    let premises = vec![(a, av), (b, bv)];
                    if let Some((fact, value)) = conclude(rule, &premises) {
                        derived.push((fact, value, Justification::Rule { rule, premises }));
                    }
                }
            }
        }
        let mut changed = false;
        for (fact, value, just) in derived {
            changed |= self.assert_fact(fact, value, just)?;
        }
        Ok(changed)
    }

    /// The matrix, rows against columns, in [`Variant::all`] order.
    pub fn render(&self) -> String {
        let vs = Variant::all();
        let width = vs.iter().map(|v| v.to_string().chars().count()).max().unwrap_or(0) + 1;
        let pad = |s: &str| format!("{s:<width$}");
        let mut lines = vec![vs.iter().fold(pad(""), |acc, c| acc + &pad(&c.to_string()))];
        for r in &vs {
            let mut line = pad(&r.to_string());
            for c in &vs {
                let cell = if r == c { "-" } else { self.relation(*r, *c).symbol() };
                line.push_str(&pad(cell));
            }
            lines.push(line);
        }
        lines.iter().map(|l| format!("{}\n", l.trim_end())).collect()
    }

    /// Every resolved off-diagonal pair (upper triangle) with the facts behind it.
    pub fn provenance_text(&self) -> String {
        let vs = Variant::all();
        let mut out = String::new();
        for (i, r) in vs.iter().enumerate() {
            for c in &vs[i + 1..] {
                let rel = self.relation(*r, *c);
                if rel == Relation::Unresolved {
                    continue;
                }
                out.push_str(&format!("{r} {rel} {c}\n"));
                for fact in [Fact::Ge(*r, *c), Fact::Ge(*c, *r)] {
                    for line in self.explain(fact).lines() {
                        out.push_str(&format!("  {line}\n"));
                    }
                }
            }
        }
        out
    }
}

/// What `rule` concludes from exactly these two premises, if anything.
fn conclude(rule: Rule, premises: &[(Fact, bool)]) -> Option<(Fact, bool)> {
    let [(a, av), (b, bv)] = premises else { return None };
    match (rule, *a, *av, *b, *bv) {
        (Rule::Transitivity, Fact::Ge(x, y), true, Fact::Ge(y2, z), true) if y == y2 => Some((Fact::Ge(x, z), true)),
        (Rule::Upward, Fact::Solv(p, y), true, Fact::Ge(x, y2), true) if y == y2 => Some((Fact::Solv(p, x), true)),
        (Rule::Downward, Fact::Solv(p, x), false, Fact::Ge(x2, y), true) if x == x2 => Some((Fact::Solv(p, y), false)),
        (Rule::Separation, Fact::Solv(p, x), true, Fact::Solv(p2, y), false) if p == p2 => {
            Some((Fact::Ge(y, x), false))
        }
        _ => None,
    }
}

/// Closes `verdicts` and the axioms under the rules.
pub fn build_report(verdicts: &[LemmaVerdict]) -> Result<RelationReport, ReportError> {
    let mut report = RelationReport { verdicts: verdicts.to_vec(), facts: BTreeMap::new() };
    for (fact, name) in axioms() {
        report.assert_fact(fact, true, Justification::Axiom(name))?;
    }
    for (i, v) in verdicts.iter().enumerate() {
        let (fact, value) = v.fact();
        report.assert_fact(fact, value, Justification::Verdict(i))?;
    }
    while report.round()? {}
    Ok(report)
}
