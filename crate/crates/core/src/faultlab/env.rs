use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num::{BigRational, One, Zero};

use super::{Action, FaultError, FaultSet, Layout};

/// A fault environment: a deterministic, total LTS over low observations
/// whose states each carry a distribution over fault sets.
#[derive(Debug, Clone)]
pub struct Environment {
    scope: Vec<usize>,
    names: Vec<String>,
    moves: Vec<HashMap<Action, usize>>,
    fallback: Vec<usize>,
    faults: Vec<Vec<(FaultSet, BigRational)>>,
}

impl Environment {
    /// Builds an environment from per-state data. Every state needs a fallback
    /// successor so the transition function is total.
    pub fn new(
        scope: Vec<usize>,
        names: Vec<String>,
        moves: Vec<HashMap<Action, usize>>,
        fallback: Vec<usize>,
        faults: Vec<BTreeMap<FaultSet, BigRational>>,
    ) -> Result<Self, FaultError> {
        let n = names.len();
        if n == 0 {
            return Err(FaultError::InvalidEnvironment("no states".into()));
        }
        if moves.len() != n || fallback.len() != n || faults.len() != n {
            return Err(FaultError::InvalidEnvironment("per-state tables have mismatched lengths".into()));
        }
        let mut scope = scope;
        scope.sort_unstable();
        scope.dedup();
        let mut tables = Vec::with_capacity(n);
        for (e, table) in faults.into_iter().enumerate() {
            if fallback[e] >= n || moves[e].values().any(|&t| t >= n) {
                return Err(FaultError::InvalidEnvironment(format!("state {} moves to an unknown state", names[e])));
            }
            if moves[e].keys().any(|a| a.low() != *a) {
                return Err(FaultError::InvalidEnvironment(format!(
                    "state {} reacts to an action outside LAct and tau",
                    names[e]
                )));
            }
            let mut total = BigRational::zero();
            let mut entries = Vec::new();
            for (l, p) in table {
                if p < BigRational::zero() {
                    return Err(FaultError::InvalidEnvironment(format!("negative probability in state {}", names[e])));
                }
                if l.locations().iter().any(|x| scope.binary_search(x).is_err()) {
                    return Err(FaultError::InvalidEnvironment(format!(
                        "state {} flips a location outside the fault scope",
                        names[e]
                    )));
                }
                total += &p;
                if !p.is_zero() {
                    entries.push((l, p));
                }
            }
            if !total.is_one() {
                return Err(FaultError::InvalidEnvironment(format!(
                    "fault distribution of state {} sums to {total}",
                    names[e]
                )));
            }
            tables.push(entries);
        }
        Ok(Environment { scope, names, moves, fallback, faults: tables })
    }

    /// The set F of locations this environment may flip.
    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn state_name(&self, e: usize) -> &str {
        &self.names[e]
    }

    /// Successor on observation `obs`; `obs` is projected through `low` first.
    pub fn next(&self, e: usize, obs: Action) -> usize {
        self.moves[e].get(&obs.low()).copied().unwrap_or(self.fallback[e])
    }

    /// Fault sets with nonzero probability in state `e`, ordered by fault set.
    pub fn support(&self, e: usize) -> &[(FaultSet, BigRational)] {
        &self.faults[e]
    }

    pub fn fault_probability(&self, e: usize, l: &FaultSet) -> BigRational {
        self.faults[e].iter().find(|(k, _)| k == l).map(|(_, p)| p.clone()).unwrap_or_else(BigRational::zero)
    }

    /// Checks that the scope consists of faulty locations of `layout`.
    pub fn validate(&self, layout: &Layout) -> Result<(), FaultError> {
        for &l in &self.scope {
            if l >= layout.len() {
                return Err(FaultError::UnknownLocation(format!("#{l}")));
            }
            if !layout.is_faulty(l) {
                return Err(FaultError::TolerantLocation(layout.location(l).name.clone()));
            }
        }
        Ok(())
    }

    /// Serializes to the line-oriented table format read by [`Environment::parse`].
    pub fn to_text(&self, layout: &Layout) -> String {
        let mut out = String::new();
        let mut scope: Vec<&str> = self.scope.iter().map(|&l| layout.location(l).name.as_str()).collect();
        scope.sort_unstable();
        let _ = writeln!(out, "scope {}", scope.join(" "));
        for e in 0..self.num_states() {
            let name = &self.names[e];
            let mut moves: Vec<_> = self.moves[e].iter().collect();
            moves.sort();
            for (a, t) in moves {
                let _ = writeln!(out, "move {name} {a} {}", self.names[*t]);
            }
            let _ = writeln!(out, "move {name} * {}", self.names[self.fallback[e]]);
            let mut rows: Vec<(String, &BigRational)> =
                self.faults[e].iter().map(|(l, p)| (l.render(layout), p)).collect();
            rows.sort();
            for (l, p) in rows {
                let _ = writeln!(out, "fault {name} {l} {p}");
            }
        }
        out
    }

    /// Parses the table format:
    ///
    /// ```text
    /// scope r0_0 m1_0
    /// move s0 low!1 s1
    /// move s0 * s0
    /// fault s0 {} 3/4
    /// fault s0 {r0_0} 1/4
    /// ```
    ///
    /// States are introduced by first mention, in order. Omitted fault sets
    /// have probability zero.
    pub fn parse(text: &str, layout: &Layout) -> Result<Self, FaultError> {
        let mut scope: Option<Vec<usize>> = None;
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut names: Vec<String> = Vec::new();
        let mut moves: Vec<HashMap<Action, usize>> = Vec::new();
        let mut fallback: Vec<Option<usize>> = Vec::new();
        let mut faults: Vec<BTreeMap<FaultSet, BigRational>> = Vec::new();

        let mut intern = |name: &str,
                          names: &mut Vec<String>,
                          moves: &mut Vec<HashMap<Action, usize>>,
                          fallback: &mut Vec<Option<usize>>,
                          faults: &mut Vec<BTreeMap<FaultSet, BigRational>>| {
            *ids.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                moves.push(HashMap::new());
                fallback.push(None);
                faults.push(BTreeMap::new());
                names.len() - 1
            })
        };

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| FaultError::Parse { line: lineno + 1, msg };
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks[0] {
                "scope" => {
                    let names = &toks[1..];
                    let set = layout.fault_set(names).map_err(|e| err(e.to_string()))?;
                    scope = Some(set.locations().to_vec());
                }
                "move" => {
                    if toks.len() != 4 {
                        return Err(err("expected `move <state> <obs|*> <state>`".into()));
                    }
                    let from = intern(toks[1], &mut names, &mut moves, &mut fallback, &mut faults);
                    let to = intern(toks[3], &mut names, &mut moves, &mut fallback, &mut faults);
                    if toks[2] == "*" {
                        if fallback[from].replace(to).is_some() {
                            return Err(err(format!("duplicate fallback for state {}", toks[1])));
                        }
                    } else {
                        let a = Action::parse(toks[2]).ok_or_else(|| err(format!("bad observation `{}`", toks[2])))?;
                        if moves[from].insert(a, to).is_some() {
                            return Err(err(format!("duplicate move for state {} on {a}", toks[1])));
                        }
                    }
                }
                "fault" => {
                    if toks.len() != 4 {
                        return Err(err("expected `fault <state> {locs} <p/q>`".into()));
                    }
                    let e = intern(toks[1], &mut names, &mut moves, &mut fallback, &mut faults);
                    let set = toks[2]
                        .strip_prefix('{')
                        .and_then(|s| s.strip_suffix('}'))
                        .ok_or_else(|| err(format!("bad fault set `{}`", toks[2])))?;
                    let locs: Vec<&str> = set.split(',').filter(|s| !s.is_empty()).collect();
                    let l = layout.fault_set(&locs).map_err(|e| err(e.to_string()))?;
                    let p: BigRational = toks[3].parse().map_err(|_| err(format!("bad probability `{}`", toks[3])))?;
                    if faults[e].insert(l, p).is_some() {
                        return Err(err(format!("duplicate fault set for state {}", toks[1])));
                    }
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        let scope = scope.ok_or_else(|| FaultError::Parse { line: 0, msg: "missing scope line".into() })?;
        let fallback = fallback
            .into_iter()
            .enumerate()
            .map(|(e, f)| {
                f.ok_or_else(|| FaultError::InvalidEnvironment(format!("state {} has no `*` move", names[e])))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let env = Environment::new(scope, names, moves, fallback, faults)?;
        env.validate(layout)?;
        Ok(env)
    }
}

/// The single-state environment flipping each scoped location independently
/// with probability `epsilon`.
pub fn uniform_environment(epsilon: &BigRational, scope: &[usize]) -> Result<Environment, FaultError> {
    if *epsilon < BigRational::zero() || *epsilon > BigRational::one() {
        return Err(FaultError::InvalidEnvironment(format!("epsilon {epsilon} outside [0,1]")));
    }
    let mut sorted = scope.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let stay = BigRational::one() - epsilon;
    let mut table = BTreeMap::new();
    for l in super::powerset(&sorted) {
        let k = l.len();
        let p = num::pow(epsilon.clone(), k) * num::pow(stay.clone(), sorted.len() - k);
        table.insert(l, p);
    }
    Environment::new(sorted, vec!["idle".into()], vec![HashMap::new()], vec![0], vec![table])
}

/// When a scripted adversary moves on to its next stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advance {
    /// After every low-visible output; τ steps leave the stage unchanged.
    OnLowObservation,
    /// After every step.
    EveryStep,
}

/// Builds environments that run through an ordered list of fault tables,
/// one per stage of the observation history. The last stage absorbs.
#[derive(Debug, Clone)]
pub struct ScriptedAdversary {
    scope: Vec<usize>,
    advance: Advance,
    stages: Vec<BTreeMap<FaultSet, BigRational>>,
}

impl ScriptedAdversary {
    pub fn new(scope: &[usize], advance: Advance) -> Self {
        ScriptedAdversary { scope: scope.to_vec(), advance, stages: Vec::new() }
    }

    pub fn stage(mut self, table: impl IntoIterator<Item = (FaultSet, BigRational)>) -> Self {
        self.stages.push(table.into_iter().collect());
        self
    }

    pub fn build(self) -> Result<Environment, FaultError> {
        let n = self.stages.len();
        if n == 0 {
            return Err(FaultError::InvalidEnvironment("scripted adversary without stages".into()));
        }
        let names = (0..n).map(|i| format!("stage{i}")).collect();
        let next = |i: usize| (i + 1).min(n - 1);
        let mut moves = Vec::with_capacity(n);
        let mut fallback = Vec::with_capacity(n);
        for i in 0..n {
            let mut m = HashMap::new();
            match self.advance {
                Advance::OnLowObservation => {
                    m.insert(Action::Tau, i);
                    fallback.push(next(i));
                }
                Advance::EveryStep => fallback.push(next(i)),
            }
            moves.push(m);
        }
        Environment::new(self.scope, names, moves, fallback, self.stages)
    }
}
