use std::collections::HashMap;

use crate::faultlab::{augmented_step_with, powerset, Action, BitState, FaultProneSystem, FaultSet};
use crate::machine::RiscSystem;

use super::space::{resolve_scope, InitialSpace};
use super::{budget_check, CheckConfig, Status, Verdict, VerifyError, Witness};

/// Two low-equal initial states and an injected fault sequence on which
/// their low outputs differ at the last step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoniWitness {
    pub group: usize,
    pub state_a: BitState,
    pub state_b: BitState,
    pub faults: Vec<FaultSet>,
    pub outputs_a: Vec<Action>,
    pub outputs_b: Vec<Action>,
}

impl PoniWitness {
    /// Re-runs both sides of the augmented system under the recorded faults.
    pub fn replay<S: FaultProneSystem + ?Sized>(&self, sys: &S) -> bool {
        let run = |start: &BitState| {
            let mut s = start.clone();
            let mut out = Vec::new();
            for l in &self.faults {
                let (a, t) = augmented_step_with(sys, &s, l);
                out.push(a.low());
                s = t;
            }
            out
        };
        let (a, b) = (run(&self.state_a), run(&self.state_b));
        a == self.outputs_a && b == self.outputs_b && a != b
    }
}

/// Orders witnesses of equal length by fault and output sequence.
type SortKey = Vec<(usize, Action, Action)>;

struct Explored {
    states: Vec<BitState>,
    // trans[i][mask] = (low action, successor index); empty at the depth frontier
    trans: Vec<Vec<(Action, u32)>>,
}

fn explore<S: FaultProneSystem + ?Sized>(
    sys: &S,
    groups: &[Vec<BitState>],
    faults: &[FaultSet],
    depth: usize,
    budget: u64,
) -> Result<(Explored, HashMap<BitState, u32>), VerifyError> {
    let mut index: HashMap<BitState, u32> = HashMap::new();
    let mut states = Vec::new();
    let mut frontier = Vec::new();
    for s in groups.iter().flatten() {
        if !index.contains_key(s) {
            index.insert(s.clone(), states.len() as u32);
            frontier.push(states.len());
            states.push(s.clone());
        }
    }
    let mut trans: Vec<Vec<(Action, u32)>> = vec![Vec::new(); states.len()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for i in frontier {
            let mut row = Vec::with_capacity(faults.len());
            for l in faults {
                let (a, t) = augmented_step_with(sys, &states[i], l);
                let j = match index.get(&t) {
                    Some(&j) => j,
                    None => {
                        let j = states.len() as u32;
                        index.insert(t.clone(), j);
                        states.push(t);
                        trans.push(Vec::new());
                        next.push(j as usize);
                        j
                    }
                };
                row.push((a.low(), j));
            }
            trans[i] = row;
            let work = (states.len() as u64).saturating_mul(faults.len() as u64);
            budget_check("reachable states times fault sets", work, budget)?;
        }
        frontier = next;
    }
    Ok((Explored { states, trans }, index))
}

/// Bounded possibilistic noninterference of an arbitrary fault-prone system.
///
/// `groups` holds the initial states, partitioned into classes of low-equal
/// states. The attacker may flip any subset of `scope` before each step.
/// Returns the shortest witness, ties broken by the fault and output sequence.
pub fn poni_system<S: FaultProneSystem + ?Sized>(
    sys: &S,
    groups: &[Vec<BitState>],
    scope: &[usize],
    depth: usize,
    budget: u64,
) -> Result<Option<PoniWitness>, VerifyError> {
    let faults = powerset(scope);
    let (ex, index) = explore(sys, groups, &faults, depth, budget)?;
    let n = ex.states.len();
    // classes[k][i]: class of state i under k-step output equivalence
    let mut classes: Vec<Vec<u32>> = vec![vec![0; n]];
    for k in 1..=depth {
        let prev = &classes[k - 1];
        let mut intern: HashMap<(u32, Vec<(Action, u32)>), u32> = HashMap::new();
        let mut cur = Vec::with_capacity(n);
        for i in 0..n {
            let sig: Vec<(Action, u32)> = ex.trans[i].iter().map(|&(a, j)| (a, prev[j as usize])).collect();
            let fresh = intern.len() as u32;
            cur.push(*intern.entry((prev[i], sig)).or_insert(fresh));
        }
        let stable = intern.len() == classes[k - 1].iter().copied().max().map_or(0, |m| m as usize + 1);
        classes.push(cur);
        let mut best: Option<(SortKey, PoniWitness)> = None;
        for (g, members) in groups.iter().enumerate() {
            let Some(first) = members.first() else { continue };
            let a = index[first] as usize;
            let mut tried = Vec::new();
            for s in members {
                let b = index[s] as usize;
                let cb = classes[k][b];
                if cb == classes[k][a] || tried.contains(&cb) {
                    continue;
                }
                tried.push(cb);
                let (key, w) = distinguish(&ex, &classes, &faults, g, a, b, k);
                if best.as_ref().is_none_or(|(bk, _)| key < *bk) {
                    best = Some((key, w));
                }
            }
        }
        if let Some((_, w)) = best {
            return Ok(Some(w));
        }
        if stable {
            break;
        }
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn distinguish(
    ex: &Explored,
    classes: &[Vec<u32>],
    faults: &[FaultSet],
    group: usize,
    a: usize,
    b: usize,
    k: usize,
) -> (Vec<(usize, Action, Action)>, PoniWitness) {
    let (mut x, mut y) = (a, b);
    let mut key = Vec::new();
    for level in (0..k).rev() {
        let m = (0..faults.len())
            .find(|&m| {
                let (oa, xa) = ex.trans[x][m];
                let (ob, yb) = ex.trans[y][m];
                oa != ob || classes[level][xa as usize] != classes[level][yb as usize]
            })
            .expect("states in different classes have a separating fault set");
        let (oa, xa) = ex.trans[x][m];
        let (ob, yb) = ex.trans[y][m];
        key.push((m, oa, ob));
        if oa != ob {
            break;
        }
        x = xa as usize;
        y = yb as usize;
    }
    let w = PoniWitness {
        group,
        state_a: ex.states[a].clone(),
        state_b: ex.states[b].clone(),
        faults: key.iter().map(|&(m, _, _)| faults[m].clone()).collect(),
        outputs_a: key.iter().map(|&(_, o, _)| o).collect(),
        outputs_b: key.iter().map(|&(_, _, o)| o).collect(),
    };
    (key, w)
}

/// Bounded possibilistic fault-tolerant noninterference of a RISC program.
pub fn check_poni(sys: &RiscSystem, cfg: &CheckConfig) -> Result<Verdict, VerifyError> {
    if cfg.depth == 0 {
        return Err(VerifyError::Config("depth must be at least 1".into()));
    }
    let scope = resolve_scope(sys, cfg)?;
    let space = InitialSpace::new(sys.config(), cfg.value_bound);
    let groups = space.groups(sys, cfg)?;
    match poni_system(sys, &groups, &scope, cfg.depth, cfg.budget)? {
        None => Ok(Verdict::secure("poni", cfg.depth)),
        Some(w) => Ok(poni_verdict(sys, &space, &w, cfg.depth)),
    }
}

pub(super) fn poni_verdict(sys: &RiscSystem, space: &InitialSpace, w: &PoniWitness, bound: usize) -> Verdict {
    let layout = sys.layout();
    let sa = sys.decode(&w.state_a);
    let sb = sys.decode(&w.state_b);
    let last = w.faults.len() - 1;
    let trace = (0..w.faults.len())
        .map(|i| {
            let l = w.faults[i].render(layout);
            if i == last {
                format!("{l} {} | {}", w.outputs_a[i], w.outputs_b[i])
            } else {
                format!("{l} {}", w.outputs_a[i])
            }
        })
        .collect();
    Verdict {
        checker: "poni".into(),
        status: Status::Violation,
        bound,
        witness: Some(Witness {
            initial_low: space.low_values(&sa),
            initial_high_a: space.high_values(&sa),
            initial_high_b: space.high_values(&sb),
            trace,
            probabilities: None,
        }),
    }
}
