use std::collections::{BTreeMap, HashMap};

use crate::faultlab::Action;
use crate::machine::{step_in_place, MachineState, RiscSystem};

use super::space::InitialSpace;
use super::{budget_check, CheckConfig, Status, Verdict, VerifyError, Witness};

/// What one step from `(pc, d)` looks like to a low observer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Outcome {
    action: Action,
    low_after: Vec<u64>,
    next_pc: usize,
}

/// Why a pair of program points is not related.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SsFailure {
    /// The two steps differ in their low action or low result state.
    Mismatch,
    /// The steps agree but land on an unrelated pair.
    Successor(usize, usize),
}

/// A failed pair of program points with the data states that separate them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsWitness {
    /// Pairs of program points from `(0, 0)` down to the pair that fails directly.
    pub path: Vec<(usize, usize)>,
    pub state_a: MachineState,
    pub state_b: MachineState,
}

impl SsWitness {
    /// Re-executes the final step from both states and checks that the low
    /// observer can tell them apart.
    pub fn replay(&self, sys: &RiscSystem) -> bool {
        let cfg = sys.config();
        if !cfg.low_equal(&self.state_a, &self.state_b) {
            return false;
        }
        let (a, sa) = halted_step(sys, &self.state_a);
        let (b, sb) = halted_step(sys, &self.state_b);
        a.low() != b.low() || !cfg.low_equal(&sa, &sb)
    }
}

/// A step in the termination-transparent semantics.
fn halted_step(sys: &RiscSystem, s: &MachineState) -> (Action, MachineState) {
    let mut t = s.clone();
    match step_in_place(sys.program(), sys.config(), &mut t) {
        Some(a) => (a, t),
        None => (Action::Tau, t),
    }
}

struct Table {
    // outcomes[pc][low] = distinct outcomes with one representative high index
    outcomes: Vec<Vec<Vec<(Outcome, u64)>>>,
}

fn build_table(sys: &RiscSystem, space: &InitialSpace, budget: u64) -> Result<Table, VerifyError> {
    let points = sys.program().len() + 1;
    let nl = space.low_count().unwrap_or(u64::MAX);
    let nh = space.high_count().unwrap_or(u64::MAX);
    let needed = nl.saturating_mul(nh).saturating_mul(points as u64);
    budget_check("data states times program points", needed, budget)?;
    let mut outcomes = Vec::with_capacity(points);
    for pc in 0..points {
        let mut per_low = Vec::with_capacity(nl as usize);
        for l in 0..nl {
            let mut seen: HashMap<Outcome, u64> = HashMap::new();
            for h in 0..nh {
                let mut s = space.state(l, h);
                s.pc = pc;
                let (a, t) = halted_step(sys, &s);
                let o = Outcome { action: a.low(), low_after: space.low_key(&t), next_pc: t.pc };
                seen.entry(o).or_insert(h);
            }
            let mut v: Vec<(Outcome, u64)> = seen.into_iter().collect();
            v.sort_by_key(|(_, h)| *h);
            per_low.push(v);
        }
        outcomes.push(per_low);
    }
    Ok(Table { outcomes })
}

struct Reason {
    failure: SsFailure,
    low: u64,
    high_a: u64,
    high_b: u64,
}

/// Greatest strong low-bisimulation over program points of `sys`.
/// Returns `None` when `(0, 0)` survives, otherwise the witness.
pub fn strong_security(sys: &RiscSystem, cfg: &CheckConfig) -> Result<Option<SsWitness>, VerifyError> {
    let space = InitialSpace::new(sys.config(), cfg.value_bound);
    let table = build_table(sys, &space, cfg.budget)?;
    let n = table.outcomes.len();
    let mut related = vec![true; n * n];
    let mut reasons: BTreeMap<(usize, usize), Reason> = BTreeMap::new();
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in i..n {
                if !related[i * n + j] {
                    continue;
                }
                if let Some(r) = pair_fails(&table, &related, n, i, j) {
                    related[i * n + j] = false;
                    related[j * n + i] = false;
                    reasons.insert((i, j), r);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    if related[0] {
        return Ok(None);
    }
    let mut path = vec![(0, 0)];
    let mut cur = (0, 0);
    loop {
        let key = (cur.0.min(cur.1), cur.0.max(cur.1));
        let r = &reasons[&key];
        let (la, lb) = if cur.0 <= cur.1 { (r.high_a, r.high_b) } else { (r.high_b, r.high_a) };
        match r.failure {
            SsFailure::Mismatch => {
                let mut a = space.state(r.low, la);
                a.pc = cur.0;
                let mut b = space.state(r.low, lb);
                b.pc = cur.1;
                return Ok(Some(SsWitness { path, state_a: a, state_b: b }));
            }
            SsFailure::Successor(x, y) => {
                cur = if cur.0 <= cur.1 { (x, y) } else { (y, x) };
                path.push(cur);
            }
        }
    }
}

fn pair_fails(table: &Table, related: &[bool], n: usize, i: usize, j: usize) -> Option<Reason> {
    for (low, (oi, oj)) in table.outcomes[i].iter().zip(&table.outcomes[j]).enumerate() {
        for (a, ha) in oi {
            for (b, hb) in oj {
                let failure = if a.action != b.action || a.low_after != b.low_after {
                    SsFailure::Mismatch
                } else if !related[a.next_pc * n + b.next_pc] {
                    SsFailure::Successor(a.next_pc, b.next_pc)
                } else {
                    continue;
                };
                return Some(Reason { failure, low: low as u64, high_a: *ha, high_b: *hb });
            }
        }
    }
    None
}

/// Strong security of a RISC program, deciding the greatest bisimulation
/// exactly at the configured word width.
pub fn check_strong_security(sys: &RiscSystem, cfg: &CheckConfig) -> Result<Verdict, VerifyError> {
    let bound = sys.config().width as usize;
    let Some(w) = strong_security(sys, cfg)? else {
        return Ok(Verdict::secure("ss", bound));
    };
    let space = InitialSpace::new(sys.config(), cfg.value_bound);
    let mut trace: Vec<String> = w.path.iter().map(|(a, b)| format!("pc {a} ~ pc {b}")).collect();
    let (a, sa) = halted_step(sys, &w.state_a);
    let (b, sb) = halted_step(sys, &w.state_b);
    trace.push(format!("{} -> {:?} | {} -> {:?}", a.low(), space.low_key(&sa), b.low(), space.low_key(&sb)));
    Ok(Verdict {
        checker: "ss".into(),
        status: Status::Violation,
        bound,
        witness: Some(Witness {
            initial_low: space.low_values(&w.state_a),
            initial_high_a: space.high_values(&w.state_a),
            initial_high_b: space.high_values(&w.state_b),
            trace,
            probabilities: None,
        }),
    })
}
