use std::collections::{BTreeMap, HashMap};

use num::{BigRational, One, Zero};

use crate::faultlab::{compose_step, trace_probability, Action, BitState, Environment, FaultProneSystem};
use crate::machine::RiscSystem;

use super::space::InitialSpace;
use super::{budget_check, CheckConfig, Status, Verdict, VerifyError, Witness};

type Dist = BTreeMap<Vec<Action>, BigRational>;

/// Two low-equal initial states, an environment start state and a low trace
/// whose probability differs between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PniWitness {
    pub group: usize,
    pub env_state: usize,
    pub state_a: BitState,
    pub state_b: BitState,
    pub trace: Vec<Action>,
    pub prob_a: BigRational,
    pub prob_b: BigRational,
}

impl PniWitness {
    pub fn replay<S: FaultProneSystem + ?Sized>(&self, sys: &S, env: &Environment) -> bool {
        let pa = trace_probability(sys, &self.state_a, self.env_state, env, &self.trace);
        let pb = trace_probability(sys, &self.state_b, self.env_state, env, &self.trace);
        pa == self.prob_a && pb == self.prob_b && pa != pb
    }
}

/// Memo of trace distributions keyed by `(state, env state, length)`, with
/// each distinct distribution stored once.
struct Memo<'a, S: ?Sized> {
    sys: &'a S,
    env: &'a Environment,
    ids: HashMap<(BitState, usize, usize), u32>,
    dists: Vec<Dist>,
    intern: HashMap<Dist, u32>,
    budget: u64,
}

impl<'a, S: FaultProneSystem + ?Sized> Memo<'a, S> {
    fn id_of(&mut self, d: Dist) -> u32 {
        if let Some(&i) = self.intern.get(&d) {
            return i;
        }
        let i = self.dists.len() as u32;
        self.dists.push(d.clone());
        self.intern.insert(d, i);
        i
    }

    fn dist(&mut self, s: &BitState, e: usize, k: usize) -> Result<u32, VerifyError> {
        if let Some(&i) = self.ids.get(&(s.clone(), e, k)) {
            return Ok(i);
        }
        let id = if k == 0 {
            self.id_of(BTreeMap::from([(Vec::new(), BigRational::one())]))
        } else {
            let mut d = Dist::new();
            for st in compose_step(self.sys, s, e, self.env) {
                let sub = self.dist(&st.state, st.env, k - 1)?;
                for (t, p) in &self.dists[sub as usize] {
                    let mut t2 = Vec::with_capacity(k);
                    t2.push(st.action.low());
                    t2.extend_from_slice(t);
                    *d.entry(t2).or_insert_with(BigRational::zero) += &st.probability * p;
                }
            }
            d.retain(|_, p| !p.is_zero());
            self.id_of(d)
        };
        self.ids.insert((s.clone(), e, k), id);
        budget_check("memoized (state, environment, depth) entries", self.ids.len() as u64, self.budget)?;
        Ok(id)
    }
}

/// Bounded probabilistic noninterference of an arbitrary fault-prone system
/// against one environment, checked from every environment state.
pub fn pni_system<S: FaultProneSystem + ?Sized>(
    sys: &S,
    env: &Environment,
    groups: &[Vec<BitState>],
    depth: usize,
    budget: u64,
) -> Result<Option<PniWitness>, VerifyError> {
    let mut memo = Memo { sys, env, ids: HashMap::new(), dists: Vec::new(), intern: HashMap::new(), budget };
    for k in 1..=depth {
        let mut best: Option<PniWitness> = None;
        for e in 0..env.num_states() {
            for (g, members) in groups.iter().enumerate() {
                let Some(first) = members.first() else { continue };
                let da = memo.dist(first, e, k)?;
                for s in &members[1..] {
                    let db = memo.dist(s, e, k)?;
                    if da == db {
                        continue;
                    }
                    let w = witness_for(&memo.dists[da as usize], &memo.dists[db as usize], g, e, first, s);
                    if best.as_ref().is_none_or(|b| w.trace < b.trace) {
                        best = Some(w);
                    }
                }
            }
        }
        if best.is_some() {
            return Ok(best);
        }
    }
    Ok(None)
}

fn witness_for(a: &Dist, b: &Dist, group: usize, e: usize, sa: &BitState, sb: &BitState) -> PniWitness {
    let zero = BigRational::zero();
    let trace = a
        .keys()
        .chain(b.keys())
        .filter(|t| a.get(*t).unwrap_or(&zero) != b.get(*t).unwrap_or(&zero))
        .min()
        .expect("distinct distributions differ on some trace")
        .clone();
    PniWitness {
        group,
        env_state: e,
        state_a: sa.clone(),
        state_b: sb.clone(),
        prob_a: a.get(&trace).cloned().unwrap_or_else(BigRational::zero),
        prob_b: b.get(&trace).cloned().unwrap_or_else(BigRational::zero),
        trace,
    }
}

/// Bounded probabilistic fault-tolerant noninterference of a RISC program
/// under `env`.
pub fn check_pni(sys: &RiscSystem, env: &Environment, cfg: &CheckConfig) -> Result<Verdict, VerifyError> {
    env.validate(sys.layout()).map_err(|e| VerifyError::Config(e.to_string()))?;
    let space = InitialSpace::new(sys.config(), cfg.value_bound);
    let groups = space.groups(sys, cfg)?;
    let Some(w) = pni_system(sys, env, &groups, cfg.depth, cfg.budget)? else {
        return Ok(Verdict::secure("pni", cfg.depth));
    };
    let sa = sys.decode(&w.state_a);
    let sb = sys.decode(&w.state_b);
    let mut trace: Vec<String> = w.trace.iter().map(|a| a.to_string()).collect();
    trace.insert(0, format!("env {}", env.state_name(w.env_state)));
    Ok(Verdict {
        checker: "pni".into(),
        status: Status::Violation,
        bound: cfg.depth,
        witness: Some(Witness {
            initial_low: space.low_values(&sa),
            initial_high_a: space.high_values(&sa),
            initial_high_b: space.high_values(&sb),
            trace,
            probabilities: Some(vec![w.prob_a.to_string(), w.prob_b.to_string()]),
        }),
    })
}
