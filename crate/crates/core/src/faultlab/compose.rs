use std::collections::{BTreeMap, HashMap};

use num::{BigRational, One, Zero};

use super::{flip_unchecked, powerset, Action, BitState, Environment, FaultSet, Layout};

/// A deterministic labelled transition system over bit states.
pub trait FaultProneSystem {
    fn layout(&self) -> &Layout;

    /// The unique transition from `s`, or `None` when `s` is stuck.
    fn step(&self, s: &BitState) -> Option<(Action, BitState)>;
}

/// One transition of the composition of a system with an environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComposedStep {
    pub action: Action,
    pub probability: BigRational,
    pub state: BitState,
    pub env: usize,
}

/// Transitions of the composed system from `(s, e)`.
///
/// Fault sets leading to the same `(action, successor)` pair are merged by
/// summing their probabilities. Zero-probability entries are omitted.
pub fn compose_step<S: FaultProneSystem + ?Sized>(
    sys: &S,
    s: &BitState,
    e: usize,
    env: &Environment,
) -> Vec<ComposedStep> {
    if sys.step(s).is_none() {
        return vec![ComposedStep {
            action: Action::Tau,
            probability: BigRational::one(),
            state: s.clone(),
            env: env.next(e, Action::Tau),
        }];
    }
    let mut merged: BTreeMap<(Action, BitState), BigRational> = BTreeMap::new();
    for (l, p) in env.support(e) {
        let flipped = flip_unchecked(s, l);
        let key = match sys.step(&flipped) {
            Some(next) => next,
            None => (Action::Tau, flipped),
        };
        *merged.entry(key).or_insert_with(BigRational::zero) += p;
    }
    merged
        .into_iter()
        .map(|((action, state), probability)| ComposedStep {
            action,
            probability,
            state,
            env: env.next(e, action.low()),
        })
        .collect()
}

/// Transitions of the augmented system: exactly one per subset of `scope`.
pub fn augmented_step<S: FaultProneSystem + ?Sized>(
    sys: &S,
    s: &BitState,
    scope: &[usize],
) -> Vec<(FaultSet, Action, BitState)> {
    let stuck = sys.step(s).is_none();
    powerset(scope)
        .into_iter()
        .map(|l| {
            if stuck {
                return (l, Action::Tau, s.clone());
            }
            let flipped = flip_unchecked(s, &l);
            match sys.step(&flipped) {
                Some((a, next)) => (l, a, next),
                None => (l, Action::Tau, flipped),
            }
        })
        .collect()
}

/// The single augmented transition under fault set `l`.
pub fn augmented_step_with<S: FaultProneSystem + ?Sized>(sys: &S, s: &BitState, l: &FaultSet) -> (Action, BitState) {
    if sys.step(s).is_none() {
        return (Action::Tau, s.clone());
    }
    let flipped = flip_unchecked(s, l);
    match sys.step(&flipped) {
        Some(next) => next,
        None => (Action::Tau, flipped),
    }
}

/// The step of the termination-transparent system: stuck states loop on τ.
pub fn termination_transparent_step<S: FaultProneSystem + ?Sized>(sys: &S, s: &BitState) -> (Action, BitState) {
    sys.step(s).unwrap_or_else(|| (Action::Tau, s.clone()))
}

/// Probability that the composed system started at `(s, e)` produces the low
/// trace `trace` in its first `trace.len()` steps.
pub fn trace_probability<S: FaultProneSystem + ?Sized>(
    sys: &S,
    s: &BitState,
    e: usize,
    env: &Environment,
    trace: &[Action],
) -> BigRational {
    let mut frontier: HashMap<(BitState, usize), BigRational> = HashMap::new();
    frontier.insert((s.clone(), e), BigRational::one());
    for &obs in trace {
        let mut next: HashMap<(BitState, usize), BigRational> = HashMap::new();
        for ((st, ev), p) in frontier {
            for step in compose_step(sys, &st, ev, env) {
                if step.action.low() == obs {
                    *next.entry((step.state, step.env)).or_insert_with(BigRational::zero) += &p * &step.probability;
                }
            }
        }
        frontier = next;
    }
    frontier.into_values().fold(BigRational::zero(), |acc, p| acc + p)
}

/// The full distribution over low traces of length `n` from `(s, e)`.
/// Traces with probability zero are absent.
pub fn trace_distribution<S: FaultProneSystem + ?Sized>(
    sys: &S,
    s: &BitState,
    e: usize,
    env: &Environment,
    n: usize,
) -> BTreeMap<Vec<Action>, BigRational> {
    let mut frontier: HashMap<(Vec<Action>, BitState, usize), BigRational> = HashMap::new();
    frontier.insert((Vec::new(), s.clone(), e), BigRational::one());
    for _ in 0..n {
        let mut next: HashMap<(Vec<Action>, BitState, usize), BigRational> = HashMap::new();
        for ((t, st, ev), p) in frontier {
            for step in compose_step(sys, &st, ev, env) {
                let mut t2 = t.clone();
                t2.push(step.action.low());
                *next.entry((t2, step.state, step.env)).or_insert_with(BigRational::zero) += &p * &step.probability;
            }
        }
        frontier = next;
    }
    let mut dist = BTreeMap::new();
    for ((t, _, _), p) in frontier {
        *dist.entry(t).or_insert_with(BigRational::zero) += p;
    }
    dist.retain(|_, p| !p.is_zero());
    dist
}

/// A fault-prone system given by an explicit transition table. States
/// without an entry are stuck.
#[derive(Debug, Clone)]
pub struct TableSystem {
    layout: Layout,
    transitions: HashMap<BitState, (Action, BitState)>,
}

impl TableSystem {
    pub fn new(layout: Layout, transitions: HashMap<BitState, (Action, BitState)>) -> Self {
        TableSystem { layout, transitions }
    }

    pub fn transitions(&self) -> &HashMap<BitState, (Action, BitState)> {
        &self.transitions
    }
}

impl FaultProneSystem for TableSystem {
    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn step(&self, s: &BitState) -> Option<(Action, BitState)> {
        self.transitions.get(s).cloned()
    }
}
