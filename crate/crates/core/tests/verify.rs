use std::collections::HashMap;

use ftni::faultlab::*;
use ftni::gen;
use ftni::lang::parse;
use ftni::machine::{assemble, MachineConfig, Program, RiscSystem};
use ftni::seccomp::{compile_program, CompileOptions, IfHSite, Level};
use ftni::verify::*;
use num::{BigRational, One, Zero};
use proptest::prelude::*;

fn raw(src: &str) -> RiscSystem {
    RiscSystem::new(assemble(src).unwrap(), gen::raw_config()).unwrap()
}

fn leak() -> RiscSystem {
    raw("load r2 1\nout low r2")
}

fn cfg() -> CheckConfig {
    CheckConfig::default()
}

#[test]
fn constant_output_is_secure() {
    let sys = raw("movek r0 1\nout low r0");
    assert!(check_strong_security(&sys, &cfg()).unwrap().is_secure());
    assert!(check_poni(&sys, &cfg()).unwrap().is_secure());
}

#[test]
fn trivial_programs_are_secure() {
    let empty = RiscSystem::new(Program::empty(), gen::raw_config()).unwrap();
    let nop = raw("nop");
    for sys in [&empty, &nop] {
        let v = check_strong_security(sys, &cfg()).unwrap();
        assert!(v.is_secure());
        assert_eq!(v.checker, "ss");
        assert!(v.witness.is_none());
        assert!(check_poni(sys, &cfg()).unwrap().is_secure());
    }
}

#[test]
fn high_to_low_output_is_caught_by_every_checker() {
    let sys = leak();
    let v = check_strong_security(&sys, &cfg()).unwrap();
    assert!(!v.is_secure());
    let w = v.witness.clone().unwrap();
    // the witness states sit at the failing pair of program points, after the load
    assert_eq!(w.initial_low, [("m0".to_string(), 0), ("r0".into(), 0), ("r1".into(), 0)].into());
    assert_ne!(w.initial_high_a.get("r2"), w.initial_high_b.get("r2"));
    let last = w.trace.last().unwrap();
    assert!(last.contains("low!0") && last.contains("low!1"), "{last}");
    assert!(v.to_json().contains("\"status\": \"violation\""));

    let w = strong_security(&sys, &cfg()).unwrap().unwrap();
    assert!(w.replay(&sys));

    let p = check_poni(&sys, &cfg()).unwrap();
    assert!(!p.is_secure());
    assert_eq!(p.witness.unwrap().trace.len(), 2);
}

#[test]
fn leak_under_zero_rate_has_certain_and_impossible_traces() {
    let sys = leak();
    let scope = probe_scope(&sys);
    let env = uniform_environment(&BigRational::zero(), &scope).unwrap();
    let v = check_pni(&sys, &env, &cfg()).unwrap();
    assert!(!v.is_secure());
    let w = v.witness.unwrap();
    assert_eq!(w.probabilities, Some(vec!["1".to_string(), "0".to_string()]));
    assert_eq!(w.trace.first().map(String::as_str), Some("env idle"));
}

#[test]
fn depth_zero() {
    let sys = leak();
    assert!(matches!(check_poni(&sys, &cfg().with_depth(0)), Err(VerifyError::Config(_))));
    let env = uniform_environment(&BigRational::zero(), &probe_scope(&sys)).unwrap();
    assert!(check_pni(&sys, &env, &cfg().with_depth(0)).unwrap().is_secure());
}

#[test]
fn budget_is_enforced() {
    let sys = leak();
    let tiny = CheckConfig { budget: 3, ..cfg() };
    assert!(matches!(check_strong_security(&sys, &tiny), Err(VerifyError::Budget { .. })));
    assert!(matches!(check_poni(&sys, &tiny), Err(VerifyError::Budget { .. })));
}

#[test]
fn unknown_scope_names_are_rejected() {
    let sys = leak();
    assert!(matches!(check_poni(&sys, &cfg().with_scope(vec!["pc_0".into()])), Err(VerifyError::Config(_))));
    assert!(matches!(check_poni(&sys, &cfg().with_scope(vec!["zz".into()])), Err(VerifyError::Config(_))));
}

/// Three faulty bits `x`, `h`, `flag`. The system prints `x`, or `h` once
/// `flag` is set. Initial states have `flag` clear and are grouped by `x`.
fn flag_system() -> (TableSystem, Vec<Vec<BitState>>) {
    let layout = Layout::new(vec![Location::faulty("x"), Location::faulty("h"), Location::faulty("flag")]).unwrap();
    let mut t = HashMap::new();
    for code in 0u8..8 {
        let bits: Vec<bool> = (0..3).map(|b| code >> b & 1 == 1).collect();
        let shown = if bits[2] { bits[1] } else { bits[0] };
        let s = BitState::from_bits(&bits);
        t.insert(s.clone(), (Action::Out(Channel::Low, shown as u64), s));
    }
    let groups = (0..2).map(|x| (0..2).map(|h| BitState::from_bits(&[x == 1, h == 1, false])).collect()).collect();
    (TableSystem::new(layout, t), groups)
}

#[test]
fn fault_induced_leak() {
    let (sys, groups) = flag_system();
    let flag = sys.layout().lookup("flag").unwrap();
    let x = sys.layout().lookup("x").unwrap();
    assert!(poni_system(&sys, &groups, &[x], 3, 1 << 20).unwrap().is_none());
    let w = poni_system(&sys, &groups, &[flag], 3, 1 << 20).unwrap().unwrap();
    assert_eq!(w.faults, vec![FaultSet::new(vec![flag])]);
    assert!(w.replay(&sys));

    let quiet = uniform_environment(&BigRational::zero(), &[flag]).unwrap();
    assert!(pni_system(&sys, &quiet, &groups, 3, 1 << 20).unwrap().is_none());
    let adv = adversary_from_witness(&w, &[flag]);
    let pw = pni_system(&sys, &adv, &groups, 3, 1 << 20).unwrap().unwrap();
    assert!(pw.replay(&sys, &adv));
    assert_eq!(pw.trace.len(), 1);
    assert!(pw.prob_a.is_one() != pw.prob_b.is_one());
}

#[test]
fn violating_programs_are_skipped_by_the_implication_check() {
    let r = check_ss_implies_poni(&[("leak".into(), leak())], &cfg()).unwrap();
    assert_eq!((r.checked, r.ss_secure), (1, 0));
    assert!(r.counterexamples.is_empty());
}

#[test]
fn agreement_on_the_leak() {
    let r = check_agreement(&leak(), &cfg()).unwrap();
    assert!(!r.poni.is_secure());
    assert_eq!(r.pni.len(), 4);
    assert!(r.agree());
    let zero = &r.pni.iter().find(|(n, _)| n == "uniform 0").unwrap().1;
    assert!(!zero.is_secure());
}

#[test]
fn unpadded_high_branch_is_unbalanced() {
    let c = MachineConfig::new(2, MachineConfig::default_registers(), vec![Level::L, Level::H]);
    let p = assemble(
        "load r2 1\n\
         jz br r2\n\
         movek r3 1\n\
         store 1 r3\n\
         jmp ex\n\
         br: movek r3 1\n\
         store 1 r3\n\
         movek r2 2\n\
         store 1 r2\n\
         ex: movek r0 1\n\
         out low r0",
    )
    .unwrap();
    let site = IfHSite { start: 0, then_start: 2, else_start: 5, end: 9, then_pad: 0, else_pad: 0, steps: 6 };
    let r = check_timing_balance(&p, &c, &[site], 100);
    assert_eq!(r.regions[0].0.iter().copied().collect::<Vec<_>>(), vec![3]);
    assert_eq!(r.regions[0].1.iter().copied().collect::<Vec<_>>(), vec![4]);
    assert!(!r.regions_balanced());
    assert_eq!(r.sweep_failures, vec![vec![0], vec![1], vec![2], vec![3]]);

    let src = parse("low x; high h; if h then h := 1 else { h := 1; h := 2 }; x := 1; out low x").unwrap();
    let compiled = compile_program(&src, &CompileOptions { width: 2, ..Default::default() }).unwrap();
    let r = check_timing_balance(&compiled.program, &compiled.machine_config(), &compiled.if_h_sites, 100);
    assert!(r.balanced(), "{r:?}");
    assert_eq!(r.sweep_runs, 16);
}

fn brute_force_poni<S: FaultProneSystem>(
    sys: &S,
    groups: &[Vec<BitState>],
    scope: &[usize],
    depth: usize,
) -> Option<usize> {
    let sets = powerset(scope);
    for k in 1..=depth {
        let mut seq = vec![0usize; k];
        loop {
            for g in groups {
                let outs: Vec<Vec<Action>> = g
                    .iter()
                    .map(|s0| {
                        let mut s = s0.clone();
                        seq.iter()
                            .map(|&i| {
                                let (a, t) = augmented_step_with(sys, &s, &sets[i]);
                                s = t;
                                a.low()
                            })
                            .collect()
                    })
                    .collect();
                if outs.iter().any(|o| *o != outs[0]) {
                    return Some(k);
                }
            }
            let mut i = 0;
            while i < k && seq[i] + 1 == sets.len() {
                seq[i] = 0;
                i += 1;
            }
            if i == k {
                break;
            }
            seq[i] += 1;
        }
    }
    None
}

fn brute_force_pni<S: FaultProneSystem>(
    sys: &S,
    env: &Environment,
    groups: &[Vec<BitState>],
    depth: usize,
) -> Option<usize> {
    (1..=depth).find(|&k| {
        (0..env.num_states()).any(|e| {
            groups.iter().any(|g| {
                let d0 = trace_distribution(sys, &g[0], e, env, k);
                g[1..].iter().any(|s| trace_distribution(sys, s, e, env, k) != d0)
            })
        })
    })
}

/// All states of a table system, grouped by their first faulty bit.
fn table_groups(sys: &TableSystem) -> Vec<Vec<BitState>> {
    let n = sys.layout().len();
    let key = sys.layout().faulty()[0];
    let mut groups = vec![Vec::new(), Vec::new()];
    for code in 0u64..1 << n {
        let bits: Vec<bool> = (0..n).map(|b| code >> b & 1 == 1).collect();
        groups[bits[key] as usize].push(BitState::from_bits(&bits));
    }
    groups
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn poni_matches_brute_force(seed in any::<u64>(), depth in 1usize..4) {
        let mut rng = gen::rng(seed);
        let sys = gen::random_table_system(&mut rng, 3);
        let groups = table_groups(&sys);
        let scope: Vec<usize> = sys.layout().faulty()[1..].to_vec();
        let got = poni_system(&sys, &groups, &scope, depth, 1 << 24).unwrap();
        let expected = brute_force_poni(&sys, &groups, &scope, depth);
        prop_assert_eq!(got.as_ref().map(|w| w.faults.len()), expected);
        if let Some(w) = got {
            prop_assert!(w.replay(&sys));
        }
    }

    #[test]
    fn pni_matches_brute_force(seed in any::<u64>(), depth in 1usize..4) {
        let mut rng = gen::rng(seed);
        let sys = gen::random_table_system(&mut rng, 3);
        let groups = table_groups(&sys);
        let scope: Vec<usize> = sys.layout().faulty()[1..].to_vec();
        let env = gen::random_environment(&mut rng, &scope);
        let got = pni_system(&sys, &env, &groups, depth, 1 << 24).unwrap();
        let expected = brute_force_pni(&sys, &env, &groups, depth);
        prop_assert_eq!(got.as_ref().map(|w| w.trace.len()), expected);
        if let Some(w) = got {
            prop_assert!(w.replay(&sys, &env));
        }
    }

    /// A strongly secure program runs in low lockstep from every pair of
    /// low-equal initial states.
    #[test]
    fn strong_security_implies_fault_free_lockstep(seed in any::<u64>(), disciplined in any::<bool>()) {
        let sys = gen::random_risc_system(&mut gen::rng(seed), disciplined);
        let verdict = strong_security(&sys, &cfg()).unwrap();
        if let Some(w) = &verdict {
            prop_assert!(w.replay(&sys));
        }
        let space = InitialSpace::new(sys.config(), None);
        let trace = |l, h| {
            // a halted run keeps taking silent steps
            let (mut t, _, _) = ftni::machine::run(sys.program(), sys.config(), space.state(l, h), 12);
            t.resize(12, Action::Tau);
            t.into_iter().map(Action::low).collect::<Vec<_>>()
        };
        let lockstep = (0..space.low_count().unwrap())
            .all(|l| (1..space.high_count().unwrap()).all(|h| trace(l, h) == trace(l, 0)));
        if verdict.is_none() {
            prop_assert!(lockstep);
        }
    }
}
