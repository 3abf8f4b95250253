use num::{BigRational, One};

use crate::faultlab::{uniform_environment, Advance, Environment, FaultSet, ScriptedAdversary};
use crate::machine::RiscSystem;

use super::{check_pni, check_poni, check_strong_security, CheckConfig, PoniWitness, Verdict, VerifyError};

/// The environments used to compare the probabilistic and possibilistic
/// checkers: uniform flips with rates 0, 1/4 and 1/2, and an adversary that
/// starts flipping the first scope bit with rate 1/2 after the first low
/// output.
pub fn environment_family(scope: &[usize]) -> Vec<(String, Environment)> {
    let mut out = Vec::new();
    for (n, d) in [(0, 1), (1, 4), (1, 2)] {
        let eps = BigRational::new(n.into(), d.into());
        let env = uniform_environment(&eps, scope).expect("uniform rates are valid");
        out.push((format!("uniform {eps}"), env));
    }
    let mut adv =
        ScriptedAdversary::new(scope, Advance::OnLowObservation).stage([(FaultSet::empty(), BigRational::one())]);
    adv = match scope.first() {
        Some(&b) => {
            let half = BigRational::new(1.into(), 2.into());
            adv.stage([(FaultSet::new(vec![b]), half.clone()), (FaultSet::empty(), half)])
        }
        None => adv.stage([(FaultSet::empty(), BigRational::one())]),
    };
    out.push(("scripted".into(), adv.build().expect("scripted stages are valid")));
    out
}

/// The deterministic adversary that injects exactly the fault sets of a
/// possibilistic witness, one per step, then stays quiet.
pub fn adversary_from_witness(w: &PoniWitness, scope: &[usize]) -> Environment {
    let mut adv = ScriptedAdversary::new(scope, Advance::EveryStep);
    for l in &w.faults {
        adv = adv.stage([(l.clone(), BigRational::one())]);
    }
    adv.stage([(FaultSet::empty(), BigRational::one())]).build().expect("witness fault sets lie in the scope")
}

#[derive(Debug, Clone)]
pub struct AgreementReport {
    pub poni: Verdict,
    pub pni: Vec<(String, Verdict)>,
}

impl AgreementReport {
    /// Possibilistic security holds exactly when every environment in the
    /// family sees no probabilistic leak.
    pub fn agree(&self) -> bool {
        self.poni.is_secure() == self.pni.iter().all(|(_, v)| v.is_secure())
    }
}

/// Runs the possibilistic checker and the probabilistic checker under every
/// environment of the family, over the same scope and depth.
pub fn check_agreement(sys: &RiscSystem, cfg: &CheckConfig) -> Result<AgreementReport, VerifyError> {
    let scope = super::space::resolve_scope(sys, cfg)?;
    let poni = check_poni(sys, cfg)?;
    let mut pni = Vec::new();
    for (name, env) in environment_family(&scope) {
        pni.push((name, check_pni(sys, &env, cfg)?));
    }
    Ok(AgreementReport { poni, pni })
}

#[derive(Debug, Clone, Default)]
pub struct ImplicationReport {
    pub checked: usize,
    pub ss_secure: usize,
    /// Names of programs that are strongly secure yet leak possibilistically.
    pub counterexamples: Vec<String>,
}

/// Checks that no strongly secure program violates bounded possibilistic
/// noninterference. Programs failing strong security are skipped.
pub fn check_ss_implies_poni(
    corpus: &[(String, RiscSystem)],
    cfg: &CheckConfig,
) -> Result<ImplicationReport, VerifyError> {
    let mut report = ImplicationReport::default();
    for (name, sys) in corpus {
        report.checked += 1;
        if !check_strong_security(sys, cfg)?.is_secure() {
            continue;
        }
        report.ss_secure += 1;
        if !check_poni(sys, cfg)?.is_secure() {
            report.counterexamples.push(name.clone());
        }
    }
    Ok(report)
}
