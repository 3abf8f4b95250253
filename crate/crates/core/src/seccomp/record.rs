use std::collections::BTreeMap;
use std::fmt;

use crate::machine::Reg;

/// A partial bijection from registers to the variables whose current value
/// they hold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct RegisterRecord {
    by_reg: BTreeMap<Reg, String>,
    by_var: BTreeMap<String, Reg>,
}

impl RegisterRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (Reg, &'a str)>) -> Self {
        pairs.into_iter().fold(Self::new(), |acc, (r, x)| acc.update(r, x))
    }

    pub fn var_of(&self, r: Reg) -> Option<&str> {
        self.by_reg.get(&r).map(String::as_str)
    }

    pub fn reg_of(&self, x: &str) -> Option<Reg> {
        self.by_var.get(x).copied()
    }

    pub fn len(&self) -> usize {
        self.by_reg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_reg.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Reg, &str)> {
        self.by_reg.iter().map(|(r, x)| (*r, x.as_str()))
    }

    /// `Φ[r↔x]`: drop the old bindings of `r` and of `x`, then bind them.
    pub fn update(&self, r: Reg, x: &str) -> Self {
        let mut out = self.break_reg(r);
        if let Some(old) = out.by_var.remove(x) {
            out.by_reg.remove(&old);
        }
        out.by_reg.insert(r, x.to_string());
        out.by_var.insert(x.to_string(), r);
        out
    }

    /// `Φ[r⊥]`.
    pub fn break_reg(&self, r: Reg) -> Self {
        let mut out = self.clone();
        if let Some(x) = out.by_reg.remove(&r) {
            out.by_var.remove(&x);
        }
        out
    }

    /// `Φ1 ⊓ Φ2`: the pairs both records agree on.
    pub fn meet(&self, other: &Self) -> Self {
        let by_reg: BTreeMap<Reg, String> =
            self.by_reg.iter().filter(|(r, x)| other.by_reg.get(r) == Some(x)).map(|(r, x)| (*r, x.clone())).collect();
        let by_var = by_reg.iter().map(|(r, x)| (x.clone(), *r)).collect();
        RegisterRecord { by_reg, by_var }
    }

    /// `Φ1 ⊑ Φ2`: every pair of `self` is in `other`.
    pub fn leq(&self, other: &Self) -> bool {
        self.by_reg.iter().all(|(r, x)| other.by_reg.get(r) == Some(x))
    }

    pub fn is_bijective(&self) -> bool {
        self.by_reg.len() == self.by_var.len() && self.by_reg.iter().all(|(r, x)| self.by_var.get(x) == Some(r))
    }
}

impl fmt::Display for RegisterRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.by_reg.iter().map(|(r, x)| format!("{r}->{x}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}
