use std::collections::HashMap;
use std::fmt;

use super::FaultError;

/// Whether a location may be hit by a transient fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tolerance {
    FaultTolerant,
    Faulty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub name: String,
    pub tolerance: Tolerance,
}

impl Location {
    pub fn tolerant(name: impl Into<String>) -> Self {
        Location { name: name.into(), tolerance: Tolerance::FaultTolerant }
    }

    pub fn faulty(name: impl Into<String>) -> Self {
        Location { name: name.into(), tolerance: Tolerance::Faulty }
    }
}

/// The ordered location set of a system. Bit `i` of every state belongs to
/// location `i` of the layout.
#[derive(Debug, Clone)]
pub struct Layout {
    locations: Vec<Location>,
    index: HashMap<String, usize>,
}

impl Layout {
    pub fn new(locations: Vec<Location>) -> Result<Self, FaultError> {
        let mut index = HashMap::with_capacity(locations.len());
        for (i, loc) in locations.iter().enumerate() {
            if index.insert(loc.name.clone(), i).is_some() {
                return Err(FaultError::DuplicateLocation(loc.name.clone()));
            }
        }
        Ok(Layout { locations, index })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn location(&self, i: usize) -> &Location {
        &self.locations[i]
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn is_faulty(&self, i: usize) -> bool {
        self.locations[i].tolerance == Tolerance::Faulty
    }

    /// Indices of all faulty locations, in layout order.
    pub fn faulty(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_faulty(i)).collect()
    }

    /// Resolves names to a fault set, rejecting unknown or fault-tolerant locations.
    pub fn fault_set<S: AsRef<str>>(&self, names: &[S]) -> Result<FaultSet, FaultError> {
        let mut locs = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            let i = self.lookup(n).ok_or_else(|| FaultError::UnknownLocation(n.to_string()))?;
            if !self.is_faulty(i) {
                return Err(FaultError::TolerantLocation(n.to_string()));
            }
            locs.push(i);
        }
        Ok(FaultSet::new(locs))
    }

    pub fn zero_state(&self) -> BitState {
        BitState::zeros(self.len())
    }
}

/// A total assignment of bits to the locations of a layout.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitState {
    words: Vec<u64>,
    len: usize,
}

impl BitState {
    pub fn zeros(len: usize) -> Self {
        BitState { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range");
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit {i} out of range");
        let m = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn toggle(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range");
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    /// Reads `width` bits starting at `start`, LSB first.
    pub fn read_word(&self, start: usize, width: usize) -> u64 {
        (0..width).fold(0, |acc, b| acc | (self.get(start + b) as u64) << b)
    }

    pub fn write_word(&mut self, start: usize, width: usize, value: u64) {
        for b in 0..width {
            self.set(start + b, value >> b & 1 == 1);
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = BitState::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }
}

impl fmt::Debug for BitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A set of location indices. Kept sorted and deduplicated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaultSet(Vec<usize>);

impl FaultSet {
    pub fn new(mut locs: Vec<usize>) -> Self {
        locs.sort_unstable();
        locs.dedup();
        FaultSet(locs)
    }

    pub fn empty() -> Self {
        FaultSet(Vec::new())
    }

    /// The subset of `scope` selected by the bits of `mask`.
    pub fn from_mask(scope: &[usize], mask: u64) -> Self {
        FaultSet::new(scope.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &l)| l).collect())
    }

    pub fn locations(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Renders as `{a,b}` with names sorted.
    pub fn render(&self, layout: &Layout) -> String {
        let mut names: Vec<&str> = self.0.iter().map(|&i| layout.location(i).name.as_str()).collect();
        names.sort_unstable();
        format!("{{{}}}", names.join(","))
    }
}

/// All subsets of `scope`, ordered by mask value.
pub fn powerset(scope: &[usize]) -> Vec<FaultSet> {
    assert!(scope.len() < 32, "fault scope too large to enumerate");
    (0..1u64 << scope.len()).map(|m| FaultSet::from_mask(scope, m)).collect()
}

/// Negates exactly the bits named in `faults`.
pub fn flip(layout: &Layout, state: &BitState, faults: &FaultSet) -> Result<BitState, FaultError> {
    for &l in faults.locations() {
        if l >= layout.len() {
            return Err(FaultError::UnknownLocation(format!("#{l}")));
        }
        if !layout.is_faulty(l) {
            return Err(FaultError::TolerantLocation(layout.location(l).name.clone()));
        }
    }
    Ok(flip_unchecked(state, faults))
}

/// [`flip`] without the tolerance check, for fault sets already validated.
pub fn flip_unchecked(state: &BitState, faults: &FaultSet) -> BitState {
    let mut s = state.clone();
    for &l in faults.locations() {
        s.toggle(l);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Low,
    High,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Low => "low",
            Channel::High => "high",
        })
    }
}

/// A system action: the silent step or an output of a word on a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Tau,
    Out(Channel, u64),
}

impl Action {
    /// Projection onto the low observer: low outputs stay, everything else is τ.
    pub fn low(self) -> Action {
        match self {
            Action::Out(Channel::Low, _) => self,
            _ => Action::Tau,
        }
    }

    pub fn is_low(self) -> bool {
        matches!(self, Action::Out(Channel::Low, _))
    }

    pub fn parse(s: &str) -> Option<Action> {
        if s == "tau" {
            return Some(Action::Tau);
        }
        let (ch, v) = s.split_once('!')?;
        let ch = match ch {
            "low" => Channel::Low,
            "high" => Channel::High,
            _ => return None,
        };
        Some(Action::Out(ch, v.parse().ok()?))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Tau => f.write_str("tau"),
            Action::Out(ch, v) => write!(f, "{ch}!{v}"),
        }
    }
}
