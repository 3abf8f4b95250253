use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    L,
    H,
}

impl Level {
    pub fn leq(self, other: Level) -> bool {
        self <= other
    }

    pub fn join(self, other: Level) -> Level {
        self.max(other)
    }

    pub fn parse(s: &str) -> Option<Level> {
        match s {
            "L" | "l" | "low" => Some(Level::L),
            "H" | "h" | "high" => Some(Level::H),
            _ => None,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::L => "L",
            Level::H => "H",
        })
    }
}

/// Where compiled code may write: only high locations, or anywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WriteEffect {
    High,
    Any,
}

impl WriteEffect {
    pub fn leq(self, other: WriteEffect) -> bool {
        self <= other
    }

    pub fn join(self, other: WriteEffect) -> WriteEffect {
        self.max(other)
    }
}

impl fmt::Display for WriteEffect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WriteEffect::High => "w H",
            WriteEffect::Any => "w *",
        })
    }
}

/// Termination behaviour: an exact step count, timing that depends on low
/// data only, or timing that may depend on high data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Timing {
    Trm(u64),
    Low,
    High,
}

impl Timing {
    fn rank(self) -> (u8, u64) {
        match self {
            Timing::Trm(n) => (0, n),
            Timing::Low => (1, 0),
            Timing::High => (2, 0),
        }
    }

    /// The order Trm 0 ⊑ Trm 1 ⊑ … ⊑ Trm L ⊑ Trm H.
    pub fn leq(self, other: Timing) -> bool {
        self.rank() <= other.rank()
    }

    /// `⊔-`: Trm L when both sides are at most Trm L, otherwise Trm H.
    pub fn join_minus(self, other: Timing) -> Timing {
        if self.leq(Timing::Low) && other.leq(Timing::Low) {
            Timing::Low
        } else {
            Timing::High
        }
    }

    /// `⊎`: sums exact counts, otherwise falls back to `⊔-`.
    pub fn uplus(self, other: Timing) -> Timing {
        match (self, other) {
            (Timing::Trm(a), Timing::Trm(b)) => Timing::Trm(a + b),
            _ => self.join_minus(other),
        }
    }

    pub fn steps(self) -> Option<u64> {
        match self {
            Timing::Trm(n) => Some(n),
            _ => None,
        }
    }
}

impl fmt::Display for Timing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timing::Trm(n) => write!(f, "Trm {n}"),
            Timing::Low => f.write_str("Trm L"),
            Timing::High => f.write_str("Trm H"),
        }
    }
}

pub fn write_of(l: Level) -> WriteEffect {
    match l {
        Level::L => WriteEffect::Any,
        Level::H => WriteEffect::High,
    }
}

pub fn term_of(l: Level) -> Timing {
    match l {
        Level::L => Timing::Low,
        Level::H => Timing::High,
    }
}

/// Annotation of a compiled command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CmdAnnotation {
    pub timing: Timing,
    pub write: WriteEffect,
}

impl fmt::Display for CmdAnnotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}>", self.timing, self.write)
    }
}
