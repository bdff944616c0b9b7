//! Conditional rules and the rule store.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::device::OperationKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    /// User interacts with the app to request the operation on the device.
    P1,
    /// The app reaches the device through the service that owns the operation.
    P2,
    /// User is shown what operation is about to run.
    P3,
    /// User approves the operation.
    P4,
    /// The running operation stays visible.
    O1,
    /// The running session is logged.
    O2,
    /// The session terminates.
    E1,
    /// The termination is logged.
    E2,
    /// The user sees that the session ended.
    E3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleKind {
    Pre,
    Ongoing,
    Exit,
}

impl RuleId {
    pub const ALL: [RuleId; 9] = [
        RuleId::P1,
        RuleId::P2,
        RuleId::P3,
        RuleId::P4,
        RuleId::O1,
        RuleId::O2,
        RuleId::E1,
        RuleId::E2,
        RuleId::E3,
    ];

    pub const PRECONDITIONS: [RuleId; 4] = [RuleId::P1, RuleId::P2, RuleId::P3, RuleId::P4];

    pub fn kind(self) -> RuleKind {
        match self {
            RuleId::P1 | RuleId::P2 | RuleId::P3 | RuleId::P4 => RuleKind::Pre,
            RuleId::O1 | RuleId::O2 => RuleKind::Ongoing,
            RuleId::E1 | RuleId::E2 | RuleId::E3 => RuleKind::Exit,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::P1 => "P1",
            RuleId::P2 => "P2",
            RuleId::P3 => "P3",
            RuleId::P4 => "P4",
            RuleId::O1 => "O1",
            RuleId::O2 => "O2",
            RuleId::E1 => "E1",
            RuleId::E2 => "E2",
            RuleId::E3 => "E3",
        }
    }

    fn bit(self) -> u16 {
        1 << (self as u16)
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<RuleId>", into = "Vec<RuleId>")]
pub struct RuleSet(u16);

impl RuleSet {
    pub const EMPTY: RuleSet = RuleSet(0);

    pub fn of(rules: &[RuleId]) -> Self {
        rules.iter().copied().collect()
    }

    pub fn insert(&mut self, r: RuleId) {
        self.0 |= r.bit();
    }

    pub fn contains(self, r: RuleId) -> bool {
        self.0 & r.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = RuleId> {
        RuleId::ALL.into_iter().filter(move |r| self.contains(*r))
    }
}

impl FromIterator<RuleId> for RuleSet {
    fn from_iter<I: IntoIterator<Item = RuleId>>(iter: I) -> Self {
        let mut s = RuleSet::EMPTY;
        for r in iter {
            s.insert(r);
        }
        s
    }
}

impl From<Vec<RuleId>> for RuleSet {
    fn from(v: Vec<RuleId>) -> Self {
        v.into_iter().collect()
    }
}

impl From<RuleSet> for Vec<RuleId> {
    fn from(s: RuleSet) -> Self {
        s.iter().collect()
    }
}

impl fmt::Debug for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, r) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(r.as_str())?;
        }
        f.write_str("}")
    }
}

/// Rule store. Every I/O operation is governed by the same nine rules.
pub fn rules_for(_op: OperationKind) -> &'static [RuleId] {
    &RuleId::ALL
}

/// Precondition outcomes for one request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreconditionEval {
    pub p1: bool,
    pub p2: bool,
    pub p3: bool,
    pub p4: bool,
}

impl PreconditionEval {
    pub fn unsatisfied(&self) -> RuleSet {
        let mut s = RuleSet::EMPTY;
        for (rule, ok) in [
            (RuleId::P1, self.p1),
            (RuleId::P2, self.p2),
            (RuleId::P3, self.p3),
            (RuleId::P4, self.p4),
        ] {
            if !ok {
                s.insert(rule);
            }
        }
        s
    }

    pub fn all_satisfied(&self) -> bool {
        self.p1 && self.p2 && self.p3 && self.p4
    }
}
