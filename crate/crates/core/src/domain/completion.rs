use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DomainError;

/// Minimum fraction of present hours required for automatic success,
/// held as a reduced rational in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Threshold {
    num: u32,
    den: u32,
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Threshold {
    pub const FOUR_FIFTHS: Threshold = Threshold { num: 4, den: 5 };
    pub const ONE: Threshold = Threshold { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self, DomainError> {
        if den == 0 || num == 0 || num > den {
            return Err(DomainError::ThresholdOutOfRange { num, den });
        }
        let g = gcd(num, den);
        Ok(Threshold { num: num / g, den: den / g })
    }

    pub fn numerator(self) -> u32 {
        self.num
    }

    pub fn denominator(self) -> u32 {
        self.den
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::FOUR_FIFTHS
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Threshold {
    type Err = DomainError;

    /// Accepts `n/d` or a bare integer (only `1` is in range).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DomainError::ThresholdSyntax(s.to_string());
        let (num, den) = match s.trim().split_once('/') {
            Some((n, d)) => (n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
            None => (s.trim().parse().map_err(|_| bad())?, 1),
        };
        Threshold::new(num, den)
    }
}

impl Serialize for Threshold {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityDecision {
    Accept,
    Refuse,
}

/// Decides whether one more participant fits. `current_enrolled` above the
/// limit means the stored state is already corrupt.
pub fn capacity_decision(current_enrolled: u32, max_participants: u32) -> Result<CapacityDecision, DomainError> {
    if current_enrolled > max_participants {
        return Err(DomainError::CapacityExceeded {
            enrolled: current_enrolled,
            max: max_participants,
        });
    }
    Ok(if current_enrolled < max_participants {
        CapacityDecision::Accept
    } else {
        CapacityDecision::Refuse
    })
}

/// True iff `present_hours / total_hours >= threshold`, compared by
/// cross-multiplication so there is no rounding at the boundary.
pub fn determine_completion(present_hours: u32, total_hours: u32, threshold: Threshold) -> Result<bool, DomainError> {
    if total_hours == 0 {
        return Err(DomainError::ZeroTotalHours);
    }
    if present_hours > total_hours {
        return Err(DomainError::PresentExceedsTotal {
            present: present_hours,
            total: total_hours,
        });
    }
    let lhs = u64::from(present_hours) * u64::from(threshold.den);
    let rhs = u64::from(threshold.num) * u64::from(total_hours);
    Ok(lhs >= rhs)
}
