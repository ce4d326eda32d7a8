use std::fmt;
use std::str::FromStr;

use super::taps::*;
use crate::error::Error;

/// Level-1 biorthogonal filter sets. Names follow the usual DTCWT toolbox
/// conventions: `NearSymmetricA` is the 5/7-tap set and `NearSymmetricB` the
/// 13/19-tap set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterBankName {
    Antonini,
    LeGall,
    NearSymmetricA,
    NearSymmetricB,
}

impl FilterBankName {
    pub const ALL: [FilterBankName; 4] = [
        FilterBankName::Antonini,
        FilterBankName::LeGall,
        FilterBankName::NearSymmetricA,
        FilterBankName::NearSymmetricB,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterBankName::Antonini => "antonini",
            FilterBankName::LeGall => "legall",
            FilterBankName::NearSymmetricA => "near_sym_a",
            FilterBankName::NearSymmetricB => "near_sym_b",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            FilterBankName::Antonini => 0,
            FilterBankName::LeGall => 1,
            FilterBankName::NearSymmetricA => 2,
            FilterBankName::NearSymmetricB => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.code() == code)
    }
}

impl Default for FilterBankName {
    fn default() -> Self {
        FilterBankName::NearSymmetricA
    }
}

impl fmt::Display for FilterBankName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterBankName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown filter bank '{s}'")))
    }
}

/// Odd-length biorthogonal analysis/synthesis pair used at level 1.
#[derive(Debug, Clone)]
pub struct Biorthogonal {
    pub h0: &'static [f64],
    pub h1: &'static [f64],
    pub g0: &'static [f64],
    pub g1: &'static [f64],
}

/// Even-length quarter-shift filters for levels two and up. The `a` and
/// `b` filters drive the two trees and are time reverses of one another.
#[derive(Debug, Clone)]
pub struct QShift {
    pub h0a: &'static [f64],
    pub h0b: &'static [f64],
    pub h1a: &'static [f64],
    pub h1b: &'static [f64],
    pub g0a: &'static [f64],
    pub g0b: &'static [f64],
    pub g1a: &'static [f64],
    pub g1b: &'static [f64],
}

/// Complete filter configuration of a dual-tree transform: a level-1
/// biorthogonal set plus the 14-tap quarter-shift set for deeper levels.
#[derive(Debug, Clone)]
pub struct FilterBank {
    pub name: FilterBankName,
    pub level1: Biorthogonal,
    pub qshift: QShift,
}

pub const QSHIFT14: QShift = QShift {
    h0a: &QSHIFT_B_H0A,
    h0b: &QSHIFT_B_H0B,
    h1a: &QSHIFT_B_H1A,
    h1b: &QSHIFT_B_H1B,
    g0a: &QSHIFT_B_G0A,
    g0b: &QSHIFT_B_G0B,
    g1a: &QSHIFT_B_G1A,
    g1b: &QSHIFT_B_G1B,
};

impl FilterBank {
    pub fn new(name: FilterBankName) -> Self {
        let level1 = match name {
            FilterBankName::Antonini => Biorthogonal {
                h0: &ANTONINI_H0O,
                h1: &ANTONINI_H1O,
                g0: &ANTONINI_G0O,
                g1: &ANTONINI_G1O,
            },
            FilterBankName::LeGall => Biorthogonal {
                h0: &LEGALL_H0O,
                h1: &LEGALL_H1O,
                g0: &LEGALL_G0O,
                g1: &LEGALL_G1O,
            },
            FilterBankName::NearSymmetricA => Biorthogonal {
                h0: &NEAR_SYM_A_H0O,
                h1: &NEAR_SYM_A_H1O,
                g0: &NEAR_SYM_A_G0O,
                g1: &NEAR_SYM_A_G1O,
            },
            FilterBankName::NearSymmetricB => Biorthogonal {
                h0: &NEAR_SYM_B_H0O,
                h1: &NEAR_SYM_B_H1O,
                g0: &NEAR_SYM_B_G0O,
                g1: &NEAR_SYM_B_G1O,
            },
        };
        FilterBank {
            name,
            level1,
            qshift: QSHIFT14,
        }
    }
}

impl Default for FilterBank {
    fn default() -> Self {
        FilterBank::new(FilterBankName::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tap_counts() {
        let lens = |n| {
            let b = FilterBank::new(n).level1;
            (b.h0.len(), b.h1.len())
        };
        assert_eq!(lens(FilterBankName::Antonini), (9, 7));
        assert_eq!(lens(FilterBankName::LeGall), (5, 3));
        assert_eq!(lens(FilterBankName::NearSymmetricA), (5, 7));
        assert_eq!(lens(FilterBankName::NearSymmetricB), (13, 19));
        assert_eq!(QSHIFT14.h0a.len(), 14);
    }

    #[test]
    fn qshift_trees_are_time_reversed() {
        let rev: Vec<f64> = QSHIFT14.h0a.iter().rev().copied().collect();
        assert_eq!(rev, QSHIFT14.h0b);
    }

    #[test]
    fn lowpass_dc_gain() {
        for n in FilterBankName::ALL {
            let b = FilterBank::new(n).level1;
            let s: f64 = b.h0.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "{n}: {s}");
        }
    }

    #[test]
    fn names_round_trip() {
        for n in FilterBankName::ALL {
            assert_eq!(n.as_str().parse::<FilterBankName>().unwrap(), n);
            assert_eq!(FilterBankName::from_code(n.code()), Some(n));
        }
        assert!("haar".parse::<FilterBankName>().is_err());
    }
}
