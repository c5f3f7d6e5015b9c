//! Key-rate results and their diagnostics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::budget::{EpsilonBudget, Mode};
use crate::npp::NppObservation;
use crate::scs::ScsObservation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Scs,
    Npp,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Scs => "scs",
            Protocol::Npp => "npp",
        })
    }
}

/// A clamp that fired while evaluating a key length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u16)]
pub enum Clamp {
    /// An estimated probability (`P_O`, `P_B`, `P_ph`) was capped at one.
    ProbabilityCap = 1 << 0,
    /// The phase-error estimate exceeded `n_Z` and was capped.
    PhaseErrorsCapped = 1 << 1,
    /// Phase-error rate above one half; the entropy term was held at `n_Z`.
    PhaseErrorRateHalf = 1 << 2,
    /// Bit error rate above one half.
    BitErrorRateHalf = 1 << 3,
    /// The key length was negative and floored at zero.
    KeyFloor = 1 << 4,
    /// A decoy bound was negative and set to zero.
    DecoyFloor = 1 << 5,
    /// A decoy bound exceeded one and was capped.
    DecoyCap = 1 << 6,
    /// The phase-correct estimate exceeded `n_s` and was capped.
    CorrectCapped = 1 << 7,
    /// No sifted or untagged events at all.
    NoEvents = 1 << 8,
}

impl Clamp {
    pub const ALL: [Clamp; 9] = [
        Clamp::ProbabilityCap,
        Clamp::PhaseErrorsCapped,
        Clamp::PhaseErrorRateHalf,
        Clamp::BitErrorRateHalf,
        Clamp::KeyFloor,
        Clamp::DecoyFloor,
        Clamp::DecoyCap,
        Clamp::CorrectCapped,
        Clamp::NoEvents,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Clamp::ProbabilityCap => "prob_le_1",
            Clamp::PhaseErrorsCapped => "n_ph_le_n_z",
            Clamp::PhaseErrorRateHalf => "e_ph_le_half",
            Clamp::BitErrorRateHalf => "e_bit_le_half",
            Clamp::KeyFloor => "l_ge_0",
            Clamp::DecoyFloor => "q_ge_0",
            Clamp::DecoyCap => "q_le_1",
            Clamp::CorrectCapped => "n_cor_le_n_s",
            Clamp::NoEvents => "no_events",
        }
    }

    pub fn bit(self) -> u16 {
        self as u16
    }

    pub(crate) fn from_mask(mask: u16) -> Vec<Clamp> {
        Clamp::ALL
            .iter()
            .copied()
            .filter(|c| mask & c.bit() != 0)
            .collect()
    }
}

impl fmt::Display for Clamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters a result was evaluated at. Fields that a protocol does not
/// use are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParamVector {
    pub mu: f64,
    pub nu: Option<f64>,
    pub p: f64,
    pub p0: Option<f64>,
    pub c0: Option<f64>,
    /// Fraction of `eps_tot` given to parameter estimation, when tuned.
    pub pe_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Scs(ScsObservation),
    Npp(NppObservation),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateResult {
    pub protocol: Protocol,
    pub mode: Mode,
    pub n_pulses: u64,
    pub distance_km: f64,
    pub params: ParamVector,
    pub observation: Observation,
    /// `n_ph` upper bound for SCS, `n_cor` lower bound for NPP.
    pub estimate: f64,
    /// Key length before the floor at zero; smooth in the parameters.
    pub raw_bits: f64,
    pub l_bits: f64,
    pub rate: f64,
    /// Every subtractive contribution, in bits.
    pub terms: Vec<(&'static str, f64)>,
    /// `None` in asymptotic mode.
    pub budget: Option<EpsilonBudget>,
    pub clamps: Vec<Clamp>,
}

impl KeyRateResult {
    pub fn is_zero(&self) -> bool {
        self.l_bits <= 0.0
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|(k, _)| *k == name).map(|&(_, v)| v)
    }

    pub fn has_clamp(&self, c: Clamp) -> bool {
        self.clamps.contains(&c)
    }
}
