//! Composition of the total security parameter.
//!
//! SCS: `eps_tot = eps_bar + eps_cor + 2 eps' + 2 sqrt(3 eps0 g(N, 64))`.
//! NPP: `eps_tot = eps_bar + eps_cor + 2 sqrt(4 eps0 g(N, 108^2))`.
//!
//! A [`BudgetSplit`] says which fraction of `eps_tot` each term receives;
//! [`EpsilonBudget`] holds the resulting per-term values in log domain.

use std::f64::consts::LN_2;

use crate::definetti::{lift_budget, ln_penalty, DimensionSpec, GMode};
use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, LogEps};
use crate::result::Protocol;

/// How a key length is assessed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Finite-key analysis with the de Finetti penalty evaluated per `GMode`.
    Finite(GMode),
    /// Infinite-key limit: expected counts, no concentration corrections, no
    /// penalty and no additive constants.
    Asymptotic,
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Finite(GMode::Exact) => "exact",
            Mode::Finite(GMode::PaperBound) => "paper-bound",
            Mode::Asymptotic => "asymptotic",
        }
    }
}

impl Default for Mode {
    fn default() -> Self {
        Mode::Finite(GMode::Exact)
    }
}

/// Fractions of `eps_tot` given to each additive term.
///
/// `prime` is the share of `2 eps'` and `pe` the share of the parameter
/// estimation term `2 sqrt(k eps0 g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetSplit {
    pub bar: f64,
    pub cor: f64,
    pub prime: f64,
    pub pe: f64,
}

impl BudgetSplit {
    pub fn default_for(protocol: Protocol) -> Self {
        match protocol {
            Protocol::Scs => Self {
                bar: 0.25,
                cor: 0.25,
                prime: 0.25,
                pe: 0.25,
            },
            Protocol::Npp => {
                let third = 1.0 / 3.0;
                Self {
                    bar: third,
                    cor: third,
                    prime: 0.0,
                    pe: third,
                }
            }
        }
    }

    /// Gives `pe` to parameter estimation and shares the rest among the
    /// remaining terms in their default proportions.
    pub fn with_pe_fraction(protocol: Protocol, pe: f64) -> Self {
        let rest = 1.0 - pe;
        match protocol {
            Protocol::Scs => Self {
                bar: rest / 3.0,
                cor: rest / 3.0,
                prime: rest / 3.0,
                pe,
            },
            Protocol::Npp => Self {
                bar: rest / 2.0,
                cor: rest / 2.0,
                prime: 0.0,
                pe,
            },
        }
    }

    pub fn validate(&self, protocol: Protocol) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::domain(name, v, "0 < fraction < 1"))
            }
        };
        positive("split.bar", self.bar)?;
        positive("split.cor", self.cor)?;
        positive("split.pe", self.pe)?;
        match protocol {
            Protocol::Scs => positive("split.prime", self.prime)?,
            Protocol::Npp if self.prime != 0.0 => {
                return Err(Error::domain("split.prime", self.prime, "0 for NPP"))
            }
            Protocol::Npp => {}
        }
        let sum = self.bar + self.cor + self.prime + self.pe;
        if sum > 1.0 + 1e-12 {
            return Err(Error::domain("split total", sum, "<= 1"));
        }
        Ok(())
    }
}

/// Per-term failure probabilities of one finite-key evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonBudget {
    pub t_bar: LogEps,
    pub t_cor: LogEps,
    /// Present for SCS only.
    pub t_prime: Option<LogEps>,
    /// Per-use collective-attack failure probability of each Chernoff call.
    pub t0: LogEps,
    pub ln_g: f64,
    pub k_uses: u32,
}

impl EpsilonBudget {
    pub fn new(
        protocol: Protocol,
        eps_tot: LogEps,
        n: u64,
        g_mode: GMode,
        split: &BudgetSplit,
    ) -> Result<Self> {
        split.validate(protocol)?;
        let (k_uses, dims) = match protocol {
            Protocol::Scs => (3, DimensionSpec::scs()),
            Protocol::Npp => (4, DimensionSpec::npp()),
        };
        let t = eps_tot.t();
        let t_bar = LogEps::new(t - split.bar.ln())?;
        let t_cor = LogEps::new(t - split.cor.ln())?;
        let t_prime = match protocol {
            // 2 eps' = prime * eps_tot
            Protocol::Scs => Some(LogEps::new(t + (2.0 / split.prime).ln())?),
            Protocol::Npp => None,
        };
        // 2 sqrt(k eps0 g) = pe * eps_tot  =>  k eps0 g = (pe eps_tot / 2)^2
        let target = LogEps::new(2.0 * (t + (2.0 / split.pe).ln()))?;
        let t0 = lift_budget(target, k_uses, n, dims, g_mode)?;
        let ln_g = ln_penalty(n, dims.x(), g_mode)?;
        Ok(Self {
            t_bar,
            t_cor,
            t_prime,
            t0,
            ln_g,
            k_uses,
        })
    }

    pub fn default_for(protocol: Protocol, eps_tot: LogEps, n: u64, g_mode: GMode) -> Result<Self> {
        Self::new(
            protocol,
            eps_tot,
            n,
            g_mode,
            &BudgetSplit::default_for(protocol),
        )
    }

    /// `ln eps_tot` reassembled from the parts.
    pub fn ln_eps_tot(&self) -> f64 {
        let pe = LN_2 + 0.5 * ((self.k_uses as f64).ln() + self.ln_g - self.t0.t());
        let mut terms = vec![self.t_bar.ln_eps(), self.t_cor.ln_eps(), pe];
        if let Some(tp) = self.t_prime {
            terms.push(LN_2 + tp.ln_eps());
        }
        log_sum_exp(&terms)
    }

    /// `log2(2 / eps_cor)`, the error-verification hash length.
    pub fn correctness_bits(&self) -> f64 {
        1.0 + self.t_cor.log2_inv()
    }

    /// `2 log2(1 / (2 eps_bar))`, the privacy-amplification margin.
    pub fn smoothing_bits(&self) -> f64 {
        2.0 * (self.t_bar.log2_inv() - 1.0)
    }

    /// `log2(2 / eps'^2)` from the smooth-entropy chain rule; zero when the
    /// protocol has no such term.
    pub fn chain_rule_bits(&self) -> f64 {
        self.t_prime.map_or(0.0, |tp| 1.0 + 2.0 * tp.log2_inv())
    }
}
