//! Twin-field protocol without phase postselection: three-intensity decoy
//! bounds, phase-correct probability and key length.
//!
//! In each round Alice and Bob independently send a signal (probability
//! `p`, intensity `mu`, phase encoding a key bit) or a phase-randomised
//! decoy, which is vacuum with probability `p0` and intensity `nu`
//! otherwise. The source map behind the decoy bounds uses the Poisson
//! weights `e^{-nu}`, `nu e^{-nu}` and the multi-photon remainder, and the
//! parties' systems have total dimension 108.

use crate::budget::{BudgetSplit, EpsilonBudget, Mode};
use crate::channel::{GlobalParams, NppRates};
use crate::concentration::{expectation_lower, expectation_upper, observation_lower};
use crate::error::{Error, Result};
use crate::numerics::LogEps;
use crate::result::{Clamp, KeyRateResult, Observation, ParamVector, Protocol};
use crate::scs::{capped_entropy, KeyLength};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NppObservation {
    pub n_00: f64,
    pub n_0nu: f64,
    pub n_nu0: f64,
    pub n_s: f64,
    pub e_bit: f64,
}

impl NppObservation {
    pub fn new(n_00: f64, n_0nu: f64, n_nu0: f64, n_s: f64, e_bit: f64) -> Result<Self> {
        for (name, v) in [
            ("n_00", n_00),
            ("n_0nu", n_0nu),
            ("n_nu0", n_nu0),
            ("n_s", n_s),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(name, v, "finite and >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&e_bit) {
            return Err(Error::domain("e_bit", e_bit, "in [0, 1]"));
        }
        Ok(Self {
            n_00,
            n_0nu,
            n_nu0,
            n_s,
            e_bit,
        })
    }
}

/// Lower bounds on the single-photon click rates of the two arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NppDecoyBounds {
    pub q00_upper: f64,
    pub q01_lower: f64,
    pub q10_lower: f64,
    mask: u16,
}

impl NppDecoyBounds {
    pub fn clamps(&self) -> Vec<Clamp> {
        Clamp::from_mask(self.mask)
    }
}

/// `sum_{k >= 2} x^k / k!`, i.e. `e^x - 1 - x`, accurate for small `x`.
fn exp_tail2(x: f64) -> f64 {
    if x > 0.5 {
        return x.exp_m1() - x;
    }
    let (mut term, mut sum, mut k) = (x * x / 2.0, 0.0, 2.0);
    while term > 1e-18 * sum || sum == 0.0 {
        sum += term;
        k += 1.0;
        term *= x / k;
        if term == 0.0 {
            break;
        }
    }
    sum
}

fn single_photon_lower(
    n_00: f64,
    n_x: f64,
    n: f64,
    p: f64,
    p0: f64,
    nu: f64,
    t0: LogEps,
) -> (f64, f64, u16) {
    let q2 = (1.0 - p) * (1.0 - p);
    let q00 = expectation_upper(n_00, t0) / (n * q2 * p0 * p0);
    let rate = expectation_lower(n_x, t0) / (n * q2 * p0 * (1.0 - p0));
    let w0 = (-nu).exp();
    // 1 - e^{-nu} - nu e^{-nu} = e^{-nu} (e^nu - 1 - nu)
    let tail = w0 * exp_tail2(nu);
    let q = (rate - w0 * q00 - tail) / (w0 * nu);
    if q < 0.0 {
        (q00, 0.0, Clamp::DecoyFloor.bit())
    } else if q > 1.0 {
        (q00, 1.0, Clamp::DecoyCap.bit())
    } else {
        (q00, q, 0)
    }
}

/// Decoy-state bounds: `q00` from above, then `q01`, `q10` from below with
/// the multi-photon rates replaced by one.
pub fn decoy_bounds(
    obs: &NppObservation,
    n: u64,
    p: f64,
    p0: f64,
    nu: f64,
    t0: LogEps,
) -> NppDecoyBounds {
    let nf = n as f64;
    let (q00, q01, m1) = single_photon_lower(obs.n_00, obs.n_0nu, nf, p, p0, nu, t0);
    let (_, q10, m2) = single_photon_lower(obs.n_00, obs.n_nu0, nf, p, p0, nu, t0);
    NppDecoyBounds {
        q00_upper: q00,
        q01_lower: q01,
        q10_lower: q10,
        mask: m1 | m2,
    }
}

/// `(A, B)` with `A^2 = mu e^{-2mu}` and `B^2 = e^{-2mu} (sinh mu cosh mu - mu)`.
pub fn phase_correct_coefficients(mu: f64) -> (f64, f64) {
    let w = (-2.0 * mu).exp();
    // sinh(mu) cosh(mu) - mu = sum_{k >= 1} 2^{2k} mu^{2k+1} / (2k+1)!
    let odd = if mu > 0.5 {
        0.5 * (2.0 * mu).sinh() - mu
    } else {
        let x2 = 4.0 * mu * mu;
        let (mut term, mut sum, mut k) = (x2 * mu / 6.0, 0.0, 1.0);
        while term > 1e-18 * sum || sum == 0.0 {
            sum += term;
            k += 1.0;
            term *= x2 / ((2.0 * k) * (2.0 * k + 1.0));
            if term == 0.0 {
                break;
            }
        }
        sum
    };
    ((w * mu).sqrt(), (w * odd).sqrt())
}

/// Lower bound on the per-round phase-correct probability,
/// `p^2 [max(0, A sqrt(q01) - B)^2 + max(0, A sqrt(q10) - B)^2]`.
pub fn phase_correct_bound(q01_lower: f64, q10_lower: f64, mu: f64, p: f64) -> f64 {
    let (a, b) = phase_correct_coefficients(mu);
    let arm = |q: f64| (a * q.max(0.0).sqrt() - b).max(0.0).powi(2);
    p * p * (arm(q01_lower) + arm(q10_lower))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NppKeyLength {
    /// Phase-correct event lower bound, capped at `n_s`.
    pub n_cor: f64,
    pub key: KeyLength,
}

/// `n_cor = min(n_s, cher_lower(N P_cor))`, then
/// `l = n_s (1 - H2(1 - n_cor/n_s) - f H2(e_bit)) - log2(2/eps_cor)
///      - 2 log2(1/(2 eps_bar))`, floored at zero.
///
/// `budget = None` drops the constants (asymptotic limit).
pub fn npp_key_length(
    obs: &NppObservation,
    p_cor: f64,
    n: u64,
    g: &GlobalParams,
    budget: Option<&EpsilonBudget>,
    t0: LogEps,
) -> NppKeyLength {
    let mut mask = 0;
    let mut n_cor = observation_lower(n as f64 * p_cor, t0);
    if n_cor > obs.n_s {
        mask |= Clamp::CorrectCapped.bit();
        n_cor = obs.n_s;
    }
    if obs.n_s <= 0.0 {
        mask |= Clamp::NoEvents.bit();
    }
    let e_ph = if obs.n_s > 0.0 {
        1.0 - n_cor / obs.n_s
    } else {
        1.0
    };
    let phase_entropy = obs.n_s * capped_entropy(e_ph, Clamp::PhaseErrorRateHalf, &mut mask);
    let ec_leak = g.f * obs.n_s * capped_entropy(obs.e_bit, Clamp::BitErrorRateHalf, &mut mask);
    NppKeyLength {
        n_cor,
        key: KeyLength::assemble(obs.n_s, phase_entropy, ec_leak, budget, mask),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NppParams {
    pub mu: f64,
    pub nu: f64,
    pub p: f64,
    pub p0: f64,
}

impl NppParams {
    fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::domain("mu", self.mu, "> 0"));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::domain("nu", self.nu, "> 0"));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::domain("p", self.p, "in (0, 1)"));
        }
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return Err(Error::domain("p0", self.p0, "in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NppOutcome {
    pub obs: NppObservation,
    pub decoy: NppDecoyBounds,
    pub p_cor: f64,
    pub key: NppKeyLength,
}

/// Evaluates NPP key lengths for one `(N, L)` point and analysis mode.
#[derive(Debug, Clone)]
pub struct NppEvaluator {
    g: GlobalParams,
    mode: Mode,
    split: BudgetSplit,
    budget: Option<EpsilonBudget>,
}

impl NppEvaluator {
    pub fn new(g: &GlobalParams, mode: Mode, split: BudgetSplit) -> Result<Self> {
        g.validate()?;
        let budget = match mode {
            Mode::Asymptotic => None,
            Mode::Finite(gm) => Some(EpsilonBudget::new(
                Protocol::Npp,
                g.eps_tot,
                g.n_pulses,
                gm,
                &split,
            )?),
        };
        Ok(Self {
            g: *g,
            mode,
            split,
            budget,
        })
    }

    pub fn with_split(&self, split: BudgetSplit) -> Result<Self> {
        Self::new(&self.g, self.mode, split)
    }

    pub fn budget(&self) -> Option<&EpsilonBudget> {
        self.budget.as_ref()
    }

    pub fn split(&self) -> BudgetSplit {
        self.split
    }

    pub fn global(&self) -> &GlobalParams {
        &self.g
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn t0(&self) -> LogEps {
        self.budget.map_or(LogEps::CERTAIN, |b| b.t0)
    }

    pub(crate) fn outcome_for(
        &self,
        obs: NppObservation,
        params: &NppParams,
    ) -> Result<NppOutcome> {
        params.validate()?;
        let n = self.g.n_pulses;
        let t0 = self.t0();
        let decoy = decoy_bounds(&obs, n, params.p, params.p0, params.nu, t0);
        let p_cor = phase_correct_bound(decoy.q01_lower, decoy.q10_lower, params.mu, params.p);
        let mut key = npp_key_length(&obs, p_cor, n, &self.g, self.budget.as_ref(), t0);
        key.key.mask |= decoy.mask;
        Ok(NppOutcome {
            obs,
            decoy,
            p_cor,
            key,
        })
    }

    pub(crate) fn outcome(&self, rates: &NppRates, params: &NppParams) -> Result<NppOutcome> {
        let obs = rates.counts(self.g.n_pulses, params.p, params.p0)?;
        self.outcome_for(obs, params)
    }

    pub(crate) fn result(&self, o: &NppOutcome, params: &NppParams) -> KeyRateResult {
        let n = self.g.n_pulses;
        KeyRateResult {
            protocol: Protocol::Npp,
            mode: self.mode,
            n_pulses: n,
            distance_km: self.g.distance_km,
            params: ParamVector {
                mu: params.mu,
                nu: Some(params.nu),
                p: params.p,
                p0: Some(params.p0),
                ..Default::default()
            },
            observation: Observation::Npp(o.obs),
            estimate: o.key.n_cor,
            raw_bits: o.key.key.raw_bits,
            l_bits: o.key.key.l_bits,
            rate: o.key.key.l_bits / n as f64,
            terms: o.key.key.terms()[..]
                .iter()
                .copied()
                .filter(|(k, _)| *k != "chain_rule")
                .collect(),
            budget: self.budget,
            clamps: o.key.key.clamps(),
        }
    }

    /// Expected-count evaluation on the honest channel.
    pub fn evaluate(&self, params: &NppParams) -> Result<KeyRateResult> {
        params.validate()?;
        let rates = NppRates::new(&self.g, params.mu, params.nu)?;
        let o = self.outcome(&rates, params)?;
        Ok(self.result(&o, params))
    }

    /// Decoy bounds on the expected counts, for soundness checks.
    pub fn decoy_bounds_at(&self, params: &NppParams) -> Result<NppDecoyBounds> {
        params.validate()?;
        let rates = NppRates::new(&self.g, params.mu, params.nu)?;
        Ok(self.outcome(&rates, params)?.decoy)
    }

    pub fn evaluate_observation(
        &self,
        obs: &NppObservation,
        params: &NppParams,
    ) -> Result<KeyRateResult> {
        let o = self.outcome_for(*obs, params)?;
        Ok(self.result(&o, params))
    }
}

pub fn evaluate(g: &GlobalParams, params: &NppParams, mode: Mode) -> Result<KeyRateResult> {
    NppEvaluator::new(g, mode, BudgetSplit::default_for(Protocol::Npp))?.evaluate(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::single_photon_click_rate;
    use crate::definetti::GMode;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn tails_match_direct_forms() {
        for &x in &[1e-6f64, 1e-3, 0.1, 0.49, 0.7, 2.0] {
            let direct = x.exp_m1() - x;
            assert!(close(exp_tail2(x), direct, 1e-9), "{x}");
            let (a, b) = phase_correct_coefficients(x);
            let w = (-2.0 * x).exp();
            assert!(close(a * a, w * x, 1e-14));
            let odd = x.sinh() * x.cosh() - x;
            assert!(close(b * b, w * odd, 1e-8 + 1e-16 / odd), "{x}");
        }
        assert!(close(exp_tail2(1e-8), 5e-17, 1e-7));
    }

    #[test]
    fn phase_correct_reference() {
        let v = phase_correct_bound(0.03, 0.03, 0.05, 0.5);
        assert!(close(v, 0.000_396_360_154_668_289_61, 1e-12));
        assert_eq!(phase_correct_bound(0.0, 0.0, 0.05, 0.5), 0.0);
        let small = phase_correct_bound(1.0, 1.0, 1e-8, 0.3);
        assert!(close(small, 2.0 * 0.09 * 1e-8, 1e-6));
    }

    #[test]
    fn empty_decoy_counts_floor() {
        let obs = NppObservation::new(10.0, 0.0, 0.0, 1e6, 0.02).unwrap();
        let d = decoy_bounds(&obs, 1_000_000_000, 0.5, 0.5, 0.1, LogEps::CERTAIN);
        assert_eq!(d.q01_lower, 0.0);
        assert_eq!(d.q10_lower, 0.0);
        assert!(d.clamps().contains(&Clamp::DecoyFloor));
    }

    #[test]
    fn asymptotic_decoy_bound_is_sound() {
        for &l in &[0.0, 50.0, 100.0, 200.0] {
            let g = GlobalParams::table1(10_000_000_000_000, l);
            let params = NppParams {
                mu: 0.05,
                nu: 1e-4,
                p: 0.5,
                p0: 0.5,
            };
            let ev = NppEvaluator::new(
                &g,
                Mode::Asymptotic,
                BudgetSplit::default_for(Protocol::Npp),
            )
            .unwrap();
            let d = ev.decoy_bounds_at(&params).unwrap();
            let truth = single_photon_click_rate(&g);
            assert!(d.q01_lower <= truth && d.q10_lower <= truth, "L={l}");
            assert!(
                d.q01_lower > 0.5 * truth,
                "L={l}: {} vs {truth}",
                d.q01_lower
            );
        }
    }

    #[test]
    fn key_length_boundaries() {
        let g = GlobalParams::table1(1_000_000, 0.0);
        let obs = NppObservation::new(0.0, 0.0, 0.0, 1e5, 0.5).unwrap();
        let k = npp_key_length(&obs, 0.0, 1_000_000, &g, None, LogEps::CERTAIN);
        assert_eq!(k.n_cor, 0.0);
        assert_eq!(k.key.l_bits, 0.0);
        let perfect = NppObservation::new(0.0, 0.0, 0.0, 1e5, 0.0).unwrap();
        let k = npp_key_length(&perfect, 1.0, 1_000_000, &g, None, LogEps::CERTAIN);
        assert_eq!(k.n_cor, 1e5);
        assert_eq!(k.key.l_bits, 1e5);
        let none = NppObservation::new(0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let k = npp_key_length(&none, 0.1, 1_000_000, &g, None, LogEps::CERTAIN);
        assert_eq!(k.key.l_bits, 0.0);
        assert!(k.key.clamps().contains(&Clamp::NoEvents));
    }

    #[test]
    fn finite_below_asymptotic() {
        let g = GlobalParams::table1(100_000_000_000_000, 50.0);
        let params = NppParams {
            mu: 0.05,
            nu: 0.01,
            p: 0.7,
            p0: 0.5,
        };
        let a = evaluate(&g, &params, Mode::Asymptotic).unwrap();
        let f = evaluate(&g, &params, Mode::Finite(GMode::Exact)).unwrap();
        assert!(a.raw_bits > f.raw_bits);
        assert!(f.term("chain_rule").is_none());
    }

    proptest! {
        #[test]
        fn decoy_monotone(n0 in 0.0f64..1e8, d in 0.0f64..1e7, t in 0.0f64..1e4) {
            let mk = |x| NppObservation::new(100.0, x, x, 1e9, 0.03).unwrap();
            let n = 10_000_000_000u64;
            let tt = LogEps::new(t).unwrap();
            let a = decoy_bounds(&mk(n0), n, 0.5, 0.5, 0.1, tt);
            let b = decoy_bounds(&mk(n0 + d), n, 0.5, 0.5, 0.1, tt);
            let c = decoy_bounds(&mk(n0), n, 0.5, 0.5, 0.1, LogEps::new(t + 5.0).unwrap());
            prop_assert!(b.q01_lower >= a.q01_lower && b.q10_lower >= a.q10_lower);
            prop_assert!(c.q01_lower <= a.q01_lower);
        }

        #[test]
        fn phase_correct_monotone(q in 0.0f64..1.0, dq in 0.0f64..0.5, mu in 1e-4f64..1.0) {
            let a = phase_correct_bound(q, q, mu, 0.5);
            let b = phase_correct_bound((q + dq).min(1.0), q, mu, 0.5);
            prop_assert!(b >= a);
            let (ca, cb) = phase_correct_coefficients(mu);
            if ca * ca * q <= cb * cb {
                prop_assert_eq!(a, 0.0);
            }
        }
    }
}
