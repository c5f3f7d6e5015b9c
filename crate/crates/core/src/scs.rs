//! Side-channel-secure protocol: source mapping, phase-error bound and key
//! length.
//!
//! Alice and Bob each send a weak coherent pulse with probability `p` and
//! vacuum otherwise; rounds in which exactly one of them sends form the key
//! (`Z` events). Rounds where neither (`O`) or both (`B`) send bound the
//! phase errors.

use crate::budget::{BudgetSplit, EpsilonBudget, Mode};
use crate::channel::{GlobalParams, ScsRates};
use crate::concentration::{expectation_upper, observation_upper};
use crate::error::{Error, Result};
use crate::numerics::{binary_entropy, LogEps};
use crate::result::{Clamp, KeyRateResult, Observation, ParamVector, Protocol};

/// Observed (or expected) counts of right-detector-only events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScsObservation {
    pub n_o: f64,
    pub n_b: f64,
    pub n_z: f64,
    pub n_t: f64,
    pub e_bit: f64,
}

impl ScsObservation {
    /// `n_t` and `e_bit` follow from the three class counts. With no events
    /// at all `e_bit` is reported as zero.
    pub fn new(n_o: f64, n_b: f64, n_z: f64) -> Result<Self> {
        for (name, v) in [("n_O", n_o), ("n_B", n_b), ("n_Z", n_z)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(name, v, "finite and >= 0"));
            }
        }
        let n_t = n_o + n_b + n_z;
        let e_bit = if n_t > 0.0 { (n_b + n_o) / n_t } else { 0.0 };
        Ok(Self {
            n_o,
            n_b,
            n_z,
            n_t,
            e_bit,
        })
    }
}

/// Lower bounds on the vacuum components of the real source states:
/// `|<0|psi>|^2 >= a0` for the "send" state and `>= a_v0` for the nominal
/// vacuum; likewise `b0`, `b_v0` for Bob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScsSourceSpec {
    pub a0: f64,
    pub a_v0: f64,
    pub b0: f64,
    pub b_v0: f64,
}

impl ScsSourceSpec {
    /// Ideal coherent states of intensity `mu` and perfect vacuum.
    pub fn perfect(mu: f64) -> Self {
        let a0 = (-mu).exp();
        Self {
            a0,
            a_v0: 1.0,
            b0: a0,
            b_v0: 1.0,
        }
    }

    pub fn effective_intensities(&self) -> Result<(f64, f64)> {
        Ok((
            effective_intensity(self.a0, self.a_v0)?,
            effective_intensity(self.b0, self.b_v0)?,
        ))
    }
}

/// Configured source imperfection. `a0`/`b0` default to `e^{-mu}` at
/// whatever intensity is being evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceImperfection {
    pub a_v0: f64,
    pub b_v0: f64,
    pub a0: Option<f64>,
    pub b0: Option<f64>,
}

impl Default for SourceImperfection {
    fn default() -> Self {
        Self {
            a_v0: 1.0,
            b_v0: 1.0,
            a0: None,
            b0: None,
        }
    }
}

impl SourceImperfection {
    pub fn spec_for(&self, mu: f64) -> ScsSourceSpec {
        let d = (-mu).exp();
        ScsSourceSpec {
            a0: self.a0.unwrap_or(d),
            a_v0: self.a_v0,
            b0: self.b0.unwrap_or(d),
            b_v0: self.b_v0,
        }
    }

    pub fn is_perfect(&self) -> bool {
        self.a_v0 == 1.0 && self.b_v0 == 1.0 && self.a0.is_none() && self.b0.is_none()
    }
}

/// Intensity of the ideal coherent state that is exactly as distinguishable
/// from vacuum as the real pair of states:
/// `mu = -ln[(sqrt(a0 a_v0) - sqrt((1 - a0)(1 - a_v0)))^2]`.
///
/// `a_v0` must lie in `[0.5, 1]`; `a0` in `(0, 1]`, which admits ideal
/// sources with `mu > ln 2` when `a_v0 = 1`.
pub fn effective_intensity(a0: f64, a_v0: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&a_v0) {
        return Err(Error::domain("a_v0", a_v0, "in [0.5, 1]"));
    }
    if !(a0 > 0.0 && a0 <= 1.0) {
        return Err(Error::domain("a0", a0, "in (0, 1]"));
    }
    let overlap = (a0 * a_v0).sqrt() - ((1.0 - a0) * (1.0 - a_v0)).sqrt();
    if overlap <= 0.0 {
        return Err(Error::InfiniteIntensity { a0, a_v0 });
    }
    Ok(-2.0 * overlap.ln())
}

/// Decomposition coefficients of the phase-error state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScsCoefficients {
    pub mu_a: f64,
    pub mu_b: f64,
    pub c0: f64,
    pub c1: f64,
    pub c_bar2: f64,
}

/// `c0 + c1 - 2 e^{-mu/2}` with `c1 = 1/c0`, without cancellation near
/// `c0 = e^{-mu/2}`.
fn c_sum_excess(ln_c0: f64, mu: f64) -> f64 {
    let half = 0.5 * mu;
    (-half).exp() * ((ln_c0 + half).exp_m1() + (half - ln_c0).exp_m1())
}

pub fn default_c0(mu_a: f64, mu_b: f64) -> f64 {
    (-(mu_a + mu_b) / 4.0).exp()
}

/// `c0 = e^{-(mu_A + mu_B)/4}` unless overridden, `c1 = 1/c0` and
/// `c_bar2 = sqrt((c0 + c1 - 2e^{-mu_A/2})(c0 + c1 - 2e^{-mu_B/2}))`.
pub fn coefficients(mu_a: f64, mu_b: f64, c0_override: Option<f64>) -> Result<ScsCoefficients> {
    for (name, v) in [("mu_A", mu_a), ("mu_B", mu_b)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::domain(name, v, "finite and >= 0"));
        }
    }
    let c0 = match c0_override {
        Some(c) if c > 0.0 && c.is_finite() => c,
        Some(c) => return Err(Error::domain("c0", c, "> 0")),
        None => default_c0(mu_a, mu_b),
    };
    let ln_c0 = c0.ln();
    let prod = c_sum_excess(ln_c0, mu_a) * c_sum_excess(ln_c0, mu_b);
    Ok(ScsCoefficients {
        mu_a,
        mu_b,
        c0,
        c1: 1.0 / c0,
        c_bar2: prod.max(0.0).sqrt(),
    })
}

fn phase_error_prob_raw(p_o: f64, p_b: f64, p: f64, c: &ScsCoefficients) -> f64 {
    let q = 1.0 - p;
    let so = p_o.sqrt() / q;
    let sb = p_b.sqrt() / p;
    let (c0, c1, c2) = (c.c0, c.c1, c.c_bar2);
    // Expands (c0 so + c1 sb)^2 + c2^2 + c2 (c0 so + c1 sb).
    0.5 * p * q * ((c0 * so + c1 * sb).powi(2) + c2 * c2 + c2 * (c0 * so + c1 * sb))
}

/// Upper bound on the per-round phase-error probability given the per-round
/// probabilities of `O` and `B` events; capped at one.
pub fn phase_error_prob_bound(p_o: f64, p_b: f64, p: f64, c: &ScsCoefficients) -> f64 {
    phase_error_prob_raw(p_o, p_b, p, c).min(1.0)
}

/// Intermediate values of the phase-error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseErrorEstimate {
    pub p_o_upper: f64,
    pub p_b_upper: f64,
    pub p_ph_upper: f64,
    /// Phase-error count bound, capped at `n_Z`.
    pub n_ph_bar: f64,
    mask: u16,
}

impl PhaseErrorEstimate {
    pub fn clamps(&self) -> Vec<Clamp> {
        Clamp::from_mask(self.mask)
    }
}

pub fn estimate_phase_errors_detailed(
    obs: &ScsObservation,
    n: u64,
    p: f64,
    c: &ScsCoefficients,
    t0: LogEps,
) -> PhaseErrorEstimate {
    let nf = n as f64;
    let mut mask = 0;
    let mut cap = |v: f64| {
        if v > 1.0 {
            mask |= Clamp::ProbabilityCap.bit();
            1.0
        } else {
            v
        }
    };
    let p_o = cap(expectation_upper(obs.n_o, t0) / nf);
    let p_b = cap(expectation_upper(obs.n_b, t0) / nf);
    let p_ph = cap(phase_error_prob_raw(p_o, p_b, p, c));
    let mut n_ph = observation_upper(nf * p_ph, t0);
    if n_ph > obs.n_z {
        mask |= Clamp::PhaseErrorsCapped.bit();
        n_ph = obs.n_z;
    }
    PhaseErrorEstimate {
        p_o_upper: p_o,
        p_b_upper: p_b,
        p_ph_upper: p_ph,
        n_ph_bar: n_ph,
        mask,
    }
}

/// Phase-error count bound: `P_O`, `P_B` from the expectation-side upper
/// bound, then the observation-side upper bound on `N P_ph`.
pub fn estimate_phase_errors(
    obs: &ScsObservation,
    n: u64,
    p: f64,
    c: &ScsCoefficients,
    t0: LogEps,
) -> f64 {
    estimate_phase_errors_detailed(obs, n, p, c, t0).n_ph_bar
}

/// Key length before and after the floor, with each subtracted term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyLength {
    pub raw_bits: f64,
    pub l_bits: f64,
    /// Privacy-amplification entropy term.
    pub phase_entropy: f64,
    /// Error-correction leakage.
    pub ec_leak: f64,
    pub chain_rule: f64,
    pub ec_verify: f64,
    pub pa_smoothing: f64,
    pub(crate) mask: u16,
}

impl KeyLength {
    pub fn clamps(&self) -> Vec<Clamp> {
        Clamp::from_mask(self.mask)
    }

    pub(crate) fn terms(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("phase_entropy", self.phase_entropy),
            ("ec_leak", self.ec_leak),
            ("chain_rule", self.chain_rule),
            ("ec_verify", self.ec_verify),
            ("pa_smoothing", self.pa_smoothing),
        ]
    }

    /// Assembles `sifted - subtracted terms`, floored at zero.
    pub(crate) fn assemble(
        sifted: f64,
        phase_entropy: f64,
        ec_leak: f64,
        budget: Option<&EpsilonBudget>,
        mut mask: u16,
    ) -> Self {
        let (chain_rule, ec_verify, pa_smoothing) = budget.map_or((0.0, 0.0, 0.0), |b| {
            (
                b.chain_rule_bits(),
                b.correctness_bits(),
                b.smoothing_bits(),
            )
        });
        let raw = sifted - phase_entropy - ec_leak - chain_rule - ec_verify - pa_smoothing;
        let l = if raw > 0.0 {
            raw
        } else {
            mask |= Clamp::KeyFloor.bit();
            0.0
        };
        Self {
            raw_bits: raw,
            l_bits: l,
            phase_entropy,
            ec_leak,
            chain_rule,
            ec_verify,
            pa_smoothing,
            mask,
        }
    }
}

/// `H2` with its argument held at one half when it exceeds it.
pub(crate) fn capped_entropy(x: f64, clamp: Clamp, mask: &mut u16) -> f64 {
    if x > 0.5 {
        *mask |= clamp.bit();
        1.0
    } else {
        binary_entropy(x.max(0.0))
    }
}

/// `l = n_Z - n_Z H2(n_ph/n_Z) - f n_t H2(e_bit) - log2(2/eps'^2)
///      - log2(2/eps_cor) - 2 log2(1/(2 eps_bar))`, floored at zero.
///
/// `budget = None` drops the three constant terms (asymptotic limit).
pub fn scs_key_length(
    obs: &ScsObservation,
    n_ph_bar: f64,
    g: &GlobalParams,
    budget: Option<&EpsilonBudget>,
) -> KeyLength {
    let mut mask = 0;
    if obs.n_z <= 0.0 {
        mask |= Clamp::NoEvents.bit();
    }
    let ratio = if obs.n_z > 0.0 {
        n_ph_bar / obs.n_z
    } else {
        1.0
    };
    let phase_entropy = obs.n_z * capped_entropy(ratio, Clamp::PhaseErrorRateHalf, &mut mask);
    let ec_leak = g.f * obs.n_t * capped_entropy(obs.e_bit, Clamp::BitErrorRateHalf, &mut mask);
    KeyLength::assemble(obs.n_z, phase_entropy, ec_leak, budget, mask)
}

/// Parameters of one SCS evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScsParams {
    pub mu: f64,
    pub p: f64,
    /// Fixed `c0`; `None` uses the default or the configured search.
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScsOptions {
    pub source: SourceImperfection,
    /// When set, `c0` is chosen by golden-section search over this interval.
    pub c0_search: Option<(f64, f64)>,
    pub split: BudgetSplit,
}

impl Default for ScsOptions {
    fn default() -> Self {
        Self {
            source: SourceImperfection::default(),
            c0_search: None,
            split: BudgetSplit::default_for(Protocol::Scs),
        }
    }
}

/// Evaluates SCS key lengths for one `(N, L)` point and analysis mode.
#[derive(Debug, Clone)]
pub struct ScsEvaluator {
    g: GlobalParams,
    mode: Mode,
    options: ScsOptions,
    budget: Option<EpsilonBudget>,
}

/// Chain output without heap allocation, for the optimizer's inner loop.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScsOutcome {
    pub obs: ScsObservation,
    pub coeffs: ScsCoefficients,
    pub estimate: PhaseErrorEstimate,
    pub key: KeyLength,
}

impl ScsEvaluator {
    pub fn new(g: &GlobalParams, mode: Mode, options: ScsOptions) -> Result<Self> {
        g.validate()?;
        if let Some((lo, hi)) = options.c0_search {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::config("c0_range", "need 0 < lo <= hi"));
            }
        }
        let budget = Self::budget_for(g, mode, &options.split)?;
        Ok(Self {
            g: *g,
            mode,
            options,
            budget,
        })
    }

    fn budget_for(
        g: &GlobalParams,
        mode: Mode,
        split: &BudgetSplit,
    ) -> Result<Option<EpsilonBudget>> {
        match mode {
            Mode::Asymptotic => Ok(None),
            Mode::Finite(gm) => {
                EpsilonBudget::new(Protocol::Scs, g.eps_tot, g.n_pulses, gm, split).map(Some)
            }
        }
    }

    /// Same point with a different budget split.
    pub fn with_split(&self, split: BudgetSplit) -> Result<Self> {
        let mut options = self.options;
        options.split = split;
        Self::new(&self.g, self.mode, options)
    }

    pub fn budget(&self) -> Option<&EpsilonBudget> {
        self.budget.as_ref()
    }

    pub fn global(&self) -> &GlobalParams {
        &self.g
    }

    fn t0(&self) -> LogEps {
        self.budget.map_or(LogEps::CERTAIN, |b| b.t0)
    }

    fn intensities(&self, mu: f64) -> Result<(f64, f64)> {
        if self.options.source.is_perfect() {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::domain("mu", mu, "> 0"));
            }
            return Ok((mu, mu));
        }
        self.options.source.spec_for(mu).effective_intensities()
    }

    fn chain(&self, obs: ScsObservation, p: f64, coeffs: ScsCoefficients) -> ScsOutcome {
        let estimate = estimate_phase_errors_detailed(&obs, self.g.n_pulses, p, &coeffs, self.t0());
        let mut key = scs_key_length(&obs, estimate.n_ph_bar, &self.g, self.budget.as_ref());
        key.mask |= estimate.mask;
        ScsOutcome {
            obs,
            coeffs,
            estimate,
            key,
        }
    }

    /// Runs the chain on `obs`, picking `c0` per the parameters and options.
    pub(crate) fn outcome_for(
        &self,
        obs: ScsObservation,
        params: &ScsParams,
    ) -> Result<ScsOutcome> {
        if !(params.p > 0.0 && params.p < 1.0) {
            return Err(Error::domain("p", params.p, "in (0, 1)"));
        }
        let (mu_a, mu_b) = self.intensities(params.mu)?;
        let base = self.chain(obs, params.p, coefficients(mu_a, mu_b, params.c0)?);
        match (params.c0, self.options.c0_search) {
            (None, Some((lo, hi))) => {
                let eval = |ln_c0: f64| -> ScsOutcome {
                    let c = coefficients(mu_a, mu_b, Some(ln_c0.exp())).expect("c0 > 0");
                    self.chain(obs, params.p, c)
                };
                let best = golden_max(lo.ln(), hi.ln(), 60, |x| eval(x).key.raw_bits);
                let tuned = eval(best);
                Ok(if tuned.key.raw_bits > base.key.raw_bits {
                    tuned
                } else {
                    base
                })
            }
            _ => Ok(base),
        }
    }

    pub(crate) fn outcome(&self, rates: &ScsRates, params: &ScsParams) -> Result<ScsOutcome> {
        let obs = rates.counts(self.g.n_pulses, params.p)?;
        self.outcome_for(obs, params)
    }

    pub(crate) fn result(&self, o: &ScsOutcome, params: &ScsParams) -> KeyRateResult {
        let n = self.g.n_pulses;
        KeyRateResult {
            protocol: Protocol::Scs,
            mode: self.mode,
            n_pulses: n,
            distance_km: self.g.distance_km,
            params: ParamVector {
                mu: params.mu,
                p: params.p,
                c0: Some(o.coeffs.c0),
                ..Default::default()
            },
            observation: Observation::Scs(o.obs),
            estimate: o.estimate.n_ph_bar,
            raw_bits: o.key.raw_bits,
            l_bits: o.key.l_bits,
            rate: o.key.l_bits / n as f64,
            terms: o.key.terms(),
            budget: self.budget,
            clamps: o.key.clamps(),
        }
    }

    /// Expected-count evaluation on the honest channel.
    pub fn evaluate(&self, params: &ScsParams) -> Result<KeyRateResult> {
        let rates = ScsRates::new(&self.g, params.mu)?;
        let o = self.outcome(&rates, params)?;
        Ok(self.result(&o, params))
    }

    /// Evaluation on supplied counts, e.g. a Monte-Carlo tally.
    pub fn evaluate_observation(
        &self,
        obs: &ScsObservation,
        params: &ScsParams,
    ) -> Result<KeyRateResult> {
        let o = self.outcome_for(*obs, params)?;
        Ok(self.result(&o, params))
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }
}

/// Golden-section search for the maximiser of a unimodal `f` on `[a, b]`.
pub(crate) fn golden_max(mut a: f64, mut b: f64, iters: usize, f: impl Fn(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        x1
    } else {
        x2
    }
}

/// Convenience wrapper: one expected-count evaluation.
pub fn evaluate(
    g: &GlobalParams,
    params: &ScsParams,
    mode: Mode,
    options: ScsOptions,
) -> Result<KeyRateResult> {
    ScsEvaluator::new(g, mode, options)?.evaluate(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::definetti::GMode;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn perfect_source_maps_to_itself() {
        let mu = effective_intensity((-0.05f64).exp(), 1.0).unwrap();
        assert!(close(mu, 0.05, 1e-13));
        assert_eq!(effective_intensity(1.0, 1.0).unwrap(), 0.0);
        let (a, b) = ScsSourceSpec::perfect(0.9).effective_intensities().unwrap();
        assert!(close(a, 0.9, 1e-13) && close(b, 0.9, 1e-13));
    }

    #[test]
    fn imperfect_source_reference() {
        let mu = effective_intensity(0.95, 0.99).unwrap();
        assert!(close(mu, 0.107_997_875_863_949_82, 1e-12));
        assert!((mu - 0.1083).abs() < 1e-3);
    }

    #[test]
    fn indistinguishable_vacuum_is_infinite() {
        assert!(matches!(
            effective_intensity(0.5, 0.5),
            Err(Error::InfiniteIntensity { .. })
        ));
        assert!(effective_intensity(0.9, 0.4).is_err());
        assert!(effective_intensity(0.0, 0.9).is_err());
    }

    #[test]
    fn coefficient_defaults() {
        let c = coefficients(0.2, 0.2, None).unwrap();
        assert!(close(c.c0, (-0.1f64).exp(), 1e-15));
        assert!(close(c.c1, 0.1f64.exp(), 1e-15));
        assert!(close(c.c0 * c.c1, 1.0, 1e-15));
        let c = coefficients(0.1, 0.1, None).unwrap();
        assert!(close(c.c_bar2, 0.100_041_671_875_310_03, 1e-12));
        let c = coefficients(0.1, 0.3, Some(1.0)).unwrap();
        assert_eq!(c.c1, 1.0);
        assert!(coefficients(0.1, 0.1, Some(0.0)).is_err());
    }

    #[test]
    fn c_bar2_small_intensity() {
        // c0 + c1 - 2 e^{-mu/2} = 2 cosh(mu/2) - 2 e^{-mu/2} ~ mu for tiny mu.
        let c = coefficients(1e-9, 1e-9, None).unwrap();
        assert!(close(c.c_bar2, 1e-9, 1e-6));
        let naive = |mu: f64| {
            let c0 = (-mu / 2.0).exp();
            c0 + 1.0 / c0 - 2.0 * (-mu / 2.0).exp()
        };
        let c = coefficients(0.3, 0.3, None).unwrap();
        assert!(close(c.c_bar2, naive(0.3), 1e-12));
    }

    #[test]
    fn phase_error_reference() {
        let c = ScsCoefficients {
            mu_a: 0.0,
            mu_b: 0.0,
            c0: 1.0,
            c1: 1.0,
            c_bar2: 0.1,
        };
        let v = phase_error_prob_bound(1e-9, 1e-4, 0.5, &c);
        assert!(close(v, 0.001_551_107_297_181_058_9, 1e-12));
        let z = phase_error_prob_bound(0.0, 0.0, 0.3, &c);
        assert!(close(z, 0.5 * 0.3 * 0.7 * 0.01, 1e-14));
        assert_eq!(phase_error_prob_bound(1.0, 1.0, 0.5, &c), 1.0);
    }

    #[test]
    fn phase_error_exchange_symmetry() {
        let c = coefficients(0.07, 0.07, None).unwrap();
        let swapped = ScsCoefficients {
            c0: c.c1,
            c1: c.c0,
            ..c
        };
        let a = phase_error_prob_bound(3e-6, 2e-4, 0.3, &c);
        let b = phase_error_prob_bound(2e-4, 3e-6, 0.7, &swapped);
        assert!(close(a, b, 1e-13));
    }

    #[test]
    fn trivial_phase_error_estimates() {
        let obs = ScsObservation::new(0.0, 0.0, 1e9).unwrap();
        let c = coefficients(0.05, 0.05, None).unwrap();
        let n = 1_000_000_000_000u64;
        let got = estimate_phase_errors(&obs, n, 0.4, &c, LogEps::CERTAIN);
        let want = 1e12 * 0.5 * 0.4 * 0.6 * c.c_bar2 * c.c_bar2;
        assert!(close(got, want, 1e-12));
        let obs = ScsObservation::new(300.0, 2e7, 1e9).unwrap();
        let got = estimate_phase_errors(&obs, n, 0.4, &c, LogEps::CERTAIN);
        let want = 1e12 * phase_error_prob_bound(300.0 / 1e12, 2e7 / 1e12, 0.4, &c);
        assert!(close(got, want, 1e-12));
    }

    #[test]
    fn phase_errors_capped_at_n_z() {
        let obs = ScsObservation::new(1e6, 1e6, 10.0).unwrap();
        let c = coefficients(0.05, 0.05, None).unwrap();
        let e = estimate_phase_errors_detailed(&obs, 1_000_000, 0.5, &c, LogEps::CERTAIN);
        assert_eq!(e.n_ph_bar, 10.0);
        assert!(e.clamps().contains(&Clamp::PhaseErrorsCapped));
    }

    #[test]
    fn key_length_boundaries() {
        let g = GlobalParams::table1(1_000_000, 0.0);
        let obs = ScsObservation::new(0.0, 0.0, 1e6).unwrap();
        let k = scs_key_length(&obs, 0.0, &g, None);
        assert_eq!(k.l_bits, 1e6);
        let k = scs_key_length(&obs, 6e5, &g, None);
        assert_eq!(k.l_bits, 0.0);
        assert!(k.clamps().contains(&Clamp::PhaseErrorRateHalf));
        assert!(k.clamps().contains(&Clamp::KeyFloor));
        let empty = ScsObservation::new(0.0, 0.0, 0.0).unwrap();
        let k = scs_key_length(&empty, 0.0, &g, None);
        assert_eq!(k.l_bits, 0.0);
        assert!(k.clamps().contains(&Clamp::NoEvents));
    }

    #[test]
    fn full_chain_reference() {
        // 60-digit re-evaluation, reference device, L = 100 km, N = 1e12.
        let g = GlobalParams::table1(1_000_000_000_000, 100.0);
        let params = ScsParams {
            mu: 0.05,
            p: 0.5,
            c0: None,
        };
        let r = evaluate(
            &g,
            &params,
            Mode::Finite(GMode::Exact),
            ScsOptions::default(),
        )
        .unwrap();
        let Observation::Scs(o) = r.observation else {
            panic!()
        };
        assert!(close(o.n_z, 374_578_869.870_887_04, 1e-10));
        assert!(r.budget.is_some());
        let a = evaluate(&g, &params, Mode::Asymptotic, ScsOptions::default()).unwrap();
        assert!(a.raw_bits >= r.raw_bits);
        assert!(a.budget.is_none());
        assert_eq!(a.term("chain_rule"), Some(0.0));
    }

    #[test]
    fn c0_search_never_regresses() {
        let g = GlobalParams::table1(10_000_000_000_000, 100.0);
        let params = ScsParams {
            mu: 0.02,
            p: 0.2,
            c0: None,
        };
        let mode = Mode::Finite(GMode::Exact);
        let plain = evaluate(&g, &params, mode, ScsOptions::default()).unwrap();
        let opts = ScsOptions {
            c0_search: Some((0.2, 5.0)),
            ..Default::default()
        };
        let tuned = evaluate(&g, &params, mode, opts).unwrap();
        assert!(tuned.raw_bits >= plain.raw_bits);
    }

    #[test]
    fn golden_section_finds_peak() {
        let x = golden_max(-3.0, 5.0, 80, |x| -(x - 1.25f64).powi(2));
        assert!((x - 1.25).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn n_ph_monotone(
            n_o in 0.0f64..1e4, n_b in 0.0f64..1e8, d in 0.0f64..1e6, t in 0.0f64..2000.0,
        ) {
            let c = coefficients(0.05, 0.05, None).unwrap();
            let n = 1_000_000_000_000u64;
            let z = 1e12;
            let tt = LogEps::new(t).unwrap();
            let base = estimate_phase_errors(&ScsObservation::new(n_o, n_b, z).unwrap(), n, 0.3, &c, tt);
            let more_o = estimate_phase_errors(&ScsObservation::new(n_o + d, n_b, z).unwrap(), n, 0.3, &c, tt);
            let more_b = estimate_phase_errors(&ScsObservation::new(n_o, n_b + d, z).unwrap(), n, 0.3, &c, tt);
            let more_t = estimate_phase_errors(&ScsObservation::new(n_o, n_b, z).unwrap(), n, 0.3, &c, LogEps::new(t + 1.0).unwrap());
            prop_assert!(more_o >= base && more_b >= base && more_t >= base);
        }

        #[test]
        fn key_length_monotone(
            n_z in 1e3f64..1e10, ratio in 0.0f64..0.6, e_bit in 0.0f64..0.6, dt in 0.0f64..100.0,
        ) {
            let g = GlobalParams::table1(1_000_000_000_000, 0.0);
            let n_o = e_bit * n_z / (1.0 - e_bit).max(1e-9) * 0.5;
            let obs = ScsObservation::new(n_o, n_o, n_z).unwrap();
            let n_ph = ratio * n_z;
            let b0 = EpsilonBudget::default_for(Protocol::Scs, g.eps_tot, g.n_pulses, GMode::Exact).unwrap();
            let mut b1 = b0;
            b1.t_bar = LogEps::new(b0.t_bar.t() + dt).unwrap();
            b1.t_cor = LogEps::new(b0.t_cor.t() + dt).unwrap();
            let base = scs_key_length(&obs, n_ph, &g, Some(&b0)).raw_bits;
            prop_assert!(scs_key_length(&obs, n_ph, &g, Some(&b1)).raw_bits <= base);
            prop_assert!(scs_key_length(&obs, (n_ph * 1.01).min(n_z), &g, Some(&b0)).raw_bits <= base + 1e-6);
            let more_z = ScsObservation { n_z: n_z * 1.1, ..obs };
            prop_assert!(scs_key_length(&more_z, n_ph, &g, Some(&b0)).raw_bits >= base - 1e-6 * n_z);
        }
    }
}
