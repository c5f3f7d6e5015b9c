//! Honest-channel model: two phase-randomised or phase-locked weak coherent
//! pulses meet at a 50:50 beam splitter in the middle of the link, with
//! threshold detectors behind each output port.
//!
//! Misalignment leaks a fraction `e_d` of each port's intensity into the
//! other one. Dark counts fire independently on each detector. A round
//! succeeds when exactly one detector clicks.

pub mod montecarlo;

use crate::error::{Error, Result};
use crate::npp::NppObservation;
use crate::numerics::LogEps;
use crate::scs::ScsObservation;

pub use montecarlo::{
    mc_sample, mc_sample_sharded, validate, ClassCheck, McParams, McReport, NppTally, ScsTally,
    Tally,
};

/// Device and link parameters shared by both protocols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalParams {
    /// Dark-count probability per pulse per detector.
    pub p_d: f64,
    /// Misalignment error rate.
    pub e_d: f64,
    /// Detector efficiency.
    pub eta_d: f64,
    /// Error-correction inefficiency, `f >= 1`.
    pub f: f64,
    /// Fiber loss in dB/km.
    pub alpha_f: f64,
    pub eps_tot: LogEps,
    /// Number of pulse pairs `N`.
    pub n_pulses: u64,
    /// Total Alice to Bob distance in km.
    pub distance_km: f64,
}

impl GlobalParams {
    /// The reference device: `p_d = 1e-9`, `e_d = 4%`, `eta_d = 30%`,
    /// `f = 1.1`, `0.2` dB/km, `eps_tot = 1e-10`.
    pub fn table1(n_pulses: u64, distance_km: f64) -> Self {
        Self {
            p_d: 1e-9,
            e_d: 0.04,
            eta_d: 0.30,
            f: 1.1,
            alpha_f: 0.2,
            eps_tot: LogEps::new(1e10f64.ln()).expect("positive"),
            n_pulses,
            distance_km,
        }
    }

    pub fn with_distance(mut self, distance_km: f64) -> Self {
        self.distance_km = distance_km;
        self
    }

    pub fn with_pulses(mut self, n_pulses: u64) -> Self {
        self.n_pulses = n_pulses;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::domain(name, v, "in [0, 1]"))
            }
        };
        prob("p_d", self.p_d)?;
        prob("e_d", self.e_d)?;
        prob("eta_d", self.eta_d)?;
        if !(self.f >= 1.0 && self.f.is_finite()) {
            return Err(Error::domain("f", self.f, ">= 1"));
        }
        if !(self.alpha_f >= 0.0 && self.alpha_f.is_finite()) {
            return Err(Error::domain("alpha_f", self.alpha_f, ">= 0"));
        }
        if self.n_pulses == 0 {
            return Err(Error::domain("N", 0.0, ">= 1"));
        }
        if !(self.distance_km >= 0.0 && self.distance_km.is_finite()) {
            return Err(Error::domain("L", self.distance_km, ">= 0"));
        }
        Ok(())
    }
}

/// Transmittance of one arm, source to detection: Charlie sits at `L / 2`.
pub fn side_transmittance(g: &GlobalParams) -> f64 {
    g.eta_d * 10f64.powf(-g.alpha_f * (g.distance_km / 2.0) / 10.0)
}

/// Relative phase between the two pulses arriving at the beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelPhase {
    /// Constructive on the left port.
    Zero,
    /// Constructive on the right port.
    Pi,
    /// No fixed phase relation, e.g. against vacuum or a phase-randomised
    /// pulse.
    Incoherent,
}

/// Mean photon numbers reaching the two detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortIntensities {
    pub left: f64,
    pub right: f64,
}

impl PortIntensities {
    /// Interference of intensities `a` and `b` (already attenuated), then
    /// misalignment mixing.
    pub fn new(a: f64, b: f64, phase: RelPhase, e_d: f64) -> Self {
        let (hi, lo) = match phase {
            RelPhase::Incoherent => {
                let m = 0.5 * (a + b);
                (m, m)
            }
            _ => {
                let (sa, sb) = (a.sqrt(), b.sqrt());
                (0.5 * (sa + sb).powi(2), 0.5 * (sa - sb).powi(2))
            }
        };
        let (l, r) = match phase {
            RelPhase::Pi => (lo, hi),
            _ => (hi, lo),
        };
        Self {
            left: (1.0 - e_d) * l + e_d * r,
            right: (1.0 - e_d) * r + e_d * l,
        }
    }

    /// Probability that each detector fires, dark counts included.
    pub fn fire_probs(&self, p_d: f64) -> (f64, f64) {
        let ln_quiet = (-p_d).ln_1p();
        (
            -(ln_quiet - self.left).exp_m1(),
            -(ln_quiet - self.right).exp_m1(),
        )
    }

    pub fn exclusive_clicks(&self, p_d: f64) -> ClickProbs {
        let ln_quiet = (-p_d).ln_1p();
        let fire_l = -(ln_quiet - self.left).exp_m1();
        let fire_r = -(ln_quiet - self.right).exp_m1();
        ClickProbs {
            left_only: fire_l * (ln_quiet - self.right).exp(),
            right_only: fire_r * (ln_quiet - self.left).exp(),
        }
    }
}

/// Exactly-one-click probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickProbs {
    pub left_only: f64,
    pub right_only: f64,
}

impl ClickProbs {
    pub fn success(&self) -> f64 {
        self.left_only + self.right_only
    }
}

pub fn interfere(a: f64, b: f64, phase: RelPhase, e_d: f64, p_d: f64) -> ClickProbs {
    PortIntensities::new(a, b, phase, e_d).exclusive_clicks(p_d)
}

fn check_prob(name: &'static str, v: f64, open: bool) -> Result<()> {
    let ok = if open {
        v > 0.0 && v < 1.0
    } else {
        (0.0..=1.0).contains(&v)
    };
    if ok {
        Ok(())
    } else {
        Err(Error::domain(
            name,
            v,
            if open { "in (0, 1)" } else { "in [0, 1]" },
        ))
    }
}

fn check_intensity(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, v, "finite and >= 0"))
    }
}

/// Per-round right-only click probabilities of the three SCS classes; they
/// depend on the channel and `mu` but not on `p` or `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScsRates {
    /// Neither party sends.
    pub none: f64,
    /// Exactly one party sends.
    pub one: f64,
    /// Both send, phase-locked.
    pub both: f64,
}

impl ScsRates {
    pub fn new(g: &GlobalParams, mu: f64) -> Result<Self> {
        check_intensity("mu", mu)?;
        let a = side_transmittance(g) * mu;
        let r = |x, y, ph| interfere(x, y, ph, g.e_d, g.p_d).right_only;
        Ok(Self {
            none: r(0.0, 0.0, RelPhase::Incoherent),
            one: r(a, 0.0, RelPhase::Incoherent),
            both: r(a, a, RelPhase::Zero),
        })
    }

    pub fn counts(&self, n: u64, p: f64) -> Result<ScsObservation> {
        check_prob("p", p, true)?;
        let n = n as f64;
        let q = 1.0 - p;
        let obs = ScsObservation::new(
            n * q * q * self.none,
            n * p * p * self.both,
            2.0 * n * p * q * self.one,
        )?;
        if obs.n_t <= 0.0 {
            return Err(Error::DegenerateChannel("no SCS clicks expected"));
        }
        Ok(obs)
    }
}

pub fn scs_expected_counts(g: &GlobalParams, mu: f64, p: f64) -> Result<ScsObservation> {
    ScsRates::new(g, mu)?.counts(g.n_pulses, p)
}

/// Per-round success probabilities of the NPP classes for given `(mu, nu)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NppRates {
    /// Both send vacuum.
    pub vacuum: f64,
    /// One sends vacuum, the other the decoy `nu`.
    pub decoy: f64,
    /// Both send signals: success averaged over equal and opposite bits.
    pub signal: f64,
    /// Bit error rate among signal successes.
    pub e_bit: f64,
}

impl NppRates {
    pub fn new(g: &GlobalParams, mu: f64, nu: f64) -> Result<Self> {
        check_intensity("mu", mu)?;
        check_intensity("nu", nu)?;
        let eta = side_transmittance(g);
        let c = |x, y, ph| interfere(x, y, ph, g.e_d, g.p_d);
        let a = eta * mu;
        let same = c(a, a, RelPhase::Zero);
        let flip = c(a, a, RelPhase::Pi);
        let total = same.success() + flip.success();
        let e_bit = if total > 0.0 {
            (same.right_only + flip.left_only) / total
        } else {
            0.0
        };
        Ok(Self {
            vacuum: c(0.0, 0.0, RelPhase::Incoherent).success(),
            decoy: c(0.0, eta * nu, RelPhase::Incoherent).success(),
            signal: 0.5 * total,
            e_bit,
        })
    }

    pub fn counts(&self, n: u64, p: f64, p0: f64) -> Result<NppObservation> {
        check_prob("p", p, true)?;
        check_prob("p0", p0, false)?;
        let n = n as f64;
        let q2 = (1.0 - p) * (1.0 - p);
        let n_0nu = n * q2 * p0 * (1.0 - p0) * self.decoy;
        let obs = NppObservation::new(
            n * q2 * p0 * p0 * self.vacuum,
            n_0nu,
            n_0nu,
            n * p * p * self.signal,
            self.e_bit,
        )?;
        if obs.n_s <= 0.0 {
            return Err(Error::DegenerateChannel("no NPP signal clicks expected"));
        }
        Ok(obs)
    }
}

pub fn npp_expected_counts(
    g: &GlobalParams,
    mu: f64,
    nu: f64,
    p: f64,
    p0: f64,
) -> Result<NppObservation> {
    NppRates::new(g, mu, nu)?.counts(g.n_pulses, p, p0)
}

/// Exactly-one-click probability for one photon against vacuum:
/// the photon is detected and the other detector stays dark, or it is lost
/// and exactly one dark count fires.
pub fn single_photon_click_rate(g: &GlobalParams) -> f64 {
    let eta = side_transmittance(g);
    eta * (1.0 - g.p_d) + (1.0 - eta) * 2.0 * g.p_d * (1.0 - g.p_d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn transmittance() {
        let g = GlobalParams::table1(1, 0.0);
        assert_eq!(side_transmittance(&g), 0.3);
        assert!(close(
            side_transmittance(&g.with_distance(100.0)),
            0.03,
            1e-14
        ));
        let mut lossless = g.with_distance(250.0);
        lossless.alpha_f = 0.0;
        assert_eq!(side_transmittance(&lossless), 0.3);
    }

    #[test]
    fn dark_counts_only() {
        let p_d = 1e-9;
        let c = interfere(0.0, 0.0, RelPhase::Incoherent, 0.04, p_d);
        let want = p_d * (1.0 - p_d);
        assert!(close(c.left_only, want, 1e-12));
        assert!(close(c.right_only, want, 1e-12));
    }

    #[test]
    fn destructive_port_is_dark() {
        let a = 0.05 * 0.03;
        let c = interfere(a, a, RelPhase::Zero, 0.0, 0.0);
        assert_eq!(c.right_only, 0.0);
        assert!(c.left_only > 0.0);
    }

    #[test]
    fn one_sided_reference() {
        let c = interfere(1.5e-3, 0.0, RelPhase::Incoherent, 0.04, 1e-9);
        assert!(close(c.right_only, 7.491_577_397_417_740_8e-4, 1e-12));
    }

    #[test]
    fn swap_and_mirror_symmetry() {
        for &(a, b) in &[(0.1, 0.02), (1e-5, 3e-3), (0.7, 0.7)] {
            let z = interfere(a, b, RelPhase::Zero, 0.04, 1e-7);
            let zs = interfere(b, a, RelPhase::Zero, 0.04, 1e-7);
            let pi = interfere(a, b, RelPhase::Pi, 0.04, 1e-7);
            assert!(close(z.left_only, zs.left_only, 1e-14));
            assert!(close(z.right_only, zs.right_only, 1e-14));
            assert!(close(z.left_only, pi.right_only, 1e-14));
            assert!(close(z.right_only, pi.left_only, 1e-14));
        }
    }

    #[test]
    fn scs_reference_counts() {
        let g = GlobalParams::table1(1_000_000_000_000, 100.0);
        let o = scs_expected_counts(&g, 0.05, 0.5).unwrap();
        assert!(close(o.n_o, 249.999_999_75, 1e-10));
        assert!(close(o.n_b, 29_912_178.766_191_27, 1e-10));
        assert!(close(o.n_z, 374_578_869.870_887_04, 1e-10));
        assert!(close(o.n_t, 404_491_298.637_078_06, 1e-10));
        assert!(close(o.e_bit, 0.073_950_734_829_105_345, 1e-10));
        // 2 N p (1 - p) times the one-sided click rate 7.49e-4.
        assert!(close(o.n_z, 0.5e12 * 7.49e-4, 0.01));
    }

    #[test]
    fn npp_reference_counts() {
        let g = GlobalParams::table1(10_000_000_000_000, 100.0);
        let o = npp_expected_counts(&g, 0.05, 0.1, 0.5, 0.5).unwrap();
        assert!(close(o.n_00, 1_249.999_998_75, 1e-10));
        assert!(close(o.n_0nu, 1_870_787_412.307_204_7, 1e-10));
        assert_eq!(o.n_0nu, o.n_nu0);
        assert!(close(o.n_s, 7_487_903_513.831_951_3, 1e-10));
        assert!(close(o.e_bit, 0.039_947_334_672_430_422, 1e-10));
    }

    #[test]
    fn perfect_devices_have_no_errors() {
        let mut g = GlobalParams::table1(1_000_000, 20.0);
        g.p_d = 0.0;
        g.e_d = 0.0;
        let s = scs_expected_counts(&g, 0.1, 0.3).unwrap();
        assert_eq!(s.n_o, 0.0);
        assert_eq!(s.n_b, 0.0);
        assert_eq!(s.e_bit, 0.0);
        let n = npp_expected_counts(&g, 0.1, 0.05, 0.5, 0.5).unwrap();
        assert_eq!(n.e_bit, 0.0);
        assert_eq!(n.n_00, 0.0);
    }

    #[test]
    fn degenerate_channel_is_an_error() {
        let mut g = GlobalParams::table1(1_000_000, 20.0);
        g.p_d = 0.0;
        assert!(matches!(
            scs_expected_counts(&g, 0.0, 0.5),
            Err(Error::DegenerateChannel(_))
        ));
        assert!(npp_expected_counts(&g, 0.0, 0.1, 0.5, 0.5).is_err());
    }

    #[test]
    fn counts_scale_with_n() {
        let g = GlobalParams::table1(1_000, 50.0);
        let a = scs_expected_counts(&g, 0.03, 0.2).unwrap();
        let b = scs_expected_counts(&g.with_pulses(1_000_000), 0.03, 0.2).unwrap();
        assert!(close(b.n_z, 1000.0 * a.n_z, 1e-13));
        assert!(close(b.n_o, 1000.0 * a.n_o, 1e-13));
        assert_eq!(a.e_bit, b.e_bit);
    }

    #[test]
    fn validation() {
        let mut g = GlobalParams::table1(1, 0.0);
        g.validate().unwrap();
        g.f = 0.9;
        assert!(g.validate().is_err());
        let mut g = GlobalParams::table1(1, -1.0);
        assert!(g.validate().is_err());
        g.distance_km = 1.0;
        g.p_d = 2.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn single_photon_rate_matches_small_intensity_limit() {
        let g = GlobalParams::table1(1, 30.0);
        let q = single_photon_click_rate(&g);
        let eta = side_transmittance(&g);
        assert!(q > eta * (1.0 - 1e-8) && q < eta * (1.0 + 1e-7));
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn click_probabilities_are_probabilities(
            a in 0.0f64..50.0, b in 0.0f64..50.0,
            e_d in 0.0f64..0.5, p_d in 0.0f64..0.5, ph in 0usize..3,
        ) {
            let phase = [RelPhase::Zero, RelPhase::Pi, RelPhase::Incoherent][ph];
            let c = interfere(a, b, phase, e_d, p_d);
            prop_assert!(c.left_only >= 0.0 && c.right_only >= 0.0);
            prop_assert!(c.success() <= 1.0 + 1e-15);
        }
    }
}
