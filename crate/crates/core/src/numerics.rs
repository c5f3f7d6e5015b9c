//! Scalar kernel: binary entropy, log-gamma and the log-domain failure
//! probability type.
//!
//! Failure probabilities in this crate routinely sit below `1e-100000`, so
//! they are carried as `t = ln(1/eps)` and combined by adding logarithms.

use std::f64::consts::LN_2;
use std::fmt;

use crate::error::{Error, Result};

/// Inputs to [`h2`] this close to an endpoint are snapped onto it.
const H2_SNAP: f64 = 1e-15;

/// A failure probability `eps` in `(0, 1]`, stored as `t = ln(1/eps) >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct LogEps(f64);

impl LogEps {
    /// `eps = 1`: the event is certain, every Chernoff correction vanishes.
    pub const CERTAIN: LogEps = LogEps(0.0);

    pub fn new(t: f64) -> Result<Self> {
        if t.is_finite() && t >= 0.0 {
            Ok(LogEps(t))
        } else {
            Err(Error::domain("ln(1/eps)", t, "finite and >= 0"))
        }
    }

    /// Converts a linear-domain probability. Only meaningful for values that
    /// are representable as `f64`, e.g. a configured `eps_tot`.
    pub fn from_eps(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps <= 1.0 {
            Ok(LogEps(-eps.ln()))
        } else {
            Err(Error::domain("eps", eps, "0 < eps <= 1"))
        }
    }

    #[inline]
    pub fn t(self) -> f64 {
        self.0
    }

    /// `ln(eps)`.
    #[inline]
    pub fn ln_eps(self) -> f64 {
        -self.0
    }

    /// `log2(1/eps)`.
    #[inline]
    pub fn log2_inv(self) -> f64 {
        self.0 / LN_2
    }

    /// The probability `k * eps` for `k >= 1`. Fails when the product would
    /// exceed one.
    pub fn times(self, k: f64) -> Result<Self> {
        if !(k >= 1.0) {
            return Err(Error::domain("k", k, ">= 1"));
        }
        let t = self.0 - k.ln();
        if t < 0.0 {
            return Err(Error::BudgetUnachievable { t0: t });
        }
        Ok(LogEps(t))
    }

    /// The probability `eps / k` for `k >= 1`.
    pub fn divided_by(self, k: f64) -> Result<Self> {
        if !(k >= 1.0) || !k.is_finite() {
            return Err(Error::domain("k", k, "finite and >= 1"));
        }
        Ok(LogEps(self.0 + k.ln()))
    }

    /// Linear-domain value for reporting. Underflows to zero for the very
    /// small probabilities this crate produces; never feed it back into a
    /// computation.
    pub fn to_linear_lossy(self) -> f64 {
        (-self.0).exp()
    }
}

impl fmt::Display for LogEps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e^-{}", self.0)
    }
}

/// Binary Shannon entropy `-x log2 x - (1-x) log2(1-x)`.
pub fn h2(x: f64) -> Result<f64> {
    if !(-H2_SNAP..=1.0 + H2_SNAP).contains(&x) {
        return Err(Error::domain("x", x, "0 <= x <= 1"));
    }
    Ok(binary_entropy(x))
}

/// [`h2`] without the domain check; callers guarantee `x` lies in `[0, 1]`
/// up to rounding.
pub(crate) fn binary_entropy(x: f64) -> f64 {
    if x <= H2_SNAP || x >= 1.0 - H2_SNAP {
        return 0.0;
    }
    -(x * x.ln() + (1.0 - x) * (-x).ln_1p()) / LN_2
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

// zeta(k) for k = 2..=28, Taylor coefficients of ln Gamma around 1.
#[allow(clippy::excessive_precision)]
const ZETA: [f64; 27] = [
    1.644_934_066_848_226_4,
    1.202_056_903_159_594_3,
    1.082_323_233_711_138_2,
    1.036_927_755_143_370_0,
    1.017_343_061_984_449_1,
    1.008_349_277_381_922_8,
    1.004_077_356_197_944_3,
    1.002_008_392_826_082_2,
    1.000_994_575_127_818_1,
    1.000_494_188_604_119_5,
    1.000_246_086_553_308_0,
    1.000_122_713_347_578_5,
    1.000_061_248_135_058_7,
    1.000_030_588_236_307_0,
    1.000_015_282_259_408_7,
    1.000_007_637_197_637_9,
    1.000_003_817_293_265_0,
    1.000_001_908_212_716_6,
    1.000_000_953_962_033_9,
    1.000_000_476_932_986_8,
    1.000_000_238_450_502_7,
    1.000_000_119_219_926_0,
    1.000_000_059_608_189_1,
    1.000_000_029_803_503_5,
    1.000_000_014_901_554_8,
    1.000_000_007_450_711_8,
    1.000_000_003_725_334_0,
];

// B_{2k} / (2k (2k - 1)) for k = 1..=8.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// Below this argument the Stirling series is reached through the
/// recurrence `Gamma(z+1) = z Gamma(z)`.
const STIRLING_MIN: f64 = 20.0;

/// Natural log of the gamma function for `z > 0`.
pub fn ln_gamma(z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain("z", z, "finite and > 0"));
    }
    Ok(ln_gamma_pos(z))
}

fn ln_gamma_pos(z: f64) -> f64 {
    let d1 = z - 1.0;
    if d1.abs() <= 0.25 {
        return ln_gamma_1p(d1);
    }
    let d2 = z - 2.0;
    if d2.abs() <= 0.25 {
        return ln_gamma_1p(d2) + d2.ln_1p();
    }
    if z < STIRLING_MIN {
        let mut w = z;
        let mut prod = 1.0;
        while w < STIRLING_MIN {
            prod *= w;
            w += 1.0;
        }
        return ln_gamma_stirling(w) - prod.ln();
    }
    ln_gamma_stirling(z)
}

/// `ln Gamma(1 + d)` for `|d| <= 1/4`.
fn ln_gamma_1p(d: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = -d;
    for (i, zeta) in ZETA.iter().enumerate() {
        pow *= -d;
        sum += zeta * pow / (i + 2) as f64;
    }
    -EULER_GAMMA * d + sum
}

fn stirling_tail(z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in STIRLING.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

fn ln_gamma_stirling(z: f64) -> f64 {
    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + stirling_tail(z)
}

/// `ln Gamma(a + m) - ln Gamma(a)` (log of the rising factorial) for `a > 0`,
/// `m >= 0`, without the cancellation of subtracting two huge log-gammas.
pub fn ln_rising(a: f64, m: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain("a", a, "finite and > 0"));
    }
    if !(m >= 0.0) || !m.is_finite() {
        return Err(Error::domain("m", m, "finite and >= 0"));
    }
    if m == 0.0 {
        return Ok(0.0);
    }
    let (mut a, mut m) = (a, m);
    let mut head = 0.0;
    // Step up with exact factors until the Stirling difference applies.
    while a < STIRLING_MIN && m >= 1.0 {
        head += a.ln();
        a += 1.0;
        m -= 1.0;
    }
    if m == 0.0 {
        return Ok(head);
    }
    if a < STIRLING_MIN {
        return Ok(head + ln_gamma_pos(a + m) - ln_gamma_pos(a));
    }
    Ok(head + stirling_difference(a, m))
}

fn stirling_difference(a: f64, m: f64) -> f64 {
    // Difference of Stirling series, regrouped so no two large terms cancel.
    let b = a + m;
    (a - 0.5) * (m / a).ln_1p() + m * b.ln() - m + (stirling_tail(b) - stirling_tail(a))
}

/// `ln(sum(exp(v)))`, stable for widely spread exponents.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
