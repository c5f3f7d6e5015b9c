//! Multiplicative Chernoff bounds for sums of independent Bernoulli trials.
//!
//! Lower-case direction (`observation_*`): given the expectation `E`, bound
//! the observed count `X`. Upper-case direction (`expectation_*`): given an
//! observation, bound the unknown expectation. Each bound fails with
//! probability at most `eps`, passed as `t = ln(1/eps)`.
//!
//! Lower bounds clamp at zero. Upper bounds are not clamped; only the caller
//! knows the population size.

use crate::error::{Error, Result};
use crate::numerics::LogEps;

/// `sqrt(t^2 + c v t)`, factored so neither term is lost when `t` and `v`
/// differ by many orders of magnitude.
#[inline]
fn root(t: f64, c: f64, v: f64) -> f64 {
    if t > v {
        t * (1.0 + c * v / t).sqrt()
    } else {
        t.sqrt() * (t + c * v).sqrt()
    }
}

/// Upper bound on an observation with expectation `e`:
/// `E + t/2 + sqrt(t^2 + 8 E t)/2`.
#[doc(alias = "cher_upper")]
pub fn observation_upper(e: f64, t: LogEps) -> f64 {
    let t = t.t();
    e + 0.5 * t + 0.5 * root(t, 8.0, e)
}

/// Lower bound on an observation with expectation `e`:
/// `max(0, E - sqrt(2 E t))`.
#[doc(alias = "cher_lower")]
pub fn observation_lower(e: f64, t: LogEps) -> f64 {
    let t = t.t();
    if t == 0.0 {
        return e;
    }
    if e <= 2.0 * t {
        return 0.0;
    }
    // E - sqrt(2Et) rationalised: E (E - 2t) / (E + sqrt(2Et)).
    e * (e - 2.0 * t) / (e + (2.0 * e * t).sqrt())
}

/// Upper bound on the expectation behind observation `x`:
/// `X + t + sqrt(t^2 + 2 X t)`.
#[doc(alias = "Cher_upper")]
pub fn expectation_upper(x: f64, t: LogEps) -> f64 {
    let t = t.t();
    x + t + root(t, 2.0, x)
}

/// Lower bound on the expectation behind observation `x`:
/// `max(0, X + t/2 - sqrt(t^2 + 8 X t)/2)`.
#[doc(alias = "Cher_lower")]
pub fn expectation_lower(x: f64, t: LogEps) -> f64 {
    let t = t.t();
    if t == 0.0 {
        return x;
    }
    if x <= t {
        return 0.0;
    }
    // (X + t/2)^2 - (t^2 + 8Xt)/4 = X (X - t).
    x * (x - t) / (x + 0.5 * t + 0.5 * root(t, 8.0, x))
}

/// A count paired with the failure probability of the bound applied to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffInput {
    value: f64,
    t: LogEps,
}

impl ChernoffInput {
    pub fn new(value: f64, t: LogEps) -> Result<Self> {
        if value >= 0.0 && value.is_finite() {
            Ok(Self { value, t })
        } else {
            Err(Error::domain("count", value, "finite and >= 0"))
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn t(&self) -> LogEps {
        self.t
    }

    pub fn observation_upper(&self) -> f64 {
        observation_upper(self.value, self.t)
    }

    pub fn observation_lower(&self) -> f64 {
        observation_lower(self.value, self.t)
    }

    pub fn expectation_upper(&self) -> f64 {
        expectation_upper(self.value, self.t)
    }

    pub fn expectation_lower(&self) -> f64 {
        expectation_lower(self.value, self.t)
    }
}
