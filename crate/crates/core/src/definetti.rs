//! de Finetti penalty for lifting collective-attack parameter estimation to
//! coherent attacks.
//!
//! A permutation-invariant estimate that fails with probability `eps0` per
//! use against collective attacks fails with probability at most
//! `k * eps0 * g(N, x)` against coherent attacks, where
//! `g(N, x) = binom(N + x - 1, N)` and `x` is the squared total dimension of
//! the parties' systems.

use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ln_gamma, ln_rising, LogEps};

/// Local dimensions of Alice's, Bob's and Charlie's systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub d_a: u64,
    pub d_b: u64,
    pub d_c: u64,
}

impl DimensionSpec {
    pub fn new(d_a: u64, d_b: u64, d_c: u64) -> Result<Self> {
        for (name, d) in [("d_A", d_a), ("d_B", d_b), ("d_C", d_c)] {
            if d == 0 {
                return Err(Error::config(name, "dimension must be >= 1"));
            }
        }
        Ok(Self { d_a, d_b, d_c })
    }

    /// Two-dimensional key ancillas and a click/no-click Charlie: `x = 64`.
    pub const fn scs() -> Self {
        Self {
            d_a: 2,
            d_b: 2,
            d_c: 2,
        }
    }

    /// Six-dimensional ancillas (choice, photon number and key bit) on each
    /// side and a three-outcome Charlie: total dimension 108, `x = 11664`.
    pub const fn npp() -> Self {
        Self {
            d_a: 6,
            d_b: 6,
            d_c: 3,
        }
    }

    pub fn total(&self) -> u64 {
        self.d_a * self.d_b * self.d_c
    }

    /// `x = (d_A d_B d_C)^2`.
    pub fn x(&self) -> u64 {
        let d = self.total();
        d * d
    }
}

/// How `ln g(N, x)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GMode {
    /// The binomial itself, through log-gamma.
    #[default]
    Exact,
    /// The closed-form upper bound `(e (N + x - 1) / (x - 1))^(x - 1)`.
    PaperBound,
}

impl fmt::Display for GMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GMode::Exact => "exact",
            GMode::PaperBound => "paper-bound",
        })
    }
}

impl std::str::FromStr for GMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(GMode::Exact),
            "paper-bound" => Ok(GMode::PaperBound),
            other => Err(Error::config(
                "g_mode",
                format!("expected `exact` or `paper-bound`, got `{other}`"),
            )),
        }
    }
}

fn check(n: u64, x: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("N", 0.0, ">= 1"));
    }
    if x < 2 {
        return Err(Error::domain("x", x as f64, ">= 2"));
    }
    Ok(())
}

/// `ln binom(N + x - 1, N) = ln Gamma(N + x) - ln Gamma(N + 1) - ln Gamma(x)`.
pub fn ln_g(n: u64, x: u64) -> Result<f64> {
    check(n, x)?;
    let n = n as f64;
    let x = x as f64;
    Ok(ln_rising(n + 1.0, x - 1.0)? - ln_gamma(x)?)
}

/// `(x - 1) [1 + ln((N + x - 1) / (x - 1))]`, an upper bound on [`ln_g`].
pub fn ln_g_bound(n: u64, x: u64) -> Result<f64> {
    if x < 2 {
        return Err(Error::domain("x", x as f64, ">= 2"));
    }
    let n = n as f64;
    let xm1 = (x - 1) as f64;
    Ok(xm1 * (1.0 + (n / xm1).ln_1p()))
}

pub fn ln_penalty(n: u64, x: u64, mode: GMode) -> Result<f64> {
    match mode {
        GMode::Exact => ln_g(n, x),
        GMode::PaperBound => {
            check(n, x)?;
            ln_g_bound(n, x)
        }
    }
}

/// Per-use collective-attack failure probability `eps0` such that
/// `k_uses * eps0 * g(N, x)` equals the coherent-attack target.
pub fn lift_budget(
    target: LogEps,
    k_uses: u32,
    n: u64,
    dims: DimensionSpec,
    mode: GMode,
) -> Result<LogEps> {
    lift_budget_x(target, k_uses, n, dims.x(), mode)
}

/// [`lift_budget`] with the squared dimension given directly.
pub fn lift_budget_x(target: LogEps, k_uses: u32, n: u64, x: u64, mode: GMode) -> Result<LogEps> {
    if k_uses == 0 {
        return Err(Error::config(
            "k_uses",
            "at least one estimate must be made",
        ));
    }
    let t0 = target.t() + ln_penalty(n, x, mode)? + (k_uses as f64).ln();
    if !(t0 >= 0.0) || !t0.is_finite() {
        return Err(Error::BudgetUnachievable { t0 });
    }
    LogEps::new(t0)
}

/// `log2 g(N, x)`, handy when reporting the penalty in bits.
pub fn log2_penalty(n: u64, x: u64, mode: GMode) -> Result<f64> {
    Ok(ln_penalty(n, x, mode)? / LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent route: `sum_{k=1}^{x-1} ln(N + k) - ln((x - 1)!)`.
    fn ln_g_by_sum(n: u64, x: u64) -> f64 {
        let n = n as f64;
        let num: f64 = (1..x).map(|k| (n + k as f64).ln()).sum();
        let den: f64 = (1..x).map(|k| (k as f64).ln()).sum();
        num - den
    }

    fn binom(n: u64, k: u64) -> u128 {
        let mut r: u128 = 1;
        for i in 0..k as u128 {
            r = r * (n as u128 - i) / (i + 1);
        }
        r
    }

    #[test]
    fn presets() {
        assert_eq!(DimensionSpec::scs().x(), 64);
        assert_eq!(DimensionSpec::npp().total(), 108);
        assert_eq!(DimensionSpec::npp().x(), 11_664);
        assert!(DimensionSpec::new(0, 2, 2).is_err());
    }

    #[test]
    fn smallest_case() {
        let g = ln_g(1, 2).unwrap();
        assert!((g - 2f64.ln()).abs() < 1e-15);
        let b = ln_g_bound(1, 2).unwrap();
        assert!((b - (1.0 + 2f64.ln())).abs() < 1e-15);
        assert!(g <= b);
    }

    #[test]
    fn reference_values() {
        // 60-digit evaluations of the Stirling-series route.
        let cases = [
            (
                1_000_000_000_000u64,
                64u64,
                1539.745_013_906_233,
                1542.736_842_544_801,
            ),
            (
                10_000_000_000_000,
                64,
                1684.807_874_763_043_5,
                1687.799_703_399_853_8,
            ),
            (
                100_000_000_000_000,
                64,
                1829.870_735_621_486_9,
                1832.862_564_258_121_4,
            ),
            (
                10_000_000_000_000,
                11_664,
                251_558.655_140_661_71,
                251_564.256_181_499_05,
            ),
        ];
        for (n, x, exact, bound) in cases {
            let g = ln_g(n, x).unwrap();
            let b = ln_g_bound(n, x).unwrap();
            assert!((g - exact).abs() <= 1e-9 * exact, "ln_g({n}, {x}) = {g}");
            assert!(
                (b - bound).abs() <= 1e-9 * bound,
                "ln_g_bound({n}, {x}) = {b}"
            );
        }
    }

    #[test]
    fn agrees_with_direct_summation() {
        for &n in &[1u64, 7, 1000, 1_000_000, 1_000_000_000_000] {
            for &x in &[2u64, 3, 64, 500] {
                let want = ln_g_by_sum(n, x);
                let got = ln_g(n, x).unwrap();
                assert!(
                    (got - want).abs() <= 1e-9 * want.abs().max(1.0),
                    "N={n} x={x}"
                );
            }
        }
    }

    #[test]
    fn exact_integer_binomials() {
        for n in 1..=30u64 {
            for x in 2..=6u64 {
                let exact = binom(n + x - 1, n) as f64;
                let got = ln_g(n, x).unwrap().exp();
                assert!((got - exact).abs() <= 1e-9 * exact, "N={n} x={x}");
            }
        }
    }

    #[test]
    fn exact_below_bound_and_monotone() {
        let ns = [
            1u64,
            1_000,
            1_000_000,
            1_000_000_000_000,
            100_000_000_000_000,
        ];
        let xs = [2u64, 64, 11_664];
        for &n in &ns {
            for &x in &xs {
                assert!(ln_g(n, x).unwrap() <= ln_g_bound(n, x).unwrap());
            }
        }
        for &x in &xs {
            for w in ns.windows(2) {
                assert!(ln_g(w[1], x).unwrap() > ln_g(w[0], x).unwrap());
            }
        }
        for &n in &ns {
            for w in xs.windows(2) {
                assert!(ln_g(n, w[1]).unwrap() > ln_g(n, w[0]).unwrap());
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(ln_g(0, 64).is_err());
        assert!(ln_g(10, 1).is_err());
        assert!(ln_g_bound(10, 1).is_err());
    }

    #[test]
    fn lift_budget_sums_logs() {
        let target = LogEps::from_eps(0.01).unwrap();
        let t0 = lift_budget_x(target, 1, 1, 2, GMode::Exact).unwrap();
        assert!((t0.t() - (100f64.ln() + 2f64.ln())).abs() < 1e-12);
        let t3 = lift_budget_x(target, 3, 1, 2, GMode::Exact).unwrap();
        assert!((t3.t() - t0.t() - 3f64.ln()).abs() < 1e-12);
        assert!(lift_budget_x(target, 0, 1, 2, GMode::Exact).is_err());
        // A single trivial dimension gives x = 1, which has no penalty defined.
        let trivial = DimensionSpec::new(1, 1, 1).unwrap();
        assert!(lift_budget(target, 1, 1, trivial, GMode::Exact).is_err());
    }

    #[test]
    fn scs_default_allocation() {
        // eps_tot = 1e-10 split evenly: (eps_tot / 8)^2 = 3 eps0 g.
        let eps_tot = 1e-10f64;
        let target = LogEps::new(2.0 * (8.0 / eps_tot).ln()).unwrap();
        let t0 = lift_budget(
            target,
            3,
            1_000_000_000_000,
            DimensionSpec::scs(),
            GMode::Exact,
        )
        .unwrap();
        // 60-digit oracle: 1591.0542111381417.
        assert!((t0.t() - 1591.054_211_138_141_7).abs() < 1e-8);
        let bounded = lift_budget(
            target,
            3,
            1_000_000_000_000,
            DimensionSpec::scs(),
            GMode::PaperBound,
        )
        .unwrap();
        assert!(bounded.t() >= t0.t());
    }
}
