//! Parameter search and rate-versus-distance sweeps.
//!
//! Each cell is a coarse grid scan followed by Nelder-Mead refinement in a
//! transformed space (log for intensities, logit for probabilities). The
//! objective is the unfloored key length, which stays informative where the
//! floored length is zero.

use rayon::prelude::*;

use crate::budget::{BudgetSplit, Mode};
use crate::channel::{GlobalParams, NppRates, ScsRates};
use crate::definetti::GMode;
use crate::error::{Error, Result};
use crate::npp::{NppEvaluator, NppParams};
use crate::result::{KeyRateResult, Protocol};
use crate::scs::{ScsEvaluator, ScsOptions, ScsParams};

/// A closed search interval for one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn is_point(&self) -> bool {
        self.lo == self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scale {
    Log,
    Logit,
}

#[derive(Debug, Clone, Copy)]
struct Dim {
    iv: Interval,
    scale: Scale,
}

impl Dim {
    fn to_u(self, x: f64) -> f64 {
        match self.scale {
            Scale::Log => x.ln(),
            Scale::Logit => (x / (1.0 - x)).ln(),
        }
    }

    fn to_x(self, u: f64) -> f64 {
        let x = match self.scale {
            Scale::Log => u.exp(),
            Scale::Logit => 1.0 / (1.0 + (-u).exp()),
        };
        x.clamp(self.iv.lo, self.iv.hi)
    }

    /// `k` points: log-spaced for intensities, linear for probabilities.
    fn grid(&self, k: usize) -> Vec<f64> {
        if self.iv.is_point() || k <= 1 {
            return vec![self.iv.lo];
        }
        (0..k)
            .map(|i| {
                let s = i as f64 / (k - 1) as f64;
                match self.scale {
                    Scale::Log => (self.iv.lo.ln() + s * (self.iv.hi / self.iv.lo).ln()).exp(),
                    Scale::Logit => self.iv.lo + s * (self.iv.hi - self.iv.lo),
                }
            })
            .collect()
    }
}

/// Where and how hard to search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub mu: Interval,
    /// NPP only.
    pub nu: Interval,
    pub p: Interval,
    /// NPP only.
    pub p0: Interval,
    /// SCS only: golden-section search of `c0` inside each evaluation.
    pub c0: Option<Interval>,
    /// When set, the parameter-estimation share of `eps_tot` is refined too.
    pub tune_split: Option<Interval>,
    /// Grid points per dimension.
    pub grid: usize,
    /// Nelder-Mead evaluations per start.
    pub refine_evals: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            mu: Interval::new(1e-4, 1.0),
            nu: Interval::new(1e-4, 1.0),
            p: Interval::new(1e-3, 1.0 - 1e-3),
            p0: Interval::new(1e-3, 1.0 - 1e-3),
            c0: None,
            tune_split: None,
            grid: 16,
            refine_evals: 200,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self, protocol: Protocol) -> Result<()> {
        let intensity = |name: &str, iv: Interval| {
            if iv.lo > 0.0 && iv.lo <= iv.hi && iv.hi.is_finite() {
                Ok(())
            } else {
                Err(Error::config(name, "need 0 < lo <= hi < inf"))
            }
        };
        let prob = |name: &str, iv: Interval| {
            if iv.lo > 0.0 && iv.lo <= iv.hi && iv.hi < 1.0 {
                Ok(())
            } else {
                Err(Error::config(name, "need 0 < lo <= hi < 1"))
            }
        };
        intensity("search.mu", self.mu)?;
        prob("search.p", self.p)?;
        if protocol == Protocol::Npp {
            intensity("search.nu", self.nu)?;
            prob("search.p0", self.p0)?;
        }
        if let Some(c0) = self.c0 {
            intensity("search.c0", c0)?;
        }
        if let Some(s) = self.tune_split {
            prob("search.pe_fraction", s)?;
        }
        if self.grid == 0 {
            return Err(Error::config("search.grid", "need at least one point"));
        }
        Ok(())
    }

    fn dims(&self, protocol: Protocol, tune: bool) -> Vec<Dim> {
        let i = |iv| Dim {
            iv,
            scale: Scale::Log,
        };
        let q = |iv| Dim {
            iv,
            scale: Scale::Logit,
        };
        let mut d = match protocol {
            Protocol::Scs => vec![i(self.mu), q(self.p)],
            Protocol::Npp => vec![i(self.mu), i(self.nu), q(self.p), q(self.p0)],
        };
        if let (true, Some(s)) = (tune, self.tune_split) {
            d.push(q(s));
        }
        d
    }
}

/// One optimization problem: a protocol at a fixed `(N, L)` and mode.
struct Problem {
    protocol: Protocol,
    scs: Option<ScsEvaluator>,
    npp: Option<NppEvaluator>,
    dims: Vec<Dim>,
    tune: bool,
}

impl Problem {
    fn new(
        protocol: Protocol,
        g: &GlobalParams,
        space: &SearchSpace,
        mode: Mode,
        scs: &ScsOptions,
    ) -> Result<Self> {
        space.validate(protocol)?;
        let tune = space.tune_split.is_some() && mode != Mode::Asymptotic;
        let (scs_ev, npp_ev) = match protocol {
            Protocol::Scs => {
                let mut opts = *scs;
                if let Some(c0) = space.c0 {
                    opts.c0_search = Some((c0.lo, c0.hi));
                }
                (Some(ScsEvaluator::new(g, mode, opts)?), None)
            }
            Protocol::Npp => (
                None,
                Some(NppEvaluator::new(
                    g,
                    mode,
                    BudgetSplit::default_for(Protocol::Npp),
                )?),
            ),
        };
        Ok(Self {
            protocol,
            scs: scs_ev,
            npp: npp_ev,
            dims: space.dims(protocol, tune),
            tune,
        })
    }

    fn scs_params(x: &[f64]) -> ScsParams {
        ScsParams {
            mu: x[0],
            p: x[1],
            c0: None,
        }
    }

    fn npp_params(x: &[f64]) -> NppParams {
        NppParams {
            mu: x[0],
            nu: x[1],
            p: x[2],
            p0: x[3],
        }
    }

    fn pe(&self, x: &[f64]) -> Option<f64> {
        self.tune.then(|| x[self.dims.len() - 1])
    }

    /// Unfloored key length at `x`; `-inf` where the model is undefined.
    fn value(&self, x: &[f64]) -> f64 {
        self.result(x).map_or(f64::NEG_INFINITY, |r| r.raw_bits)
    }

    fn result(&self, x: &[f64]) -> Result<KeyRateResult> {
        let split = self
            .pe(x)
            .map(|s| BudgetSplit::with_pe_fraction(self.protocol, s));
        let mut r = match self.protocol {
            Protocol::Scs => {
                let ev = self.scs.as_ref().expect("scs evaluator");
                match split {
                    Some(s) => ev.with_split(s)?.evaluate(&Self::scs_params(x))?,
                    None => ev.evaluate(&Self::scs_params(x))?,
                }
            }
            Protocol::Npp => {
                let ev = self.npp.as_ref().expect("npp evaluator");
                match split {
                    Some(s) => ev.with_split(s)?.evaluate(&Self::npp_params(x))?,
                    None => ev.evaluate(&Self::npp_params(x))?,
                }
            }
        };
        r.params.pe_fraction = self.pe(x);
        Ok(r)
    }

    /// Best grid point. The split share, when tuned, is held at its
    /// default during the scan.
    fn grid_scan(&self, k: usize) -> (Vec<f64>, f64) {
        let mut best = (Vec::new(), f64::NEG_INFINITY);
        let mut consider = |x: Vec<f64>, v: f64| {
            if v > best.1 || best.0.is_empty() {
                best = (x, v);
            }
        };
        let pe0 = self.tune.then(|| {
            let default = BudgetSplit::default_for(self.protocol).pe;
            default.clamp(
                self.dims.last().unwrap().iv.lo,
                self.dims.last().unwrap().iv.hi,
            )
        });
        let with_pe = |mut x: Vec<f64>| {
            if let Some(s) = pe0 {
                x.push(s);
            }
            x
        };
        match self.protocol {
            Protocol::Scs => {
                let ev = self.scs.as_ref().unwrap();
                let ev = match pe0 {
                    Some(s) => ev
                        .with_split(BudgetSplit::with_pe_fraction(Protocol::Scs, s))
                        .expect("default share is valid"),
                    None => ev.clone(),
                };
                for &mu in &self.dims[0].grid(k) {
                    let Ok(rates) = ScsRates::new(ev.global(), mu) else {
                        continue;
                    };
                    for &p in &self.dims[1].grid(k) {
                        let params = ScsParams { mu, p, c0: None };
                        let v = ev
                            .outcome(&rates, &params)
                            .map_or(f64::NEG_INFINITY, |o| o.key.raw_bits);
                        consider(with_pe(vec![mu, p]), v);
                    }
                }
            }
            Protocol::Npp => {
                let ev = self.npp.as_ref().unwrap();
                let ev = match pe0 {
                    Some(s) => ev
                        .with_split(BudgetSplit::with_pe_fraction(Protocol::Npp, s))
                        .expect("default share is valid"),
                    None => ev.clone(),
                };
                let (ps, p0s) = (self.dims[2].grid(k), self.dims[3].grid(k));
                for &mu in &self.dims[0].grid(k) {
                    for &nu in &self.dims[1].grid(k) {
                        let Ok(rates) = NppRates::new(ev.global(), mu, nu) else {
                            continue;
                        };
                        for &p in &ps {
                            for &p0 in &p0s {
                                let params = NppParams { mu, nu, p, p0 };
                                let v = ev
                                    .outcome(&rates, &params)
                                    .map_or(f64::NEG_INFINITY, |o| o.key.key.raw_bits);
                                consider(with_pe(vec![mu, nu, p, p0]), v);
                            }
                        }
                    }
                }
            }
        }
        best
    }

    /// Nelder-Mead over the non-degenerate dimensions, starting at `x0`.
    fn refine(&self, x0: &[f64], max_evals: usize) -> (Vec<f64>, f64) {
        let free: Vec<usize> = (0..self.dims.len())
            .filter(|&i| !self.dims[i].iv.is_point())
            .collect();
        let embed = |u: &[f64]| {
            let mut x = x0.to_vec();
            for (k, &i) in free.iter().enumerate() {
                x[i] = self.dims[i].to_x(u[k]);
            }
            x
        };
        let u0: Vec<f64> = free.iter().map(|&i| self.dims[i].to_u(x0[i])).collect();
        let (u, v) = nelder_mead(&u0, 0.25, max_evals, |u| self.value(&embed(u)));
        (embed(&u), v)
    }
}

/// Minimal Nelder-Mead maximiser with standard coefficients.
pub(crate) fn nelder_mead(
    x0: &[f64],
    step: f64,
    max_evals: usize,
    f: impl Fn(&[f64]) -> f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let f0 = f(x0);
    if n == 0 || max_evals == 0 {
        return (x0.to_vec(), f0);
    }
    // Minimise -f; -inf values become +inf and sort last.
    let cost = |x: &[f64]| -f(x);
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), -f0)];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let c = cost(&x);
        simplex.push((x, c));
    }
    let mut evals = n + 1;
    let by_cost = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.total_cmp(&b.1);
    while evals < max_evals {
        simplex.sort_by(by_cost);
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if worst.is_finite() && (worst - best).abs() <= 1e-12 * best.abs().max(1e-300) {
            let spread = simplex
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread < 1e-9 {
                break;
            }
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let cr = cost(&xr);
        evals += 1;
        if cr < simplex[0].1 {
            let xe = along(2.0);
            let ce = cost(&xe);
            evals += 1;
            simplex[n] = if ce < cr { (xe, ce) } else { (xr, cr) };
        } else if cr < simplex[n - 1].1 {
            simplex[n] = (xr, cr);
        } else {
            let (xc, cc) = if cr < simplex[n].1 {
                let x = along(0.5);
                let c = cost(&x);
                (x, c)
            } else {
                let x = along(-0.5);
                let c = cost(&x);
                (x, c)
            };
            evals += 1;
            if cc < simplex[n].1.min(cr) {
                simplex[n] = (xc, cc);
            } else {
                let x_best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = item
                        .0
                        .iter()
                        .zip(&x_best)
                        .map(|(a, b)| b + 0.5 * (a - b))
                        .collect();
                    let c = cost(&x);
                    *item = (x, c);
                }
                evals += n;
            }
        }
    }
    simplex.sort_by(by_cost);
    let (x, c) = simplex.swap_remove(0);
    (x, -c)
}

/// Optimizes one cell. `starts` are extra refinement starting points (for
/// instance a neighbouring cell's optimum); each is also evaluated as is, so
/// the result is never worse than any of them.
pub fn optimize_from(
    protocol: Protocol,
    g: &GlobalParams,
    space: &SearchSpace,
    mode: Mode,
    scs: &ScsOptions,
    starts: &[Vec<f64>],
) -> Result<KeyRateResult> {
    let problem = Problem::new(protocol, g, space, mode, scs)?;
    let width = problem.dims.len();
    let mut candidates: Vec<(Vec<f64>, f64)> = Vec::new();
    let (grid_x, grid_v) = problem.grid_scan(space.grid);
    if grid_v.is_finite() {
        candidates.push(problem.refine(&grid_x, space.refine_evals));
    }
    candidates.push((grid_x, grid_v));
    for s in starts {
        let mut x: Vec<f64> = s.iter().take(width).copied().collect();
        if x.len() < width {
            // A start without the split share: use the default.
            x.push(BudgetSplit::default_for(protocol).pe);
        }
        for (xi, d) in x.iter_mut().zip(&problem.dims) {
            *xi = xi.clamp(d.iv.lo, d.iv.hi);
        }
        let v = problem.value(&x);
        if v.is_finite() {
            candidates.push(problem.refine(&x, space.refine_evals));
        }
        candidates.push((x, v));
    }
    let best = candidates
        .into_iter()
        .fold(None::<(Vec<f64>, f64)>, |acc, c| match acc {
            Some(a) if a.1 >= c.1 => Some(a),
            _ => Some(c),
        })
        .expect("grid scan yields a candidate");
    problem.result(&best.0)
}

/// [`optimize_from`] without extra starts.
pub fn optimize(
    protocol: Protocol,
    g: &GlobalParams,
    space: &SearchSpace,
    mode: Mode,
    scs: &ScsOptions,
) -> Result<KeyRateResult> {
    optimize_from(protocol, g, space, mode, scs, &[])
}

/// The parameter vector of a result in the optimizer's layout.
pub fn param_vector(r: &KeyRateResult) -> Vec<f64> {
    let p = &r.params;
    let mut x = match r.protocol {
        Protocol::Scs => vec![p.mu, p.p],
        Protocol::Npp => vec![p.mu, p.nu.unwrap_or(p.mu), p.p, p.p0.unwrap_or(0.5)],
    };
    if let Some(s) = p.pe_fraction {
        x.push(s);
    }
    x
}

/// A rate-versus-distance table request.
#[derive(Debug, Clone)]
pub struct SweepRequest {
    pub protocol: Protocol,
    /// Device parameters; `N` and `L` are overridden per cell.
    pub template: GlobalParams,
    pub distances: Vec<f64>,
    pub n_values: Vec<u64>,
    pub g_mode: GMode,
    /// Add an infinite-key row per distance.
    pub asymptotic: bool,
    pub space: SearchSpace,
    pub scs: ScsOptions,
}

/// One optimized row per `(L, N)`, rows ordered by distance and then by `N`
/// as given, with the asymptotic row last at each distance.
///
/// Within a distance, cells are solved in increasing `N`, each warm-started
/// from the previous optimum; the asymptotic cell starts from the largest-`N`
/// optimum. Distances run in parallel.
pub fn sweep(req: &SweepRequest) -> Result<Vec<KeyRateResult>> {
    if req.n_values.is_empty() && !req.asymptotic {
        return Err(Error::config("N", "need at least one pulse count"));
    }
    req.template.with_pulses(1).validate()?;
    req.space.validate(req.protocol)?;
    let per_distance: Vec<Result<Vec<KeyRateResult>>> = req
        .distances
        .par_iter()
        .map(|&l| sweep_distance(req, l))
        .collect();
    let mut rows = Vec::new();
    for r in per_distance {
        rows.extend(r?);
    }
    Ok(rows)
}

fn sweep_distance(req: &SweepRequest, l: f64) -> Result<Vec<KeyRateResult>> {
    let mut order: Vec<usize> = (0..req.n_values.len()).collect();
    order.sort_by_key(|&i| req.n_values[i]);
    let mut solved: Vec<Option<KeyRateResult>> = vec![None; req.n_values.len()];
    let mut prev: Option<Vec<f64>> = None;
    for i in order {
        let g = req.template.with_distance(l).with_pulses(req.n_values[i]);
        let starts: Vec<Vec<f64>> = prev.iter().cloned().collect();
        let r = optimize_from(
            req.protocol,
            &g,
            &req.space,
            Mode::Finite(req.g_mode),
            &req.scs,
            &starts,
        )?;
        prev = Some(param_vector(&r));
        solved[i] = Some(r);
    }
    let mut rows: Vec<KeyRateResult> = solved.into_iter().map(|r| r.expect("solved")).collect();
    if req.asymptotic {
        let n = req.n_values.iter().copied().max().unwrap_or(1);
        let g = req.template.with_distance(l).with_pulses(n);
        let starts: Vec<Vec<f64>> = prev
            .map(|mut x| {
                x.truncate(if req.protocol == Protocol::Scs { 2 } else { 4 });
                x
            })
            .into_iter()
            .collect();
        rows.push(optimize_from(
            req.protocol,
            &g,
            &req.space,
            Mode::Asymptotic,
            &req.scs,
            &starts,
        )?);
    }
    Ok(rows)
}
