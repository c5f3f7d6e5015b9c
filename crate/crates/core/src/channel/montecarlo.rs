//! Round-by-round sampler over the same per-round probabilities as the
//! expected-count model.
//!
//! Each shard owns a ChaCha8 stream derived from `(seed, shard index)`, so a
//! sharded run is reproducible and its counts simply add.

use std::ops::Add;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{side_transmittance, GlobalParams, PortIntensities, RelPhase};
use crate::error::Result;
use crate::npp::NppObservation;
use crate::scs::ScsObservation;

/// Sender settings for one protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum McParams {
    Scs { mu: f64, p: f64 },
    Npp { mu: f64, nu: f64, p: f64, p0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScsTally {
    pub n_o: u64,
    pub n_b: u64,
    pub n_z: u64,
}

impl ScsTally {
    pub fn observation(&self) -> Result<ScsObservation> {
        ScsObservation::new(self.n_o as f64, self.n_b as f64, self.n_z as f64)
    }
}

impl Add for ScsTally {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            n_o: self.n_o + o.n_o,
            n_b: self.n_b + o.n_b,
            n_z: self.n_z + o.n_z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NppTally {
    pub n_00: u64,
    pub n_0nu: u64,
    pub n_nu0: u64,
    pub n_s: u64,
    /// Signal successes whose sifted bits disagree.
    pub n_err: u64,
}

impl NppTally {
    pub fn observation(&self) -> Result<NppObservation> {
        let e_bit = if self.n_s > 0 {
            self.n_err as f64 / self.n_s as f64
        } else {
            0.0
        };
        NppObservation::new(
            self.n_00 as f64,
            self.n_0nu as f64,
            self.n_nu0 as f64,
            self.n_s as f64,
            e_bit,
        )
    }
}

impl Add for NppTally {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            n_00: self.n_00 + o.n_00,
            n_0nu: self.n_0nu + o.n_0nu,
            n_nu0: self.n_nu0 + o.n_nu0,
            n_s: self.n_s + o.n_s,
            n_err: self.n_err + o.n_err,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tally {
    Scs(ScsTally),
    Npp(NppTally),
}

impl Add for Tally {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        match (self, o) {
            (Tally::Scs(a), Tally::Scs(b)) => Tally::Scs(a + b),
            (Tally::Npp(a), Tally::Npp(b)) => Tally::Npp(a + b),
            _ => panic!("cannot add tallies of different protocols"),
        }
    }
}

type Fire = (f64, f64);

fn fire(g: &GlobalParams, a: f64, b: f64, phase: RelPhase) -> Fire {
    PortIntensities::new(a, b, phase, g.e_d).fire_probs(g.p_d)
}

/// Draws both detectors; returns `(left, right)`.
#[inline]
fn detect(rng: &mut ChaCha8Rng, (l, r): Fire) -> (bool, bool) {
    let left = rng.random::<f64>() < l;
    let right = rng.random::<f64>() < r;
    (left, right)
}

fn run_scs(g: &GlobalParams, mu: f64, p: f64, rounds: u64, rng: &mut ChaCha8Rng) -> ScsTally {
    let a = side_transmittance(g) * mu;
    let none = fire(g, 0.0, 0.0, RelPhase::Incoherent);
    let one = fire(g, a, 0.0, RelPhase::Incoherent);
    let both = fire(g, a, a, RelPhase::Zero);
    let mut t = ScsTally::default();
    for _ in 0..rounds {
        let alice = rng.random::<f64>() < p;
        let bob = rng.random::<f64>() < p;
        let probs = match (alice, bob) {
            (false, false) => none,
            (true, true) => both,
            _ => one,
        };
        let (left, right) = detect(rng, probs);
        if right && !left {
            match (alice, bob) {
                (false, false) => t.n_o += 1,
                (true, true) => t.n_b += 1,
                _ => t.n_z += 1,
            }
        }
    }
    t
}

#[derive(Clone, Copy)]
enum Choice {
    Signal(bool),
    Vacuum,
    Decoy,
}

fn run_npp(
    g: &GlobalParams,
    (mu, nu, p, p0): (f64, f64, f64, f64),
    rounds: u64,
    rng: &mut ChaCha8Rng,
) -> NppTally {
    let eta = side_transmittance(g);
    let (a, d) = (eta * mu, eta * nu);
    let same = fire(g, a, a, RelPhase::Zero);
    let flip = fire(g, a, a, RelPhase::Pi);
    let vac = fire(g, 0.0, 0.0, RelPhase::Incoherent);
    let dec = fire(g, 0.0, d, RelPhase::Incoherent);
    let choose = |rng: &mut ChaCha8Rng| {
        if rng.random::<f64>() < p {
            Choice::Signal(rng.random::<bool>())
        } else if rng.random::<f64>() < p0 {
            Choice::Vacuum
        } else {
            Choice::Decoy
        }
    };
    let mut t = NppTally::default();
    for _ in 0..rounds {
        let alice = choose(rng);
        let bob = choose(rng);
        match (alice, bob) {
            (Choice::Signal(x), Choice::Signal(y)) => {
                let (left, right) = detect(rng, if x == y { same } else { flip });
                if left != right {
                    t.n_s += 1;
                    if (x == y) == right {
                        t.n_err += 1;
                    }
                }
            }
            (Choice::Vacuum, Choice::Vacuum) => {
                let (l, r) = detect(rng, vac);
                t.n_00 += u64::from(l != r);
            }
            (Choice::Vacuum, Choice::Decoy) => {
                let (l, r) = detect(rng, dec);
                t.n_0nu += u64::from(l != r);
            }
            (Choice::Decoy, Choice::Vacuum) => {
                let (l, r) = detect(rng, dec);
                t.n_nu0 += u64::from(l != r);
            }
            _ => {}
        }
    }
    t
}

fn run_shard(g: &GlobalParams, params: McParams, rounds: u64, seed: u64, stream: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    match params {
        McParams::Scs { mu, p } => Tally::Scs(run_scs(g, mu, p, rounds, &mut rng)),
        McParams::Npp { mu, nu, p, p0 } => {
            Tally::Npp(run_npp(g, (mu, nu, p, p0), rounds, &mut rng))
        }
    }
}

/// Samples `rounds` rounds on a single stream. Intended for up to about
/// `1e8` rounds.
pub fn mc_sample(g: &GlobalParams, params: McParams, rounds: u64, seed: u64) -> Tally {
    run_shard(g, params, rounds, seed, 0)
}

/// Splits `rounds` over `shards` independent streams, run in parallel, and
/// adds the counts. `shards = 1` is identical to [`mc_sample`].
pub fn mc_sample_sharded(
    g: &GlobalParams,
    params: McParams,
    rounds: u64,
    seed: u64,
    shards: u32,
) -> Tally {
    let shards = u64::from(shards.max(1));
    let (base, extra) = (rounds / shards, rounds % shards);
    (0..shards)
        .into_par_iter()
        .map(|s| run_shard(g, params, base + u64::from(s < extra), seed, s))
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(|a, b| a + b)
        .expect("at least one shard")
}

/// Agreement of sampled counts with their expectations for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCheck {
    pub name: &'static str,
    pub expected: f64,
    pub observed: Vec<u64>,
    /// `(observed - expected) / sigma` per seed, with the binomial
    /// `sigma = sqrt(expected (1 - expected / rounds))`.
    pub z: Vec<f64>,
}

impl ClassCheck {
    pub fn max_abs_z(&self) -> f64 {
        self.z.iter().fold(0.0, |m, z| m.max(z.abs()))
    }

    pub fn mean_z(&self) -> f64 {
        self.z.iter().sum::<f64>() / self.z.len().max(1) as f64
    }

    pub fn mean_abs_z(&self) -> f64 {
        self.z.iter().map(|z| z.abs()).sum::<f64>() / self.z.len().max(1) as f64
    }
}

/// Outcome of comparing seeded runs against the expected-count model.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub rounds: u64,
    pub seeds: Vec<u64>,
    pub classes: Vec<ClassCheck>,
}

impl McReport {
    /// Every count within `4 sigma`.
    pub fn within_four_sigma(&self) -> bool {
        self.classes.iter().all(|c| c.max_abs_z() <= 4.0)
    }

    /// Largest `|mean z|` over classes.
    pub fn worst_mean_z(&self) -> f64 {
        self.classes
            .iter()
            .fold(0.0, |m, c| m.max(c.mean_z().abs()))
    }

    /// `mean |z|` pooled over all classes and seeds.
    pub fn pooled_mean_abs_z(&self) -> f64 {
        let all: Vec<f64> = self
            .classes
            .iter()
            .flat_map(|c| c.z.iter().map(|z| z.abs()))
            .collect();
        all.iter().sum::<f64>() / all.len().max(1) as f64
    }

    pub fn passed(&self) -> bool {
        self.within_four_sigma() && self.worst_mean_z() < 1.0 && self.pooled_mean_abs_z() < 1.0
    }
}

fn z_score(observed: u64, expected: f64, rounds: u64) -> f64 {
    let var = expected * (1.0 - expected / rounds.max(1) as f64);
    if var > 0.0 {
        (observed as f64 - expected) / var.sqrt()
    } else if observed as f64 == expected {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Samples `rounds` rounds for each of `seeds` and scores every count class
/// against the expected counts for `N = rounds`.
pub fn validate(
    g: &GlobalParams,
    params: McParams,
    rounds: u64,
    seeds: &[u64],
    shards: u32,
) -> Result<McReport> {
    let g = g.with_pulses(rounds.max(1));
    let (names, expected): (Vec<&'static str>, Vec<f64>) = match params {
        McParams::Scs { mu, p } => {
            let o = super::ScsRates::new(&g, mu)?.counts(rounds.max(1), p)?;
            (vec!["n_O", "n_B", "n_Z"], vec![o.n_o, o.n_b, o.n_z])
        }
        McParams::Npp { mu, nu, p, p0 } => {
            let o = super::NppRates::new(&g, mu, nu)?.counts(rounds.max(1), p, p0)?;
            (
                vec!["n_00", "n_0nu", "n_nu0", "n_s", "n_err"],
                vec![o.n_00, o.n_0nu, o.n_nu0, o.n_s, o.n_s * o.e_bit],
            )
        }
    };
    let scale = if rounds == 0 { 0.0 } else { 1.0 };
    let tallies: Vec<Vec<u64>> = seeds
        .iter()
        .map(
            |&s| match mc_sample_sharded(&g, params, rounds, s, shards) {
                Tally::Scs(t) => vec![t.n_o, t.n_b, t.n_z],
                Tally::Npp(t) => vec![t.n_00, t.n_0nu, t.n_nu0, t.n_s, t.n_err],
            },
        )
        .collect();
    let classes = names
        .iter()
        .enumerate()
        .map(|(i, &name)| {
            let e = expected[i] * scale;
            let observed: Vec<u64> = tallies.iter().map(|t| t[i]).collect();
            ClassCheck {
                name,
                expected: e,
                z: observed.iter().map(|&o| z_score(o, e, rounds)).collect(),
                observed,
            }
        })
        .collect();
    Ok(McReport {
        rounds,
        seeds: seeds.to_vec(),
        classes,
    })
}
