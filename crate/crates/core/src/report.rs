//! CSV rows and plain-text summaries of key-rate results.

use std::io::Write;

use crate::error::{Error, Result};
use crate::result::{KeyRateResult, Observation};

pub const CSV_HEADER: [&str; 23] = [
    "protocol",
    "L_km",
    "N",
    "mode",
    "mu",
    "nu",
    "p",
    "p0",
    "c0",
    "n_O/n_00",
    "n_B/n_0nu",
    "n_Z/n_nu0",
    "n_s",
    "e_bit",
    "n_ph_or_ncor",
    "l_bits",
    "rate_per_pulse",
    "eps_bar",
    "eps_cor",
    "eps_prime",
    "ln_inv_eps0",
    "ln_g",
    "clamps",
];

/// Twelve significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.11e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// One CSV record in [`CSV_HEADER`] order. Failure probabilities `eps_bar`,
/// `eps_cor`, `eps_prime` are linear; `eps0` and `g` are natural logs.
pub fn csv_record(r: &KeyRateResult) -> Vec<String> {
    let (c1, c2, c3, n_s, e_bit) = match r.observation {
        Observation::Scs(o) => (o.n_o, o.n_b, o.n_z, None, o.e_bit),
        Observation::Npp(o) => (o.n_00, o.n_0nu, o.n_nu0, Some(o.n_s), o.e_bit),
    };
    let b = r.budget.as_ref();
    let lin = |t: Option<crate::numerics::LogEps>| t.map(|t| t.to_linear_lossy());
    vec![
        r.protocol.to_string(),
        num(r.distance_km),
        r.n_pulses.to_string(),
        r.mode.label().to_string(),
        num(r.params.mu),
        opt(r.params.nu),
        num(r.params.p),
        opt(r.params.p0),
        opt(r.params.c0),
        num(c1),
        num(c2),
        num(c3),
        opt(n_s),
        num(e_bit),
        num(r.estimate),
        num(r.l_bits),
        num(r.rate),
        opt(lin(b.map(|b| b.t_bar))),
        opt(lin(b.map(|b| b.t_cor))),
        opt(lin(b.and_then(|b| b.t_prime))),
        opt(b.map(|b| b.t0.t())),
        opt(b.map(|b| b.ln_g)),
        r.clamps
            .iter()
            .map(|c| c.name())
            .collect::<Vec<_>>()
            .join(";"),
    ]
}

pub fn write_csv<W: Write>(out: W, rows: &[KeyRateResult]) -> Result<()> {
    let io = |e: csv::Error| Error::config("output", e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record(csv_record(r)).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::config("output", e.to_string()))?;
    Ok(())
}

/// Human-readable table: one line per row.
pub fn summary(rows: &[KeyRateResult]) -> String {
    let mut s = format!(
        "{:<5} {:>8} {:>10} {:<11} {:>12} {:>12} {:>14}\n",
        "proto", "L_km", "N", "mode", "mu", "p", "rate"
    );
    for r in rows {
        s += &format!(
            "{:<5} {:>8.1} {:>10.3e} {:<11} {:>12.5e} {:>12.5e} {:>14.6e}\n",
            r.protocol.to_string(),
            r.distance_km,
            r.n_pulses as f64,
            r.mode.label(),
            r.params.mu,
            r.params.p,
            r.rate
        );
    }
    let positive = rows.iter().filter(|r| !r.is_zero()).count();
    s += &format!("{positive} of {} rows have a positive key\n", rows.len());
    s
}
