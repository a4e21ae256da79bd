//! Independent oracles: a sample-level Monte Carlo run of AF relaying over
//! the real Gaussian channel, and a brute-force power-split search for the
//! Gaussian broadcast region.
//!
//! Randomness comes from `ChaCha8Rng` seeded with `seed_from_u64(seed)`; slot
//! `j` draws from stream `j` of that generator. Normal variates use
//! `rand_distr::StandardNormal`. Reports are therefore reproducible
//! bit-for-bit from `(seed, inputs)` on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::NetworkConfig;
use crate::schemes::AfParams;

pub const MIN_SAMPLES: usize = 10_000;

/// Measured and predicted quantities seen by one listening user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserStats {
    pub cluster: usize,
    pub user: usize,
    /// Effective noise variance referred to unit signal gain.
    pub empirical_noise: f64,
    pub predicted_noise: f64,
    /// Aggregate SINR of the other users' signals after self-cancellation.
    pub empirical_sinr: f64,
    pub predicted_sinr: f64,
    pub relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotPowers {
    pub cluster: usize,
    pub user_power: Vec<f64>,
    pub relay_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub samples: usize,
    pub users: Vec<UserStats>,
    pub slots: Vec<SlotPowers>,
    pub max_relative_deviation: f64,
    /// Time-averaged empirical powers respect the user and relay budgets
    /// up to six standard errors of the variance estimates.
    pub power_constraints_ok: bool,
}

/// Simulates every active AF slot with `n` samples and compares the measured
/// SINR behind each listener's self-cancellation with the AF closed form.
pub fn simulate_af(cfg: &NetworkConfig, p: &AfParams, n: usize, seed: u64) -> Result<McReport> {
    if n < MIN_SAMPLES {
        return Err(Error::config(format!(
            "need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    p.validate(cfg)?;
    let k = cfg.users();
    let nr = cfg.relay_noise();
    let slack = 6.0 * (2.0 / n as f64).sqrt();

    let mut users = Vec::new();
    let mut slots = Vec::new();
    let mut power_ok = true;
    let mut relay_used = 0.0;

    for j in (0..cfg.clusters()).filter(|&j| p.tau[j] > 0.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);

        let slot = &p.slot_user_power[j];
        let total: f64 = slot.iter().sum();
        let relay = p.slot_relay_power[j];
        let beta = (relay / (total + nr)).sqrt();
        let amp: Vec<f64> = slot.iter().map(|q| q.sqrt()).collect();
        let listener_sd: Vec<f64> = (0..k).map(|l| cfg.user_noise(j, l).sqrt()).collect();

        let mut x = vec![0.0; k];
        let mut user_energy = vec![0.0; k];
        let mut relay_energy = 0.0;
        let mut signal_energy = vec![0.0; k];
        let mut noise_energy = vec![0.0; k];
        for _ in 0..n {
            for (xi, a) in x.iter_mut().zip(&amp) {
                *xi = a * rng.sample::<f64, _>(StandardNormal);
            }
            let sum: f64 = x.iter().sum();
            let y_r = sum + nr.sqrt() * rng.sample::<f64, _>(StandardNormal);
            let x_r = beta * y_r;
            relay_energy += x_r * x_r;
            for l in 0..k {
                user_energy[l] += x[l] * x[l];
                let y_l = x_r + listener_sd[l] * rng.sample::<f64, _>(StandardNormal);
                let cleaned = y_l - beta * x[l];
                let signal = sum - x[l];
                signal_energy[l] += signal * signal;
                if beta > 0.0 {
                    let e = cleaned / beta - signal;
                    noise_energy[l] += e * e;
                }
            }
        }

        let nf = n as f64;
        let user_power: Vec<f64> = user_energy.iter().map(|e| e / nf).collect();
        let relay_power = relay_energy / nf;
        for (i, &emp) in user_power.iter().enumerate() {
            if p.tau[j] * emp > cfg.user_power(j, i) * (1.0 + slack) + 1e-12 {
                power_ok = false;
            }
        }
        relay_used += p.tau[j] * relay_power;

        for l in 0..k {
            let signal_power = total - slot[l];
            let (predicted_noise, predicted_sinr) = if relay > 0.0 {
                let noise = nr + (total + nr) / relay * cfg.user_noise(j, l);
                (noise, signal_power / noise)
            } else {
                (f64::INFINITY, 0.0)
            };
            let (empirical_noise, empirical_sinr) = if beta > 0.0 {
                let noise = noise_energy[l] / nf;
                (noise, signal_energy[l] / nf / noise)
            } else {
                (f64::INFINITY, 0.0)
            };
            let relative_deviation = if predicted_sinr > 0.0 {
                (empirical_sinr - predicted_sinr).abs() / predicted_sinr
            } else {
                empirical_sinr.abs()
            };
            users.push(UserStats {
                cluster: j,
                user: l,
                empirical_noise,
                predicted_noise,
                empirical_sinr,
                predicted_sinr,
                relative_deviation,
            });
        }
        slots.push(SlotPowers {
            cluster: j,
            user_power,
            relay_power,
        });
    }
    if relay_used > cfg.relay_power() * (1.0 + slack) + 1e-12 {
        power_ok = false;
    }

    let max_relative_deviation = users
        .iter()
        .map(|u| u.relative_deviation)
        .fold(0.0, f64::max);
    Ok(McReport {
        samples: n,
        users,
        slots,
        max_relative_deviation,
        power_constraints_ok: power_ok,
    })
}

pub const MAX_ORACLE_RECEIVERS: usize = 3;

/// Searches power splits `α` on the simplex grid of step `resolution` for one
/// under which every receiver meets its rate in the broadcast region.
/// Receivers are ranked by `(noise, index)`; each sees the layers of every
/// receiver ranked before it as interference.
pub fn bc_alpha_oracle(
    relay_power: f64,
    noises: &[f64],
    rates: &[f64],
    resolution: f64,
) -> Result<bool> {
    let m = noises.len();
    if m == 0 || m > MAX_ORACLE_RECEIVERS {
        return Err(Error::config(format!(
            "grid oracle handles 1..={MAX_ORACLE_RECEIVERS} receivers, got {m}"
        )));
    }
    if rates.len() != m {
        return Err(Error::DimensionMismatch {
            expected: format!("{m} rates"),
            got: rates.len().to_string(),
        });
    }
    if !(resolution > 0.0 && resolution <= 0.1) {
        return Err(Error::Domain {
            what: "grid resolution",
            value: resolution,
        });
    }
    if !relay_power.is_finite() || relay_power < 0.0 {
        return Err(Error::Domain {
            what: "relay power",
            value: relay_power,
        });
    }
    if let Some(&bad) = noises.iter().find(|n| !n.is_finite() || **n <= 0.0) {
        return Err(Error::Domain {
            what: "receiver noise",
            value: bad,
        });
    }
    if let Some(&bad) = rates.iter().find(|r| !r.is_finite() || **r < 0.0) {
        return Err(Error::Domain {
            what: "rate",
            value: bad,
        });
    }

    let steps = (1.0 / resolution).round() as usize;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| noises[a].total_cmp(&noises[b]));
    // R ≤ C(x) ⇔ x ≥ 2^{2R} − 1.
    let need: Vec<f64> = rates.iter().map(|r| (2.0 * r).exp2() - 1.0).collect();

    let feasible = |alpha: &[f64]| {
        let mut before = 0.0;
        order.iter().all(|&j| {
            let ok = alpha[j] * relay_power >= need[j] * (relay_power * before + noises[j]);
            before += alpha[j];
            ok
        })
    };

    let mut alpha = vec![0.0; m];
    let h = 1.0 / steps as f64;
    match m {
        1 => Ok(feasible(&[1.0])),
        2 => Ok((0..=steps).any(|a| {
            alpha[0] = a as f64 * h;
            alpha[1] = (steps - a) as f64 * h;
            feasible(&alpha)
        })),
        _ => Ok((0..=steps).any(|a| {
            (0..=steps - a).any(|b| {
                alpha[0] = a as f64 * h;
                alpha[1] = b as f64 * h;
                alpha[2] = (steps - a - b) as f64 * h;
                feasible(&alpha)
            })
        })),
    }
}
