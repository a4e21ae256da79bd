//! Achievable regions for amplify-and-forward, decode-and-forward,
//! compress-and-forward and nested-lattice relaying, their symmetric
//! exchange-rate closed forms, and the constant-gap bounds between them.
//!
//! AF and CF time-share the channel between clusters (`tau[j]` of the block
//! to cluster `j`); DF time-shares only the broadcast phase.

use crate::error::{Error, Result};
use crate::model::{
    c, members, CheckOptions, Constraint, FeasibilityReport, NetworkConfig, RateTuple,
    SlackTracker, SymmetricConfig,
};

const PARAM_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AfParams {
    pub tau: Vec<f64>,
    /// `P′_ji`, transmit power of user `i` during its cluster's slot.
    pub slot_user_power: Vec<Vec<f64>>,
    /// `P_r^j`, relay power during slot `j`.
    pub slot_relay_power: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfParams {
    pub tau: Vec<f64>,
    pub slot_relay_power: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfParams {
    pub tau: Vec<f64>,
    pub slot_user_power: Vec<Vec<f64>>,
    pub slot_relay_power: Vec<f64>,
    /// `N_Q^j`, variance of the Gaussian quantization noise for cluster `j`.
    pub quant_noise: Vec<f64>,
}

impl AfParams {
    /// Equal slots at full slot power: `τ_j = 1/L`, `P′ = P_ji/τ_j`, `P_r^j = P_r`.
    pub fn full_power(cfg: &NetworkConfig) -> Self {
        let (tau, slot_user_power) = equal_slots(cfg);
        Self {
            tau,
            slot_user_power,
            slot_relay_power: vec![cfg.relay_power(); cfg.clusters()],
        }
    }

    pub fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        validate_tau(&self.tau, cfg.clusters())?;
        validate_slot_user_power(&self.tau, &self.slot_user_power, cfg)?;
        validate_slot_relay_power(&self.tau, &self.slot_relay_power, cfg)
    }
}

impl DfParams {
    pub fn full_power(cfg: &NetworkConfig) -> Self {
        let l = cfg.clusters();
        Self {
            tau: vec![1.0 / l as f64; l],
            slot_relay_power: vec![cfg.relay_power(); l],
        }
    }

    pub fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        validate_tau(&self.tau, cfg.clusters())?;
        validate_slot_relay_power(&self.tau, &self.slot_relay_power, cfg)
    }
}

impl CfParams {
    pub fn full_power(cfg: &NetworkConfig, quant_noise: Vec<f64>) -> Self {
        let (tau, slot_user_power) = equal_slots(cfg);
        Self {
            tau,
            slot_user_power,
            slot_relay_power: vec![cfg.relay_power(); cfg.clusters()],
            quant_noise,
        }
    }

    /// Full-power parameters with the quantization noise that maximizes the
    /// symmetric exchange rate.
    pub fn symmetric_optimal(sym: &SymmetricConfig) -> Result<Self> {
        let nq = cf_opt_quant_noise(sym)?;
        Ok(Self::full_power(&sym.to_network(), vec![nq; sym.clusters]))
    }

    pub fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        validate_tau(&self.tau, cfg.clusters())?;
        validate_slot_user_power(&self.tau, &self.slot_user_power, cfg)?;
        validate_slot_relay_power(&self.tau, &self.slot_relay_power, cfg)?;
        if self.quant_noise.len() != cfg.clusters() {
            return Err(Error::params(format!(
                "expected {} quantization noises, got {}",
                cfg.clusters(),
                self.quant_noise.len()
            )));
        }
        if let Some(&bad) = self
            .quant_noise
            .iter()
            .find(|n| !n.is_finite() || **n <= 0.0)
        {
            return Err(Error::params(format!(
                "quantization noise must be positive, got {bad}"
            )));
        }
        Ok(())
    }
}

fn equal_slots(cfg: &NetworkConfig) -> (Vec<f64>, Vec<Vec<f64>>) {
    let l = cfg.clusters() as f64;
    let tau = vec![1.0 / l; cfg.clusters()];
    let slot = cfg
        .user_powers()
        .iter()
        .map(|row| row.iter().map(|p| p * l).collect())
        .collect();
    (tau, slot)
}

fn validate_tau(tau: &[f64], clusters: usize) -> Result<()> {
    if tau.len() != clusters {
        return Err(Error::params(format!(
            "expected {clusters} time shares, got {}",
            tau.len()
        )));
    }
    if let Some(&bad) = tau.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(Error::params(format!("time share {bad} is negative")));
    }
    let sum: f64 = tau.iter().sum();
    if (sum - 1.0).abs() > PARAM_REL_TOL {
        return Err(Error::params(format!("time shares sum to {sum}, not 1")));
    }
    Ok(())
}

fn validate_slot_user_power(tau: &[f64], slot: &[Vec<f64>], cfg: &NetworkConfig) -> Result<()> {
    if slot.len() != cfg.clusters() || slot.iter().any(|r| r.len() != cfg.users()) {
        return Err(Error::params(format!(
            "slot user powers must be {}x{}",
            cfg.clusters(),
            cfg.users()
        )));
    }
    for (j, row) in slot.iter().enumerate() {
        for (i, &p) in row.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::params(format!(
                    "slot power {p} for user ({},{})",
                    j + 1,
                    i + 1
                )));
            }
            let cap = if tau[j] > 0.0 {
                cfg.user_power(j, i) / tau[j]
            } else {
                0.0
            };
            if p > cap * (1.0 + PARAM_REL_TOL) {
                return Err(Error::params(format!(
                    "slot power {p} for user ({},{}) exceeds P/tau = {cap}",
                    j + 1,
                    i + 1
                )));
            }
        }
    }
    Ok(())
}

fn validate_slot_relay_power(tau: &[f64], slot: &[f64], cfg: &NetworkConfig) -> Result<()> {
    if slot.len() != cfg.clusters() {
        return Err(Error::params(format!(
            "expected {} slot relay powers, got {}",
            cfg.clusters(),
            slot.len()
        )));
    }
    if let Some(&bad) = slot.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::params(format!("slot relay power {bad}")));
    }
    let used: f64 = tau.iter().zip(slot).map(|(t, p)| t * p).sum();
    if used > cfg.relay_power() * (1.0 + PARAM_REL_TOL) + PARAM_REL_TOL {
        return Err(Error::params(format!(
            "average relay power {used} exceeds the budget {}",
            cfg.relay_power()
        )));
    }
    Ok(())
}

/// RHS of one AF constraint. A silent slot or silent relay supports nothing.
pub(crate) fn af_bound(
    tau: f64,
    subset_power: f64,
    slot_total_power: f64,
    relay_noise: f64,
    slot_relay_power: f64,
    listener_noise: f64,
) -> f64 {
    if tau <= 0.0 || slot_relay_power <= 0.0 {
        return 0.0;
    }
    let noise = relay_noise + (slot_total_power + relay_noise) / slot_relay_power * listener_noise;
    tau * c(subset_power / noise)
}

pub(crate) fn df_broadcast_bound(tau: f64, slot_relay_power: f64, listener_noise: f64) -> f64 {
    tau * c(slot_relay_power / listener_noise)
}

/// RHS of one CF constraint; the forwarding term is clamped at zero.
pub(crate) fn cf_bound(
    tau: f64,
    subset_power: f64,
    relay_noise: f64,
    quant_noise: f64,
    slot_relay_power: f64,
    worst_listener_noise: f64,
) -> f64 {
    if tau <= 0.0 || slot_relay_power <= 0.0 {
        return 0.0;
    }
    let access = c(subset_power / (relay_noise + quant_noise));
    let forward =
        (c(slot_relay_power / worst_listener_noise) - c(relay_noise / quant_noise)).max(0.0);
    tau * access.min(forward)
}

pub fn af_check(cfg: &NetworkConfig, rates: &RateTuple, p: &AfParams) -> Result<FeasibilityReport> {
    af_check_with(cfg, rates, p, &CheckOptions::default())
}

/// For every cluster `j`, listener `l` and nonempty `S ⊆ {1..K}∖{l}`, the
/// rates in `S` must fit the MAC that `l` sees after cancelling its own signal.
pub fn af_check_with(
    cfg: &NetworkConfig,
    rates: &RateTuple,
    p: &AfParams,
    opts: &CheckOptions,
) -> Result<FeasibilityReport> {
    cfg.check_rates(rates)?;
    p.validate(cfg)?;
    let (l, k) = (cfg.clusters(), cfg.users());
    opts.guard((l * k) as u128 * (1u128 << (k - 1)))?;

    let mut tracker = SlackTracker::default();
    for j in 0..l {
        let slot_total: f64 = p.slot_user_power[j].iter().sum();
        for listener in 0..k {
            for mask in 1u64..(1 << k) {
                if mask >> listener & 1 == 1 {
                    continue;
                }
                let set = members(mask, k);
                let rate: f64 = set.iter().map(|&i| rates.get(j, i)).sum();
                let power: f64 = set.iter().map(|&i| p.slot_user_power[j][i]).sum();
                let bound = af_bound(
                    p.tau[j],
                    power,
                    slot_total,
                    cfg.relay_noise(),
                    p.slot_relay_power[j],
                    cfg.user_noise(j, listener),
                );
                tracker.observe(bound - rate, || Constraint::Af {
                    cluster: j,
                    listener,
                    subset: set,
                });
            }
        }
    }
    Ok(tracker.finish(opts.tol))
}

/// Total AF exchange rate with equal slots and full power:
/// `K/(K−1) · C(L(K−1)P·Pr / (1 + LKP + Pr))`.
pub fn af_exchange(sym: &SymmetricConfig) -> f64 {
    let (l, k, p, pr) = (sym.l(), sym.k(), sym.power, sym.relay_power);
    k / (k - 1.0) * c(l * (k - 1.0) * p * pr / (1.0 + l * k * p + pr))
}

pub fn df_check(cfg: &NetworkConfig, rates: &RateTuple, p: &DfParams) -> Result<FeasibilityReport> {
    df_check_with(cfg, rates, p, &CheckOptions::default())
}

/// DF region: the relay decodes every message (all nonempty subsets of the
/// `LK` users form its MAC constraints), then broadcasts each cluster's
/// messages in its slot to receivers that know their own message.
pub fn df_check_with(
    cfg: &NetworkConfig,
    rates: &RateTuple,
    p: &DfParams,
    opts: &CheckOptions,
) -> Result<FeasibilityReport> {
    cfg.check_rates(rates)?;
    p.validate(cfg)?;
    let (l, k) = (cfg.clusters(), cfg.users());
    let n = l * k;
    opts.guard(1u128.checked_shl(n as u32).unwrap_or(u128::MAX))?;

    let mut tracker = SlackTracker::default();
    for mask in 1u64..(1u64 << n) {
        let mut rate = 0.0;
        let mut power = 0.0;
        for idx in members(mask, n) {
            rate += rates.get(idx / k, idx % k);
            power += cfg.user_power(idx / k, idx % k);
        }
        tracker.observe(c(power / cfg.relay_noise()) - rate, || Constraint::DfMac {
            users: members(mask, n)
                .into_iter()
                .map(|idx| (idx / k, idx % k))
                .collect(),
        });
    }
    df_broadcast(cfg, rates, p, &mut tracker);
    Ok(tracker.finish(opts.tol))
}

/// DF with only the rectangular relay-decoding family `S₁ × S₂`
/// (cluster subset times user-index subset) as literally printed. This is
/// looser than [`df_check`] when `L ≥ 2` and can accept tuples outside the
/// cut-set bound; it is exposed for comparison.
pub fn df_check_rectangular(
    cfg: &NetworkConfig,
    rates: &RateTuple,
    p: &DfParams,
    opts: &CheckOptions,
) -> Result<FeasibilityReport> {
    cfg.check_rates(rates)?;
    p.validate(cfg)?;
    let (l, k) = (cfg.clusters(), cfg.users());
    opts.guard(1u128 << (l + k))?;

    let mut tracker = SlackTracker::default();
    for cmask in 1u64..(1 << l) {
        let cs = members(cmask, l);
        for umask in 1u64..(1 << k) {
            let us = members(umask, k);
            let mut rate = 0.0;
            let mut power = 0.0;
            for &j in &cs {
                for &i in &us {
                    rate += rates.get(j, i);
                    power += cfg.user_power(j, i);
                }
            }
            tracker.observe(c(power / cfg.relay_noise()) - rate, || Constraint::DfMac {
                users: cs
                    .iter()
                    .flat_map(|&j| us.iter().map(move |&i| (j, i)))
                    .collect(),
            });
        }
    }
    df_broadcast(cfg, rates, p, &mut tracker);
    Ok(tracker.finish(opts.tol))
}

fn df_broadcast(cfg: &NetworkConfig, rates: &RateTuple, p: &DfParams, tracker: &mut SlackTracker) {
    for j in 0..cfg.clusters() {
        let total: f64 = rates.cluster(j).iter().sum();
        for listener in 0..cfg.users() {
            let need = total - rates.get(j, listener);
            let bound =
                df_broadcast_bound(p.tau[j], p.slot_relay_power[j], cfg.user_noise(j, listener));
            tracker.observe(bound - need, || Constraint::DfBroadcast {
                cluster: j,
                listener,
            });
        }
    }
}

/// `min{C(LKP), K/(K−1)·C(Pr)}`.
pub fn df_exchange(sym: &SymmetricConfig) -> f64 {
    let (l, k) = (sym.l(), sym.k());
    c(l * k * sym.power).min(k / (k - 1.0) * c(sym.relay_power))
}

/// Relay power below which DF meets the exchange-capacity upper bound:
/// `(1 + LKP)^{1−1/K} − 1`.
pub fn df_threshold(sym: &SymmetricConfig) -> f64 {
    let (l, k) = (sym.l(), sym.k());
    (1.0 + l * k * sym.power).powf(1.0 - 1.0 / k) - 1.0
}

pub fn cf_check(cfg: &NetworkConfig, rates: &RateTuple, p: &CfParams) -> Result<FeasibilityReport> {
    cf_check_with(cfg, rates, p, &CheckOptions::default())
}

/// For every cluster and nonempty proper subset `S`, the rates in `S` are
/// limited by the quantized MAC and by what the relay can forward to the
/// noisiest user outside `S`.
pub fn cf_check_with(
    cfg: &NetworkConfig,
    rates: &RateTuple,
    p: &CfParams,
    opts: &CheckOptions,
) -> Result<FeasibilityReport> {
    cfg.check_rates(rates)?;
    p.validate(cfg)?;
    let (l, k) = (cfg.clusters(), cfg.users());
    opts.guard(l as u128 * (1u128 << k))?;

    let full = (1u64 << k) - 1;
    let mut tracker = SlackTracker::default();
    for j in 0..l {
        for mask in 1..full {
            let set = members(mask, k);
            let rate: f64 = set.iter().map(|&i| rates.get(j, i)).sum();
            let power: f64 = set.iter().map(|&i| p.slot_user_power[j][i]).sum();
            let worst = members(full & !mask, k)
                .into_iter()
                .map(|t| cfg.user_noise(j, t))
                .fold(f64::MIN, f64::max);
            let bound = cf_bound(
                p.tau[j],
                power,
                cfg.relay_noise(),
                p.quant_noise[j],
                p.slot_relay_power[j],
                worst,
            );
            tracker.observe(bound - rate, || Constraint::Cf {
                cluster: j,
                subset: set,
            });
        }
    }
    Ok(tracker.finish(opts.tol))
}

/// `K/(K−1) · C(L(K−1)P·Pr / (1 + L(K−1)P + Pr))`.
pub fn cf_exchange(sym: &SymmetricConfig) -> f64 {
    let (l, k, p, pr) = (sym.l(), sym.k(), sym.power, sym.relay_power);
    let a = l * (k - 1.0) * p;
    k / (k - 1.0) * c(a * pr / (1.0 + a + pr))
}

/// Quantization noise that equalizes the two CF terms at full power with
/// equal slots: `(1 + L(K−1)P) / Pr`.
pub fn cf_opt_quant_noise(sym: &SymmetricConfig) -> Result<f64> {
    if sym.relay_power <= 0.0 {
        return Err(Error::Domain {
            what: "relay power for CF quantization",
            value: sym.relay_power,
        });
    }
    Ok((1.0 + sym.l() * (sym.k() - 1.0) * sym.power) / sym.relay_power)
}

/// Per-pair nested-lattice rate `τ · C⁺(P/(τ N_r) − ½)`.
pub fn lattice_pair_rate(power: f64, tau: f64, relay_noise: f64) -> Result<f64> {
    if !power.is_finite() || power < 0.0 {
        return Err(Error::Domain {
            what: "lattice user power",
            value: power,
        });
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Domain {
            what: "lattice time share",
            value: tau,
        });
    }
    if !relay_noise.is_finite() || relay_noise <= 0.0 {
        return Err(Error::Domain {
            what: "relay noise",
            value: relay_noise,
        });
    }
    let x = power / (tau * relay_noise) - 0.5;
    Ok(if x >= 1.0 { tau * c(x) } else { 0.0 })
}

/// Per-user lattice exchange rate for pairwise exchange (`K = 2`),
/// `min{max{0, C(LP − ½)}/L, C(Pr)/L}`.
pub fn lattice_exchange_per_user(sym: &SymmetricConfig) -> Result<f64> {
    Ok(lattice_exchange(sym)? / (2.0 * sym.l()))
}

/// Total lattice exchange rate `2 · min{max{0, C(LP − ½)}, C(Pr)}`.
pub fn lattice_exchange(sym: &SymmetricConfig) -> Result<f64> {
    if sym.users != 2 {
        return Err(Error::config(format!(
            "lattice exchange needs K = 2, got {}",
            sym.users
        )));
    }
    Ok(2.0
        * c(sym.l() * sym.power - 0.5)
            .max(0.0)
            .min(c(sym.relay_power)))
}

/// Worst-case gaps, in bits, between the bounds and the schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapBounds {
    /// Upper bound minus CF.
    pub cf_gap: f64,
    /// CF minus AF.
    pub cf_af_gap: f64,
    /// Upper bound minus AF.
    pub af_gap: f64,
    /// Upper bound minus lattice, `K = 2` and `LP ≥ ½`.
    pub lattice_gap: f64,
}

pub fn gap_bounds(users: usize) -> Result<GapBounds> {
    if users < 2 {
        return Err(Error::config(format!(
            "gap bounds need K >= 2, got {users}"
        )));
    }
    let k = users as f64;
    let cf_gap = k / (2.0 * (k - 1.0));
    let cf_af_gap = cf_gap * (k / (k - 1.0)).log2();
    Ok(GapBounds {
        cf_gap,
        cf_af_gap,
        af_gap: cf_gap + cf_af_gap,
        lattice_gap: 3f64.log2() / 2.0,
    })
}
