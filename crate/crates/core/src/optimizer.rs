//! Maximization of the symmetric total exchange rate over each scheme's free
//! parameters, and bisection of the largest uniform rate a membership test
//! accepts.
//!
//! Parameters are kept symmetric across clusters and users (`τ_j = 1/L`, one
//! slot user power, one slot relay power, one quantization noise). Under that
//! symmetry every constraint family collapses to one inequality per subset
//! size, which is what the search bisects against.

use crate::error::{Error, Result};
use crate::model::{c, FeasibilityReport, NetworkConfig, RateTuple, SymmetricConfig};
use crate::schemes::{af_bound, cf_bound, df_broadcast_bound, AfParams, CfParams, DfParams};

const MAX_BISECTION_STEPS: usize = 400;
const RATE_CEILING: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub grid_points_per_axis: usize,
    /// Each round shrinks every bracket 4× around the incumbent.
    pub refinement_rounds: usize,
    /// Bisection tolerance on the total rate, bits.
    pub tolerance: f64,
    pub max_evaluations: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            grid_points_per_axis: 33,
            refinement_rounds: 8,
            tolerance: 1e-6,
            max_evaluations: 1_000_000,
        }
    }
}

impl SearchOptions {
    fn validate(&self) -> Result<()> {
        if self.grid_points_per_axis < 3 {
            return Err(Error::config("grid_points_per_axis must be at least 3"));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::config(format!(
                "tolerance {} not in (0, 1)",
                self.tolerance
            )));
        }
        if self.max_evaluations == 0 {
            return Err(Error::config("max_evaluations must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Af,
    Df,
    Cf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeParams {
    Af(AfParams),
    Df(DfParams),
    Cf(CfParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    /// Total exchange rate, bits per channel use.
    pub best_rate: f64,
    pub best_params: SchemeParams,
    /// Membership-test evaluations spent.
    pub evaluations: u64,
    /// Set when the search stopped early on `max_evaluations`.
    pub budget_exhausted: bool,
}

/// Largest total rate `r` whose uniform tuple `(r/(LK), …)` passes `check`,
/// to within `tol`. `check` must describe a downward-closed region.
pub fn max_uniform_rate<F>(mut check: F, cfg: &NetworkConfig, tol: f64) -> Result<f64>
where
    F: FnMut(&NetworkConfig, &RateTuple) -> Result<FeasibilityReport>,
{
    let (l, k) = (cfg.clusters(), cfg.users());
    let mut accepts =
        |r: f64| -> Result<bool> { Ok(check(cfg, &RateTuple::uniform(l, k, r)?)?.feasible) };
    let mut evals = 0;
    bisect(&mut accepts, tol, &mut evals)
}

fn bisect<F>(accepts: &mut F, tol: f64, evals: &mut u64) -> Result<f64>
where
    F: FnMut(f64) -> Result<bool>,
{
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Domain {
            what: "bisection tolerance",
            value: tol,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    loop {
        *evals += 1;
        if !accepts(hi)? {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > RATE_CEILING {
            return Err(Error::NonConvergence(format!(
                "region accepts total rate {lo}"
            )));
        }
    }
    for _ in 0..MAX_BISECTION_STEPS {
        if hi - lo <= tol {
            return Ok(lo);
        }
        let mid = 0.5 * (lo + hi);
        *evals += 1;
        if accepts(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence(format!(
        "bracket [{lo}, {hi}] after {MAX_BISECTION_STEPS} steps"
    )))
}

/// A symmetric parameter point: fractions of the available slot powers and,
/// for CF, `log10 N_Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    user_frac: f64,
    relay_frac: f64,
    log_nq: f64,
}

#[derive(Debug, Clone, Copy)]
enum Axis {
    UserFrac,
    RelayFrac,
    LogNq,
}

impl Axis {
    /// `log10 N_Q` spans three decades beyond the relay's transmit-power scale
    /// below and its received-power scale above.
    fn bounds(self, sym: &SymmetricConfig) -> (f64, f64) {
        match self {
            Axis::UserFrac | Axis::RelayFrac => (0.0, 1.0),
            Axis::LogNq => {
                let inv_pr = if sym.relay_power > 0.0 {
                    1.0 / sym.relay_power
                } else {
                    1.0
                };
                let received = 1.0 + sym.l() * sym.k() * sym.power;
                (
                    -3.0 + inv_pr.min(1.0).log10(),
                    3.0 + (received * inv_pr.max(1.0)).log10(),
                )
            }
        }
    }

    fn get(self, p: &Point) -> f64 {
        match self {
            Axis::UserFrac => p.user_frac,
            Axis::RelayFrac => p.relay_frac,
            Axis::LogNq => p.log_nq,
        }
    }

    fn set(self, p: &mut Point, v: f64) {
        match self {
            Axis::UserFrac => p.user_frac = v,
            Axis::RelayFrac => p.relay_frac = v,
            Axis::LogNq => p.log_nq = v,
        }
    }
}

fn axes(scheme: Scheme) -> &'static [Axis] {
    match scheme {
        Scheme::Af => &[Axis::UserFrac, Axis::RelayFrac],
        Scheme::Df => &[Axis::RelayFrac],
        Scheme::Cf => &[Axis::UserFrac, Axis::RelayFrac, Axis::LogNq],
    }
}

/// Whether the uniform per-user rate `rho` passes the scheme's constraints
/// at a symmetric parameter point, one inequality per subset size.
fn accepts_symmetric(scheme: Scheme, sym: &SymmetricConfig, pt: &Point, rho: f64) -> bool {
    let (l, k) = (sym.l(), sym.k());
    let tau = 1.0 / l;
    let slot_power = pt.user_frac * sym.power * l;
    let slot_relay = pt.relay_frac * sym.relay_power;
    let fits = |s: f64, bound: f64| s * rho <= bound;
    match scheme {
        Scheme::Af => (1..sym.users).all(|s| {
            let s = s as f64;
            fits(
                s,
                af_bound(tau, s * slot_power, k * slot_power, 1.0, slot_relay, 1.0),
            )
        }),
        Scheme::Df => {
            let mac = (1..=sym.clusters * sym.users).all(|n| {
                let n = n as f64;
                fits(n, c(n * sym.power))
            });
            mac && fits(k - 1.0, df_broadcast_bound(tau, slot_relay, 1.0))
        }
        Scheme::Cf => {
            let nq = 10f64.powf(pt.log_nq);
            (1..sym.users).all(|s| {
                let s = s as f64;
                fits(s, cf_bound(tau, s * slot_power, 1.0, nq, slot_relay, 1.0))
            })
        }
    }
}

fn to_params(scheme: Scheme, sym: &SymmetricConfig, pt: &Point) -> SchemeParams {
    let (l, k) = (sym.clusters, sym.users);
    let tau = vec![1.0 / l as f64; l];
    let slot_user_power = vec![vec![pt.user_frac * sym.power * l as f64; k]; l];
    let slot_relay_power = vec![pt.relay_frac * sym.relay_power; l];
    match scheme {
        Scheme::Af => SchemeParams::Af(AfParams {
            tau,
            slot_user_power,
            slot_relay_power,
        }),
        Scheme::Df => SchemeParams::Df(DfParams {
            tau,
            slot_relay_power,
        }),
        Scheme::Cf => SchemeParams::Cf(CfParams {
            tau,
            slot_user_power,
            slot_relay_power,
            quant_noise: vec![10f64.powf(pt.log_nq); l],
        }),
    }
}

struct Search<'a> {
    scheme: Scheme,
    sym: &'a SymmetricConfig,
    opts: &'a SearchOptions,
    evaluations: u64,
}

impl Search<'_> {
    fn exhausted(&self) -> bool {
        self.evaluations >= self.opts.max_evaluations
    }

    fn rate(&mut self, pt: &Point) -> Result<f64> {
        let users = (self.sym.clusters * self.sym.users) as f64;
        let (scheme, sym) = (self.scheme, self.sym);
        let mut accepts = |r: f64| Ok(accepts_symmetric(scheme, sym, pt, r / users));
        bisect(&mut accepts, self.opts.tolerance, &mut self.evaluations)
    }
}

/// Coordinate-wise grid search with bracket refinement over the scheme's
/// symmetric parameters; each candidate is scored by bisecting the largest
/// uniform total rate it supports.
pub fn max_exchange(
    scheme: Scheme,
    sym: &SymmetricConfig,
    opts: &SearchOptions,
) -> Result<OptResult> {
    opts.validate()?;
    let mut search = Search {
        scheme,
        sym,
        opts,
        evaluations: 0,
    };
    let axes = axes(scheme);

    let mut best = Point {
        user_frac: 1.0,
        relay_frac: 1.0,
        log_nq: 0.0,
    };
    for &axis in axes {
        let (lo, hi) = axis.bounds(sym);
        axis.set(&mut best, 0.5 * (lo + hi));
    }
    let mut best_rate = search.rate(&best)?;
    let mut brackets: Vec<(f64, f64)> = axes.iter().map(|a| a.bounds(sym)).collect();

    'rounds: for _ in 0..=opts.refinement_rounds {
        for (&axis, &(lo, hi)) in axes.iter().zip(&brackets) {
            let n = opts.grid_points_per_axis;
            for step in 0..n {
                if search.exhausted() {
                    break 'rounds;
                }
                let v = lo + (hi - lo) * step as f64 / (n - 1) as f64;
                let mut cand = best;
                axis.set(&mut cand, v);
                let rate = search.rate(&cand)?;
                // Ties go to the larger parameter value.
                if rate > best_rate || (rate == best_rate && v > axis.get(&best)) {
                    best = cand;
                    best_rate = rate;
                }
            }
        }
        for (&axis, bracket) in axes.iter().zip(brackets.iter_mut()) {
            let (lo, hi) = axis.bounds(sym);
            let half = 0.125 * (bracket.1 - bracket.0);
            let centre = axis.get(&best).clamp(lo + half, hi - half);
            *bracket = (centre - half, centre + half);
        }
    }

    Ok(OptResult {
        best_rate,
        best_params: to_params(scheme, sym, &best),
        evaluations: search.evaluations,
        budget_exhausted: search.exhausted(),
    })
}
