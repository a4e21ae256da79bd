//! Domain types shared by every module: network instances, rate tuples,
//! membership reports, and the Gaussian capacity function.
//!
//! All rates are in bits per channel use (base-2 logarithms). Powers and
//! noise variances are linear, dimensionless variances.

use std::fmt;

use crate::error::{Error, Result};

/// Default absolute tolerance, in bits, for region-membership decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Default cap on the number of subset combinations a single check may enumerate.
pub const DEFAULT_MAX_COMBINATIONS: u64 = 1 << 24;

/// `C(x) = ½ log₂(1 + x)`.
pub fn cap_c(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain {
            what: "C(x) argument",
            value: x,
        });
    }
    Ok(c(x))
}

/// `C⁺(x)`: `C(x)` when `x ≥ 1`, zero otherwise.
pub fn cap_c_plus(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain {
            what: "C+(x) argument",
            value: x,
        });
    }
    Ok(if x >= 1.0 { c(x) } else { 0.0 })
}

pub fn db_to_linear(d: f64) -> Result<f64> {
    if !d.is_finite() {
        return Err(Error::Domain {
            what: "dB value",
            value: d,
        });
    }
    Ok(10f64.powf(d / 10.0))
}

// Unchecked; callers guarantee x > -1.
#[inline]
pub(crate) fn c(x: f64) -> f64 {
    0.5 * x.ln_1p() / std::f64::consts::LN_2
}

/// Full asymmetric Gaussian instance with `L` clusters of `K` users.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    clusters: usize,
    users: usize,
    user_power: Vec<Vec<f64>>,
    relay_power: f64,
    relay_noise: f64,
    user_noise: Vec<Vec<f64>>,
}

impl NetworkConfig {
    pub fn new(
        user_power: Vec<Vec<f64>>,
        relay_power: f64,
        relay_noise: f64,
        user_noise: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let clusters = user_power.len();
        if clusters == 0 {
            return Err(Error::config("at least one cluster is required"));
        }
        let users = user_power[0].len();
        if users < 2 {
            return Err(Error::config(format!(
                "clusters need K >= 2 users, got {users}"
            )));
        }
        if user_noise.len() != clusters {
            return Err(Error::DimensionMismatch {
                expected: format!("{clusters} noise rows"),
                got: format!("{}", user_noise.len()),
            });
        }
        for (j, (p, n)) in user_power.iter().zip(&user_noise).enumerate() {
            if p.len() != users || n.len() != users {
                return Err(Error::DimensionMismatch {
                    expected: format!("{users} users in cluster {}", j + 1),
                    got: format!("{} powers, {} noises", p.len(), n.len()),
                });
            }
            if let Some(&bad) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::config(format!(
                    "user power {bad} in cluster {}",
                    j + 1
                )));
            }
            if let Some(&bad) = n.iter().find(|v| !v.is_finite() || **v <= 0.0) {
                return Err(Error::config(format!(
                    "user noise {bad} in cluster {}",
                    j + 1
                )));
            }
        }
        if !relay_power.is_finite() || relay_power < 0.0 {
            return Err(Error::config(format!("relay power {relay_power}")));
        }
        if !relay_noise.is_finite() || relay_noise <= 0.0 {
            return Err(Error::config(format!("relay noise {relay_noise}")));
        }
        Ok(Self {
            clusters,
            users,
            user_power,
            relay_power,
            relay_noise,
            user_noise,
        })
    }

    /// Every user at power `p` with unit noise everywhere.
    pub fn uniform(clusters: usize, users: usize, p: f64, relay_power: f64) -> Result<Self> {
        Self::new(
            vec![vec![p; users]; clusters],
            relay_power,
            1.0,
            vec![vec![1.0; users]; clusters],
        )
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn user_power(&self, j: usize, i: usize) -> f64 {
        self.user_power[j][i]
    }

    pub fn user_noise(&self, j: usize, i: usize) -> f64 {
        self.user_noise[j][i]
    }

    pub fn user_powers(&self) -> &[Vec<f64>] {
        &self.user_power
    }

    pub fn user_noises(&self) -> &[Vec<f64>] {
        &self.user_noise
    }

    pub fn relay_power(&self) -> f64 {
        self.relay_power
    }

    pub fn relay_noise(&self) -> f64 {
        self.relay_noise
    }

    pub(crate) fn check_rates(&self, rates: &RateTuple) -> Result<()> {
        if rates.clusters() != self.clusters || rates.users() != self.users {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} rates", self.clusters, self.users),
                got: format!("{}x{}", rates.clusters(), rates.users()),
            });
        }
        Ok(())
    }
}

/// Symmetric network: every user at power `P`, all noise variances 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricConfig {
    pub clusters: usize,
    pub users: usize,
    pub power: f64,
    pub relay_power: f64,
}

impl SymmetricConfig {
    pub fn new(clusters: usize, users: usize, power: f64, relay_power: f64) -> Result<Self> {
        if clusters < 1 {
            return Err(Error::config("L must be at least 1"));
        }
        if users < 2 {
            return Err(Error::config(format!("K must be at least 2, got {users}")));
        }
        if !power.is_finite() || power < 0.0 {
            return Err(Error::config(format!("user power {power}")));
        }
        if !relay_power.is_finite() || relay_power < 0.0 {
            return Err(Error::config(format!("relay power {relay_power}")));
        }
        Ok(Self {
            clusters,
            users,
            power,
            relay_power,
        })
    }

    pub fn to_network(&self) -> NetworkConfig {
        NetworkConfig::uniform(self.clusters, self.users, self.power, self.relay_power)
            .expect("a validated symmetric config always expands")
    }

    pub(crate) fn l(&self) -> f64 {
        self.clusters as f64
    }

    pub(crate) fn k(&self) -> f64 {
        self.users as f64
    }
}

/// Per-user rates `R_ji`, indexed `[cluster][user]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTuple {
    rates: Vec<Vec<f64>>,
}

impl RateTuple {
    pub fn new(rates: Vec<Vec<f64>>) -> Result<Self> {
        let users = rates.first().map_or(0, Vec::len);
        if rates.is_empty() || users == 0 || rates.iter().any(|r| r.len() != users) {
            return Err(Error::DimensionMismatch {
                expected: "a non-empty rectangular rate array".into(),
                got: format!("{} rows", rates.len()),
            });
        }
        if let Some(&bad) = rates.iter().flatten().find(|r| !r.is_finite() || **r < 0.0) {
            return Err(Error::Domain {
                what: "rate",
                value: bad,
            });
        }
        Ok(Self { rates })
    }

    /// Every user at `total / (L K)`.
    pub fn uniform(clusters: usize, users: usize, total: f64) -> Result<Self> {
        let per_user = total / (clusters * users) as f64;
        Self::new(vec![vec![per_user; users]; clusters])
    }

    pub fn zeros(clusters: usize, users: usize) -> Self {
        Self {
            rates: vec![vec![0.0; users]; clusters],
        }
    }

    pub fn clusters(&self) -> usize {
        self.rates.len()
    }

    pub fn users(&self) -> usize {
        self.rates[0].len()
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.rates[j][i]
    }

    pub fn cluster(&self, j: usize) -> &[f64] {
        &self.rates[j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rates
    }

    pub fn total(&self) -> f64 {
        self.rates.iter().flatten().sum()
    }
}

/// Identifies one inequality of a region description. Indices are zero-based
/// internally and printed one-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// Cut-set bound; one chosen user subset per cluster.
    CutSet {
        subsets: Vec<Vec<usize>>,
    },
    /// Genie-aided broadcast bound; one chosen receiver per cluster.
    Genie {
        selection: Vec<usize>,
    },
    /// AF multiple-access constraint heard by `listener`.
    Af {
        cluster: usize,
        listener: usize,
        subset: Vec<usize>,
    },
    /// DF decoding at the relay; `(cluster, user)` pairs.
    DfMac {
        users: Vec<(usize, usize)>,
    },
    /// DF broadcast to `listener`.
    DfBroadcast {
        cluster: usize,
        listener: usize,
    },
    Cf {
        cluster: usize,
        subset: Vec<usize>,
    },
    /// Discrete-memoryless CF constraint for a user subset.
    DmCf {
        subset: Vec<usize>,
    },
}

fn one_based(set: &[usize]) -> String {
    let items: Vec<String> = set.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", items.join(","))
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::CutSet { subsets } => {
                write!(f, "cut-set S=")?;
                let parts: Vec<String> = subsets.iter().map(|s| one_based(s)).collect();
                write!(f, "({})", parts.join(","))
            }
            Constraint::Genie { selection } => {
                write!(
                    f,
                    "genie l={}",
                    one_based(selection).trim_matches(|c| c == '{' || c == '}')
                )
            }
            Constraint::Af {
                cluster,
                listener,
                subset,
            } => write!(
                f,
                "af cluster {} listener {} S={}",
                cluster + 1,
                listener + 1,
                one_based(subset)
            ),
            Constraint::DfMac { users } => {
                let items: Vec<String> = users
                    .iter()
                    .map(|(j, i)| format!("({},{})", j + 1, i + 1))
                    .collect();
                write!(f, "df mac {{{}}}", items.join(","))
            }
            Constraint::DfBroadcast { cluster, listener } => {
                write!(
                    f,
                    "df broadcast cluster {} listener {}",
                    cluster + 1,
                    listener + 1
                )
            }
            Constraint::Cf { cluster, subset } => {
                write!(f, "cf cluster {} S={}", cluster + 1, one_based(subset))
            }
            Constraint::DmCf { subset } => write!(f, "dm-cf S={}", one_based(subset)),
        }
    }
}

/// Verdict of a region-membership test.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Minimum over constraints of RHS − LHS, in bits.
    pub slack: f64,
    /// Constraint attaining `slack`; `None` only if no constraint was evaluated.
    pub binding: Option<Constraint>,
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.feasible {
            "feasible"
        } else {
            "infeasible"
        };
        match &self.binding {
            Some(b) => write!(f, "{verdict}; min slack {:.9} bits at {b}", self.slack),
            None => write!(f, "{verdict}; no constraints"),
        }
    }
}

/// Knobs shared by every membership test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub tol: f64,
    pub max_combinations: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_combinations: DEFAULT_MAX_COMBINATIONS,
        }
    }
}

impl CheckOptions {
    pub(crate) fn guard(&self, combinations: u128) -> Result<()> {
        if combinations > self.max_combinations as u128 {
            return Err(Error::TooLarge {
                combinations,
                limit: self.max_combinations,
            });
        }
        Ok(())
    }
}

/// Running minimum of constraint slacks. Ties keep the first constraint seen.
#[derive(Debug, Default)]
pub(crate) struct SlackTracker {
    slack: Option<f64>,
    binding: Option<Constraint>,
}

impl SlackTracker {
    pub(crate) fn observe(&mut self, slack: f64, constraint: impl FnOnce() -> Constraint) {
        if self.slack.is_none_or(|s| slack < s) {
            self.slack = Some(slack);
            self.binding = Some(constraint());
        }
    }

    pub(crate) fn merge(&mut self, other: FeasibilityReport) {
        if let Some(b) = other.binding {
            self.observe(other.slack, || b);
        }
    }

    pub(crate) fn finish(self, tol: f64) -> FeasibilityReport {
        let slack = self.slack.unwrap_or(f64::INFINITY);
        FeasibilityReport {
            feasible: slack >= -tol,
            slack,
            binding: self.binding,
        }
    }
}

/// Members of `mask` over `n` positions.
pub(crate) fn members(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask >> i & 1 == 1).collect()
}
