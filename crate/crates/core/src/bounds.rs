//! Outer bound on the capacity region: the cut-set bound on every
//! multiple-access cut into the relay, intersected with the genie-aided
//! broadcast bound for restricted encoders.

use crate::error::{Error, Result};
use crate::model::{
    c, members, CheckOptions, Constraint, FeasibilityReport, NetworkConfig, RateTuple,
    SlackTracker, SymmetricConfig, DEFAULT_TOL,
};

/// Gaussian broadcast channel from the relay to `M` receivers.
#[derive(Debug, Clone, PartialEq)]
pub struct BcInstance {
    relay_power: f64,
    noises: Vec<f64>,
}

impl BcInstance {
    pub fn new(relay_power: f64, noises: Vec<f64>) -> Result<Self> {
        if !relay_power.is_finite() || relay_power < 0.0 {
            return Err(Error::Domain {
                what: "relay power",
                value: relay_power,
            });
        }
        validate_noises(&noises)?;
        Ok(Self {
            relay_power,
            noises,
        })
    }

    pub fn relay_power(&self) -> f64 {
        self.relay_power
    }

    pub fn noises(&self) -> &[f64] {
        &self.noises
    }

    /// `rates` is supportable iff its minimum power is within `tol` of the budget.
    pub fn check(&self, rates: &[f64], tol: f64) -> Result<bool> {
        Ok(bc_min_power(&self.noises, rates)? <= self.relay_power + tol)
    }
}

pub fn bc_check(bc: &BcInstance, rates: &[f64]) -> Result<bool> {
    bc.check(rates, DEFAULT_TOL)
}

fn validate_noises(noises: &[f64]) -> Result<()> {
    if noises.is_empty() {
        return Err(Error::config(
            "broadcast channel needs at least one receiver",
        ));
    }
    if let Some(&bad) = noises.iter().find(|n| !n.is_finite() || **n <= 0.0) {
        return Err(Error::Domain {
            what: "receiver noise",
            value: bad,
        });
    }
    Ok(())
}

/// Minimum total power that supports `rates` over a degraded Gaussian
/// broadcast channel with the given receiver noises.
///
/// Receivers are served in order of increasing noise (index order among
/// ties); each one sees every earlier receiver's layer as interference:
/// `P_m = (2^{2R_m} − 1)(S_{m−1} + N_m)`.
pub fn bc_min_power(noises: &[f64], rates: &[f64]) -> Result<f64> {
    validate_noises(noises)?;
    if noises.len() != rates.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} rates", noises.len()),
            got: format!("{}", rates.len()),
        });
    }
    if let Some(&bad) = rates.iter().find(|r| !r.is_finite() || **r < 0.0) {
        return Err(Error::Domain {
            what: "rate",
            value: bad,
        });
    }
    Ok(successive_power(noises, rates))
}

pub(crate) fn successive_power(noises: &[f64], rates: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..noises.len()).collect();
    order.sort_by(|&a, &b| noises[a].total_cmp(&noises[b]));
    order.iter().fold(0.0, |total, &m| {
        let snr = (2.0 * rates[m]).exp2() - 1.0;
        total + snr * (total + noises[m])
    })
}

// Rate headroom, in bits, of the noisiest receiver once the others are served.
fn bc_slack_bits(relay_power: f64, noises: &[f64], rates: &[f64]) -> f64 {
    let needed = successive_power(noises, rates);
    let worst = noises.iter().copied().fold(f64::MIN, f64::max);
    0.5 * ((relay_power + worst) / (needed + worst)).log2()
}

/// Mixed-radix counter over `[0, radix)^n`.
pub(crate) struct Odometer {
    radix: usize,
    digits: Vec<usize>,
    done: bool,
}

impl Odometer {
    pub(crate) fn new(radix: usize, n: usize) -> Self {
        Self {
            radix,
            digits: vec![0; n],
            done: radix == 0,
        }
    }

    pub(crate) fn current(&self) -> Option<&[usize]> {
        (!self.done).then_some(self.digits.as_slice())
    }

    pub(crate) fn advance(&mut self) {
        for d in self.digits.iter_mut() {
            *d += 1;
            if *d < self.radix {
                return;
            }
            *d = 0;
        }
        self.done = true;
    }
}

/// Cut-set bound: every combination of proper per-cluster subsets.
pub fn cutset_check(cfg: &NetworkConfig, rates: &RateTuple) -> Result<FeasibilityReport> {
    cutset_check_with(cfg, rates, &CheckOptions::default())
}

pub fn cutset_check_with(
    cfg: &NetworkConfig,
    rates: &RateTuple,
    opts: &CheckOptions,
) -> Result<FeasibilityReport> {
    cfg.check_rates(rates)?;
    let (l, k) = (cfg.clusters(), cfg.users());
    opts.guard(pow_u128(2, k * l))?;

    // Per-cluster sums for every proper subset mask (the full mask is excluded).
    let masks = (1usize << k) - 1;
    let sums: Vec<Vec<(f64, f64)>> = (0..l)
        .map(|j| {
            (0..masks)
                .map(|mask| {
                    members(mask as u64, k)
                        .iter()
                        .fold((0.0, 0.0), |(r, p), &i| {
                            (r + rates.get(j, i), p + cfg.user_power(j, i))
                        })
                })
                .collect()
        })
        .collect();

    let mut tracker = SlackTracker::default();
    let mut odo = Odometer::new(masks, l);
    while let Some(choice) = odo.current() {
        if choice.iter().any(|&m| m != 0) {
            let (rate, power) = choice
                .iter()
                .enumerate()
                .fold((0.0, 0.0), |(r, p), (j, &m)| {
                    (r + sums[j][m].0, p + sums[j][m].1)
                });
            let slack = c(power / cfg.relay_noise()) - rate;
            tracker.observe(slack, || Constraint::CutSet {
                subsets: choice.iter().map(|&m| members(m as u64, k)).collect(),
            });
        }
        odo.advance();
    }
    Ok(tracker.finish(opts.tol))
}

/// Genie-aided bound: for every choice of one receiver per cluster, the
/// other users' rates of each cluster must fit the relay's broadcast channel.
pub fn genie_check(cfg: &NetworkConfig, rates: &RateTuple) -> Result<FeasibilityReport> {
    genie_check_with(cfg, rates, &CheckOptions::default())
}

pub fn genie_check_with(
    cfg: &NetworkConfig,
    rates: &RateTuple,
    opts: &CheckOptions,
) -> Result<FeasibilityReport> {
    cfg.check_rates(rates)?;
    let (l, k) = (cfg.clusters(), cfg.users());
    opts.guard(pow_u128(k as u128, l))?;

    let totals: Vec<f64> = (0..l).map(|j| rates.cluster(j).iter().sum()).collect();
    let mut tracker = SlackTracker::default();
    let mut need = vec![0.0; l];
    let mut noises = vec![0.0; l];
    let mut odo = Odometer::new(k, l);
    while let Some(selection) = odo.current() {
        for (j, &sel) in selection.iter().enumerate() {
            need[j] = (totals[j] - rates.get(j, sel)).max(0.0);
            noises[j] = cfg.user_noise(j, sel);
        }
        let slack = bc_slack_bits(cfg.relay_power(), &noises, &need);
        tracker.observe(slack, || Constraint::Genie {
            selection: selection.to_vec(),
        });
        odo.advance();
    }
    Ok(tracker.finish(opts.tol))
}

/// Intersection of the cut-set and genie-aided bounds.
pub fn outer_check(cfg: &NetworkConfig, rates: &RateTuple) -> Result<FeasibilityReport> {
    outer_check_with(cfg, rates, &CheckOptions::default())
}

pub fn outer_check_with(
    cfg: &NetworkConfig,
    rates: &RateTuple,
    opts: &CheckOptions,
) -> Result<FeasibilityReport> {
    let mut tracker = SlackTracker::default();
    tracker.merge(cutset_check_with(cfg, rates, opts)?);
    tracker.merge(genie_check_with(cfg, rates, opts)?);
    Ok(tracker.finish(opts.tol))
}

/// Upper bound on the total exchange rate of a symmetric network:
/// `K/(K−1) · min{C(L(K−1)P), C(Pr)}`.
pub fn symmetric_ub(sym: &SymmetricConfig) -> f64 {
    let (l, k) = (sym.l(), sym.k());
    k / (k - 1.0) * c(l * (k - 1.0) * sym.power).min(c(sym.relay_power))
}

fn pow_u128(base: u128, exp: usize) -> u128 {
    (0..exp)
        .try_fold(1u128, |acc, _| acc.checked_mul(base))
        .unwrap_or(u128::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(p: f64, pr: f64) -> NetworkConfig {
        NetworkConfig::uniform(1, 2, p, pr).unwrap()
    }

    fn rates(r: &[f64]) -> RateTuple {
        RateTuple::new(vec![r.to_vec()]).unwrap()
    }

    #[test]
    fn cutset_examples() {
        let cfg = pair(3.0, 3.0);
        let ok = cutset_check(&cfg, &rates(&[0.9, 0.9])).unwrap();
        assert!(ok.feasible);
        assert!((ok.slack - 0.1).abs() < 1e-12);

        let bad = cutset_check(&cfg, &rates(&[1.1, 0.3])).unwrap();
        assert!(!bad.feasible);
        assert_eq!(
            bad.binding,
            Some(Constraint::CutSet {
                subsets: vec![vec![0]]
            })
        );
        assert!((bad.slack + 0.1).abs() < 1e-12);

        let zero = cutset_check(&cfg, &RateTuple::zeros(1, 2)).unwrap();
        assert!(zero.feasible);
        assert!((zero.slack - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cutset_zero_rates_slack_is_smallest_rhs() {
        let cfg = NetworkConfig::new(
            vec![vec![1.0, 4.0, 2.0], vec![0.5, 3.0, 7.0]],
            2.0,
            1.5,
            vec![vec![1.0; 3]; 2],
        )
        .unwrap();
        let rep = cutset_check(&cfg, &RateTuple::zeros(2, 3)).unwrap();
        assert!(rep.feasible);
        assert!((rep.slack - c(0.5 / 1.5)).abs() < 1e-15);
    }

    #[test]
    fn guard_rejects_large_instances() {
        let cfg = NetworkConfig::uniform(5, 5, 1.0, 1.0).unwrap();
        let err = cutset_check(&cfg, &RateTuple::zeros(5, 5)).unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
        let tight = CheckOptions {
            max_combinations: 8,
            ..Default::default()
        };
        let cfg = NetworkConfig::uniform(1, 3, 1.0, 1.0).unwrap();
        assert!(cutset_check_with(&cfg, &RateTuple::zeros(1, 3), &tight).is_ok());
        assert!(genie_check_with(&cfg, &RateTuple::zeros(1, 3), &tight).is_ok());
        let cfg = NetworkConfig::uniform(2, 3, 1.0, 1.0).unwrap();
        assert!(genie_check_with(&cfg, &RateTuple::zeros(2, 3), &tight).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let cfg = pair(1.0, 1.0);
        let err = outer_check(&cfg, &RateTuple::zeros(2, 2)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn bc_min_power_examples() {
        assert!((bc_min_power(&[1.0, 1.0], &[0.25, 0.25]).unwrap() - 1.0).abs() < 1e-9);
        assert!((bc_min_power(&[1.0, 4.0], &[0.5, 0.5]).unwrap() - 6.0).abs() < 1e-9);
        assert_eq!(bc_min_power(&[2.0, 0.3, 9.0], &[0.0; 3]).unwrap(), 0.0);
        assert!(bc_min_power(&[1.0, 0.0], &[0.1, 0.1]).is_err());
        assert!(bc_min_power(&[1.0], &[0.1, 0.1]).is_err());
        assert!(bc_min_power(&[], &[]).is_err());
    }

    #[test]
    fn bc_check_examples() {
        let rates = [0.25, 0.25];
        assert!(bc_check(&BcInstance::new(3.0, vec![1.0, 1.0]).unwrap(), &rates).unwrap());
        assert!(!bc_check(&BcInstance::new(0.9, vec![1.0, 1.0]).unwrap(), &rates).unwrap());
        assert!(bc_check(&BcInstance::new(0.0, vec![1.0, 1.0]).unwrap(), &[0.0, 0.0]).unwrap());
    }

    #[test]
    fn genie_examples() {
        let cfg = pair(3.0, 3.0);
        assert!(genie_check(&cfg, &rates(&[0.8, 0.9])).unwrap().feasible);

        let bad = genie_check(&cfg, &rates(&[1.2, 0.5])).unwrap();
        assert!(!bad.feasible);
        assert_eq!(bad.binding, Some(Constraint::Genie { selection: vec![1] }));
        assert!((bad.slack + 0.2).abs() < 1e-12);

        assert!(genie_check(&cfg, &RateTuple::zeros(1, 2)).unwrap().feasible);
    }

    #[test]
    fn outer_examples() {
        assert!(
            outer_check(&pair(3.0, 3.0), &rates(&[0.9, 0.9]))
                .unwrap()
                .feasible
        );
        let bad = outer_check(&pair(3.0, 0.5), &rates(&[0.9, 0.9])).unwrap();
        assert!(!bad.feasible);
        assert!(matches!(bad.binding, Some(Constraint::Genie { .. })));
        assert!((bad.slack - (c(0.5) - 0.9)).abs() < 1e-12);
        assert!(
            outer_check(&pair(0.0, 0.0), &RateTuple::zeros(1, 2))
                .unwrap()
                .feasible
        );
    }

    #[test]
    fn symmetric_ub_examples() {
        let ub = |l, k, p, pr| symmetric_ub(&SymmetricConfig::new(l, k, p, pr).unwrap());
        assert!((ub(1, 2, 3.0, 3.0) - 2.0).abs() < 1e-12);
        assert!((ub(2, 3, 1.0, 15.0) - 1.741446).abs() < 1e-6);
        assert_eq!(ub(3, 4, 0.0, 10.0), 0.0);
    }

    proptest! {
        #[test]
        fn bc_min_power_is_monotone(
            noises in prop::collection::vec(0.05f64..20.0, 1..5),
            seed_rates in prop::collection::vec(0.0f64..2.0, 5),
            which in 0usize..5,
            bump in 1e-3f64..0.5,
        ) {
            let m = noises.len();
            let rates = &seed_rates[..m];
            let base = bc_min_power(&noises, rates).unwrap();
            let mut more = rates.to_vec();
            more[which % m] += bump;
            prop_assert!(bc_min_power(&noises, &more).unwrap() > base);
        }

        #[test]
        fn bc_min_power_is_permutation_invariant(
            pairs in prop::collection::vec((0.05f64..20.0, 0.0f64..2.0), 1..6),
            rot in 0usize..6,
        ) {
            let (noises, rates): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let base = bc_min_power(&noises, &rates).unwrap();
            let mut shuffled = pairs.clone();
            shuffled.rotate_left(rot % pairs.len());
            shuffled.reverse();
            let (n2, r2): (Vec<f64>, Vec<f64>) = shuffled.into_iter().unzip();
            let other = bc_min_power(&n2, &r2).unwrap();
            prop_assert!((base - other).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn equal_noise_ties_do_not_depend_on_order(
            noise in 0.1f64..5.0,
            rates in prop::collection::vec(0.0f64..2.0, 2..5),
        ) {
            let noises = vec![noise; rates.len()];
            let base = bc_min_power(&noises, &rates).unwrap();
            let mut rev = rates.clone();
            rev.reverse();
            let other = bc_min_power(&noises, &rev).unwrap();
            prop_assert!((base - other).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn outer_region_is_downward_closed(
            powers in prop::collection::vec(0.0f64..10.0, 6),
            noises in prop::collection::vec(0.2f64..3.0, 6),
            relay in 0.0f64..20.0,
            rates in prop::collection::vec(0.0f64..1.5, 6),
            shrink in prop::collection::vec(0.0f64..1.0, 6),
        ) {
            let cfg = NetworkConfig::new(
                vec![powers[..3].to_vec(), powers[3..].to_vec()],
                relay,
                1.0,
                vec![noises[..3].to_vec(), noises[3..].to_vec()],
            ).unwrap();
            let hi = RateTuple::new(vec![rates[..3].to_vec(), rates[3..].to_vec()]).unwrap();
            let lo: Vec<f64> = rates.iter().zip(&shrink).map(|(r, s)| r * s).collect();
            let lo = RateTuple::new(vec![lo[..3].to_vec(), lo[3..].to_vec()]).unwrap();
            if outer_check(&cfg, &hi).unwrap().feasible {
                prop_assert!(outer_check(&cfg, &lo).unwrap().feasible);
            }
        }
    }
}
