//! Compress-and-forward region of the single-cluster discrete-memoryless
//! relay channel, evaluated by exact summation over dense joint pmfs.
//!
//! Given `Q` the law factors into a relay-input branch
//! `p(x_1|q)…p(x_K|q) p(y_r|x) p(ŷ|y_r)` and a broadcast branch
//! `p(x_r|q) p(y_1,…,y_K|x_r)`. Every information term of the region lives in
//! one branch, so the two are materialized separately and never multiplied
//! out.

use crate::error::{Error, Result};
use crate::model::{members, Constraint, FeasibilityReport, SlackTracker, DEFAULT_TOL};

pub const DEFAULT_MAX_ENTRIES: usize = 10_000_000;
const ROW_TOL: f64 = 1e-12;
const JOINT_TOL: f64 = 1e-9;

/// Dense pmf over a product alphabet, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidPmf(format!("bad alphabet sizes {dims:?}")));
        }
        let size = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        if size != Some(probs.len()) {
            return Err(Error::InvalidPmf(format!(
                "{} entries for alphabets {dims:?}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidPmf(format!("entry {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > JOINT_TOL {
            return Err(Error::InvalidPmf(format!("entries sum to {total}")));
        }
        Ok(Self { dims, probs })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// `I(A;B|C)` in bits, where each group lists axes of `joint`. `cond` may be
/// empty; `a` and `b` may not.
pub fn mutual_info(joint: &Pmf, a: &[usize], b: &[usize], cond: &[usize]) -> Result<f64> {
    let n = joint.dims.len();
    let mut seen = vec![false; n];
    for &ax in a.iter().chain(b).chain(cond) {
        if ax >= n {
            return Err(Error::InvalidPmf(format!("axis {ax} out of {n}")));
        }
        if std::mem::replace(&mut seen[ax], true) {
            return Err(Error::InvalidPmf(format!(
                "axis {ax} appears in two groups"
            )));
        }
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidPmf("empty variable group".into()));
    }

    let radix = |group: &[usize]| group.iter().map(|&ax| joint.dims[ax]).product::<usize>();
    let (na, nb, nc) = (radix(a), radix(b), radix(cond));
    let mut abc = vec![0.0; na * nb * nc];
    let mut coord = vec![0usize; n];
    let flat = |group: &[usize], coord: &[usize]| {
        group
            .iter()
            .fold(0, |acc, &ax| acc * joint.dims[ax] + coord[ax])
    };
    for &p in &joint.probs {
        if p > 0.0 {
            let (ia, ib, ic) = (flat(a, &coord), flat(b, &coord), flat(cond, &coord));
            abc[(ia * nb + ib) * nc + ic] += p;
        }
        for ax in (0..n).rev() {
            coord[ax] += 1;
            if coord[ax] < joint.dims[ax] {
                break;
            }
            coord[ax] = 0;
        }
    }

    let mut ac = vec![0.0; na * nc];
    let mut bc = vec![0.0; nb * nc];
    let mut c = vec![0.0; nc];
    for ia in 0..na {
        for ib in 0..nb {
            for ic in 0..nc {
                let p = abc[(ia * nb + ib) * nc + ic];
                ac[ia * nc + ic] += p;
                bc[ib * nc + ic] += p;
                c[ic] += p;
            }
        }
    }
    let mut info = 0.0;
    for ia in 0..na {
        for ib in 0..nb {
            for ic in 0..nc {
                let p = abc[(ia * nb + ib) * nc + ic];
                if p > 0.0 {
                    info += p * (p * c[ic] / (ac[ia * nc + ic] * bc[ib * nc + ic])).log2();
                }
            }
        }
    }
    Ok(info.max(0.0))
}

/// How the relay's signal reaches the users.
#[derive(Debug, Clone, PartialEq)]
pub enum Broadcast {
    /// `kernel[x_r]` is a pmf over the tuple `(y_1,…,y_K)` with alphabet
    /// sizes `y_sizes`, `y_1` most significant.
    Joint {
        y_sizes: Vec<usize>,
        kernel: Vec<Vec<f64>>,
    },
    /// `kernels[t][x_r]` is a pmf over `y_t`; outputs are conditionally
    /// independent given `x_r`.
    PerUser(Vec<Vec<Vec<f64>>>),
}

/// Finite-alphabet single-cluster channel together with the input, relay and
/// quantizer distributions of the CF scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct DMChannelSpec {
    /// `p(q)`.
    pub q: Vec<f64>,
    /// `inputs[k][q]` is `p(x_k|q)`.
    pub inputs: Vec<Vec<Vec<f64>>>,
    /// `relay_input[q]` is `p(x_r|q)`.
    pub relay_input: Vec<Vec<f64>>,
    /// Row `x` is `p(y_r|x)`, the input tuple indexed with `x_1` most
    /// significant.
    pub relay_channel: Vec<Vec<f64>>,
    /// Row `y_r` is `p(ŷ|y_r)`.
    pub quantizer: Vec<Vec<f64>>,
    pub broadcast: Broadcast,
}

fn check_rows(what: &str, rows: &[Vec<f64>], count: usize, width: Option<usize>) -> Result<usize> {
    if rows.len() != count {
        return Err(Error::InvalidPmf(format!(
            "{what}: {} rows, expected {count}",
            rows.len()
        )));
    }
    let w = width.or_else(|| rows.first().map(Vec::len)).unwrap_or(0);
    if w == 0 {
        return Err(Error::InvalidPmf(format!("{what}: empty alphabet")));
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != w {
            return Err(Error::InvalidPmf(format!(
                "{what}: row {r} has {} entries, expected {w}",
                row.len()
            )));
        }
        if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidPmf(format!("{what}: row {r} has entry {p}")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_TOL {
            return Err(Error::InvalidPmf(format!("{what}: row {r} sums to {s}")));
        }
    }
    Ok(w)
}

fn guarded_size(dims: &[usize], limit: usize) -> Result<usize> {
    let size = dims.iter().map(|&d| d as u128).product::<u128>();
    if size > limit as u128 {
        return Err(Error::TooLarge {
            combinations: size,
            limit: limit as u64,
        });
    }
    Ok(size as usize)
}

/// Alphabet sizes recovered from a validated spec.
struct Shape {
    q: usize,
    x: Vec<usize>,
    xr: usize,
    yr: usize,
    yhat: usize,
    y: Vec<usize>,
}

impl DMChannelSpec {
    pub fn users(&self) -> usize {
        self.inputs.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.shape().map(|_| ())
    }

    fn shape(&self) -> Result<Shape> {
        let k = self.users();
        if k < 2 {
            return Err(Error::InvalidPmf(format!("need at least 2 users, got {k}")));
        }
        let q = check_rows("p(q)", std::slice::from_ref(&self.q), 1, None)?;
        let x = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, rows)| check_rows(&format!("p(x{}|q)", i + 1), rows, q, None))
            .collect::<Result<Vec<_>>>()?;
        let xr = check_rows("p(xr|q)", &self.relay_input, q, None)?;
        let tuples = x.iter().map(|&d| d as u128).product::<u128>();
        if tuples > DEFAULT_MAX_ENTRIES as u128 {
            return Err(Error::TooLarge {
                combinations: tuples,
                limit: DEFAULT_MAX_ENTRIES as u64,
            });
        }
        let yr = check_rows("p(yr|x)", &self.relay_channel, tuples as usize, None)?;
        let yhat = check_rows("p(yhat|yr)", &self.quantizer, yr, None)?;
        let y = match &self.broadcast {
            Broadcast::Joint { y_sizes, kernel } => {
                if y_sizes.len() != k || y_sizes.contains(&0) {
                    return Err(Error::InvalidPmf(format!(
                        "broadcast alphabets {y_sizes:?} for {k} users"
                    )));
                }
                let width = guarded_size(y_sizes, DEFAULT_MAX_ENTRIES)?;
                check_rows("p(y|xr)", kernel, xr, Some(width))?;
                y_sizes.clone()
            }
            Broadcast::PerUser(kernels) => {
                if kernels.len() != k {
                    return Err(Error::InvalidPmf(format!(
                        "{} broadcast kernels for {k} users",
                        kernels.len()
                    )));
                }
                kernels
                    .iter()
                    .enumerate()
                    .map(|(t, rows)| check_rows(&format!("p(y{}|xr)", t + 1), rows, xr, None))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(Shape {
            q,
            x,
            xr,
            yr,
            yhat,
            y,
        })
    }

    /// Joint of `(Q, X_1, …, X_K, Y_r, Ŷ)`.
    fn relay_branch(&self, s: &Shape, limit: usize) -> Result<Pmf> {
        let mut dims = vec![s.q];
        dims.extend(&s.x);
        dims.extend([s.yr, s.yhat]);
        let size = guarded_size(&dims, limit)?;
        let k = s.x.len();
        let mut probs = Vec::with_capacity(size);
        let mut xs = vec![0usize; k];
        for q in 0..s.q {
            xs.fill(0);
            for tuple in 0..s.x.iter().product::<usize>() {
                let px = self.q[q] * (0..k).map(|i| self.inputs[i][q][xs[i]]).product::<f64>();
                for yr in 0..s.yr {
                    let pyr = px * self.relay_channel[tuple][yr];
                    probs.extend(self.quantizer[yr].iter().map(|w| pyr * w));
                }
                for i in (0..k).rev() {
                    xs[i] += 1;
                    if xs[i] < s.x[i] {
                        break;
                    }
                    xs[i] = 0;
                }
            }
        }
        Pmf::new(dims, probs)
    }

    /// Joint of `(Q, X_r, Y_1, …, Y_K)`.
    fn broadcast_branch(&self, s: &Shape, limit: usize) -> Result<Pmf> {
        let mut dims = vec![s.q, s.xr];
        dims.extend(&s.y);
        let size = guarded_size(&dims, limit)?;
        let width: usize = s.y.iter().product();
        let mut probs = Vec::with_capacity(size);
        let mut ys = vec![0usize; s.y.len()];
        for q in 0..s.q {
            for xr in 0..s.xr {
                let p = self.q[q] * self.relay_input[q][xr];
                match &self.broadcast {
                    Broadcast::Joint { kernel, .. } => {
                        probs.extend(kernel[xr].iter().map(|w| p * w))
                    }
                    Broadcast::PerUser(kernels) => {
                        ys.fill(0);
                        for _ in 0..width {
                            probs.push(
                                p * ys
                                    .iter()
                                    .zip(kernels)
                                    .map(|(&y, kt)| kt[xr][y])
                                    .product::<f64>(),
                            );
                            for t in (0..ys.len()).rev() {
                                ys[t] += 1;
                                if ys[t] < s.y[t] {
                                    break;
                                }
                                ys[t] = 0;
                            }
                        }
                    }
                }
            }
        }
        Pmf::new(dims, probs)
    }
}

/// The two terms bounding `Σ_{k∈S} R_k` for one subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetBound {
    pub subset: Vec<usize>,
    /// `I(X_S; Ŷ | X_{S^c}, Q)`.
    pub mac: f64,
    /// `[min_{t∉S} I(X_r; Y_t | Q) − I(Y_r; Ŷ | X^K, Q)]⁺`.
    pub forward: f64,
}

impl SubsetBound {
    pub fn bound(&self) -> f64 {
        self.mac.min(self.forward)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmCfOptions {
    pub tol: f64,
    /// Largest dense joint materialized.
    pub max_entries: usize,
}

impl Default for DmCfOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_entries: DEFAULT_MAX_ENTRIES,
        }
    }
}

/// Bounds for every nonempty proper user subset, in increasing bitmask order.
pub fn dm_cf_bounds(spec: &DMChannelSpec, opts: &DmCfOptions) -> Result<Vec<SubsetBound>> {
    let shape = spec.shape()?;
    let k = shape.x.len();
    if k >= 64 {
        return Err(Error::TooLarge {
            combinations: 1u128 << k.min(127),
            limit: opts.max_entries as u64,
        });
    }
    let relay = spec.relay_branch(&shape, opts.max_entries)?;
    let bcast = spec.broadcast_branch(&shape, opts.max_entries)?;

    // Axes: relay branch 0 = Q, 1..=K = X, K+1 = Y_r, K+2 = Ŷ;
    // broadcast branch 0 = Q, 1 = X_r, 2.. = Y_t.
    let all_x: Vec<usize> = (1..=k).collect();
    let mut cond = all_x.clone();
    cond.push(0);
    let compression = mutual_info(&relay, &[k + 1], &[k + 2], &cond)?;
    let link = (0..k)
        .map(|t| mutual_info(&bcast, &[1], &[2 + t], &[0]))
        .collect::<Result<Vec<_>>>()?;

    let full = (1u64 << k) - 1;
    (1..full)
        .map(|mask| {
            let subset = members(mask, k);
            let rest = members(full & !mask, k);
            let a: Vec<usize> = subset.iter().map(|i| i + 1).collect();
            let mut c: Vec<usize> = rest.iter().map(|i| i + 1).collect();
            c.push(0);
            let mac = mutual_info(&relay, &a, &[k + 2], &c)?;
            let weakest = rest.iter().map(|&t| link[t]).fold(f64::INFINITY, f64::min);
            Ok(SubsetBound {
                subset,
                mac,
                forward: (weakest - compression).max(0.0),
            })
        })
        .collect()
}

pub fn dm_cf_check(spec: &DMChannelSpec, rates: &[f64]) -> Result<FeasibilityReport> {
    dm_cf_check_with(spec, rates, &DmCfOptions::default())
}

pub fn dm_cf_check_with(
    spec: &DMChannelSpec,
    rates: &[f64],
    opts: &DmCfOptions,
) -> Result<FeasibilityReport> {
    if rates.len() != spec.users() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} rates", spec.users()),
            got: rates.len().to_string(),
        });
    }
    if let Some(&bad) = rates.iter().find(|r| !r.is_finite() || **r < 0.0) {
        return Err(Error::Domain {
            what: "rate",
            value: bad,
        });
    }
    let mut tracker = SlackTracker::default();
    for b in dm_cf_bounds(spec, opts)? {
        let used: f64 = b.subset.iter().map(|&i| rates[i]).sum();
        tracker.observe(b.bound() - used, || Constraint::DmCf {
            subset: b.subset.clone(),
        });
    }
    Ok(tracker.finish(opts.tol))
}
