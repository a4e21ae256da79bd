//! Command-line front end.
//!
//! Input files are line-based `key = value` text with `#` comments. Lists are
//! comma separated; kernels in DM-CF specs separate rows with `;`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{outer_check_with, symmetric_ub};
use crate::dm_cf::{dm_cf_check_with, Broadcast, DMChannelSpec, DmCfOptions};
use crate::error::{Error, Result};
use crate::mc_oracle::simulate_af;
use crate::model::{
    db_to_linear, CheckOptions, FeasibilityReport, NetworkConfig, RateTuple, SymmetricConfig,
};
use crate::schemes::{
    af_check_with, af_exchange, cf_check_with, cf_exchange, df_check_with, df_exchange,
    df_threshold, gap_bounds, lattice_exchange, AfParams, CfParams, DfParams,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "mrc",
    version,
    about = "Rate bounds and relaying schemes for the Gaussian multi-way relay channel"
)]
pub struct Cli {
    /// Feasibility and bound-check tolerance in bits.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Read P and Pr in dB.
    #[arg(long, global = true)]
    pub db: bool,
    /// Write the report or CSV here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Symmetric exchange rates and their gaps for one operating point.
    Rates(SymArgs),
    /// CSV of exchange rates along one swept parameter.
    Sweep(SweepArgs),
    /// Membership test of a rate tuple.
    Check(CheckArgs),
    /// Worst observed gaps on a grid against their theoretical bounds.
    Gap(GapArgs),
    /// Monte Carlo run of amplify-and-forward.
    Mc(McArgs),
    /// Discrete-memoryless compress-and-forward membership test.
    Dmcf(DmcfArgs),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SymArgs {
    #[arg(short = 'L', long = "clusters")]
    pub clusters: usize,
    #[arg(short = 'K', long = "users")]
    pub users: usize,
    #[arg(short = 'P', long = "power")]
    pub power: f64,
    #[arg(long = "relay-power")]
    pub relay_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepVar {
    #[value(name = "P")]
    P,
    #[value(name = "Pr")]
    Pr,
    #[value(name = "K")]
    K,
    #[value(name = "L")]
    L,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RelayMode {
    #[value(name = "fixed")]
    Fixed,
    #[value(name = "KP")]
    Kp,
    #[value(name = "2LP")]
    TwoLp,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SweepArgs {
    #[arg(long = "var", ignore_case = true)]
    pub var: SweepVar,
    #[arg(long)]
    pub from: f64,
    #[arg(long)]
    pub to: f64,
    /// Grid size; integer variables default to every integer in range.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(short = 'L', long = "clusters", default_value_t = 1)]
    pub clusters: usize,
    #[arg(short = 'K', long = "users", default_value_t = 2)]
    pub users: usize,
    #[arg(short = 'P', long = "power")]
    pub power: Option<f64>,
    #[arg(long = "relay-power")]
    pub relay_power: Option<f64>,
    #[arg(long = "relay", ignore_case = true, default_value = "fixed")]
    pub relay: RelayMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckScheme {
    Outer,
    Af,
    Df,
    Cf,
    Dmcf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Network config, or a DM-CF spec for `--scheme dmcf`.
    #[arg(long)]
    pub config: PathBuf,
    /// File with a `rates` line; defaults to the config's own `rates`.
    #[arg(long)]
    pub rates: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scheme: CheckScheme,
    /// Scheme parameters, read from the config when absent; missing keys fall
    /// back to equal slots at full power.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

/// Grid axes are comma lists; an empty list gives an empty grid.
#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct GapArgs {
    #[arg(long = "clusters", allow_hyphen_values = true)]
    pub clusters: Option<String>,
    #[arg(long = "users", allow_hyphen_values = true)]
    pub users: Option<String>,
    /// User powers; the default grid is −10..40 dB in 5 dB steps.
    #[arg(long = "power", allow_hyphen_values = true)]
    pub power: Option<String>,
    #[arg(long = "relay-power", allow_hyphen_values = true)]
    pub relay_power: Option<String>,
}

fn parse_axis<T: std::str::FromStr>(v: &str, what: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| Error::config(format!("bad {what} value `{t}`")))
        })
        .collect()
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// AF slot parameters; missing keys fall back to equal slots at full power.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest accepted relative SINR deviation.
    #[arg(long = "max-deviation", default_value_t = 0.02)]
    pub max_deviation: f64,
}

#[derive(Debug, Args)]
pub struct DmcfArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub rates: Vec<f64>,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok((text, ok)) => match emit(cli.out.as_deref(), &text) {
            Ok(()) if ok => EXIT_OK,
            Ok(()) => EXIT_VIOLATION,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_INPUT
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> std::result::Result<(), String> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs a parsed command, returning its output and whether it passed.
pub fn execute(cli: &Cli) -> std::result::Result<(String, bool), String> {
    let power = |v: f64| if cli.db { db_to_linear(v) } else { Ok(v) };
    let res = match &cli.command {
        Command::Rates(a) => SymmetricConfig::new(
            a.clusters,
            a.users,
            power(a.power).map_err(str_err)?,
            power(a.relay_power).map_err(str_err)?,
        )
        .map(|sym| (rates_table(&sym), true)),
        Command::Sweep(a) => cmd_sweep(a, cli.db).map(|csv| (csv, true)),
        Command::Check(a) => cmd_check(a, cli.db, cli.tol),
        Command::Gap(a) => cmd_gap(a, cli.db, cli.tol),
        Command::Mc(a) => cmd_mc(a, cli.db),
        Command::Dmcf(a) => {
            let spec = read(&a.spec).and_then(|t| parse_dm_spec(&t));
            spec.and_then(|s| {
                dm_cf_check_with(
                    &s,
                    &a.rates,
                    &DmCfOptions {
                        tol: cli.tol,
                        ..Default::default()
                    },
                )
            })
            .map(report)
        }
    };
    res.map_err(str_err)
}

fn str_err(e: Error) -> String {
    e.to_string()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))
}

fn report(r: FeasibilityReport) -> (String, bool) {
    (format!("{}\n", r), r.feasible)
}

/// `%.9g`-style formatting: nine significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let fixed = format!("{:.*}", (DIGITS - 1 - exp) as usize, x);
        if fixed.contains('.') {
            fixed
                .trim_end_matches('0')
                .trim_end_matches('.')
                .to_string()
        } else {
            fixed
        }
    }
}

pub fn rates_table(sym: &SymmetricConfig) -> String {
    let ub = symmetric_ub(sym);
    let df = df_exchange(sym);
    let cf = cf_exchange(sym);
    let af = af_exchange(sym);
    let lattice = lattice_exchange(sym).ok();
    let mut rows = vec![("ub", ub), ("df", df), ("cf", cf), ("af", af)];
    if let Some(v) = lattice {
        rows.push(("lattice", v));
    }
    rows.push(("df_threshold", df_threshold(sym)));
    rows.extend([
        ("ub-df", ub - df),
        ("ub-cf", ub - cf),
        ("ub-af", ub - af),
        ("cf-af", cf - af),
    ]);
    if let Some(v) = lattice {
        rows.push(("ub-lattice", ub - v));
    }
    rows.iter()
        .map(|(name, v)| format!("{name:<12} {}\n", fmt_sig(*v)))
        .collect()
}

fn sweep_grid(a: &SweepArgs) -> Result<Vec<f64>> {
    let integer = matches!(a.var, SweepVar::K | SweepVar::L);
    if !(a.from.is_finite() && a.to.is_finite()) {
        return Err(Error::config("sweep range must be finite"));
    }
    if a.from == a.to {
        // A single-point sweep.
        return match a.points {
            None | Some(1) => Ok(vec![a.from]),
            Some(n) => Err(Error::config(format!("{n} points on an empty range"))),
        };
    }
    if a.from > a.to {
        return Err(Error::config(format!("empty range {}..{}", a.from, a.to)));
    }
    if integer && (a.from.fract() != 0.0 || a.to.fract() != 0.0) {
        return Err(Error::config("K and L sweeps need integer endpoints"));
    }
    let n = match a.points {
        Some(n) if n < 2 => {
            return Err(Error::config(format!(
                "a sweep needs at least 2 points, got {n}"
            )))
        }
        Some(n) => n,
        None if integer => (a.to - a.from) as usize + 1,
        None => return Err(Error::config("--points is required for P and Pr sweeps")),
    };
    let mut xs: Vec<f64> = (0..n)
        .map(|i| a.from + (a.to - a.from) * i as f64 / (n - 1) as f64)
        .collect();
    if integer {
        xs.iter_mut().for_each(|x| *x = x.round());
        xs.dedup();
    }
    Ok(xs)
}

fn cmd_sweep(a: &SweepArgs, db: bool) -> Result<String> {
    let xs = sweep_grid(a)?;
    let power = |v: f64| if db { db_to_linear(v) } else { Ok(v) };
    if a.var == SweepVar::Pr && a.relay != RelayMode::Fixed {
        return Err(Error::config("sweeping Pr needs --relay fixed"));
    }
    let lattice_col = a.users == 2 && a.var != SweepVar::K;
    let mut csv = String::from(if lattice_col {
        "x,ub,df,cf,af,lattice\n"
    } else {
        "x,ub,df,cf,af\n"
    });
    for &x in &xs {
        let (mut l, mut k) = (a.clusters, a.users);
        let mut p = a.power.map(power).transpose()?;
        let mut pr = a.relay_power.map(power).transpose()?;
        match a.var {
            SweepVar::P => p = Some(power(x)?),
            SweepVar::Pr => pr = Some(power(x)?),
            SweepVar::K => k = x as usize,
            SweepVar::L => l = x as usize,
        }
        let p = p.ok_or_else(|| Error::config("user power -P is required"))?;
        let pr = match a.relay {
            RelayMode::Fixed => {
                pr.ok_or_else(|| Error::config("--relay-power is required with --relay fixed"))?
            }
            RelayMode::Kp => k as f64 * p,
            RelayMode::TwoLp => 2.0 * l as f64 * p,
        };
        let sym = SymmetricConfig::new(l, k, p, pr)?;
        let mut row = [
            x,
            symmetric_ub(&sym),
            df_exchange(&sym),
            cf_exchange(&sym),
            af_exchange(&sym),
        ]
        .iter()
        .map(|v| fmt_sig(*v))
        .collect::<Vec<_>>();
        if lattice_col {
            row.push(fmt_sig(lattice_exchange(&sym)?));
        }
        writeln!(csv, "{}", row.join(",")).expect("writing to a String");
    }
    Ok(csv)
}

/// Parsed `key = value` file: key → (line number, raw value).
#[derive(Debug, Clone, Default)]
pub struct KvFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `key = value`, got `{body}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "missing key".into(),
                });
            }
            if entries
                .insert(key.to_string(), (line, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    fn restrict(&self, allowed: impl Fn(&str) -> bool) -> Result<()> {
        match self.entries.iter().find(|(k, _)| !allowed(k)) {
            Some((k, (line, _))) => Err(Error::Parse {
                line: *line,
                msg: format!("unknown key `{k}`"),
            }),
            None => Ok(()),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.entries
            .get(key)
            .map(|(line, v)| parse_list(v, *line))
            .transpose()
    }

    fn scalar(&self, key: &str) -> Result<Option<f64>> {
        match self.list(key)? {
            Some(v) if v.len() == 1 => Ok(Some(v[0])),
            Some(v) => Err(Error::Parse {
                line: self.entries[key].0,
                msg: format!("`{key}` takes one value, got {}", v.len()),
            }),
            None => Ok(None),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        match self.scalar(key)? {
            Some(v) if v >= 1.0 && v.fract() == 0.0 => Ok(Some(v as usize)),
            Some(v) => Err(Error::Parse {
                line: self.entries[key].0,
                msg: format!("`{key}` must be a positive integer, got {v}"),
            }),
            None => Ok(None),
        }
    }

    fn rows(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        self.entries
            .get(key)
            .map(|(line, v)| v.split(';').map(|row| parse_list(row, *line)).collect())
            .transpose()
    }
}

fn parse_list(v: &str, line: usize) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Err(Error::Parse {
            line,
            msg: "empty value".into(),
        });
    }
    v.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                msg: format!("`{}`: {e}", t.trim()),
            })
        })
        .collect()
}

const CONFIG_KEYS: &[&str] = &[
    "L",
    "K",
    "P",
    "Pr",
    "Nr",
    "user_power",
    "user_noise",
    "rates",
    "tau",
    "slot_power",
    "slot_relay_power",
    "NQ",
];

fn reshape(flat: Vec<f64>, l: usize, k: usize, what: &str) -> Result<Vec<Vec<f64>>> {
    if flat.len() != l * k {
        return Err(Error::DimensionMismatch {
            expected: format!("{} values for {what}", l * k),
            got: flat.len().to_string(),
        });
    }
    Ok(flat.chunks(k).map(<[f64]>::to_vec).collect())
}

fn fixed_len(v: Vec<f64>, n: usize, what: &str) -> Result<Vec<f64>> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n} values for {what}"),
            got: v.len().to_string(),
        });
    }
    Ok(v)
}

/// Builds a network from a config file. `P`/`Pr`/`user_power` are read in dB
/// when `db` is set.
pub fn parse_network(text: &str, db: bool) -> Result<(NetworkConfig, KvFile)> {
    let kv = KvFile::parse(text)?;
    kv.restrict(|k| CONFIG_KEYS.contains(&k))?;
    let l = kv.count("L")?.ok_or_else(|| Error::config("missing `L`"))?;
    let k = kv.count("K")?.ok_or_else(|| Error::config("missing `K`"))?;
    let power = |v: f64| if db { db_to_linear(v) } else { Ok(v) };
    let user_power = match (kv.list("user_power")?, kv.scalar("P")?) {
        (Some(_), Some(_)) => {
            return Err(Error::config("give either `P` or `user_power`, not both"))
        }
        (Some(list), None) => reshape(
            list.into_iter().map(power).collect::<Result<_>>()?,
            l,
            k,
            "user_power",
        )?,
        (None, Some(p)) => vec![vec![power(p)?; k]; l],
        (None, None) => return Err(Error::config("missing `P` or `user_power`")),
    };
    let pr = power(
        kv.scalar("Pr")?
            .ok_or_else(|| Error::config("missing `Pr`"))?,
    )?;
    let nr = kv.scalar("Nr")?.unwrap_or(1.0);
    let user_noise = match kv.list("user_noise")? {
        Some(list) => reshape(list, l, k, "user_noise")?,
        None => vec![vec![1.0; k]; l],
    };
    Ok((NetworkConfig::new(user_power, pr, nr, user_noise)?, kv))
}

fn rates_from(kv: &KvFile, cfg: &NetworkConfig) -> Result<RateTuple> {
    let flat = kv
        .list("rates")?
        .ok_or_else(|| Error::config("missing `rates`"))?;
    RateTuple::new(reshape(flat, cfg.clusters(), cfg.users(), "rates")?)
}

fn params_kv(path: Option<&Path>) -> Result<KvFile> {
    let kv = match path {
        Some(p) => KvFile::parse(&read(p)?)?,
        None => KvFile::default(),
    };
    kv.restrict(|k| CONFIG_KEYS.contains(&k))?;
    Ok(kv)
}

fn af_params(kv: &KvFile, cfg: &NetworkConfig) -> Result<AfParams> {
    let (l, k) = (cfg.clusters(), cfg.users());
    let mut p = AfParams::full_power(cfg);
    if let Some(t) = kv.list("tau")? {
        p.tau = fixed_len(t, l, "tau")?;
    }
    if let Some(s) = kv.list("slot_power")? {
        p.slot_user_power = reshape(s, l, k, "slot_power")?;
    }
    if let Some(s) = kv.list("slot_relay_power")? {
        p.slot_relay_power = fixed_len(s, l, "slot_relay_power")?;
    }
    Ok(p)
}

fn df_params(kv: &KvFile, cfg: &NetworkConfig) -> Result<DfParams> {
    let mut p = DfParams::full_power(cfg);
    if let Some(t) = kv.list("tau")? {
        p.tau = fixed_len(t, cfg.clusters(), "tau")?;
    }
    if let Some(s) = kv.list("slot_relay_power")? {
        p.slot_relay_power = fixed_len(s, cfg.clusters(), "slot_relay_power")?;
    }
    Ok(p)
}

fn cf_params(kv: &KvFile, cfg: &NetworkConfig) -> Result<CfParams> {
    let nq = kv
        .list("NQ")?
        .ok_or_else(|| Error::params("CF needs `NQ`"))?;
    let af = af_params(kv, cfg)?;
    Ok(CfParams {
        tau: af.tau,
        slot_user_power: af.slot_user_power,
        slot_relay_power: af.slot_relay_power,
        quant_noise: fixed_len(nq, cfg.clusters(), "NQ")?,
    })
}

fn cmd_check(a: &CheckArgs, db: bool, tol: f64) -> Result<(String, bool)> {
    let text = read(&a.config)?;
    if a.scheme == CheckScheme::Dmcf {
        let spec = parse_dm_spec(&text)?;
        let path = a
            .rates
            .as_deref()
            .ok_or_else(|| Error::config("dmcf checks need --rates"))?;
        let kv = KvFile::parse(&read(path)?)?;
        kv.restrict(|k| k == "rates")?;
        let rates = kv
            .list("rates")?
            .ok_or_else(|| Error::config("missing `rates`"))?;
        return dm_cf_check_with(
            &spec,
            &rates,
            &DmCfOptions {
                tol,
                ..Default::default()
            },
        )
        .map(report);
    }
    let (cfg, own) = parse_network(&text, db)?;
    let rates = match &a.rates {
        Some(p) => {
            let kv = KvFile::parse(&read(p)?)?;
            kv.restrict(|k| CONFIG_KEYS.contains(&k))?;
            rates_from(&kv, &cfg)?
        }
        None => rates_from(&own, &cfg)?,
    };
    let opts = CheckOptions {
        tol,
        ..Default::default()
    };
    let pkv = match &a.params {
        Some(_) => params_kv(a.params.as_deref())?,
        None => own,
    };
    let r = match a.scheme {
        CheckScheme::Outer => outer_check_with(&cfg, &rates, &opts)?,
        CheckScheme::Af => af_check_with(&cfg, &rates, &af_params(&pkv, &cfg)?, &opts)?,
        CheckScheme::Df => df_check_with(&cfg, &rates, &df_params(&pkv, &cfg)?, &opts)?,
        CheckScheme::Cf => cf_check_with(&cfg, &rates, &cf_params(&pkv, &cfg)?, &opts)?,
        CheckScheme::Dmcf => unreachable!("handled above"),
    };
    Ok(report(r))
}

/// Default gap grid: L ∈ 1..4, K ∈ {2,3,5,10,20}, P and Pr from −10 to 40 dB
/// in 5 dB steps.
pub fn default_gap_grid() -> (Vec<usize>, Vec<usize>, Vec<f64>, Vec<f64>) {
    let db: Vec<f64> = (-2..=8).map(|i| f64::from(i) * 5.0).collect();
    (vec![1, 2, 3, 4], vec![2, 3, 5, 10, 20], db.clone(), db)
}

#[derive(Debug, Clone, Copy)]
struct Worst {
    max: f64,
    min: f64,
    points: usize,
}

impl Worst {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            min: f64::INFINITY,
            points: 0,
        }
    }

    fn add(&mut self, v: f64) {
        self.max = self.max.max(v);
        self.min = self.min.min(v);
        self.points += 1;
    }

    fn line(&self, out: &mut String, name: &str, bound: f64, tol: f64) -> bool {
        if self.points == 0 {
            writeln!(out, "  {name:<10} no points").unwrap();
            return true;
        }
        let ok = self.min >= -tol && self.max <= bound + tol;
        let ratio = if bound > 0.0 {
            self.max / bound
        } else {
            f64::NAN
        };
        writeln!(
            out,
            "  {name:<10} max {}  min {}  bound {}  ratio {}  {}",
            fmt_sig(self.max),
            fmt_sig(self.min),
            fmt_sig(bound),
            fmt_sig(ratio),
            if ok { "ok" } else { "VIOLATED" }
        )
        .unwrap();
        ok
    }
}

fn cmd_gap(a: &GapArgs, db: bool, tol: f64) -> Result<(String, bool)> {
    let (dl, dk, dp, dpr) = default_gap_grid();
    let to_linear = |v: Vec<f64>, in_db: bool| -> Result<Vec<f64>> {
        v.into_iter()
            .map(|x| if in_db { db_to_linear(x) } else { Ok(x) })
            .collect()
    };
    let ls = match &a.clusters {
        Some(v) => parse_axis(v, "L")?,
        None => dl,
    };
    let ks = match &a.users {
        Some(v) => parse_axis(v, "K")?,
        None => dk,
    };
    let ps = match &a.power {
        Some(v) => to_linear(parse_axis(v, "P")?, db)?,
        None => to_linear(dp, true)?,
    };
    let prs = match &a.relay_power {
        Some(v) => to_linear(parse_axis(v, "Pr")?, db)?,
        None => to_linear(dpr, true)?,
    };

    let mut out = String::new();
    let mut all_ok = true;
    for &k in &ks {
        let bounds = gap_bounds(k)?;
        let (mut ub_cf, mut cf_af, mut ub_af, mut ub_lat) =
            (Worst::new(), Worst::new(), Worst::new(), Worst::new());
        let mut mismatches = 0usize;
        let mut lattice_zero_misses = 0usize;
        for &l in &ls {
            for &p in &ps {
                for &pr in &prs {
                    let sym = SymmetricConfig::new(l, k, p, pr)?;
                    let ub = symmetric_ub(&sym);
                    let (cf, af, df) = (cf_exchange(&sym), af_exchange(&sym), df_exchange(&sym));
                    ub_cf.add(ub - cf);
                    cf_af.add(cf - af);
                    ub_af.add(ub - af);
                    let below = pr <= df_threshold(&sym) + 1e-9;
                    if ((ub - df).abs() <= 1e-9) != below {
                        mismatches += 1;
                    }
                    if k == 2 && l as f64 * p >= 0.5 {
                        let lat = lattice_exchange(&sym)?;
                        ub_lat.add(ub - lat);
                        if pr <= l as f64 * p - 0.5 && (ub - lat).abs() > tol {
                            lattice_zero_misses += 1;
                        }
                    }
                }
            }
        }
        writeln!(out, "K={k} points={}", ub_cf.points).unwrap();
        all_ok &= ub_cf.line(&mut out, "ub-cf", bounds.cf_gap, tol);
        all_ok &= cf_af.line(&mut out, "cf-af", bounds.cf_af_gap, tol);
        all_ok &= ub_af.line(&mut out, "ub-af", bounds.af_gap, tol);
        if k == 2 {
            all_ok &= ub_lat.line(&mut out, "ub-lattice", bounds.lattice_gap, tol);
            writeln!(
                out,
                "  lattice=ub below Pr<=LP-1/2: {lattice_zero_misses} misses"
            )
            .unwrap();
            all_ok &= lattice_zero_misses == 0;
        }
        writeln!(out, "  df=ub iff Pr<=threshold: {mismatches} mismatches").unwrap();
        all_ok &= mismatches == 0;
    }
    writeln!(
        out,
        "{}",
        if all_ok {
            "all bounds hold"
        } else {
            "bound violated"
        }
    )
    .unwrap();
    Ok((out, all_ok))
}

fn cmd_mc(a: &McArgs, db: bool) -> Result<(String, bool)> {
    let (cfg, _) = parse_network(&read(&a.config)?, db)?;
    let params = af_params(&params_kv(a.params.as_deref())?, &cfg)?;
    let rep = simulate_af(&cfg, &params, a.samples, a.seed)?;
    let mut out = String::new();
    writeln!(out, "samples {} seed {}", rep.samples, a.seed).unwrap();
    for u in &rep.users {
        writeln!(
            out,
            "cluster {} user {}  sinr {}  predicted {}  deviation {}",
            u.cluster + 1,
            u.user + 1,
            fmt_sig(u.empirical_sinr),
            fmt_sig(u.predicted_sinr),
            fmt_sig(u.relative_deviation)
        )
        .unwrap();
    }
    let ok = rep.max_relative_deviation <= a.max_deviation && rep.power_constraints_ok;
    writeln!(out, "max deviation {}", fmt_sig(rep.max_relative_deviation)).unwrap();
    writeln!(
        out,
        "power constraints {}",
        if rep.power_constraints_ok {
            "ok"
        } else {
            "exceeded"
        }
    )
    .unwrap();
    Ok((out, ok))
}

/// Parses a DM-CF spec. Keys: `q`, `x1`…`xK`, `xr` (rows per `q`), `relay`
/// (rows per input tuple, `x1` most significant), `quantizer` (rows per
/// `y_r`), and either `y1`…`yK` (rows per `x_r`) or `y_sizes` with a joint
/// `broadcast` kernel.
pub fn parse_dm_spec(text: &str) -> Result<DMChannelSpec> {
    let kv = KvFile::parse(text)?;
    let indexed = |key: &str, prefix: char| {
        key.strip_prefix(prefix)
            .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
    };
    kv.restrict(|k| {
        matches!(
            k,
            "q" | "xr" | "relay" | "quantizer" | "y_sizes" | "broadcast"
        ) || indexed(k, 'x')
            || indexed(k, 'y')
    })?;
    let need = |key: &str| -> Result<Vec<Vec<f64>>> {
        kv.rows(key)?
            .ok_or_else(|| Error::InvalidPmf(format!("missing `{key}`")))
    };
    let q = kv.list("q")?.unwrap_or_else(|| vec![1.0]);
    let k = (1..)
        .take_while(|i| kv.entries.contains_key(&format!("x{i}")))
        .count();
    let inputs = (1..=k)
        .map(|i| need(&format!("x{i}")))
        .collect::<Result<Vec<_>>>()?;
    let broadcast = match (kv.list("y_sizes")?, kv.rows("broadcast")?) {
        (Some(sizes), Some(kernel)) => {
            let y_sizes = sizes
                .iter()
                .map(|&s| {
                    if s >= 1.0 && s.fract() == 0.0 {
                        Ok(s as usize)
                    } else {
                        Err(Error::InvalidPmf(format!("alphabet size {s}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Broadcast::Joint { y_sizes, kernel }
        }
        (None, None) => Broadcast::PerUser(
            (1..=k)
                .map(|t| need(&format!("y{t}")))
                .collect::<Result<_>>()?,
        ),
        _ => {
            return Err(Error::InvalidPmf(
                "`y_sizes` and `broadcast` go together".into(),
            ))
        }
    };
    let spec = DMChannelSpec {
        q,
        inputs,
        relay_input: need("xr")?,
        relay_channel: need("relay")?,
        quantizer: need("quantizer")?,
        broadcast,
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting() {
        assert_eq!(fmt_sig(2.0), "2");
        assert_eq!(fmt_sig(1.4036774610288), "1.40367746");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(-0.5), "-0.5");
        assert_eq!(fmt_sig(123456789.4), "123456789");
        assert_eq!(fmt_sig(1234567890.0), "1.23456789e+09");
        assert_eq!(fmt_sig(9.9999999996), "10");
        assert_eq!(fmt_sig(1.5e-7), "1.5e-07");
        assert_eq!(fmt_sig(0.0001), "0.0001");
    }

    #[test]
    fn rates_table_rows() {
        let t = rates_table(&SymmetricConfig::new(1, 2, 3.0, 3.0).unwrap());
        let get = |name: &str| -> f64 {
            t.lines()
                .find(|l| l.split_whitespace().next() == Some(name))
                .unwrap()
                .split_whitespace()
                .nth(1)
                .unwrap()
                .parse()
                .unwrap()
        };
        assert_eq!(get("ub"), 2.0);
        assert!((get("df") - 1.403677).abs() < 1e-6);
        assert!((get("cf") - 1.192645).abs() < 1e-6);
        assert!((get("af") - 0.925999).abs() < 1e-6);
        assert!((get("lattice") - 1.807355).abs() < 1e-6);
        let zero = rates_table(&SymmetricConfig::new(1, 2, 0.0, 3.0).unwrap());
        assert!(zero
            .lines()
            .all(|l| !l.starts_with("ub ") || l.ends_with(" 0")));
        let k3 = rates_table(&SymmetricConfig::new(1, 3, 3.0, 3.0).unwrap());
        assert!(!k3.contains("lattice"));
    }

    #[test]
    fn kv_parsing() {
        let kv = KvFile::parse("# header\nL = 1\nK=2 # trailing\n\nrates = 0.5, 0.25\n").unwrap();
        assert_eq!(kv.count("L").unwrap(), Some(1));
        assert_eq!(kv.list("rates").unwrap(), Some(vec![0.5, 0.25]));
        assert_eq!(kv.scalar("P").unwrap(), None);
        assert!(matches!(
            KvFile::parse("L 1"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            KvFile::parse("L = 1\nL = 2"),
            Err(Error::Parse { line: 2, .. })
        ));
        let bad = KvFile::parse("rates = 0.5, x").unwrap();
        assert!(matches!(
            bad.list("rates"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn network_from_config() {
        let (cfg, _) = parse_network("L = 2\nK = 2\nP = 3\nPr = 10\n", false).unwrap();
        assert_eq!((cfg.clusters(), cfg.users()), (2, 2));
        assert_eq!(cfg.user_power(1, 1), 3.0);
        assert_eq!(cfg.relay_noise(), 1.0);
        let (cfg, _) = parse_network("L = 1\nK = 2\nP = 10\nPr = 0\n", true).unwrap();
        assert!((cfg.user_power(0, 0) - 10.0).abs() < 1e-12);
        assert!((cfg.relay_power() - 1.0).abs() < 1e-12);
        let (cfg, _) = parse_network(
            "L=1\nK=2\nuser_power=1,2\nuser_noise=0.5,2\nPr=3\nNr=2",
            false,
        )
        .unwrap();
        assert_eq!(cfg.user_power(0, 1), 2.0);
        assert_eq!(cfg.user_noise(0, 0), 0.5);
        assert!(parse_network("L=1\nK=2\nPr=3", false).is_err());
        assert!(parse_network("L=1\nK=2\nP=1\nPr=3\nfoo=1", false).is_err());
        assert!(parse_network("L=1\nK=2\nuser_power=1,2,3\nPr=3", false).is_err());
    }

    #[test]
    fn dm_spec_parsing() {
        let text = "x1 = 0.5,0.5\nx2 = 0.5,0.5\nxr = 0.5,0.5\nrelay = 1,0; 0,1; 0,1; 1,0\nquantizer = 1,0;0,1\ny1 = 1,0;0,1\ny2 = 1,0;0,1\n";
        let spec = parse_dm_spec(text).unwrap();
        assert_eq!(spec.users(), 2);
        assert_eq!(spec.q, vec![1.0]);
        let joint = "x1 = 0.5,0.5\nx2 = 0.5,0.5\nxr = 0.5,0.5\nrelay = 1,0; 0,1; 0,1; 1,0\nquantizer = 1,0;0,1\ny_sizes = 2,2\nbroadcast = 1,0,0,0; 0,0,0,1\n";
        assert!(matches!(
            parse_dm_spec(joint).unwrap().broadcast,
            Broadcast::Joint { .. }
        ));
        assert!(parse_dm_spec(&text.replace("quantizer = 1,0;0,1", "quantizer = 1,0")).is_err());
        assert!(parse_dm_spec(&format!("{text}z = 1")).is_err());
    }

    #[test]
    fn sweep_grids() {
        let args = |var, from, to, points| SweepArgs {
            var,
            from,
            to,
            points,
            clusters: 1,
            users: 2,
            power: Some(1.0),
            relay_power: Some(1.0),
            relay: RelayMode::Fixed,
        };
        assert_eq!(
            sweep_grid(&args(SweepVar::K, 2.0, 5.0, None)).unwrap(),
            vec![2.0, 3.0, 4.0, 5.0]
        );
        assert_eq!(
            sweep_grid(&args(SweepVar::P, 0.0, 1.0, Some(3))).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(
            sweep_grid(&args(SweepVar::P, 3.0, 3.0, None)).unwrap(),
            vec![3.0]
        );
        assert!(sweep_grid(&args(SweepVar::P, 0.0, 1.0, Some(1))).is_err());
        assert!(sweep_grid(&args(SweepVar::P, 1.0, 0.0, Some(3))).is_err());
        assert!(sweep_grid(&args(SweepVar::P, 0.0, 1.0, None)).is_err());
    }

    #[test]
    fn default_gap_grid_shape() {
        let (l, k, p, pr) = default_gap_grid();
        assert_eq!((l.len(), k.len(), p.len(), pr.len()), (4, 5, 11, 11));
        assert_eq!((p[0], p[10]), (-10.0, 40.0));
    }
}
