//! Command implementations behind the `ltgreen` binary. Every command reads
//! an [`ExperimentConfig`], writes CSV into the output directory together
//! with the effective configuration and a metadata sidecar, and returns the
//! lines it wants printed.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use ltgreen::codes::CodeFamily;
use ltgreen::config::ExperimentConfig;
use ltgreen::energy::{bch_decoder_energy, max_constellation_size, total_energy, EnergyBreakdown, ModulationConfig};
use ltgreen::montecarlo::{
    build_lt_tables, lt_average_rate_and_gain, lt_rate_pmf, profile_key, rate_vs_crossover_profile, LtTable,
    RateProfile,
};
use ltgreen::optimizer::{
    distance_sweep, find_threshold_distance, log_distance_grid, optimize_scheme_at_distance, Scheme,
    SchemeKind,
};
use ltgreen::selftest::run_selftest;
use ltgreen::units::db_to_linear;

pub const BUILD_ID: &str = concat!("ltgreen-cli ", env!("CARGO_PKG_VERSION"));

/// File name of the cached rate-versus-crossover profile inside `--out`.
pub const PROFILE_FILE: &str = "rate_profile.csv";

#[derive(Debug, Parser)]
#[command(name = "ltgreen", version, about = "Energy of coded and uncoded NC-MFSK sensor links")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Configuration file; omitted fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the target bit error rate.
    #[arg(long, global = true)]
    pub ber: Option<f64>,
    /// Rate profile to read or create instead of `<out>/rate_profile.csv`.
    #[arg(long, global = true)]
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Energy breakdown of one link: `uncoded`, a code name, a family
    /// (`bch`, `conv`) or `lt`; families are optimised at the given M.
    Energy {
        #[arg(long, default_value = "uncoded")]
        scheme: String,
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long)]
        d: f64,
    },
    /// LT rate pmf over Rayleigh fading, one row per (M, rate, SNR).
    RatePmf {
        #[arg(long, value_delimiter = ',', default_values_t = vec![2u32])]
        m: Vec<u32>,
        #[arg(long = "snr-db", value_delimiter = ',', allow_negative_numbers = true,
              default_values_t = vec![6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 22.0, 24.0, 26.0])]
        snr_db: Vec<f64>,
    },
    /// Average LT rate and coding gain against average SNR.
    LtGain {
        #[arg(long, value_delimiter = ',', default_values_t = vec![2u32, 4, 8, 16])]
        m: Vec<u32>,
        /// Average SNRs; defaults to the configured table rows.
        #[arg(long = "snr-db", value_delimiter = ',', allow_negative_numbers = true)]
        snr_db: Vec<f64>,
    },
    /// Optimised energy of every scheme family over the distance grid.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = default_families())]
        scheme: Vec<String>,
    },
    /// Distance at which two schemes cost the same.
    Threshold {
        /// `a,b` scheme pair; may be repeated.
        #[arg(long, default_values_t = vec!["uncoded,lt".to_string()])]
        pair: Vec<String>,
        /// Evaluate both schemes at this M instead of optimising over M.
        #[arg(long)]
        m: Option<u32>,
    },
    /// Invariant checks; exits nonzero if any fails.
    Selftest,
}

fn default_families() -> Vec<String> {
    ["uncoded", "bch", "conv", "lt"].iter().map(|s| s.to_string()).collect()
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Energy { .. } => "energy",
            Command::RatePmf { .. } => "rate-pmf",
            Command::LtGain { .. } => "lt-gain",
            Command::Sweep { .. } => "sweep",
            Command::Threshold { .. } => "threshold",
            Command::Selftest => "selftest",
        }
    }
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Report {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
    pub ok: bool,
}

/// Fixed scientific formatting, six significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.5e}")
}

pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ExperimentConfig::from_toml(&text).with_context(|| format!("loading {}", path.display()))
}

struct Run {
    cfg: ExperimentConfig,
    out: PathBuf,
    profile_path: PathBuf,
    profile: Option<RateProfile>,
    tables: Option<Vec<LtTable>>,
    notes: Vec<(String, String)>,
}

impl Run {
    fn profile(&mut self) -> Result<&RateProfile> {
        if self.profile.is_none() {
            let cfg = &self.cfg;
            let sc = cfg.session_config();
            let grid = cfg.p_grid();
            let key = profile_key(&sc, &grid, cfg.lt.trials, cfg.seed);
            let cached = match fs::File::open(&self.profile_path) {
                Ok(f) => RateProfile::from_csv(BufReader::new(f), &key, &sc.rate_grid, cfg.lt.trials)?,
                Err(_) => None,
            };
            let profile = match cached {
                Some(p) => {
                    log::info!("reusing rate profile {}", self.profile_path.display());
                    p
                }
                None => {
                    log::info!(
                        "building rate profile: {} crossover points x {} trials",
                        grid.len(),
                        cfg.lt.trials
                    );
                    let p = rate_vs_crossover_profile(&sc, &grid, cfg.lt.trials, cfg.seed)?;
                    if let Some(dir) = self.profile_path.parent() {
                        fs::create_dir_all(dir)?;
                    }
                    fs::write(&self.profile_path, p.to_csv(&key))
                        .with_context(|| format!("writing {}", self.profile_path.display()))?;
                    p
                }
            };
            self.notes.push(("profile_key".into(), key));
            self.profile = Some(profile);
        }
        Ok(self.profile.as_ref().expect("set above"))
    }

    fn lt_tables(&mut self) -> Result<Vec<LtTable>> {
        if self.tables.is_none() {
            let ctx = self.cfg.link_context();
            let m_max = max_constellation_size(&ctx.sys)?;
            let ms: Vec<u32> = (1..=m_max.trailing_zeros()).map(|b| 1u32 << b).collect();
            let (rows, quad) = (self.cfg.snr_rows(), self.cfg.quadrature());
            let tables = build_lt_tables(self.profile()?, &ms, &rows, ctx.target_ber, &quad)?;
            self.tables = Some(tables);
        }
        Ok(self.tables.clone().expect("set above"))
    }

    fn scheme(&mut self, name: &str) -> Result<Scheme> {
        let family = |fam: CodeFamily, cfg: &ExperimentConfig| {
            cfg.codes.iter().filter(|c| c.family == fam).cloned().collect::<Vec<_>>()
        };
        let scheme = match name {
            "uncoded" => Scheme::uncoded(),
            "lt" => Scheme::lt(self.lt_tables()?),
            "bch" => Scheme::fixed_rate("bch", family(CodeFamily::Bch, &self.cfg)),
            "conv" => Scheme::fixed_rate("conv", family(CodeFamily::Conv, &self.cfg)),
            other => match self.cfg.codes.iter().find(|c| c.name == other) {
                Some(c) => Scheme::fixed_rate(other, vec![c.clone()]),
                None => bail!("unknown scheme {other:?}: expected uncoded, bch, conv, lt or a code name"),
            },
        };
        if let SchemeKind::FixedRate(codes) = &scheme.kind {
            let names: Vec<&str> = codes.iter().map(|c| c.name.as_str()).collect();
            self.notes.push((format!("scheme.{}", scheme.name), names.join("; ")));
        }
        Ok(scheme)
    }

    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.out.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

fn breakdown_cells(e: &EnergyBreakdown) -> Vec<String> {
    [e.radiated, e.tx_circuit, e.rx_circuit, e.transient, e.decoder, e.total]
        .iter()
        .map(|&x| sci(x))
        .collect()
}

fn cmd_energy(run: &mut Run, scheme: &str, m: u32, d: f64) -> Result<Report> {
    let ctx = run.cfg.link_context();
    let modc = ModulationConfig::new(m, &ctx.sys)?;
    // a single named code is evaluated directly; families are optimised at M
    let (code_id, rate, gain_db, e) = match run.cfg.codes.iter().find(|c| c.name == scheme).cloned() {
        Some(code) => {
            let gain_db = code.gain_db(m, ctx.target_ber)?;
            let dec = match code.bch {
                Some(p) => bch_decoder_energy(p.n, p.k, p.t, ctx.sys.payload_bits, ctx.e_add, ctx.e_mult)?,
                None => 0.0,
            };
            let e = total_energy(&ctx.sys, &modc, &ctx.ch, d, ctx.target_ber, code.rate, db_to_linear(gain_db), dec)?;
            (code.name.clone(), code.rate, gain_db, e)
        }
        None => {
            let s = run.scheme(scheme)?.with_fixed_m(m);
            let c = optimize_scheme_at_distance(d, &s, &ctx)?;
            if let Some(snr) = c.avg_snr_db {
                run.notes.push(("lt_operating_avg_snr_db".into(), sci(snr)));
            }
            (c.code_id, c.rate, c.gain_db, c.energy)
        }
    };
    let mut row = vec![code_id, m.to_string(), sci(rate), sci(gain_db), sci(d)];
    row.extend(breakdown_cells(&e));
    let header = [
        "scheme", "M", "Rc", "gain_dB", "d_m", "radiated_J", "tx_circuit_J", "rx_circuit_J", "transient_J",
        "decoder_J", "total_J",
    ];
    let path = run.csv("energy.csv", &header, &[row.clone()])?;
    Ok(Report {
        lines: vec![header.join(","), row.join(",")],
        files: vec![path],
        ok: true,
    })
}

fn cmd_rate_pmf(run: &mut Run, ms: &[u32], snrs: &[f64]) -> Result<Report> {
    let quad = run.cfg.quadrature();
    let profile = run.profile()?.clone();
    let mut sorted = snrs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    for &m in ms {
        let pmfs = sorted
            .iter()
            .map(|&s| lt_rate_pmf(s, m, &profile, &quad))
            .collect::<ltgreen::Result<Vec<_>>>()?;
        let Some(first) = pmfs.first() else { continue };
        for (ri, &rate) in first.rates.iter().enumerate() {
            for pmf in &pmfs {
                rows.push(vec![m.to_string(), sci(pmf.avg_snr_db), sci(rate), sci(pmf.mass[ri])]);
            }
        }
    }
    let path = run.csv("rate_pmf.csv", &["m", "avg_snr_db", "rate", "mass"], &rows)?;
    Ok(Report {
        lines: vec![format!("{} rows -> {}", rows.len(), path.display())],
        files: vec![path],
        ok: true,
    })
}

fn cmd_lt_gain(run: &mut Run, ms: &[u32], snrs: &[f64]) -> Result<Report> {
    let quad = run.cfg.quadrature();
    let ber = run.cfg.sweep.target_ber;
    let mut sorted = if snrs.is_empty() { run.cfg.snr_rows() } else { snrs.to_vec() };
    sorted.sort_by(f64::total_cmp);
    let profile = run.profile()?.clone();
    let mut rows = Vec::new();
    for &m in ms {
        for &s in &sorted {
            let pmf = lt_rate_pmf(s, m, &profile, &quad)?;
            let (rate, gain) = lt_average_rate_and_gain(&pmf, m, ber)?;
            rows.push(vec![m.to_string(), sci(s), sci(rate), sci(gain)]);
        }
    }
    let path = run.csv("lt_gain.csv", &["m", "avg_snr_db", "avg_rate", "gain_db"], &rows)?;
    Ok(Report {
        lines: vec![format!("{} rows -> {}", rows.len(), path.display())],
        files: vec![path],
        ok: true,
    })
}

fn cmd_sweep(run: &mut Run, names: &[String]) -> Result<Report> {
    let schemes = names.iter().map(|n| run.scheme(n)).collect::<Result<Vec<_>>>()?;
    let sw = &run.cfg.sweep;
    let grid = log_distance_grid(sw.d_min, sw.d_max, sw.d_points);
    let ctx = run.cfg.link_context();
    let sweep = distance_sweep(&grid, &schemes, &ctx)?;
    let mut header = vec!["d_m".to_string()];
    for s in &schemes {
        for col in ["best_M", "best_code", "energy_J"] {
            header.push(format!("{}_{col}", s.name));
        }
    }
    let rows: Vec<Vec<String>> = sweep
        .iter()
        .map(|r| {
            let mut row = vec![sci(r.d)];
            for c in &r.best {
                row.extend([c.m.to_string(), c.code_id.clone(), sci(c.energy.total)]);
            }
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let path = run.csv("sweep.csv", &header, &rows)?;
    Ok(Report {
        lines: vec![format!("{} distances -> {}", rows.len(), path.display())],
        files: vec![path],
        ok: true,
    })
}

fn cmd_threshold(run: &mut Run, pairs: &[String], m: Option<u32>) -> Result<Report> {
    let ctx = run.cfg.link_context();
    let (lo, hi, tol) = (run.cfg.sweep.threshold_lo, run.cfg.sweep.threshold_hi, run.cfg.sweep.threshold_tol_m);
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    let mut all_found = true;
    for pair in pairs {
        let Some((a, b)) = pair.split_once(',') else {
            bail!("--pair expects two comma-separated schemes, got {pair:?}");
        };
        let (mut sa, mut sb) = (run.scheme(a.trim())?, run.scheme(b.trim())?);
        if let Some(m) = m {
            sa = sa.with_fixed_m(m);
            sb = sb.with_fixed_m(m);
        }
        let label = format!("{}/{}", a.trim(), b.trim());
        match find_threshold_distance(&sa, &sb, &ctx, lo, hi, tol) {
            Ok(d) => {
                lines.push(format!("{label} d_T = {} m", sci(d)));
                rows.push(vec![label, sci(d)]);
            }
            Err(e @ ltgreen::Error::NoCrossoverInRange { .. }) => {
                lines.push(format!("{label} {e}"));
                rows.push(vec![label, String::new()]);
                all_found = false;
            }
            Err(e) => return Err(e).with_context(|| format!("threshold for {pair}")),
        }
    }
    let path = run.csv("thresholds.csv", &["scheme_pair", "d_T_m"], &rows)?;
    Ok(Report {
        lines,
        files: vec![path],
        ok: all_found,
    })
}

fn cmd_selftest(run: &mut Run) -> Result<Report> {
    let checks = run_selftest(&run.cfg, None)?;
    let ok = checks.iter().all(|c| c.passed);
    let lines = checks
        .iter()
        .map(|c| format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
        .collect();
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![c.name.to_string(), c.passed.to_string(), c.detail.clone()])
        .collect();
    let path = run.csv("selftest.csv", &["check", "passed", "detail"], &rows)?;
    Ok(Report {
        lines,
        files: vec![path],
        ok,
    })
}

fn sidecar(cmd: &str, cfg_text: &str, seed: u64, notes: &[(String, String)]) -> String {
    let hash = Sha256::digest(cfg_text.as_bytes());
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    let mut s = format!(
        "command = {cmd:?}\nseed = {seed}\nconfig_sha256 = {hex:?}\nbuild = {:?}\n",
        BUILD_ID
    );
    for (k, v) in notes {
        s.push_str(&format!("{k:?} = {v:?}\n"));
    }
    s
}

/// Runs one command against an already parsed command line.
pub fn run(cli: &Cli) -> Result<Report> {
    let mut cfg = load_config(cli.common.config.as_deref())?;
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(ber) = cli.common.ber {
        cfg.sweep.target_ber = ber;
    }
    cfg.validate().context("effective configuration")?;
    let out = cli.common.out.clone();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let profile_path = cli.common.profile.clone().unwrap_or_else(|| out.join(PROFILE_FILE));
    let mut run = Run {
        cfg,
        out,
        profile_path,
        profile: None,
        tables: None,
        notes: Vec::new(),
    };
    let mut report = match &cli.command {
        Command::Energy { scheme, m, d } => cmd_energy(&mut run, scheme, *m, *d)?,
        Command::RatePmf { m, snr_db } => cmd_rate_pmf(&mut run, m, snr_db)?,
        Command::LtGain { m, snr_db } => cmd_lt_gain(&mut run, m, snr_db)?,
        Command::Sweep { scheme } => cmd_sweep(&mut run, scheme)?,
        Command::Threshold { pair, m } => cmd_threshold(&mut run, pair, *m)?,
        Command::Selftest => cmd_selftest(&mut run)?,
    };
    let name = cli.command.name();
    let cfg_text = run.cfg.to_toml();
    let cfg_path = run.out.join("config.toml");
    fs::write(&cfg_path, &cfg_text)?;
    let meta_path = run.out.join(format!("{name}.meta.toml"));
    fs::write(&meta_path, sidecar(name, &cfg_text, run.cfg.seed, &run.notes))?;
    report.files.extend([cfg_path, meta_path]);
    Ok(report)
}
