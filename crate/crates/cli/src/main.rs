//! `cfmimo` runs association and performance experiments over scenario
//! files and writes plot-ready CSV plus a JSON run record per experiment.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cfmimo::association::{assign_pilots, run_baseline, run_sua, served_counts, sparsity_psi, SuaOutcome};
use cfmimo::channel::SpatialCorrelation;
use cfmimo::comm_perf::{
    ser_curve, Constellation, CsiMode, Modulation, ResidualMode, SerOptions, TheorySet, UplinkModel,
};
use cfmimo::net_metrics::{association_runtime, clutter_counts, energy_total, transmission_delay, x_sweep_gain};
use cfmimo::report::{
    build_report, config_digest, fmt_f64, to_canonical, Csv, ExperimentResult, MetricReport, Table, SCHEMA_VERSION,
};
use cfmimo::scenario::{generate_deployment, Deployment, ServiceRequirement, SystemConfig};
use cfmimo::sense_perf::pd_monte_carlo;
use cfmimo::Error;

#[derive(Parser, Debug)]
#[command(name = "cfmimo", version, about = "Cell-free massive MIMO user association experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run masking, prioritization and assignment.
    Associate(Common),
    /// Symbol error rate, closed form and Monte-Carlo.
    Ser(SerArgs),
    /// Detection probability, closed form and Monte-Carlo.
    Pd(PdArgs),
    /// Combining gain versus APs per UE.
    SweepX(SweepArgs),
    /// Delay, energy, clutter exposure and optionally runtime.
    Netmetrics(NetArgs),
    /// Merge every `*_report.json` in the output directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check a scenario file without running anything.
    Validate { path: PathBuf },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario JSON; built-in defaults when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Scheme::Both)]
    scheme: Scheme,
    /// Record wall time in the run record. Makes output non-reproducible.
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct SerArgs {
    #[command(flatten)]
    common: Common,
    /// SNR grid in dB as start:step:stop.
    #[arg(long, default_value = "0:2:20")]
    snr: String,
    #[arg(long = "mod", value_enum, default_value_t = ModArg::Qpsk)]
    modulation: ModArg,
    /// Symbols per UE and grid point.
    #[arg(long, default_value_t = 100_000)]
    symbols: u64,
    #[arg(long, value_enum, default_value_t = CsiArg::Estimated)]
    csi: CsiArg,
    #[arg(long, value_enum, default_value_t = ResidualArg::C2)]
    residual: ResidualArg,
}

#[derive(Args, Debug)]
struct PdArgs {
    #[command(flatten)]
    common: Common,
    /// Reference SCNR grid in dB as start:step:stop.
    #[arg(long, default_value = "0:1:15")]
    snr: String,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long)]
    pfa: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Inclusive range of APs per UE as start:stop.
    #[arg(long = "x-range", default_value = "1:10")]
    x_range: String,
    #[arg(long, default_value_t = 100)]
    drops: usize,
}

#[derive(Args, Debug)]
struct NetArgs {
    #[command(flatten)]
    common: Common,
    /// Repetitions for the runtime medians (only with --timing).
    #[arg(long, default_value_t = 20)]
    reps: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Scheme {
    Sua,
    Baseline,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModArg {
    Bpsk,
    Qpsk,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum CsiArg {
    Estimated,
    Perfect,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ResidualArg {
    C2,
    B2,
}

#[derive(Debug)]
enum Failure {
    Model(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    if let Some(n) = std::env::var("CFMIMO_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_infeasible() { 3 } else { 2 })
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Outcome<()> {
    match cmd {
        Command::Associate(c) => associate(&c),
        Command::Ser(a) => ser(&a),
        Command::Pd(a) => pd(&a),
        Command::SweepX(a) => sweep(&a),
        Command::Netmetrics(a) => netmetrics(&a),
        Command::Report { out } => report(&out),
        Command::Validate { path } => {
            let cfg = load(Some(&path))?;
            println!("ok {}", config_digest(&cfg)?);
            Ok(())
        }
    }
}

fn load(path: Option<&Path>) -> Outcome<SystemConfig> {
    match path {
        None => Ok(SystemConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            Ok(SystemConfig::from_json(&text)?)
        }
    }
}

/// Loaded config and deployment shared by every scheme of one run.
struct Setup {
    cfg: SystemConfig,
    dep: Deployment,
    digest: String,
}

fn setup(c: &Common) -> Outcome<Setup> {
    let mut cfg = load(c.scenario.as_deref())?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let dep = generate_deployment(&cfg)?;
    let digest = config_digest(&cfg)?;
    Ok(Setup { cfg, dep, digest })
}

fn schemes(s: Scheme) -> Vec<&'static str> {
    match s {
        Scheme::Sua => vec!["sua"],
        Scheme::Baseline => vec!["baseline"],
        Scheme::Both => vec!["sua", "baseline"],
    }
}

fn outcome(name: &str, st: &Setup) -> Outcome<SuaOutcome> {
    Ok(if name == "sua" { run_sua(&st.cfg, &st.dep)? } else { run_baseline(&st.cfg, &st.dep) })
}

/// Write-then-rename so readers never see a partial file.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Outcome<()> {
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| Failure::Io(e.to_string()))?;
    Ok(())
}

fn finish(c: &Common, st: &Setup, experiment: &str, tables: Vec<Table>, started: Instant) -> Outcome<()> {
    for t in &tables {
        write_atomic(&c.out, &format!("{}.csv", t.name), &t.csv)?;
    }
    let rec = ExperimentResult {
        experiment: experiment.to_string(),
        config_digest: st.digest.clone(),
        seed: st.cfg.seed,
        tables,
        wall_time: c.timing.then(|| started.elapsed().as_secs_f64()),
    };
    write_atomic(&c.out, &format!("{experiment}_report.json"), &(to_canonical(&rec)? + "\n"))?;
    Ok(())
}

fn table(name: String, csv: Csv) -> Table {
    Table { name, schema_version: SCHEMA_VERSION, csv: csv.finish() }
}

/// Parses `a:step:b` into an inclusive grid.
fn parse_grid(s: &str) -> Outcome<Vec<f64>> {
    let bad = || Failure::Model(Error::invalid("snr", format!("expected start:step:stop, got `{s}`")));
    let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let (a, step, b) = match parts[..] {
        [a, step, b] => (a, step, b),
        [a] => (a, 1.0, a),
        _ => return Err(bad()),
    };
    if !(step > 0.0) || b < a {
        return Err(bad());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + i as f64 * step).collect())
}

fn parse_range(s: &str) -> Outcome<Vec<usize>> {
    let bad = || Failure::Model(Error::invalid("x-range", format!("expected start:stop, got `{s}`")));
    let parts: Vec<usize> = s.split(':').map(|p| p.trim().parse::<usize>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    match parts[..] {
        [a, b] if a <= b => Ok((a..=b).collect()),
        [a] => Ok(vec![a]),
        _ => Err(bad()),
    }
}

fn associate(c: &Common) -> Outcome<()> {
    let started = Instant::now();
    let st = setup(c)?;
    let mut tables = Vec::new();
    for name in schemes(c.scheme) {
        let o = outcome(name, &st)?;
        let pilots = assign_pilots(&o.assoc, st.cfg.tau_p);
        let mut csv = Csv::new(&["scheme", "ap", "ue", "rssi_dbm", "unmasked", "quality", "priority", "assigned", "pilot"]);
        for l in 0..o.assoc.l {
            for k in 0..o.assoc.k {
                let i = l * o.assoc.k + k;
                csv.row(&[
                    name.into(),
                    l.to_string(),
                    k.to_string(),
                    fmt_f64(o.links.pr_dbm[i]),
                    (o.mask.m[i] as u8).to_string(),
                    fmt_f64(o.quality.s[i]),
                    fmt_f64(o.priority.r[i]),
                    (o.assoc.a[i] as u8).to_string(),
                    pilots[k].to_string(),
                ]);
            }
        }
        let counts = served_counts(&o.assoc);
        let psi = sparsity_psi(&o.mask);
        println!(
            "{name}: psi={psi:.4} links={} active_aps={} objective={} max_ues_per_ap={} max_aps_per_ue={}",
            o.assoc.links(),
            counts.active_aps,
            fmt_f64(o.assoc.objective),
            counts.per_ap.iter().max().unwrap_or(&0),
            counts.per_ue.iter().max().unwrap_or(&0),
        );
        let mut summary = Csv::new(&["scheme", "metric", "value"]);
        for (m, v) in [
            ("psi", fmt_f64(psi)),
            ("objective", fmt_f64(o.assoc.objective)),
            ("links", o.assoc.links().to_string()),
            ("active_aps", counts.active_aps.to_string()),
            ("integral", o.report.integral.to_string()),
        ] {
            summary.row(&[name.into(), m.into(), v]);
        }
        for (k, n) in counts.per_ue.iter().enumerate() {
            summary.row(&[name.into(), format!("aps_of_ue_{k}"), n.to_string()]);
        }
        for (l, n) in counts.per_ap.iter().enumerate() {
            summary.row(&[name.into(), format!("ues_of_ap_{l}"), n.to_string()]);
        }
        tables.push(table(format!("associate_{name}"), csv));
        tables.push(table(format!("associate-summary_{name}"), summary));
    }
    finish(c, &st, "associate", tables, started)
}

fn uplink_model(st: &Setup, o: &SuaOutcome) -> UplinkModel {
    let corr = (!st.cfg.spatial.is_identity()).then(|| {
        o.links.azimuth.iter().map(|&az| st.cfg.spatial.correlation(st.cfg.n, az)).collect::<Vec<SpatialCorrelation>>()
    });
    UplinkModel {
        l: o.assoc.l,
        k: o.assoc.k,
        n: st.cfg.n,
        tau_p: st.cfg.tau_p,
        tau_c: st.cfg.tau_c,
        p: st.cfg.p_k_watts(),
        beta: o.links.beta.clone(),
        corr,
        assoc: o.assoc.clone(),
        pilots: assign_pilots(&o.assoc, st.cfg.tau_p),
    }
}

/// Links entering the closed form: the serving set under SUA, every
/// unmasked link for the baseline.
fn theory_sets(name: &str, st: &Setup, o: &SuaOutcome, ues: &[usize]) -> Vec<TheorySet> {
    ues.iter()
        .map(|&k| {
            if name == "sua" {
                TheorySet { aps: o.assoc.serving(k), x: st.cfg.x }
            } else {
                let (m, _) = cfmimo::association::mask(&o.links, st.cfg.p_threshold);
                let aps = m.unmasked_aps(k);
                let x = aps.len().max(1);
                TheorySet { aps, x }
            }
        })
        .collect()
}

fn ser(a: &SerArgs) -> Outcome<()> {
    let started = Instant::now();
    let st = setup(&a.common)?;
    let grid = parse_grid(&a.snr)?;
    if a.symbols == 0 {
        return Err(Error::invalid("symbols", "must be positive").into());
    }
    let modulation = match a.modulation {
        ModArg::Bpsk => Modulation::Bpsk,
        ModArg::Qpsk => Modulation::Qpsk,
    };
    let c = Constellation::new(modulation);
    let opts = SerOptions {
        csi: match a.csi {
            CsiArg::Estimated => CsiMode::Estimated,
            CsiArg::Perfect => CsiMode::Perfect,
        },
        residual: match a.residual {
            ResidualArg::C2 => ResidualMode::C2,
            ResidualArg::B2 => ResidualMode::B2,
        },
        ..Default::default()
    };
    let ues = st.dep.ues_with(ServiceRequirement::needs_comm);
    let mut tables = Vec::new();
    for name in schemes(a.common.scheme) {
        let o = outcome(name, &st)?;
        let model = uplink_model(&st, &o);
        let sets = theory_sets(name, &st, &o, &ues);
        let points = ser_curve(&model, &ues, &sets, &c, &grid, a.symbols, st.cfg.seed, &opts)?;
        let mut csv =
            Csv::new(&["scheme", "modulation", "snr_db", "ser_theory", "ser_mc", "ci95", "n_symbols", "ser_theory_raw"]);
        for p in &points {
            csv.row(&[
                name.into(),
                modulation.as_str().into(),
                fmt_f64(p.snr_db),
                fmt_f64(p.ser_theory),
                fmt_f64(p.ser_mc),
                fmt_f64(p.ci95),
                p.mc_symbols.to_string(),
                fmt_f64(p.ser_theory_raw),
            ]);
            println!(
                "{name} {} snr={:>5.1} dB theory={:.3e} mc={:.3e}",
                modulation.as_str(),
                p.snr_db,
                p.ser_theory,
                p.ser_mc
            );
        }
        tables.push(table(format!("ser_{name}"), csv));
    }
    finish(&a.common, &st, "ser", tables, started)
}

fn pd(a: &PdArgs) -> Outcome<()> {
    let started = Instant::now();
    let mut st = setup(&a.common)?;
    if let Some(p) = a.pfa {
        st.cfg.p_fa = p;
        st.cfg.validate()?;
        st.digest = config_digest(&st.cfg)?;
    }
    if a.trials == 0 {
        return Err(Error::invalid("trials", "must be positive").into());
    }
    let grid = parse_grid(&a.snr)?;
    let ues = st.dep.ues_with(ServiceRequirement::needs_sensing);
    let mut tables = Vec::new();
    for name in schemes(a.common.scheme) {
        let o = outcome(name, &st)?;
        let rows = pd_monte_carlo(&st.cfg, &st.dep, &o.links.beta, &o.assoc, &ues, &grid, a.trials, st.cfg.seed)?;
        let mut csv = Csv::new(&["scheme", "ue_id", "scnr_db", "pd_formula", "pd_mc", "n_trials", "p_fa"]);
        for r in &rows {
            let id = r.ue.map_or_else(|| "aggregate".to_string(), |u| u.to_string());
            csv.row(&[
                name.into(),
                id.clone(),
                fmt_f64(r.scnr_db),
                fmt_f64(r.pd_formula),
                fmt_f64(r.pd_mc),
                r.n_trials.to_string(),
                fmt_f64(r.p_fa),
            ]);
            if r.ue.is_none() {
                println!("{name} scnr={:>5.1} dB pd={:.4} mc={:.4}", r.scnr_db, r.pd_formula, r.pd_mc);
            }
        }
        tables.push(table(format!("pd_{name}"), csv));
    }
    finish(&a.common, &st, "pd", tables, started)
}

fn sweep(a: &SweepArgs) -> Outcome<()> {
    let started = Instant::now();
    let st = setup(&a.common)?;
    let xs = parse_range(&a.x_range)?;
    let s = x_sweep_gain(&st.cfg, &xs, a.drops)?;
    let mut csv = Csv::new(&["x", "ideal_gain_db", "real_gain_db", "knee"]);
    for p in &s.points {
        csv.row(&[
            p.x.to_string(),
            fmt_f64(p.ideal_gain_db),
            fmt_f64(p.real_gain_db),
            ((p.x == s.knee) as u8).to_string(),
        ]);
        println!("x={:>2} ideal={:.3} dB real={:.3} dB", p.x, p.ideal_gain_db, p.real_gain_db);
    }
    println!("knee x={} over {} drops", s.knee, s.drops);
    finish(&a.common, &st, "sweep-x", vec![table("sweep-x_sua".into(), csv)], started)
}

fn netmetrics(a: &NetArgs) -> Outcome<()> {
    let started = Instant::now();
    let st = setup(&a.common)?;
    let runtime = if a.common.timing {
        Some(association_runtime(&st.cfg, &st.dep, a.reps.max(20))?)
    } else {
        None
    };
    let mut tables = Vec::new();
    for name in schemes(a.common.scheme) {
        let o = outcome(name, &st)?;
        let delay = transmission_delay(&o.links, &o.assoc)?;
        let energy = energy_total(&o.assoc, &st.cfg.energy);
        let clutter = clutter_counts(&st.cfg, &st.dep, &o.assoc);
        let counts = served_counts(&o.assoc);
        let mean_delay = delay.iter().sum::<f64>() / delay.len() as f64;
        let mut csv = Csv::new(&["scheme", "metric", "value"]);
        let mut rows = vec![
            ("mean_delay_s", fmt_f64(mean_delay)),
            ("max_delay_s", fmt_f64(delay.iter().copied().fold(0.0, f64::max))),
            ("energy_j", fmt_f64(energy)),
            ("active_aps", counts.active_aps.to_string()),
            ("links", o.assoc.links().to_string()),
            ("clutter_mean", fmt_f64(clutter.mean)),
            ("clutter_min", clutter.min.to_string()),
            ("clutter_max", clutter.max.to_string()),
        ];
        if let Some(rt) = &runtime {
            let (t, cv) = if name == "sua" { (rt.sua_seconds, rt.sua_cv) } else { (rt.baseline_seconds, rt.baseline_cv) };
            rows.push(("runtime_s", fmt_f64(t)));
            rows.push(("runtime_cv", fmt_f64(cv)));
        }
        for (m, v) in rows {
            println!("{name} {m}={v}");
            csv.row(&[name.into(), m.into(), v]);
        }
        for (k, d) in delay.iter().enumerate() {
            csv.row(&[name.into(), format!("delay_ue_{k}_s"), fmt_f64(*d)]);
        }
        tables.push(table(format!("netmetrics_{name}"), csv));
    }
    finish(&a.common, &st, "netmetrics", tables, started)
}

fn report(out: &Path) -> Outcome<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(out)
        .map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with("_report.json")))
        .collect();
    paths.sort();
    let mut results = Vec::new();
    for p in &paths {
        let text = fs::read_to_string(p)?;
        let r: ExperimentResult =
            serde_json::from_str(&text).map_err(|e| Error::Report(format!("{}: {e}", p.display())))?;
        results.push(r);
    }
    let rep: MetricReport = build_report("all", &results)?;
    write_atomic(out, "report.json", &(rep.to_json()? + "\n"))?;
    println!("report {} tables, digest {}", rep.tables.len(), rep.digest()?);
    Ok(())
}
