//! Command-line surface: structured experiment configs in, CSV and
//! plot-script artifacts out.
//!
//! Exit codes: 0 success, 2 configuration/schema error, 3 numerical failure.
//! Every output file embeds the config hash, the rng seed, and the artifact
//! version, and is byte-stable across reruns of the same config.

use clap::{Parser, Subcommand};
use diqkd::config::{ExperimentConfig, LoadedConfig, QMode};
use diqkd::entropy::RatePoint;
use diqkd::error::Error;
use diqkd::finite_key::{distance_curve, HBoundMode};
use diqkd::npa::{build_block, export_sdpa, gauss_radau, import_sdpa, BlockSpec};
use diqkd::optimize::{
    nelder_mead, optimize_rate, sample_nonlocal_seed, settings_behavior, sweep,
    analytic_rate_at, OptimizeConfig, SettingsVector,
};
use diqkd::photonic::enumerate_events;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "diqkd", version, about = "DIQKD key-rate simulator and optimizer")]
struct Cli {
    /// Experiment configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's output block).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker-pool size override.
    #[arg(long, global = true)]
    pool: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the heralded behavior and the event-table breakdown.
    Simulate,
    /// Sweep the key rate over the configured efficiency grid.
    Rate,
    /// Optimize the key rate at the configured parameters.
    Optimize,
    /// Rate-versus-distance curve with a plot script.
    FiniteKey,
    /// Export one entropy-bound SDP block in SDPA sparse format.
    ExportSdpa {
        /// Quadrature node index (0-based).
        #[arg(long, default_value_t = 0)]
        node: usize,
        /// Outcome block index (0 or 1).
        #[arg(long, default_value_t = 0)]
        block: usize,
    },
    /// Validate the config and the internal numerical machinery.
    SelfCheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: &Cli) -> diqkd::Result<()> {
    let mut loaded = load_config(cli)?;
    if let Some(seed) = cli.seed {
        loaded.config.optimizer.rng_seed = seed;
    }
    if let Some(pool) = cli.pool {
        loaded.config.optimizer.pool = pool.max(1);
    }
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&loaded.config.output.out_dir));
    std::fs::create_dir_all(&out_dir)?;
    match &cli.command {
        Command::Simulate => cmd_simulate(&loaded, &out_dir),
        Command::Rate => cmd_rate(&loaded, &out_dir),
        Command::Optimize => cmd_optimize(&loaded, &out_dir),
        Command::FiniteKey => cmd_finite_key(&loaded, &out_dir),
        Command::ExportSdpa { node, block } => cmd_export_sdpa(&loaded, &out_dir, *node, *block),
        Command::SelfCheck => cmd_self_check(&loaded),
    }
}

fn load_config(cli: &Cli) -> diqkd::Result<LoadedConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".to_string()))?;
    ExperimentConfig::load(path)
}

/// 17-significant-digit decimal rendering, locale-independent.
fn fmt_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        // keep integral values readable while staying exact
        format!("{v:.1}")
    } else {
        format!("{v:.16e}")
    }
}

/// Provenance comment block placed at the top of every output file.
fn provenance(loaded: &LoadedConfig) -> String {
    format!(
        "# config_hash: {}\n# rng_seed: {}\n# artifact_version: {}\n",
        loaded.hash, loaded.config.optimizer.rng_seed, ARTIFACT_VERSION
    )
}

fn write_file(path: &Path, content: &str) -> diqkd::Result<()> {
    std::fs::write(path, content.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn settings_columns() -> &'static str {
    "small_t,theta_a0,theta_a1,theta_b0,theta_b1,theta_b2,q"
}

fn settings_cells(sv: &SettingsVector) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        fmt_f64(sv.small_t),
        fmt_f64(sv.theta_a[0]),
        fmt_f64(sv.theta_a[1]),
        fmt_f64(sv.theta_b[0]),
        fmt_f64(sv.theta_b[1]),
        fmt_f64(sv.theta_b[2]),
        fmt_f64(sv.q),
    )
}

/// Cheap settings optimization against the closed-form rate: used where a
/// full SDP-driven search is not requested.
fn optimize_settings_analytic(
    params: &diqkd::photonic::PhysicalParams,
    overlaps: &diqkd::photonic::OverlapModel,
    cfg: &OptimizeConfig,
) -> diqkd::Result<(SettingsVector, RatePoint)> {
    let (lo, hi) = SettingsVector::bounds(cfg.optimize_q, cfg.optimize_big_t);
    let mut best: Option<(SettingsVector, RatePoint)> = None;
    for i in 0..cfg.seeds.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed.wrapping_add(i as u64));
        let seed = sample_nonlocal_seed(params, overlaps, &mut rng, cfg.seed_attempts, cfg.optimize_big_t)?;
        let r = nelder_mead(
            |x| {
                let sv = SettingsVector::from_coords(x, cfg.optimize_q, cfg.optimize_big_t);
                match analytic_rate_at(params, overlaps, &sv) {
                    Ok(p) => -p.rate,
                    Err(_) => f64::INFINITY,
                }
            },
            &seed.to_coords(cfg.optimize_q),
            &lo,
            &hi,
            cfg.stage1_iterations.max(500),
            cfg.tolerance,
        );
        let sv = SettingsVector::from_coords(&r.x, cfg.optimize_q, cfg.optimize_big_t);
        let point = analytic_rate_at(params, overlaps, &sv)?;
        if best.as_ref().is_none_or(|(_, b)| point.rate > b.rate) {
            best = Some((sv, point));
        }
    }
    best.ok_or_else(|| Error::model("no settings candidate survived"))
}

fn cmd_simulate(loaded: &LoadedConfig, out_dir: &Path) -> diqkd::Result<()> {
    let cfg = &loaded.config;
    let params = cfg.physical.to_params()?;
    let overlaps = cfg.physical.to_overlaps()?;
    let ocfg = cfg.optimizer.to_optimize_config(&cfg.scenario);
    let (sv, _) = optimize_settings_analytic(&params, &overlaps, &ocfg)?;
    let b = settings_behavior(&params, &overlaps, &sv)?;

    let mut csv = provenance(loaded);
    csv.push_str("x,y,a,b,p\n");
    for x in 0..2 {
        for y in 0..3 {
            for a in 0..2 {
                for bb in 0..2 {
                    let _ = writeln!(csv, "{x},{y},{a},{bb},{}", fmt_f64(b.p[x][y][a][bb]));
                }
            }
        }
    }
    let _ = writeln!(csv, "# p_herald: {}", fmt_f64(b.p_herald));
    write_file(&out_dir.join("behavior.csv"), &csv)?;

    // event-table breakdown with one named column per contribution
    let applied = sv.apply(&params);
    let table = enumerate_events(&applied, &overlaps)?;
    let mut ev = provenance(loaded);
    let labels: Vec<String> = table.entries.keys().map(|l| l.to_string()).collect();
    let _ = writeln!(ev, "p_herald,{}", labels.join(","));
    let cells: Vec<String> = table.entries.values().map(|&v| fmt_f64(v)).collect();
    let _ = writeln!(ev, "{},{}", fmt_f64(table.heralding_probability()), cells.join(","));
    write_file(&out_dir.join("events.csv"), &ev)
}

fn rate_header() -> String {
    format!("eta_local,method,s_chsh,h_ae,h_ab,rate,{}\n", settings_columns())
}

fn rate_row(eta: f64, point: &RatePoint, sv: &SettingsVector, s: f64) -> String {
    format!(
        "{},{},{},{},{},{},{}\n",
        fmt_f64(eta),
        point.method,
        fmt_f64(s),
        fmt_f64(point.h_ae),
        fmt_f64(point.h_ab),
        fmt_f64(point.rate),
        settings_cells(sv),
    )
}

fn chsh_of(
    params: &diqkd::photonic::PhysicalParams,
    overlaps: &diqkd::photonic::OverlapModel,
    sv: &SettingsVector,
) -> diqkd::Result<f64> {
    let b = settings_behavior(params, overlaps, sv)?;
    Ok(diqkd::analysis::chsh_score(&b, (0, 1, 0, 1))?.score.abs())
}

fn cmd_rate(loaded: &LoadedConfig, out_dir: &Path) -> diqkd::Result<()> {
    let cfg = &loaded.config;
    let base = cfg.physical.to_params()?;
    let overlaps = cfg.physical.to_overlaps()?;
    let mut ocfg = cfg.optimizer.to_optimize_config(&cfg.scenario);
    if cfg.scenario.q_mode == QMode::Fixed {
        // a fixed q enters through the seed settings rather than a coordinate
        ocfg.optimize_q = false;
    }
    let mut csv = provenance(loaded);
    csv.push_str(&rate_header());

    if cfg.rate.method == "sdp" {
        let grid: Vec<_> = cfg
            .rate
            .eta_local_grid
            .iter()
            .map(|&eta| {
                let mut p = base.clone();
                p.eta2 = eta;
                p
            })
            .collect();
        let rows = sweep(&grid, &overlaps, &ocfg, cfg.optimizer.pool);
        for row in rows {
            let eta = row.params.eta2;
            let r = row.result?;
            match (r.best_settings, r.best_rate) {
                (Some(sv), Some(point)) => {
                    let s = chsh_of(&row.params, &overlaps, &sv)?;
                    csv.push_str(&rate_row(eta, &point, &sv, s));
                }
                _ => {
                    let _ = writeln!(csv, "{},sdp,,,,,,,,,,,", fmt_f64(eta));
                }
            }
        }
    } else {
        for &eta in &cfg.rate.eta_local_grid {
            let mut p = base.clone();
            p.eta2 = eta;
            let (mut sv, _) = optimize_settings_analytic(&p, &overlaps, &ocfg)?;
            if cfg.scenario.q_mode == QMode::Fixed {
                sv.q = cfg.scenario.q;
            }
            let point = analytic_rate_at(&p, &overlaps, &sv)?;
            let s = chsh_of(&p, &overlaps, &sv)?;
            csv.push_str(&rate_row(eta, &point, &sv, s));
        }
    }
    write_file(&out_dir.join("rate.csv"), &csv)
}

fn cmd_optimize(loaded: &LoadedConfig, out_dir: &Path) -> diqkd::Result<()> {
    let cfg = &loaded.config;
    let params = cfg.physical.to_params()?;
    let overlaps = cfg.physical.to_overlaps()?;
    let ocfg = cfg.optimizer.to_optimize_config(&cfg.scenario);
    let result = optimize_rate(&params, &overlaps, &ocfg)?;

    let mut csv = provenance(loaded);
    let _ = writeln!(
        csv,
        "seed_index,stage1_rate,filtered,stage2_rate,evaluations,{}",
        settings_columns()
    );
    for rec in &result.trace {
        let sv = rec.stage2_settings.unwrap_or(rec.stage1_settings);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            rec.seed_index,
            fmt_f64(rec.stage1_rate),
            rec.filtered,
            rec.stage2_rate.map(fmt_f64).unwrap_or_default(),
            rec.evaluations,
            settings_cells(&sv),
        );
    }
    match (&result.best_settings, &result.best_rate) {
        (Some(sv), Some(point)) => {
            let _ = writeln!(
                csv,
                "# best: rate={} h_ae={} h_ab={} {}",
                fmt_f64(point.rate),
                fmt_f64(point.h_ae),
                fmt_f64(point.h_ab),
                settings_cells(sv),
            );
        }
        _ => csv.push_str("# best: none (all seeds filtered)\n"),
    }
    write_file(&out_dir.join("optimize.csv"), &csv)
}

fn h_bound_mode(cfg: &ExperimentConfig) -> HBoundMode {
    if cfg.rate.method == "sdp" {
        HBoundMode::Sdp { m: cfg.scenario.m }
    } else {
        HBoundMode::Analytic
    }
}

fn cmd_finite_key(loaded: &LoadedConfig, out_dir: &Path) -> diqkd::Result<()> {
    let cfg = &loaded.config;
    let params = cfg.physical.to_params()?;
    let overlaps = cfg.physical.to_overlaps()?;
    let mut ocfg = cfg.optimizer.to_optimize_config(&cfg.scenario);
    ocfg.optimize_big_t = true;
    let (sv, _) = optimize_settings_analytic(&params, &overlaps, &ocfg)?;
    let mode = h_bound_mode(cfg);
    let base_fk = cfg.finite_key.to_finite_key_config();

    let mut csv = provenance(loaded);
    csv.push_str(
        "series,n_rounds,tau_s,l_km,big_t,p_herald,n_succ,asymptotic_rate,key_length_bits,bits_per_second\n",
    );
    let mut series_meta: Vec<(String, f64, f64)> = Vec::new();
    for (si, &n) in cfg.finite_key.series_rounds().iter().enumerate() {
        let fk = diqkd::finite_key::FiniteKeyConfig { n, ..base_fk };
        let tau = n / fk.nu_hz;
        let label = format!("n={n:e}");
        series_meta.push((label.clone(), n, tau));
        let curve = distance_curve(
            &params,
            &overlaps,
            &sv,
            &fk,
            &cfg.finite_key.l_grid_km,
            cfg.finite_key.optimize_tap,
            mode,
            &ocfg.solver,
        );
        for row in &curve.rows {
            match &row.result {
                Ok(r) => {
                    let _ = writeln!(
                        csv,
                        "{label},{},{},{},{},{},{},{},{},{}",
                        fmt_f64(n),
                        fmt_f64(tau),
                        fmt_f64(r.l_km),
                        fmt_f64(r.big_t),
                        fmt_f64(r.p_herald),
                        fmt_f64(r.n_succ),
                        fmt_f64(r.asymptotic_rate),
                        fmt_f64(r.key_length),
                        fmt_f64(r.bits_per_second),
                    );
                }
                Err(e) => {
                    let _ = writeln!(csv, "# series {si} L={} failed: {e}", row.l_km);
                }
            }
        }
    }
    write_file(&out_dir.join("finite_key.csv"), &csv)?;

    if cfg.output.write_plot_script {
        let mut gp = provenance(loaded).replace("# ", "## ");
        gp.push_str("set datafile separator ','\n");
        gp.push_str("set xlabel 'distance L (km)'\n");
        gp.push_str("set ylabel 'key rate (bits/s)'\n");
        gp.push_str("set logscale y\n");
        gp.push_str("set key top right\n");
        gp.push_str("plot \\\n");
        let n_series = series_meta.len();
        for (si, (label, n, tau)) in series_meta.iter().enumerate() {
            let cont = if si + 1 < n_series { ", \\" } else { "" };
            let _ = writeln!(
                gp,
                "  'finite_key.csv' using 4:(strcol(1) eq '{label}' ? $10 : 1/0) with lines \
                 title 'n = {n:.2e}, tau = {tau:.1} s'{cont}",
            );
        }
        write_file(&out_dir.join("finite_key.gp"), &gp)?;
    }
    Ok(())
}

fn cmd_export_sdpa(
    loaded: &LoadedConfig,
    out_dir: &Path,
    node: usize,
    block: usize,
) -> diqkd::Result<()> {
    let cfg = &loaded.config;
    if block >= 2 {
        return Err(Error::Config(format!("--block {block} out of range (0..2)")));
    }
    let params = cfg.physical.to_params()?;
    let overlaps = cfg.physical.to_overlaps()?;
    let ocfg = cfg.optimizer.to_optimize_config(&cfg.scenario);
    let (sv, _) = optimize_settings_analytic(&params, &overlaps, &ocfg)?;
    let b = settings_behavior(&params, &overlaps, &sv)?;
    let rule = gauss_radau(cfg.scenario.m)?;
    if node >= cfg.scenario.m {
        return Err(Error::Config(format!(
            "--node {node} out of range for m = {}",
            cfg.scenario.m
        )));
    }
    let spec = BlockSpec {
        t: rule.nodes[node],
        outcomes: vec![block],
        q: if cfg.scenario.q_mode == QMode::Fixed { cfg.scenario.q } else { 0.0 },
        x_key: 0,
        extras: cfg.scenario.npa_extras,
    };
    let problem = build_block(&b, &spec, &cfg.scenario.y_set)?;
    let path = out_dir.join(format!("sdpa_node{node}_block{block}.dat-s"));
    let comments = vec![
        format!("config_hash: {}", loaded.hash),
        format!("rng_seed: {}", cfg.optimizer.rng_seed),
        format!("artifact_version: {ARTIFACT_VERSION}"),
        format!("node_t: {}", fmt_f64(rule.nodes[node])),
        format!("level: {}", problem.meta.level),
    ];
    export_sdpa(&problem, &path, &comments)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_self_check(loaded: &LoadedConfig) -> diqkd::Result<()> {
    let cfg = &loaded.config;
    println!("config: schema ok (hash {})", loaded.hash);

    // documented CSV schemas, validated against the writers above
    println!("schema behavior.csv: x,y,a,b,p");
    println!("schema events.csv: p_herald + one column per contribution label");
    println!("schema rate.csv: {}", rate_header().trim_end());
    println!(
        "schema finite_key.csv: series,n_rounds,tau_s,l_km,big_t,p_herald,n_succ,asymptotic_rate,key_length_bits,bits_per_second"
    );

    // quadrature sanity: Gauss-Radau weights sum to the interval length
    let rule = gauss_radau(cfg.scenario.m)?;
    let wsum: f64 = rule.weights.iter().sum();
    check("quadrature weights sum to 1", (wsum - 1.0).abs() < 1e-12)?;
    check(
        "quadrature includes the right endpoint",
        (rule.nodes[cfg.scenario.m - 1] - 1.0).abs() < 1e-12,
    )?;

    // behavior normalization at the configured physical parameters
    let params = cfg.physical.to_params()?;
    let overlaps = cfg.physical.to_overlaps()?;
    let sv = SettingsVector {
        small_t: 0.5,
        theta_a: [0.0, std::f64::consts::FRAC_PI_8],
        theta_b: [
            std::f64::consts::FRAC_PI_8 / 2.0,
            2.0 * std::f64::consts::PI - std::f64::consts::FRAC_PI_8 / 2.0,
            0.0,
        ],
        q: 0.0,
        big_t: None,
    };
    let b = settings_behavior(&params, &overlaps, &sv)?;
    check("behavior normalized and no-signaling", b.validate(1e-9).is_ok())?;

    // SDPA export/import round trip on the first node's first block
    let spec = BlockSpec {
        t: rule.nodes[0],
        outcomes: vec![0],
        q: 0.0,
        x_key: 0,
        extras: cfg.scenario.npa_extras,
    };
    let problem = build_block(&b, &spec, &cfg.scenario.y_set)?;
    let dir = std::env::temp_dir().join(format!("diqkd-selfcheck-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("roundtrip.dat-s");
    export_sdpa(&problem, &path, &[])?;
    let re = import_sdpa(&path)?;
    let orig = problem.to_dense_sdp();
    let same = re.c.len() == orig.c.len()
        && re.c.iter().zip(&orig.c).all(|(a, b)| (a - b).abs() < 1e-12);
    std::fs::remove_dir_all(&dir).ok();
    check("sdpa export/import round trip", same)?;

    println!("self-check: all checks passed");
    Ok(())
}

fn check(name: &str, ok: bool) -> diqkd::Result<()> {
    if ok {
        println!("check {name}: ok");
        Ok(())
    } else {
        Err(Error::model(format!("self-check failed: {name}")))
    }
}
