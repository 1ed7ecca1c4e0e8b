//! `anodiff` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anodiff::diffusion::{
    default_lags, detect_regime_change_t0, fit_msd, log_derivative_beta, log_spaced_lags, time_averaged_msd,
    DEFAULT_DELTA_TAU, DEFAULT_RMSE_THRESHOLD, DEFAULT_WINDOW,
};
use anodiff::experiment::{run_fig6, select_landscape, Fig6Config, Fig6Report, SelectionConfig};
use anodiff::fractal::{msl, path_scaling, MslBins, DEFAULT_MIN_PAIRS, DEFAULT_MSL_BINS, DEFAULT_SMOOTHING};
use anodiff::heavytail::{
    change_of_loss, fit_stable_symmetric, gradient_pool, loss_series, moving_variance, DEFAULT_VARIANCE_WINDOW,
};
use anodiff::io::{self, RunManifest, Table};
use anodiff::landscape::{
    binarize, box_counting_dimension, default_box_scales, generate_fractal_terrain, level_set_contour,
    make_convex_paraboloid, shuffle_and_smooth,
};
use anodiff::model::Window;
use anodiff::simulator::run_sgd;
use anodiff::{Error, SimConfig, Trajectory};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "anodiff", version, about = "Anomalous-diffusion analysis of optimizer trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a fractal, convex or shuffled-smoothed landscape (CSV or ADT1 grid).
    GenLandscape(GenLandscape),
    /// Run the noisy gradient-descent walker on a landscape.
    Simulate(Simulate),
    /// Analyse a trajectory or landscape.
    #[command(subcommand)]
    Analyze(Analyze),
    /// Run the toy-model experiment end to end.
    ReproduceFig6(ReproduceFig6),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Fractal,
    Convex,
    Shuffled,
}

#[derive(Args)]
struct GenLandscape {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Grid side; fractal and shuffled kinds need 2^k + 1.
    #[arg(long, default_value_t = 257)]
    n: usize,
    #[arg(long, default_value_t = 0.8)]
    hurst: f64,
    #[arg(long, default_value_t = 1.0)]
    curvature: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smoothing kernel standard deviation in cells (shuffled kind).
    #[arg(long, default_value_t = 8.0)]
    kernel_sigma: f64,
    /// Output path; `.csv` writes text, anything else the binary grid.
    out: PathBuf,
}

#[derive(Args)]
struct Simulate {
    landscape: PathBuf,
    /// SimConfig JSON (eta, sigma, n_steps, seed, start, boundary).
    config: PathBuf,
    out: PathBuf,
    /// Manifest path (default: `<out>.manifest.json`).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct WindowArg {
    /// Analysis window `t_w,T` (default `1,min(1000, n_steps - 1)`).
    #[arg(long, value_parser = parse_pair)]
    twindow: Option<(usize, usize)>,
}

impl WindowArg {
    fn resolve(&self, traj: &Trajectory) -> anodiff::Result<Window> {
        match self.twindow {
            Some((start, len)) => Window::new(start, len),
            None => Window::new(1, DEFAULT_WINDOW.min(traj.n_steps().saturating_sub(1))),
        }
    }
}

#[derive(Subcommand)]
enum Analyze {
    /// Time-averaged MSD curve (CSV `tau,msd`); prints the power-law fit.
    Msd {
        input: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        window: WindowArg,
        /// Thin lags to this many per decade (default: every lag).
        #[arg(long)]
        per_decade: Option<usize>,
    },
    /// Logarithmic derivative of the MSD (CSV `tau,beta`).
    Beta {
        input: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        window: WindowArg,
        #[arg(long, default_value_t = DEFAULT_DELTA_TAU)]
        delta_tau: usize,
    },
    /// Regime boundary t0 and the three exponents (JSON).
    Regimes {
        input: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window_len: usize,
        /// t_w stride (default: window length / 10).
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_RMSE_THRESHOLD)]
        rmse: f64,
    },
    /// Symmetric stable fit of pooled gradients (JSON), optional loss series CSV.
    Gradients {
        input: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        window: WindowArg,
        #[arg(long, default_value_t = DEFAULT_VARIANCE_WINDOW)]
        variance_window: usize,
        /// Also write `step,loss,change,moving_variance` here.
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Contour length against end-to-end distance (JSON).
    Path {
        input: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        window: WindowArg,
        #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
        smoothing: usize,
    },
    /// Mean square fluctuation of the loss (CSV `bin_center,msl,pairs`).
    Msl {
        input: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        window: WindowArg,
        #[arg(long, default_value_t = DEFAULT_MSL_BINS)]
        bins: usize,
        #[arg(long, default_value_t = DEFAULT_MIN_PAIRS)]
        min_pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Box-counting dimension of a landscape level set (JSON).
    Boxdim {
        landscape: PathBuf,
        out: PathBuf,
        /// Level (default: median value).
        #[arg(long)]
        threshold: Option<f64>,
        /// Count the filled region instead of its contour.
        #[arg(long)]
        filled: bool,
        /// Box sizes in cells, comma separated (default: powers of two up to n/4).
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<usize>>,
    },
}

#[derive(Args)]
struct ReproduceFig6 {
    #[arg(long)]
    out: PathBuf,
    /// Number of walkers.
    #[arg(long)]
    seeds: Option<usize>,
    /// Fig6Config JSON; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    landscape_seed: Option<u64>,
    /// Pick the landscape by screening terrain seeds `start..end` first.
    #[arg(long, value_parser = parse_range)]
    scan: Option<(u64, u64)>,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected t_w,T")?;
    let a = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once("..").ok_or("expected start..end")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a >= b {
        return Err("empty range".into());
    }
    Ok((a, b))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) => 1,
        Error::Run { source, .. } => exit_code(source),
        _ => 2,
    }
}

/// Honours `ADL_THREADS` as a cap on data-parallel workers.
fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("ADL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("ADL_THREADS={v} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn argv() -> Vec<String> {
    std::env::args().collect()
}

fn run(cli: Cli) -> anodiff::Result<()> {
    match cli.command {
        Command::GenLandscape(a) => gen_landscape(a),
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::ReproduceFig6(a) => reproduce_fig6(a),
    }
}

fn gen_landscape(a: GenLandscape) -> anodiff::Result<()> {
    let field = match a.kind {
        Kind::Fractal => generate_fractal_terrain::<f64>(a.n, a.hurst, a.seed)?,
        Kind::Convex => make_convex_paraboloid::<f64>(a.n, a.curvature)?,
        Kind::Shuffled => {
            let base = generate_fractal_terrain::<f64>(a.n, a.hurst, a.seed)?;
            shuffle_and_smooth(&base, a.kernel_sigma, a.seed)?
        }
    };
    io::write_field(&field, &a.out)
}

fn simulate(a: Simulate) -> anodiff::Result<()> {
    let field = io::read_field(&a.landscape)?;
    let config: SimConfig = io::read_json(&a.config)?;
    let result = run_sgd(&field, &config)?;
    io::write_trajectory(&result.trajectory, &a.out)?;
    let manifest_path = a.manifest.unwrap_or_else(|| sidecar(&a.out, "manifest.json"));
    let manifest = RunManifest::new(
        argv(),
        json!({
            "landscape": a.landscape,
            "sim": config,
            "entry_step": result.entry_step,
            "escaped": result.escaped,
        }),
        vec![config.seed],
        vec![a.out.clone()],
    );
    manifest.write(&manifest_path)
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn analyze(a: Analyze) -> anodiff::Result<()> {
    match a {
        Analyze::Msd {
            input,
            out,
            window,
            per_decade,
        } => {
            let traj = io::read_trajectory(&input)?;
            let w = window.resolve(&traj)?;
            let lags = match per_decade {
                Some(k) => log_spaced_lags(default_lags(&traj, w).len(), k),
                None => default_lags(&traj, w),
            };
            let curve = time_averaged_msd(&traj, w, &lags)?;
            Table::from_series(&curve.to_series(), "tau", "msd").write(&out)?;
            let fit = fit_msd(&curve)?;
            println!("{}", io::to_json_string(&fit)?.trim_end());
            Ok(())
        }
        Analyze::Beta {
            input,
            out,
            window,
            delta_tau,
        } => {
            let traj = io::read_trajectory(&input)?;
            let w = window.resolve(&traj)?;
            let curve = time_averaged_msd(&traj, w, &default_lags(&traj, w))?;
            let beta = log_derivative_beta(&curve, delta_tau)?;
            let mut t = Table::new(["tau", "beta"]);
            for (&l, &b) in beta.lags.iter().zip(&beta.values) {
                t.push(&[l as f64, b]);
            }
            t.write(&out)
        }
        Analyze::Regimes {
            input,
            out,
            window_len,
            stride,
            rmse,
        } => {
            let traj = io::read_trajectory(&input)?;
            let stride = stride.unwrap_or((window_len / 10).max(1));
            let det = detect_regime_change_t0(&traj, window_len, stride, rmse)?;
            io::write_json(&out, &det.report)
        }
        Analyze::Gradients {
            input,
            out,
            window,
            variance_window,
            loss_csv,
        } => {
            let traj = io::read_trajectory(&input)?;
            let w = window.resolve(&traj)?;
            let fit = fit_stable_symmetric(&gradient_pool(&traj, w)?)?;
            io::write_json(&out, &fit)?;
            if let Some(path) = loss_csv {
                let losses = loss_series(&traj)?;
                let change = change_of_loss(&losses)?;
                let var = moving_variance(&losses, variance_window)?;
                let mut t = Table::new(["step", "loss", "change", "moving_variance"]);
                for (i, (step, loss)) in losses.iter().enumerate() {
                    let c = change.y().get(i).map_or(String::new(), |v| v.to_string());
                    let v = var.y().get(i).map_or(String::new(), |v| v.to_string());
                    t.push_text(&[step.to_string(), loss.to_string(), c, v]);
                }
                t.write(path)?;
            }
            Ok(())
        }
        Analyze::Path {
            input,
            out,
            window,
            smoothing,
        } => {
            let traj = io::read_trajectory(&input)?;
            let w = window.resolve(&traj)?;
            io::write_json(&out, &path_scaling(&traj, w, smoothing)?)
        }
        Analyze::Msl {
            input,
            out,
            window,
            bins,
            min_pairs,
            seed,
        } => {
            let traj = io::read_trajectory(&input)?;
            let w = window.resolve(&traj)?;
            let curve = msl(&traj, w, &MslBins::LogSpaced(bins), min_pairs, seed)?;
            let mut t = Table::new(["bin_center", "msl", "pairs"]);
            for ((&r, &m), &c) in curve.bin_centers.iter().zip(&curve.msl).zip(&curve.pair_counts) {
                t.push(&[r, m, c as f64]);
            }
            t.write(&out)?;
            println!("{}", json!({ "hurst": curve.hurst(), "fit": curve.hurst_fit }));
            Ok(())
        }
        Analyze::Boxdim {
            landscape,
            out,
            threshold,
            filled,
            scales,
        } => {
            let field = io::read_field(&landscape)?;
            let mask = if filled {
                binarize(&field, threshold)
            } else {
                level_set_contour(&field, threshold)
            };
            let scales = scales.unwrap_or_else(|| default_box_scales(field.n()));
            let d = box_counting_dimension(&mask, &scales)?;
            io::write_json(
                &out,
                &json!({
                    "dimension": d.dimension,
                    "fit_rmse": d.fit_rmse,
                    "scales": scales,
                    "threshold": threshold.unwrap_or_else(|| field.median()),
                    "mask": if filled { "filled" } else { "contour" },
                }),
            )
        }
    }
}

fn reproduce_fig6(a: ReproduceFig6) -> anodiff::Result<()> {
    let mut config: Fig6Config = match &a.config {
        Some(p) => io::read_json(p)?,
        None => Fig6Config::default(),
    };
    if let Some(k) = a.seeds {
        config.trials = k;
    }
    if let Some(s) = a.landscape_seed {
        config.landscape_seed = s;
    }
    let mut selection = None;
    if let Some((lo, hi)) = a.scan {
        let picked = select_landscape(&config, &SelectionConfig::default(), lo..hi)?
            .ok_or_else(|| Error::Degenerate(format!("no terrain seed in {lo}..{hi} has a wide minimum")))?;
        config.landscape_seed = picked.seed;
        selection = Some(picked);
    }
    let report = run_fig6(&config)?;
    std::fs::create_dir_all(&a.out).map_err(|source| Error::Io {
        path: a.out.clone(),
        source,
    })?;
    let outputs = write_fig6(&a.out, &report, selection.as_ref())?;
    let seeds = report.trials.iter().map(|t| t.seed).collect();
    RunManifest::new(argv(), serde_json::to_value(&config)?, seeds, outputs).write(a.out.join("manifest.json"))?;
    println!(
        "entries {}/{} | super-then-sub {} | rougher early {} | gradient alpha {} | convex {} | shuffled {}",
        report.entries(),
        report.trials.len(),
        report.regime_changes(),
        report.roughness_drops(),
        fmt_opt(report.gradient_fit.as_ref().map(|f| f.params.alpha)),
        fmt_opt(report.convex.exponent),
        fmt_opt(report.shuffled.exponent),
    );
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

fn write_fig6(dir: &Path, r: &Fig6Report, selection: Option<&anodiff::experiment::Candidate>) -> anodiff::Result<Vec<PathBuf>> {
    let mut outputs = Vec::new();
    let mut emit = |name: &str, table: Table| -> anodiff::Result<()> {
        let p = dir.join(name);
        table.write(&p)?;
        outputs.push(p);
        Ok(())
    };

    let mut pre = Table::new(["trial", "tau", "msd"]);
    let mut post = Table::new(["trial", "tau", "msd"]);
    for t in &r.trials {
        for (table, curve) in [(&mut pre, &t.msd_pre), (&mut post, &t.msd_post)] {
            if let Some(c) = curve {
                for (&l, &v) in c.lags.iter().zip(&c.values) {
                    table.push(&[t.seed as f64, l as f64, v]);
                }
            }
        }
    }
    emit("msd_pre.csv", pre)?;
    emit("msd_post.csv", post)?;
    for (name, c) in [("msd_convex.csv", &r.convex), ("msd_shuffled.csv", &r.shuffled)] {
        if let Some(curve) = &c.msd {
            emit(name, Table::from_series(&curve.to_series(), "tau", "msd"))?;
        }
    }
    for (name, g) in [
        ("gradients_fractal.csv", &r.gradients),
        ("gradients_convex.csv", &r.convex.gradients),
        ("gradients_shuffled.csv", &r.shuffled.gradients),
    ] {
        let mut t = Table::new(["gradient"]);
        for &v in g {
            t.push(&[v]);
        }
        emit(name, t)?;
    }

    let mut json_out = |name: &str, value: serde_json::Value| -> anodiff::Result<()> {
        let p = dir.join(name);
        io::write_json(&p, &value)?;
        outputs.push(p);
        Ok(())
    };
    json_out("grad_fit.json", serde_json::to_value(&r.gradient_fit)?)?;
    let landscape = |kind: &str, exponent: Option<f64>, fit: Option<&anodiff::StableFit>| {
        json!({
            "landscape": kind,
            "msd_exponent": exponent,
            "gradient_alpha": fit.map(|f| f.params.alpha),
            "gradient_llr": fit.map(|f| f.llr),
        })
    };
    let pre_mean = mean(r.trials.iter().filter_map(|t| t.pre_exponent));
    json_out(
        "comparisons.json",
        json!([
            landscape("fractal", pre_mean, r.gradient_fit.as_ref()),
            landscape("convex", r.convex.exponent, r.convex.gradient_fit.as_ref()),
            landscape("shuffled_smoothed", r.shuffled.exponent, r.shuffled.gradient_fit.as_ref()),
        ]),
    )?;
    let mut summary = serde_json::to_value(r)?;
    if let Some(s) = selection {
        summary["selection"] = serde_json::to_value(s)?;
    }
    json_out("summary.json", summary)?;
    Ok(outputs)
}

fn mean(it: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = it.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}
