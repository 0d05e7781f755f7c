//! `sdr` — sample Gaussian mixtures, train the multi-cost SVM, calibrate its
//! offset against a risk level, evaluate, and query exact safe regions.
//!
//! Every subcommand accepts `--config FILE` pointing at a JSON object whose
//! keys mirror the long flag names (`{"data": "train.csv", "eta": 1e-3}`);
//! explicit flags win over config values. Outputs are CSV and JSON files in
//! `--out` (default `.`). Exit code 0 on success, 2 on any validation or
//! I/O error.

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use sdr_core::calibration::{
    bias_adjustment, conformal_bias, epsilon_hinge_bias, probabilistic_scaling_bias,
    CalibrationResult, ErrorTarget,
};
use sdr_core::error::{Error, Result};
use sdr_core::exact_sdr::{classify_boundary, GaussianClassModel, SafeRegionSpec};
use sdr_core::experiments::{
    evaluate, evaluate_exact, export_contour, reproduce_example1, reproduce_example2,
    reproduce_example3, BoundarySummary, ContourSource, Example2Config, Example3Config,
    GridBounds,
};
use sdr_core::kernels::KernelSpec;
use sdr_core::mcsvm::{train, McSvmModel, TrainConfig};
use sdr_core::sampling::{sample_mixture, split, LabeledDataset, RngSeed};

#[derive(Parser)]
#[command(
    name = "sdr",
    version,
    about = "Safe decision regions: exact Gaussian regions and risk-calibrated multi-cost SVMs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a labeled Gaussian-mixture dataset and write it as CSV.
    Sample(SampleArgs),
    /// Train a multi-cost SVM on a CSV dataset.
    Train(TrainArgs),
    /// Pick the model offset by one of the calibration methods.
    Calibrate(CalibrateArgs),
    /// Evaluate a model (with an offset) on a labeled CSV dataset.
    Evaluate(EvaluateArgs),
    /// Classify and export the exact Gaussian safe region.
    #[command(name = "exact-sdr")]
    ExactSdr(ExactSdrArgs),
    /// Re-run one of the built-in studies (1, 2, or 3).
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// JSON config mirroring the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of points to draw.
    #[arg(long)]
    n: Option<usize>,
    /// Safe-class prior p_S in (0, 1).
    #[arg(long)]
    ps: Option<f64>,
    /// Safe class model JSON ({"mu": [..], "sigma": [[..], ..]}).
    #[arg(long)]
    model_s: Option<PathBuf>,
    /// Unsafe class model JSON.
    #[arg(long)]
    model_u: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Optional split fractions, e.g. `0.6,0.2,0.2` (writes one CSV each).
    #[arg(long)]
    split: Option<String>,
    /// Output directory (default `.`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training dataset CSV (header x1,...,xd,y).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Regularization trade-off (default 1e-3).
    #[arg(long)]
    eta: Option<f64>,
    /// Cost weights: comma list like `0.1,0.5,0.9`, or `open:M` for M
    /// weights spaced evenly on the open unit interval.
    #[arg(long)]
    taus: Option<String>,
    /// Kernel: linear | quadratic | cubic | polynomial | rbf.
    #[arg(long)]
    kernel: Option<String>,
    /// RBF bandwidth (required with --kernel rbf).
    #[arg(long)]
    gamma: Option<f64>,
    /// Polynomial degree (with --kernel polynomial).
    #[arg(long)]
    degree: Option<u32>,
    /// Polynomial gain (default 1).
    #[arg(long)]
    gain: Option<f64>,
    /// Polynomial offset (default 1).
    #[arg(long)]
    offset: Option<f64>,
    /// Solver convergence threshold (default 1e-6).
    #[arg(long)]
    kkt_tol: Option<f64>,
    /// Maximum solver sweeps (default 1000).
    #[arg(long)]
    max_passes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trained model JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Calibration dataset CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Method: bias-adj | scaling | conformal | hinge.
    #[arg(long)]
    method: Option<String>,
    /// Risk level ε in (0, 1).
    #[arg(long)]
    eps: Option<f64>,
    /// Confidence parameter δ (scaling and conformal; default 0.05).
    #[arg(long)]
    delta: Option<f64>,
    /// Hinge target: fn (false negatives) or fp (false positives).
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Test dataset CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Offset to evaluate with (alternative to --calibration).
    #[arg(long)]
    b: Option<f64>,
    /// calibration.json produced by `sdr calibrate`.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExactSdrArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model_s: Option<PathBuf>,
    #[arg(long)]
    model_u: Option<PathBuf>,
    /// Safe-class prior p_S.
    #[arg(long)]
    ps: Option<f64>,
    /// Risk level ε.
    #[arg(long)]
    eps: Option<f64>,
    /// Optional labeled CSV to score against the region.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Also export a contour grid of Γ(x) − ρ.
    #[arg(long)]
    contour: bool,
    /// Contour bounds `x_min,x_max,y_min,y_max` (default: means ±4σ).
    #[arg(long)]
    bounds: Option<String>,
    /// Contour resolution `COLSxROWS` (default 200x200).
    #[arg(long)]
    res: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Study id: 1 (exact-region geometry), 2 (hyperplane stability),
    /// 3 (end-to-end calibration).
    example: u8,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset-size override (study 2: points per dataset; study 3:
    /// training-pool size).
    #[arg(long)]
    n: Option<usize>,
    /// Solver convergence threshold override.
    #[arg(long)]
    kkt_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// JSON config whose keys mirror the long flag names.
struct FileConfig(serde_json::Map<String, Value>);

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self(serde_json::Map::new()));
        };
        let text = std::fs::read_to_string(path)?;
        let value: Value = serde_json::from_str(&text)?;
        match value {
            Value::Object(map) => Ok(Self(map)),
            _ => Err(Error::InvalidParameter(
                "config file must hold a JSON object".into(),
            )),
        }
    }

    fn f64(&self, key: &str) -> Option<f64> {
        self.0.get(key).and_then(Value::as_f64)
    }

    fn u64(&self, key: &str) -> Option<u64> {
        self.0.get(key).and_then(Value::as_u64)
    }

    fn usize(&self, key: &str) -> Option<usize> {
        self.u64(key).map(|v| v as usize)
    }

    fn u32(&self, key: &str) -> Option<u32> {
        self.u64(key).map(|v| v as u32)
    }

    fn string(&self, key: &str) -> Option<String> {
        self.0.get(key).and_then(Value::as_str).map(str::to_string)
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.string(key).map(PathBuf::from)
    }

    fn bool(&self, key: &str) -> Option<bool> {
        self.0.get(key).and_then(Value::as_bool)
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidParameter(format!("missing required --{flag} (or config key)")))
}

fn out_dir(explicit: Option<PathBuf>, cfg: &FileConfig) -> Result<PathBuf> {
    let dir = explicit
        .or_else(|| cfg.path("out"))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn parse_taus(text: &str) -> Result<Vec<f64>> {
    if let Some(m) = text.strip_prefix("open:") {
        let m: usize = m
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad tau count in `{text}`")))?;
        if m == 0 {
            return Err(Error::InvalidParameter("tau count must be >= 1".into()));
        }
        return Ok(sdr_core::experiments::open_interval_taus(m));
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad tau `{s}`")))
        })
        .collect()
}

fn parse_kernel(args: &TrainArgs, cfg: &FileConfig) -> Result<KernelSpec> {
    let name = args
        .kernel
        .clone()
        .or_else(|| cfg.string("kernel"))
        .unwrap_or_else(|| "linear".to_string());
    match name.as_str() {
        "linear" => Ok(KernelSpec::Linear),
        "quadratic" => Ok(KernelSpec::quadratic()),
        "cubic" => Ok(KernelSpec::cubic()),
        "polynomial" => {
            let degree = required(args.degree.or_else(|| cfg.u32("degree")), "degree")?;
            let gain = args.gain.or_else(|| cfg.f64("gain")).unwrap_or(1.0);
            let offset = args.offset.or_else(|| cfg.f64("offset")).unwrap_or(1.0);
            KernelSpec::polynomial(degree, gain, offset)
        }
        "rbf" => {
            let gamma = required(args.gamma.or_else(|| cfg.f64("gamma")), "gamma")?;
            KernelSpec::rbf(gamma)
        }
        other => Err(Error::InvalidParameter(format!("unknown kernel `{other}`"))),
    }
}

fn load_gaussian(path: &Path) -> Result<GaussianClassModel> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json_file<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}

fn run_sample(args: SampleArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let n = required(args.n.or_else(|| cfg.usize("n")), "n")?;
    let ps = required(args.ps.or_else(|| cfg.f64("ps")), "ps")?;
    let model_s = load_gaussian(&required(
        args.model_s.or_else(|| cfg.path("model_s")),
        "model-s",
    )?)?;
    let model_u = load_gaussian(&required(
        args.model_u.or_else(|| cfg.path("model_u")),
        "model-u",
    )?)?;
    let seed = RngSeed(args.seed.or_else(|| cfg.u64("seed")).unwrap_or(0));
    let out = out_dir(args.out, &cfg)?;
    let dataset = sample_mixture(n, ps, &model_s, &model_u, seed)?;
    match args.split.or_else(|| cfg.string("split")) {
        None => {
            let path = out.join("dataset.csv");
            dataset.write_csv_path(&path)?;
            println!("wrote {} ({} points)", path.display(), dataset.len());
        }
        Some(text) => {
            let fractions: Vec<f64> = text
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidParameter(format!("bad fraction `{s}`")))
                })
                .collect::<Result<_>>()?;
            let parts = split(&dataset, &fractions, seed)?;
            let names: Vec<String> = match parts.len() {
                2 => vec!["train.csv".into(), "test.csv".into()],
                3 => vec!["train.csv".into(), "calibration.csv".into(), "test.csv".into()],
                _ => (1..=parts.len()).map(|i| format!("part{i}.csv")).collect(),
            };
            for (part, name) in parts.iter().zip(&names) {
                let path = out.join(name);
                part.write_csv_path(&path)?;
                println!("wrote {} ({} points)", path.display(), part.len());
            }
        }
    }
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let data_path = required(args.data.clone().or_else(|| cfg.path("data")), "data")?;
    let dataset = LabeledDataset::read_csv_path(&data_path)?;
    let defaults = TrainConfig::default();
    let taus = match args.taus.clone().or_else(|| cfg.string("taus")) {
        Some(text) => parse_taus(&text)?,
        None => defaults.taus.clone(),
    };
    let train_config = TrainConfig {
        kernel: parse_kernel(&args, &cfg)?,
        eta: args.eta.or_else(|| cfg.f64("eta")).unwrap_or(defaults.eta),
        taus,
        kkt_tol: args
            .kkt_tol
            .or_else(|| cfg.f64("kkt_tol"))
            .unwrap_or(defaults.kkt_tol),
        max_passes: args
            .max_passes
            .or_else(|| cfg.usize("max_passes"))
            .unwrap_or(defaults.max_passes),
        seed: RngSeed(args.seed.or_else(|| cfg.u64("seed")).unwrap_or(0)),
    };
    let out = out_dir(args.out, &cfg)?;
    let outcome = train(&dataset, &train_config)?;
    let model_path = out.join("model.json");
    outcome.model.write_json_path(&model_path)?;
    write_json_file(&outcome.diagnostics, &out.join("diagnostics.json"))?;
    println!(
        "trained on {} points: {} support vectors, {} epochs, KKT violation {:.3e}",
        dataset.len(),
        outcome.model.n_support(),
        outcome.diagnostics.epochs,
        outcome.diagnostics.final_kkt_violation
    );
    println!("wrote {}", model_path.display());
    Ok(())
}

fn run_calibrate(args: CalibrateArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let model = McSvmModel::read_json_path(&required(
        args.model.clone().or_else(|| cfg.path("model")),
        "model",
    )?)?;
    let data = LabeledDataset::read_csv_path(&required(
        args.data.clone().or_else(|| cfg.path("data")),
        "data",
    )?)?;
    let method = required(args.method.clone().or_else(|| cfg.string("method")), "method")?;
    let eps = args.eps.or_else(|| cfg.f64("eps"));
    let delta = args.delta.or_else(|| cfg.f64("delta")).unwrap_or(0.05);
    let result: CalibrationResult = match method.as_str() {
        "bias-adj" => bias_adjustment(&model, &data)?,
        "scaling" => probabilistic_scaling_bias(&model, &data, required(eps, "eps")?, delta)?,
        "conformal" => conformal_bias(&model, &data, required(eps, "eps")?, delta)?,
        "hinge" => {
            let target = match args
                .target
                .clone()
                .or_else(|| cfg.string("target"))
                .unwrap_or_else(|| "fp".into())
                .as_str()
            {
                "fn" => ErrorTarget::FalseNegative,
                "fp" => ErrorTarget::FalsePositive,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "target must be fn or fp, got `{other}`"
                    )))
                }
            };
            epsilon_hinge_bias(&model, &data, required(eps, "eps")?, target)?
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "method must be bias-adj|scaling|conformal|hinge, got `{other}`"
            )))
        }
    };
    let out = out_dir(args.out, &cfg)?;
    let path = out.join("calibration.json");
    write_json_file(&result, &path)?;
    if result.b.is_finite() {
        println!("calibrated b = {} ({method})", result.b);
    } else {
        println!("calibrated b = +inf (whole space; too few unsafe points)");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn load_calibration_b(path: &Path) -> Result<f64> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    match &value["b"] {
        Value::Number(num) => num
            .as_f64()
            .ok_or_else(|| Error::InvalidParameter("calibration b is not a float".into())),
        // A null b is the serialized whole-space sentinel (b = +inf).
        Value::Null => Ok(f64::INFINITY),
        _ => Err(Error::InvalidParameter("calibration file has no `b`".into())),
    }
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let model = McSvmModel::read_json_path(&required(
        args.model.clone().or_else(|| cfg.path("model")),
        "model",
    )?)?;
    let data = LabeledDataset::read_csv_path(&required(
        args.data.clone().or_else(|| cfg.path("data")),
        "data",
    )?)?;
    let b = match (args.b.or_else(|| cfg.f64("b")), args.calibration.clone().or_else(|| cfg.path("calibration"))) {
        (Some(b), _) => b,
        (None, Some(path)) => load_calibration_b(&path)?,
        (None, None) => {
            return Err(Error::InvalidParameter(
                "provide --b or --calibration".into(),
            ))
        }
    };
    let report = evaluate(&model, b, &data)?;
    let out = out_dir(args.out, &cfg)?;
    let path = out.join("report.json");
    write_json_file(&serde_json::json!({ "b": b, "report": report }), &path)?;
    println!(
        "n = {}, accuracy = {:.4}, fpr = {}, fnr = {}",
        report.n(),
        report.accuracy,
        report
            .fpr
            .map_or("undefined".into(), |v| format!("{v:.4}")),
        report
            .fnr
            .map_or("undefined".into(), |v| format!("{v:.4}")),
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn parse_bounds(text: &str) -> Result<GridBounds> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad bound `{s}`")))
        })
        .collect::<Result<_>>()?;
    if parts.len() != 4 {
        return Err(Error::InvalidParameter(
            "bounds must be x_min,x_max,y_min,y_max".into(),
        ));
    }
    Ok(GridBounds {
        x_min: parts[0],
        x_max: parts[1],
        y_min: parts[2],
        y_max: parts[3],
    })
}

fn parse_resolution(text: &str) -> Result<(usize, usize)> {
    let (cols, rows) = text
        .split_once('x')
        .ok_or_else(|| Error::InvalidParameter("resolution must be COLSxROWS".into()))?;
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::InvalidParameter(format!("bad resolution `{s}`")))
    };
    Ok((parse(cols)?, parse(rows)?))
}

fn run_exact_sdr(args: ExactSdrArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let model_s = load_gaussian(&required(
        args.model_s.clone().or_else(|| cfg.path("model_s")),
        "model-s",
    )?)?;
    let model_u = load_gaussian(&required(
        args.model_u.clone().or_else(|| cfg.path("model_u")),
        "model-u",
    )?)?;
    let ps = required(args.ps.or_else(|| cfg.f64("ps")), "ps")?;
    let eps = required(args.eps.or_else(|| cfg.f64("eps")), "eps")?;
    let spec = SafeRegionSpec::new(ps, eps)?;
    let boundary = classify_boundary(&model_s, &model_u, 1e-9)?;
    let out = out_dir(args.out, &cfg)?;

    let summary = serde_json::json!({
        "p_s": ps,
        "epsilon": eps,
        "rho": spec.rho(),
        "rho_prior": spec.rho_prior(),
        "rho_risk": spec.rho_risk(),
        "boundary": BoundarySummary::from(&boundary),
    });
    let boundary_path = out.join("boundary.json");
    write_json_file(&summary, &boundary_path)?;
    println!(
        "boundary kind: {}, rho = {:.6}",
        boundary.kind_name(),
        spec.rho()
    );
    println!("wrote {}", boundary_path.display());

    if let Some(data_path) = args.data.clone().or_else(|| cfg.path("data")) {
        let data = LabeledDataset::read_csv_path(&data_path)?;
        let report = evaluate_exact(&model_s, &model_u, &spec, &data)?;
        let path = out.join("report.json");
        write_json_file(&report, &path)?;
        println!(
            "n = {}, accuracy = {:.4}, fpr = {}",
            report.n(),
            report.accuracy,
            report
                .fpr
                .map_or("undefined".into(), |v| format!("{v:.4}"))
        );
        println!("wrote {}", path.display());
    }

    let want_contour = args.contour || cfg.bool("contour").unwrap_or(false);
    if want_contour {
        let bounds = match args.bounds.clone().or_else(|| cfg.string("bounds")) {
            Some(text) => parse_bounds(&text)?,
            None => GridBounds::covering([&model_s, &model_u], 4.0)?,
        };
        let resolution = match args.res.clone().or_else(|| cfg.string("res")) {
            Some(text) => parse_resolution(&text)?,
            None => (200, 200),
        };
        let grid = export_contour(
            &ContourSource::Exact {
                model_s: &model_s,
                model_u: &model_u,
                spec,
            },
            bounds,
            resolution,
        )?;
        let path = out.join("contour.csv");
        grid.write_csv_path(&path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_reproduce(args: ReproduceArgs) -> Result<()> {
    let cfg = FileConfig::load(None)?;
    let out = out_dir(args.out, &cfg)?;
    let seed = RngSeed(args.seed.unwrap_or(42));
    match args.example {
        1 => {
            let report = reproduce_example1((200, 200), Some(&out))?;
            println!(
                "boundary kind: {} (eigenvalue signature {:?})",
                report.boundary.kind, report.boundary.eig_signature
            );
            println!("{} contour grids in {}", report.grids.len(), out.display());
        }
        2 => {
            let mut config = Example2Config {
                seed,
                ..Example2Config::default()
            };
            if let Some(n) = args.n {
                config.n = n;
            }
            if let Some(tol) = args.kkt_tol {
                config.kkt_tol = tol;
            }
            let report = reproduce_example2(&config, Some(&out))?;
            for (m, sim) in &report.similarities {
                println!("m = {m:>2}: cross-prior hyperplane cosine = {sim:.6}");
            }
            println!("wrote {}", out.join("similarities.json").display());
        }
        3 => {
            let mut config = Example3Config {
                seed,
                ..Example3Config::default()
            };
            if let Some(n) = args.n {
                config.n_train = n;
            }
            if let Some(tol) = args.kkt_tol {
                config.kkt_tol = tol;
            }
            let report = reproduce_example3(&config, Some(&out))?;
            println!(
                "exact region fpr = {}",
                report
                    .exact
                    .fpr
                    .map_or("undefined".into(), |v| format!("{v:.4}"))
            );
            for (name, b, kernel_report) in &report.kernels {
                println!(
                    "{name:>9}: b = {b:.6}, fpr = {}",
                    kernel_report
                        .fpr
                        .map_or("undefined".into(), |v| format!("{v:.4}"))
                );
            }
            println!("wrote {}", out.join("fpr_report.json").display());
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "example must be 1, 2, or 3, got {other}"
            )))
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(args) => run_sample(args),
        Command::Train(args) => run_train(args),
        Command::Calibrate(args) => run_calibrate(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::ExactSdr(args) => run_exact_sdr(args),
        Command::Reproduce(args) => run_reproduce(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
