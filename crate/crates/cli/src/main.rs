//! `dayahead`: batch front end for synthesis, fitting, forecasting,
//! evaluation and report rendering.
//!
//! On failure a single JSON object is written to stderr, e.g.
//! `{"error":"unknown_model","id":"prophetx","message":"..."}`, and the
//! process exits with status 2 (usage or configuration) or 1 (anything else).

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dayahead::evaluation::{render_report, run_manifest, DataSource, Dataset, EvalReport, Manifest, ReportFormat};
use dayahead::models::{DataView, FittedModel, ModelSpec};
use dayahead::series::write_csv;
use dayahead::synth::generate;
use dayahead::{Error, SLOTS_PER_DAY};
use serde::{Deserialize, Serialize};

use config::{Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "dayahead", version, about = "Day-ahead electricity-load forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic buildings and weather as CSV.
    Synth(Common),
    /// Fit models on the days before `--day` and write their parameters.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Origin: models see days `0..day` (default: all days).
        #[arg(long)]
        day: Option<usize>,
    },
    /// Write a 96-row forecast CSV per model for one target day.
    Forecast {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        day: usize,
        /// Directory written by `fit`; models are loaded instead of refitted.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
    /// Rolling-origin evaluation; writes reports and a replay manifest.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Replay a saved manifest instead of reading a config.
        #[arg(long, conflicts_with = "config")]
        manifest: Option<PathBuf>,
    },
    /// Render saved reports.
    Report {
        /// `reports.json` written by `evaluate`.
        #[arg(long)]
        reports: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_days: Option<usize>,
    /// Comma-separated model ids.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum FormatArg {
    TextTable,
    Csv,
    SvgPlot,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::TextTable => ReportFormat::TextTable,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::SvgPlot => ReportFormat::SvgPlot,
        }
    }
}

/// Written next to fitted parameters.
#[derive(Serialize, Deserialize)]
struct FitManifest {
    data_sha256: String,
    origin_day: usize,
    train_days: usize,
    data: DataSource,
    models: Vec<ModelSpec>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

fn load_config(c: &Common) -> Result<(RunConfig, PathBuf), Error> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: c.seed,
        train_days: c.train_days,
        models: c.models.clone(),
        out: c.out.clone(),
    })?;
    let base = c
        .config
        .as_ref()
        .and_then(|p| p.parent())
        .map(Path::to_path_buf)
        .unwrap_or_default();
    Ok((cfg, base))
}

fn synth(c: &Common) -> Result<(), Error> {
    let (cfg, _) = load_config(c)?;
    let DataSource::Synth { synth, .. } = &cfg.data else {
        return Err(Error::Config {
            path: "data.kind".into(),
            message: "`synth` needs a synthetic data source".into(),
        });
    };
    let out = cfg.out_dir();
    let data = generate(synth)?;
    write(&out.join("community.csv"), write_csv(&data.community(), Some(&data.weather))?)?;
    for (k, b) in data.buildings.iter().enumerate() {
        write(&out.join(format!("building_{k}.csv")), write_csv(b, None)?)?;
    }
    let text = toml::to_string(synth).map_err(|e| Error::Format(e.to_string()))?;
    write(&out.join("synth.toml"), text)?;
    println!("wrote {} days for {} buildings to {}", synth.n_days, data.buildings.len(), out.display());
    Ok(())
}

fn dataset(cfg: &RunConfig, base: &Path) -> Result<Dataset, Error> {
    cfg.data.load(base, &cfg.holidays)
}

fn fit(c: &Common, day: Option<usize>) -> Result<(), Error> {
    let (cfg, base) = load_config(c)?;
    cfg.require_models()?;
    let data = dataset(&cfg, &base)?;
    let d = day.unwrap_or(data.load.n_days());
    let view = DataView::truncated(&data.load, data.weather.as_ref(), &data.calendar, d)?;
    let out = cfg.out_dir();
    for spec in &cfg.models {
        let fitted = spec.fit(&view, cfg.train_days)?;
        if matches!(fitted, FittedModel::Oracle) {
            continue;
        }
        let path = out.join("models").join(format!("{}.{}", spec.id(), fitted.file_extension()));
        write(&path, fitted.to_bytes()?)?;
        println!("{}: {}", spec.id(), path.display());
    }
    let manifest = FitManifest {
        data_sha256: data.sha256()?,
        origin_day: d,
        train_days: cfg.train_days,
        data: cfg.data.clone(),
        models: cfg.models.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    write(&out.join("fit_manifest.toml"), text)
}

fn load_checkpoint(dir: &Path, id: &str) -> Result<FittedModel, Error> {
    for ext in ["json", "bin"] {
        let path = dir.join("models").join(format!("{id}.{ext}"));
        if path.exists() {
            return FittedModel::from_bytes(&fs::read(&path).map_err(io_err(&path))?);
        }
    }
    Err(Error::Input(format!("no checkpoint for `{id}` under {}", dir.display())))
}

fn forecast(c: &Common, day: usize, checkpoints: Option<&Path>) -> Result<(), Error> {
    let (cfg, base) = load_config(c)?;
    cfg.require_models()?;
    let data = dataset(&cfg, &base)?;
    let view = DataView::truncated(&data.load, data.weather.as_ref(), &data.calendar, day)?;
    let out = cfg.out_dir();
    let date = data.calendar.date_of(day);
    for spec in &cfg.models {
        let model = match checkpoints {
            Some(dir) => load_checkpoint(dir, spec.id())?,
            None => spec.fit(&view, cfg.train_days)?,
        };
        let f = match model {
            FittedModel::Oracle => {
                return Err(Error::Input("the oracle only exists inside `evaluate`".into()));
            }
            m => m.forecast(&view)?,
        };
        let mut text = String::from("timestamp,forecast_kw\n");
        for (t, v) in f.values.iter().enumerate() {
            let ts = date.and_hms_opt(0, 0, 0).expect("midnight") + chrono::Duration::minutes(15 * t as i64);
            text.push_str(&format!("{},{v}\n", ts.format("%Y-%m-%dT%H:%M:%SZ")));
        }
        debug_assert_eq!(f.values.len(), SLOTS_PER_DAY);
        let path = out.join(format!("forecast_{}_day{day}.csv", spec.id()));
        write(&path, text)?;
        println!("{}: {}", spec.id(), path.display());
    }
    Ok(())
}

fn write_reports(reports: &[EvalReport], out: &Path, only: Option<ReportFormat>) -> Result<(), Error> {
    let all = [
        (ReportFormat::TextTable, "report.txt"),
        (ReportFormat::Csv, "report.csv"),
        (ReportFormat::SvgPlot, "report.svg"),
    ];
    for (format, name) in all {
        if only.is_none_or(|f| f == format) {
            write(&out.join(name), render_report(reports, format))?;
        }
    }
    Ok(())
}

fn evaluate(c: &Common, manifest_path: Option<&Path>) -> Result<(), Error> {
    let (manifest, base, out) = match manifest_path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            let m = Manifest::from_toml(&text)?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            let out = c.out.clone().unwrap_or_else(|| base.clone());
            (m, base, out)
        }
        None => {
            let (cfg, base) = load_config(c)?;
            cfg.require_models()?;
            let data = dataset(&cfg, &base)?;
            let mut source = cfg.data.clone();
            if let DataSource::Csv { path, .. } = &mut source {
                *path = fs::canonicalize(&*path).map_err(io_err(path))?;
            }
            let m = Manifest::new(
                source,
                cfg.holidays.clone(),
                cfg.cv(data.load.n_days()),
                cfg.models.clone(),
                &data,
            )?;
            (m, base, cfg.out_dir())
        }
    };
    let reports = run_manifest(&manifest, &base)?;
    write(&out.join("manifest.toml"), manifest.to_toml()?)?;
    let json = serde_json::to_vec_pretty(&reports).map_err(|e| Error::Format(e.to_string()))?;
    write(&out.join("reports.json"), json)?;
    write_reports(&reports, &out, None)?;
    print!("{}", String::from_utf8_lossy(&render_report(&reports, ReportFormat::TextTable)));
    Ok(())
}

fn report(reports: &Path, format: Option<FormatArg>, out: Option<&Path>) -> Result<(), Error> {
    let bytes = fs::read(reports).map_err(io_err(reports))?;
    let parsed: Vec<EvalReport> = serde_json::from_slice(&bytes).map_err(|e| Error::Format(e.to_string()))?;
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| reports.parent().map(Path::to_path_buf).unwrap_or_default());
    write_reports(&parsed, &dir, format.map(Into::into))?;
    print!("{}", String::from_utf8_lossy(&render_report(&parsed, ReportFormat::TextTable)));
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth(c) => synth(&c),
        Command::Fit { common, day } => fit(&common, day),
        Command::Forecast {
            common,
            day,
            checkpoints,
        } => forecast(&common, day, checkpoints.as_deref()),
        Command::Evaluate { common, manifest } => evaluate(&common, manifest.as_deref()),
        Command::Report { reports, format, out } => report(&reports, format, out.as_deref()),
    }
}

fn error_line(e: &Error) -> (serde_json::Value, u8) {
    let message = e.to_string();
    match e {
        Error::UnknownModel { id, valid } => (
            serde_json::json!({"error": "unknown_model", "id": id, "valid": valid, "message": message}),
            2,
        ),
        Error::Config { path, .. } => (
            serde_json::json!({"error": "config", "key_path": path, "message": message}),
            2,
        ),
        Error::Io { path, .. } => (
            serde_json::json!({"error": "io", "path": path, "message": message}),
            1,
        ),
        _ => (serde_json::json!({"error": "failed", "message": message}), 1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (line, code) = error_line(&e);
            eprintln!("{line}");
            ExitCode::from(code)
        }
    }
}
