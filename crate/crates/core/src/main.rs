use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coopvision::harness::{
    self, calibrate, load_pipeline_config, pipeline_config_toml, replay, resolve_out_dir, validate_scenario,
    CalibrationTarget, Experiment, ExperimentSpec, HarnessError, SweepAxis,
};
use coopvision::pipeline::{PipelineConfig, Scheme};
use coopvision::scene::Scene;

/// Cooperative multi-camera analytics simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep and write results.csv, manifest.json and summary.txt.
    Run(RunArgs),
    /// Regenerate a golden tick trace and compare it byte for byte.
    Replay {
        golden: PathBuf,
    },
    /// Fit link and detector constants to a latency-per-rate target.
    Calibrate(CalibrateArgs),
    /// Lint a scenario and print per-camera region histograms.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 32)]
        block_size: u32,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment spec; flags below override its fields.
    spec: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<Scheme>,
    #[arg(long)]
    sweep: Option<SweepAxis>,
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Output directory; falls back to the spec's `out_dir`, then $COOPVISION_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pipeline constants, for example a calibrate output.
    #[arg(long)]
    pipeline: Option<PathBuf>,
    #[arg(long)]
    frame_interval: Option<u64>,
    #[arg(long)]
    block_size: Option<u32>,
    #[arg(long)]
    t_new: Option<f64>,
    #[arg(long)]
    t_dis: Option<f64>,
    #[arg(long)]
    t_iou: Option<f64>,
    #[arg(long)]
    t_s: Option<f64>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// TOML with `scheme`, `rates`, `latency` and optional `tolerance`.
    #[arg(long)]
    target: PathBuf,
    /// Starting constants; defaults are used when omitted.
    #[arg(long)]
    pipeline: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Where to write the fitted pipeline TOML.
    #[arg(long)]
    out: PathBuf,
}

fn build_spec(a: RunArgs) -> Result<(ExperimentSpec, Option<PathBuf>), HarnessError> {
    let missing = |f: &str| HarnessError::Invalid(format!("--{f} is required without a spec file"));
    let mut spec = match &a.spec {
        Some(p) => ExperimentSpec::from_file(p)?,
        None => ExperimentSpec {
            scenario: a.scenario.clone().ok_or_else(|| missing("scenario"))?,
            schemes: Scheme::ALL.to_vec(),
            sweep: a.sweep.ok_or_else(|| missing("sweep"))?,
            values: Vec::new(),
            seeds: None,
            out_dir: None,
            pipeline: None,
            frame_interval: 1,
            block_size: None,
            t_new: None,
            t_dis: None,
            t_iou: None,
            t_s: None,
        },
    };
    if let Some(s) = a.scenario {
        spec.scenario = s;
    }
    if !a.scheme.is_empty() {
        spec.schemes = a.scheme;
    }
    if let Some(s) = a.sweep {
        spec.sweep = s;
    }
    if !a.values.is_empty() {
        spec.values = a.values;
    }
    if !a.seeds.is_empty() {
        spec.seeds = Some(a.seeds);
    }
    if a.pipeline.is_some() {
        spec.pipeline = a.pipeline;
    }
    if let Some(v) = a.frame_interval {
        spec.frame_interval = v;
    }
    spec.block_size = a.block_size.or(spec.block_size);
    spec.t_new = a.t_new.or(spec.t_new);
    spec.t_dis = a.t_dis.or(spec.t_dis);
    spec.t_iou = a.t_iou.or(spec.t_iou);
    spec.t_s = a.t_s.or(spec.t_s);
    Ok((spec, a.out))
}

fn run(a: RunArgs) -> Result<(), HarnessError> {
    let (spec, out_flag) = build_spec(a)?;
    let out = resolve_out_dir(out_flag.or_else(|| spec.out_dir.clone()).as_deref());
    let exp = Experiment::load(spec)?;
    let res = harness::run_and_write(&exp, &out)?;
    println!("{} rows written to {}", res.table.rows.len(), res.out_dir.display());
    if let Ok(s) = harness::summarize(&res.table) {
        print!("{}", s.render());
    }
    Ok(())
}

fn calibrate_cmd(a: CalibrateArgs) -> Result<(), HarnessError> {
    let scene = Scene::from_file(&a.scenario)?;
    let base = match &a.pipeline {
        Some(p) => load_pipeline_config(p)?,
        None => PipelineConfig::default(),
    };
    let target = CalibrationTarget::from_file(&a.target)?;
    let seeds = if a.seeds.is_empty() {
        (0..5).map(|i| scene.config.seed + i).collect()
    } else {
        a.seeds
    };
    let report = calibrate(&scene, &base, &target, &seeds)?;
    write_file(&a.out, &pipeline_config_toml(&report.config))?;
    println!(
        "fit C = {:.4} s, B = {:.4} s*Mbit/s; compression {:.4}, detector scale {:.4}, overhead {:.4} s",
        report.curve.constant,
        report.curve.per_rate,
        report.compression_factor,
        report.detector_latency_scale,
        report.fixed_overhead
    );
    for c in &report.cells {
        println!(
            "rate {:>6}  target {:.4}  measured {:.4}  error {:.2}%",
            c.rate,
            c.target,
            c.measured,
            c.relative_error * 100.0
        );
    }
    println!(
        "max error {:.2}% ({} {:.0}%)",
        report.max_relative_error * 100.0,
        if report.within_tolerance { "within" } else { "outside" },
        target.tolerance * 100.0
    );
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::Validate { scenario, block_size } => validate_scenario(&scenario, block_size).map(|r| {
            println!("{} ({})", r.scenario, r.fingerprint);
            for c in &r.cameras {
                let h: Vec<String> = c.histogram.iter().map(|(k, v)| format!("{k:?}={v}")).collect();
                println!("camera {}: {} blocks, {}", c.camera_id, c.blocks, h.join(" "));
            }
            for w in &r.warnings {
                println!("warning: {w}");
            }
        }),
        Command::Replay { golden } => match replay(&golden) {
            Ok(o) if o.passed => {
                println!("replay matches {}", golden.display());
                Ok(())
            }
            Ok(o) => {
                if let Some((line, want, got)) = o.first_difference {
                    eprintln!("replay differs at line {line}\n  golden: {want}\n  now:    {got}");
                }
                return ExitCode::from(2);
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
