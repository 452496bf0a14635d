use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use priormvs::synthetic::PriorStyle;

mod config;
mod diff;
mod failure;
mod fsutil;
mod infer;
mod pipeline;
mod stages;
mod synth;

use config::{require_path, PipelineConfig};
use stages::SceneKind;
use failure::Failure;

/// Plane-sweep multi-view stereo with depth-prior supervision and correction.
///
/// Log level comes from PRIORMVS_LOG (e.g. `warn`, `debug`).
#[derive(Debug, Parser)]
#[command(name = "priormvs", version)]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by commands that read the pipeline config.
#[derive(Debug, Args)]
struct Common {
    /// TOML config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Confidence threshold for correction.
    #[arg(long)]
    tau: Option<f32>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build pseudo-supervised samples from a scene and its priors.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        priors: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Warped source views per sample.
        #[arg(long)]
        views: Option<usize>,
    },
    /// Estimate per-view depth and confidence.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        priors: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Source views per reference view.
        #[arg(long)]
        sources: Option<usize>,
        /// Skip prior correction even when priors are given.
        #[arg(long, conflicts_with = "compare")]
        no_correction: bool,
        /// Also run without correction and report the changed-pixel fraction.
        #[arg(long)]
        compare: bool,
    },
    /// Replace low-confidence depths using a prior.
    Correct {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        confidence: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuse depth maps from an `infer` output directory into a PLY cloud.
    Fuse {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Directory holding depths/ and optionally confidence/.
        #[arg(long)]
        depths: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Views that must agree on a pixel, reference included.
        #[arg(long)]
        min_views: Option<usize>,
    },
    /// Compare a reconstructed cloud with a reference cloud.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        recon: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        max_dist: Option<f64>,
        /// Distance threshold for precision and recall.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Changed-pixel fraction between two PFM files or directories.
    Diff { a: PathBuf, b: PathBuf },
    /// synth, infer, fuse and eval in one run.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        priors: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a synthetic plane scene with ground truth and priors.
    Scene {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        views: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Omit pair.txt.
        #[arg(long)]
        no_pairs: bool,
        #[arg(long, value_enum, default_value_t = SceneKind::TwoPlanes)]
        kind: SceneKind,
        /// Exponent of the monotone warp applied to the priors.
        #[arg(long, default_value_t = 1.0)]
        prior_gamma: f64,
        /// Gaussian noise added to the priors.
        #[arg(long, default_value_t = 0.0)]
        prior_noise: f64,
    },
}

impl Common {
    fn load(&self) -> Result<PipelineConfig, Failure> {
        let mut cfg = PipelineConfig::load_or_default(self.config.as_deref())?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        Ok(cfg)
    }
}

fn checked(cfg: PipelineConfig) -> Result<PipelineConfig, Failure> {
    cfg.validate()?;
    Ok(cfg)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Synth {
            common,
            scene,
            priors,
            out,
            views,
        } => {
            let mut cfg = common.load()?;
            if let Some(n) = views {
                cfg.synth.num_views = n;
            }
            let cfg = checked(cfg)?;
            let scene = require_path(scene, &cfg.paths.scene, "scene")?;
            let priors = require_path(priors, &cfg.paths.priors, "priors")?;
            let out = require_path(out, &cfg.paths.out, "out")?;
            let s = synth::run(&scene, &priors, &out, &cfg)?;
            println!("samples={} skipped={}", s.written.len(), s.skipped.len());
        }
        Command::Infer {
            common,
            scene,
            priors,
            out,
            sources,
            no_correction,
            compare,
        } => {
            let mut cfg = common.load()?;
            if let Some(n) = sources {
                cfg.infer.sources = n;
            }
            let cfg = checked(cfg)?;
            let scene = require_path(scene, &cfg.paths.scene, "scene")?;
            let priors = priors.or_else(|| cfg.paths.priors.clone());
            let out = require_path(out, &cfg.paths.out, "out")?;
            let mode = match (no_correction, compare) {
                (true, _) => infer::Mode::Uncorrected,
                (_, true) => infer::Mode::Compare,
                _ => infer::Mode::Default,
            };
            let report = infer::run(&scene, priors.as_deref(), &out, &cfg, mode)?;
            print_infer_summary(&report);
        }
        Command::Correct {
            common,
            depth,
            confidence,
            prior,
            out,
        } => {
            let cfg = checked(common.load()?)?;
            let outcome = stages::correct(&depth, &confidence, &prior, &out, &cfg)?;
            if let (Some(m), priormvs::CorrectionStatus::Applied { refined, invalidated }) =
                (outcome.mapping, &outcome.status)
            {
                println!("a={} b={} inliers={} refined={refined} invalidated={invalidated}", m.a, m.b, m.num_inliers);
            }
        }
        Command::Fuse {
            common,
            scene,
            depths,
            out,
            min_views,
        } => {
            let mut cfg = common.load()?;
            if let Some(n) = min_views {
                cfg.fusion.min_consistent_views = n;
            }
            let cfg = checked(cfg)?;
            let scene = require_path(scene, &cfg.paths.scene, "scene")?;
            let fused = stages::fuse_dir(&scene, &depths, &out, &cfg)?;
            println!("points={}", fused.cloud.len());
        }
        Command::Eval {
            common,
            recon,
            gt,
            max_dist,
            threshold,
            json,
        } => {
            let mut cfg = common.load()?;
            if let Some(d) = max_dist {
                cfg.eval.max_dist = d;
            }
            if let Some(t) = threshold {
                cfg.eval.threshold = t;
            }
            let cfg = checked(cfg)?;
            let m = stages::eval(&recon, &gt, &cfg)?;
            if json {
                println!("{}", m.to_json());
            } else {
                print!("{}", m.to_key_value());
            }
        }
        Command::Diff { a, b } => print!("{}", diff::run(&a, &b)?),
        Command::Pipeline {
            common,
            scene,
            priors,
            out,
        } => {
            let cfg = checked(common.load()?)?;
            let scene = require_path(scene, &cfg.paths.scene, "scene")?;
            let priors = require_path(priors, &cfg.paths.priors, "priors")?;
            let out = require_path(out, &cfg.paths.out, "out")?;
            pipeline::run(&scene, &priors, &out, &cfg)?;
            if let Ok(m) = std::fs::read_to_string(out.join("metrics.txt")) {
                print!("{m}");
            }
        }
        Command::Scene {
            out,
            views,
            seed,
            no_pairs,
            kind,
            prior_gamma,
            prior_noise,
        } => {
            let opts = stages::SceneOptions {
                views,
                seed,
                pairs: !no_pairs,
                kind,
                prior: PriorStyle {
                    gamma: prior_gamma,
                    noise: prior_noise,
                    seed,
                },
            };
            stages::make_scene(&out, &opts)?;
            println!("views={views} out={}", out.display());
        }
    }
    Ok(())
}

fn print_infer_summary(report: &serde_json::Value) {
    for v in report["views"].as_array().into_iter().flatten() {
        let mut line = format!("view={}", v["view"]);
        if let Some(c) = v.get("changed_fraction") {
            line += &format!(" changed_fraction={c}");
        }
        if let Some(gt) = v.get("gt") {
            line += &format!(" bad_fraction={} within_interval={}", gt["bad_fraction"], gt["within_interval"]);
        }
        println!("{line}");
    }
}

fn init_logging() {
    let mut builder = env_logger::Builder::new();
    builder.filter_level(log::LevelFilter::Warn).format_timestamp(None);
    if let Ok(spec) = std::env::var("PRIORMVS_LOG") {
        builder.parse_filters(&spec);
    }
    builder.init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { failure::EXIT_USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(failure::EXIT_FAILURE);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
