use std::path::{Path, PathBuf};

use priormvs::{CascadeConfig, FitConfig, FusionConfig, LossConfig, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

/// Everything a run needs; read from TOML, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Confidence threshold for correction. 0.7 suits large outdoor scenes.
    pub tau: f32,
    pub paths: Paths,
    pub synth: SynthConfig,
    pub infer: InferConfig,
    pub cascade: CascadeConfig,
    pub fit: FitConfig,
    pub fusion: FusionConfig,
    pub loss: LossConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            tau: 0.5,
            paths: Paths::default(),
            synth: SynthConfig::default(),
            infer: InferConfig::default(),
            cascade: CascadeConfig::default(),
            fit: FitConfig::default(),
            fusion: FusionConfig::default(),
            loss: LossConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub scene: Option<PathBuf>,
    pub priors: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferConfig {
    /// Source views per reference view.
    pub sources: usize,
    /// Use priors for correction when they are available.
    pub correction: bool,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self {
            sources: 4,
            correction: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub max_dist: f64,
    pub threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            max_dist: priormvs::DEFAULT_MAX_DIST,
            threshold: 0.05,
        }
    }
}

impl PipelineConfig {
    /// Parses a config file. Relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::other(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.paths.scene, &mut cfg.paths.priors, &mut cfg.paths.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, Failure> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |m: String| Err(Failure::usage(format!("invalid config: {m}")));
        let component = |r: priormvs::Result<()>| r.map_err(|e| Failure::usage(format!("invalid config: {e}")));
        component(self.cascade.validate())?;
        component(self.fusion.validate())?;
        component(self.loss.validate())?;
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau must lie in [0, 1], got {}", self.tau));
        }
        if self.loss.num_scales() != self.cascade.num_scales {
            return bad(format!(
                "loss has {} scale weights but the cascade has {} scales",
                self.loss.num_scales(),
                self.cascade.num_scales
            ));
        }
        if self.synth.num_views == 0 || self.infer.sources == 0 {
            return bad("view counts must be at least 1".into());
        }
        if !(self.eval.max_dist > 0.0 && self.eval.threshold > 0.0) {
            return bad("eval max_dist and threshold must be positive".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Path from a flag, else from the config, else an error naming the flag.
pub fn require_path(flag: Option<PathBuf>, cfg: &Option<PathBuf>, name: &str) -> Result<PathBuf, Failure> {
    flag.or_else(|| cfg.clone())
        .ok_or_else(|| Failure::usage(format!("--{name} is required (or set paths.{name} in the config)")))
}
