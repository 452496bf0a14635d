//! All stages in sequence:
//!
//! ```text
//! <out>/config.toml      effective configuration
//! <out>/samples/         synth
//! <out>/infer/           infer
//! <out>/fused.ply        fuse
//! <out>/metrics.txt      eval, when the scene has gt.ply
//! ```

use std::path::Path;

use crate::config::PipelineConfig;
use crate::failure::Failure;
use crate::fsutil::{create_dir, write_file};
use crate::infer::{self, Mode};
use crate::{stages, synth};

pub fn run(scene: &Path, priors: &Path, out: &Path, cfg: &PipelineConfig) -> Result<(), Failure> {
    create_dir(out)?;
    write_file(&out.join("config.toml"), cfg.to_toml())?;
    let s = synth::run(scene, priors, &out.join("samples"), cfg)?;
    log::info!("synth: {} samples", s.written.len());
    infer::run(scene, Some(priors), &out.join("infer"), cfg, Mode::Default)?;
    let fused_path = out.join("fused.ply");
    let fused = stages::fuse_dir(scene, &out.join("infer"), &fused_path, cfg)?;
    log::info!("fuse: {} points", fused.cloud.len());
    let gt = scene.join("gt.ply");
    if gt.is_file() {
        let m = stages::eval(&fused_path, &gt, cfg)?;
        write_file(&out.join("metrics.txt"), m.to_key_value())?;
        log::info!("eval: overall {}", m.overall);
    }
    Ok(())
}
