//! `irrm train`: deterministic training with periodic checkpoints.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use irrm_core::metrics_io::{load_png, to_tensor};
use irrm_core::model::IrrmModel;
use irrm_core::train::{load_train_state, save_train_checkpoint, Dataset, Trainer};

use super::Flags;
use crate::config::Resolver;
use crate::{CliError, CliResult};

pub fn run(mut flags: Flags) -> CliResult<()> {
    let data_dir = PathBuf::from(flags.take_required("data")?);
    let out_dir = PathBuf::from(flags.take_required("out")?);
    let config_path = flags.take("config").map(PathBuf::from);
    let resume = flags.take("resume").map(PathBuf::from);

    let mut resolver = Resolver::new();
    if let Some(path) = &config_path {
        resolver.load_file(path)?;
    }
    resolver.apply_flags(&flags.into_config_pairs())?;
    let settings = resolver.resolve()?;
    let echo = resolver.echo();
    eprint!("{echo}");

    // validate inputs before creating any outputs
    let dataset = load_dataset(&data_dir, settings.train.patch)?;
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    let (model, adam) = match &resume {
        Some(ckpt) => {
            let (model, adam) = load_train_state(ckpt)?;
            eprintln!("resumed from {} at step {}", ckpt.display(), adam.step);
            (model, adam)
        }
        None => (
            IrrmModel::init(settings.model, settings.train.seed)?,
            Default::default(),
        ),
    };
    let mut trainer = Trainer::with_state(model, dataset, settings.train, adam)?;

    // resolved-config copy next to the outputs
    fs::write(out_dir.join("config.resolved"), &echo)?;

    let log_path = out_dir.join("train.log");
    let mut log: Box<dyn Write> = if resume.is_some() {
        Box::new(
            fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&log_path)?,
        )
    } else {
        Box::new(fs::File::create(&log_path)?)
    };

    let outcome = trainer.run(&mut log, |t, step| {
        save_train_checkpoint(t, &checkpoint_path(&out_dir, step))
    });
    log.flush().ok();
    match outcome {
        Ok(()) => {
            save_train_checkpoint(&trainer, &out_dir.join("model.irrm"))?;
            eprintln!(
                "done: {} steps, model written to {}",
                trainer.completed_steps(),
                out_dir.join("model.irrm").display()
            );
            Ok(())
        }
        Err(e) => {
            // periodic checkpoints stay on disk as the last good state
            eprintln!(
                "training halted after {} completed steps",
                trainer.completed_steps()
            );
            Err(e.into())
        }
    }
}

fn checkpoint_path(out_dir: &Path, step: u64) -> PathBuf {
    out_dir.join(format!("step_{step}.irrm"))
}

fn load_dataset(dir: &Path, patch: usize) -> CliResult<Dataset> {
    let files = super::list_pngs(dir)?;
    let mut images = Vec::with_capacity(files.len());
    for path in &files {
        let img = load_png(path)?;
        if img.width < patch || img.height < patch {
            eprintln!(
                "warning: skipping {} ({}x{} is smaller than the {patch}-pixel patch)",
                path.display(),
                img.width,
                img.height
            );
            continue;
        }
        images.push(to_tensor::<f32>(&img));
    }
    if images.is_empty() {
        return Err(CliError::Data(format!(
            "no usable training images in {} (all smaller than patch size {patch})",
            dir.display()
        )));
    }
    Ok(Dataset::new(images))
}
