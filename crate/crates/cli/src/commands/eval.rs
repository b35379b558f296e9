//! `irrm eval` (alias `roundtrip`): per-image and mean PSNR/SSIM over K
//! independent latent draws, plus the spread across draws. Also evaluates
//! the bicubic down/up baseline with `--bicubic`.

use std::path::PathBuf;

use irrm_core::metrics_io::{bicubic_resize, load_png, psnr_y, ssim_y, to_tensor, ImageU8};
use irrm_core::model::{load_model, IrrmModel};

use super::Flags;
use crate::config::Resolver;
use crate::{CliError, CliResult};

struct ImageScores {
    name: String,
    /// psnr[draw], ssim[draw]
    psnr: Vec<f64>,
    ssim: Vec<f64>,
}

pub fn run(mut flags: Flags) -> CliResult<()> {
    let data_dir = PathBuf::from(flags.take_required("data")?);
    let model_path = flags.take("model").map(PathBuf::from);
    let bicubic_baseline = flags.take("bicubic").map(|v| v == "true").unwrap_or(false);
    let config_path = flags.take("config").map(PathBuf::from);

    let mut resolver = Resolver::new();
    if let Some(path) = &config_path {
        resolver.load_file(path)?;
    }
    resolver.apply_flags(&flags.into_config_pairs())?;
    let settings = resolver.resolve()?;
    eprint!("{}", resolver.echo());

    if model_path.is_none() && !bicubic_baseline {
        return Err(CliError::Usage(
            "eval needs --model CKPT or --bicubic".into(),
        ));
    }

    let model = match &model_path {
        Some(p) => Some(load_model(p)?.0),
        None => None,
    };
    let scale = model
        .as_ref()
        .map(|m| m.scale())
        .unwrap_or(settings.model.scale);
    let draws = if bicubic_baseline {
        1
    } else {
        settings.draws.max(1)
    };
    let files = super::list_pngs(&data_dir)?;

    let scores = run_parallel(&files, |idx, path| {
        let img = load_png(path)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let scores = match &model {
            Some(m) => eval_model_image(m, &img, idx as u64, draws, &settings)?,
            None => eval_bicubic_image(&img, scale, settings.crop_border)?,
        };
        Ok(ImageScores {
            name,
            psnr: scores.0,
            ssim: scores.1,
        })
    })?;

    // per-image rows: mean over draws
    for s in &scores {
        println!(
            "{}\t{}\t{:.4}",
            s.name,
            fmt_db(mean(&s.psnr)),
            mean(&s.ssim)
        );
    }
    let image_means: Vec<f64> = scores.iter().map(|s| mean(&s.psnr)).collect();
    let ssim_means: Vec<f64> = scores.iter().map(|s| mean(&s.ssim)).collect();
    println!(
        "mean\t{}\t{:.4}",
        fmt_db(mean(&image_means)),
        mean(&ssim_means)
    );

    // spread: range of the per-draw dataset means
    let per_draw_mean = |d: usize, of: &dyn Fn(&ImageScores) -> &Vec<f64>| -> f64 {
        mean(&scores.iter().map(|s| of(s)[d]).collect::<Vec<_>>())
    };
    let psnr_by_draw: Vec<f64> = (0..draws).map(|d| per_draw_mean(d, &|s| &s.psnr)).collect();
    let ssim_by_draw: Vec<f64> = (0..draws).map(|d| per_draw_mean(d, &|s| &s.ssim)).collect();
    println!(
        "spread\t{:.4}\t{:.4}",
        range(&psnr_by_draw),
        range(&ssim_by_draw)
    );
    Ok(())
}

fn eval_model_image(
    model: &IrrmModel<f32>,
    img: &ImageU8,
    image_idx: u64,
    draws: usize,
    settings: &crate::config::Settings,
) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let x: irrm_core::Tensor<f32> = to_tensor(img);
    let padded = super::reflect_pad(&x, model.scale());
    let ps = padded.shape();
    let (y, _) = model.forward(&padded)?;
    let y = if settings.quantize_lr {
        y.quantize8()
    } else {
        y
    };

    let mut psnr = Vec::with_capacity(draws);
    let mut ssim = Vec::with_capacity(draws);
    for draw in 0..draws {
        let seed = super::mix_seed(settings.train.seed, image_idx, draw as u64);
        let z = model.sample_latents(1, ps.h, ps.w, settings.sigma, seed)?;
        let x_hat = model.inverse(&y, &z)?;
        let x_hat = super::crop_spatial(&x_hat, img.height, img.width);
        let rec = super::tensor_to_image(&x_hat)?;
        psnr.push(psnr_y(img, &rec, settings.crop_border)?.db_or_inf());
        ssim.push(ssim_y(img, &rec)?);
    }
    Ok((psnr, ssim))
}

fn eval_bicubic_image(
    img: &ImageU8,
    scale: usize,
    crop_border: usize,
) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let x: irrm_core::Tensor<f32> = to_tensor(img);
    let padded = super::reflect_pad(&x, scale);
    let lr = bicubic_resize(&padded, 1.0 / scale as f64)?;
    let up = bicubic_resize(&lr, scale as f64)?;
    let up = super::crop_spatial(&up, img.height, img.width);
    let rec = super::tensor_to_image(&up)?;
    Ok((
        vec![psnr_y(img, &rec, crop_border)?.db_or_inf()],
        vec![ssim_y(img, &rec)?],
    ))
}

/// Map worker threads over the images; output order matches input order and
/// is independent of the thread count. IRRM_THREADS caps the workers.
fn run_parallel<F>(files: &[PathBuf], f: F) -> CliResult<Vec<ImageScores>>
where
    F: Fn(usize, &PathBuf) -> CliResult<ImageScores> + Sync,
{
    let workers = super::thread_cap(files.len());
    if workers <= 1 {
        return files.iter().enumerate().map(|(i, p)| f(i, p)).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<std::sync::Mutex<Option<CliResult<ImageScores>>>> =
        files.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= files.len() {
                    break;
                }
                let out = f(i, &files[i]);
                *results[i].lock().unwrap() = Some(out);
            });
        }
    });
    results
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .unwrap()
                .expect("worker filled every slot")
        })
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn range(values: &[f64]) -> f64 {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return 0.0;
    }
    let max = finite.iter().fold(f64::MIN, |a, &b| a.max(b));
    let min = finite.iter().fold(f64::MAX, |a, &b| a.min(b));
    max - min
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}
