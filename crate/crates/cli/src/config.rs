//! Flat `key = value` configuration with `#` comments. Unknown keys are hard
//! errors, flags override file values, and every run echoes the fully
//! resolved configuration with the source of each value.

use std::collections::BTreeMap;
use std::path::Path;

use irrm_core::model::{CouplingMode, EbKind, ModelConfig};
use irrm_core::train::TrainConfig;

use crate::{CliError, CliResult};

#[derive(Clone, Copy, PartialEq, Debug)]
pub enum Source {
    Default,
    Preset,
    File,
    Flag,
}

impl Source {
    fn label(self) -> &'static str {
        match self {
            Source::Default => "default",
            Source::Preset => "preset",
            Source::File => "file",
            Source::Flag => "flag",
        }
    }
}

/// Every configuration key and its default. `irbs_per_rdm`, `hidden` and
/// `crop_border` default to empty, meaning "derive from preset / scale".
const KEYS: &[(&str, &str)] = &[
    ("scale", "2"),
    ("preset", "s"),
    ("channels", "3"),
    ("irbs_per_rdm", ""),
    ("hidden", ""),
    ("eb_kind", "rb"),
    ("coupling_mode", "three_block"),
    ("clamp_alpha", "1"),
    ("slope", "0.2"),
    ("long_skip", "true"),
    ("lambda1", "8"),
    ("lambda2", "8"),
    ("lambda3", "1"),
    ("lr0", "0.0002"),
    ("beta1", "0.9"),
    ("beta2", "0.999"),
    ("eps_adam", "1e-8"),
    ("halve_every", "10000"),
    ("batch", "4"),
    ("patch", "64"),
    ("augment_flip", "true"),
    ("augment_rotate", "true"),
    ("seed", "0"),
    ("total_steps", "2000"),
    ("grad_clip", "5"),
    ("checkpoint_every", "500"),
    ("draws", "5"),
    ("sigma", "1"),
    ("crop_border", ""),
    ("quantize_lr", "false"),
];

/// Fully resolved settings for a run.
pub struct Settings {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub draws: usize,
    pub sigma: f64,
    pub crop_border: usize,
    pub quantize_lr: bool,
}

pub struct Resolver {
    values: BTreeMap<String, (String, Source)>,
}

impl Resolver {
    pub fn new() -> Self {
        Resolver {
            values: KEYS
                .iter()
                .map(|(k, v)| (k.to_string(), (v.to_string(), Source::Default)))
                .collect(),
        }
    }

    fn set(&mut self, key: &str, value: &str, source: Source) -> CliResult<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = (value.trim().to_string(), source);
                Ok(())
            }
            None => Err(CliError::Usage(format!(
                "unknown configuration key `{key}`"
            ))),
        }
    }

    pub fn load_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("config {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config {}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    lineno + 1
                )));
            };
            self.set(key.trim(), value, Source::File)?;
        }
        Ok(())
    }

    /// Apply `--key value` overrides; every remaining flag must be a config
    /// key.
    pub fn apply_flags(&mut self, flags: &[(String, String)]) -> CliResult<()> {
        for (key, value) in flags {
            self.set(key, value, Source::Flag)?;
        }
        Ok(())
    }

    fn get(&self, key: &str) -> &str {
        &self.values[key].0
    }

    pub fn resolve(&mut self) -> CliResult<Settings> {
        let scale = self.parse_usize("scale")?;
        if !matches!(scale, 2 | 4) {
            return Err(CliError::Usage(format!(
                "scale must be 2 or 4, got {scale}"
            )));
        }
        let preset_base = match self.get("preset") {
            "s" => ModelConfig::preset_s(scale),
            "m" => ModelConfig::preset_m(scale),
            "l" => ModelConfig::preset_l(scale),
            other => {
                return Err(CliError::Usage(format!(
                    "preset must be s, m or l, got `{other}`"
                )))
            }
        };
        // materialize preset-derived keys so the echo shows effective values
        if self.get("irbs_per_rdm").is_empty() {
            self.set(
                "irbs_per_rdm",
                &preset_base.irbs_per_rdm.to_string(),
                Source::Preset,
            )?;
        }
        if self.get("hidden").is_empty() {
            self.set("hidden", &preset_base.hidden.to_string(), Source::Preset)?;
        }
        if self.get("crop_border").is_empty() {
            self.set("crop_border", &scale.to_string(), Source::Preset)?;
        }

        let model = ModelConfig {
            scale,
            channels: self.parse_usize("channels")?,
            irbs_per_rdm: self.parse_usize("irbs_per_rdm")?,
            hidden: self.parse_usize("hidden")?,
            eb_kind: self.parse_enum::<EbKind>("eb_kind")?,
            coupling: self.parse_enum::<CouplingMode>("coupling_mode")?,
            clamp_alpha: self.parse_f64("clamp_alpha")?,
            slope: self.parse_f64("slope")?,
            long_skip: self.parse_bool("long_skip")?,
        };
        let train = TrainConfig {
            lambda1: self.parse_f64("lambda1")?,
            lambda2: self.parse_f64("lambda2")?,
            lambda3: self.parse_f64("lambda3")?,
            lr0: self.parse_f64("lr0")?,
            beta1: self.parse_f64("beta1")?,
            beta2: self.parse_f64("beta2")?,
            eps_adam: self.parse_f64("eps_adam")?,
            halve_every: self.parse_u64("halve_every")?,
            batch: self.parse_usize("batch")?,
            patch: self.parse_usize("patch")?,
            augment_flip: self.parse_bool("augment_flip")?,
            augment_rotate: self.parse_bool("augment_rotate")?,
            seed: self.parse_u64("seed")?,
            total_steps: self.parse_u64("total_steps")?,
            grad_clip: self.parse_f64("grad_clip")?,
            checkpoint_every: self.parse_u64("checkpoint_every")?,
        };
        Ok(Settings {
            model,
            train,
            draws: self.parse_usize("draws")?,
            sigma: self.parse_f64("sigma")?,
            crop_border: self.parse_usize("crop_border")?,
            quantize_lr: self.parse_bool("quantize_lr")?,
        })
    }

    /// One `key = value  # source` line per key, for stderr and for the
    /// resolved-config copy written next to training output.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (key, (value, source)) in &self.values {
            out.push_str(&format!("{key} = {value}  # {}\n", source.label()));
        }
        out
    }

    fn parse_usize(&self, key: &str) -> CliResult<usize> {
        self.get(key)
            .parse()
            .map_err(|_| bad_value(key, self.get(key)))
    }

    fn parse_u64(&self, key: &str) -> CliResult<u64> {
        self.get(key)
            .parse()
            .map_err(|_| bad_value(key, self.get(key)))
    }

    fn parse_f64(&self, key: &str) -> CliResult<f64> {
        self.get(key)
            .parse()
            .map_err(|_| bad_value(key, self.get(key)))
    }

    fn parse_bool(&self, key: &str) -> CliResult<bool> {
        match self.get(key) {
            "true" | "1" | "yes" | "on" => Ok(true),
            "false" | "0" | "no" | "off" => Ok(false),
            other => Err(bad_value(key, other)),
        }
    }

    fn parse_enum<T: std::str::FromStr<Err = String>>(&self, key: &str) -> CliResult<T> {
        self.get(key).parse().map_err(CliError::Usage)
    }
}

fn bad_value(key: &str, value: &str) -> CliError {
    CliError::Usage(format!("bad value `{value}` for configuration key `{key}`"))
}
