use serde::{Deserialize, Serialize};

use crate::error::{FeaeError, Result};
use crate::fewshot::BenignSource;
use crate::graph::Neighborhood;
use crate::ssl::{AugmentationPreset, Reduction, SslMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderMode {
    /// Train on the few-shot edge set only.
    #[default]
    FewShot,
    /// Train on every training edge with its true label.
    Supervised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: usize,
    pub mlp_hidden: usize,
    pub encoder_epochs_max: usize,
    pub encoder_patience: usize,
    pub decoder_epochs_max: usize,
    pub decoder_patience: usize,
    pub lr_encoder: f64,
    pub wd_encoder: f64,
    pub lr_decoder: f64,
    pub wd_decoder: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Labeled attacks per family.
    pub k: usize,
    pub benign_frac: f64,
    pub benign_source: BenignSource,
    pub augmentation: AugmentationPreset,
    /// Share of extra edges added by the `aug2` positive view.
    pub random_edge_ratio: f64,
    pub ssl_mode: SslMode,
    pub decoder_mode: DecoderMode,
    pub recon_reduction: Reduction,
    pub neighborhood: Neighborhood,
    pub sample_frac: f64,
    pub train_frac: f64,
    pub quantile_low: f64,
    pub quantile_high: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 128,
            mlp_hidden: 128,
            encoder_epochs_max: 600,
            encoder_patience: 150,
            decoder_epochs_max: 4000,
            decoder_patience: 1500,
            lr_encoder: 1e-3,
            wd_encoder: 1e-2,
            lr_decoder: 1e-3,
            wd_decoder: 1e-5,
            alpha: 0.2,
            beta: 0.8,
            k: 1,
            benign_frac: 0.05,
            benign_source: BenignSource::Assumed,
            augmentation: AugmentationPreset::DgiDefault,
            random_edge_ratio: 0.1,
            ssl_mode: SslMode::Hybrid,
            decoder_mode: DecoderMode::FewShot,
            recon_reduction: Reduction::Mean,
            neighborhood: Neighborhood::Both,
            sample_frac: 0.1,
            train_frac: 0.7,
            quantile_low: 0.01,
            quantile_high: 0.99,
            threshold: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(FeaeError::Config(m));
        if self.hidden == 0 || self.mlp_hidden == 0 {
            return fail("hidden sizes must be positive".into());
        }
        for (name, v) in [
            ("lr_encoder", self.lr_encoder),
            ("lr_decoder", self.lr_decoder),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be a positive finite rate, got {v}"));
            }
        }
        for (name, v) in [
            ("wd_encoder", self.wd_encoder),
            ("wd_decoder", self.wd_decoder),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if self.encoder_epochs_max == 0 || self.decoder_epochs_max == 0 {
            return fail("epoch limits must be positive".into());
        }
        let unit_open = |v: f64| v > 0.0 && v < 1.0;
        if !(self.benign_frac > 0.0 && self.benign_frac <= 1.0) {
            return fail(format!("benign_frac {} outside (0, 1]", self.benign_frac));
        }
        if !(self.sample_frac > 0.0 && self.sample_frac <= 1.0) {
            return fail(format!("sample_frac {} outside (0, 1]", self.sample_frac));
        }
        if !unit_open(self.train_frac) {
            return fail(format!("train_frac {} outside (0, 1)", self.train_frac));
        }
        if !unit_open(self.random_edge_ratio) {
            return fail(format!(
                "random_edge_ratio {} outside (0, 1)",
                self.random_edge_ratio
            ));
        }
        if !(0.0 <= self.quantile_low
            && self.quantile_low < self.quantile_high
            && self.quantile_high <= 1.0)
        {
            return fail(format!(
                "quantiles must satisfy 0 <= low < high <= 1, got {} and {}",
                self.quantile_low, self.quantile_high
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return fail(format!("threshold {} outside [0, 1]", self.threshold));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            toml::from_str(text).map_err(|e| FeaeError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FeaeError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(
            (c.hidden, c.encoder_epochs_max, c.encoder_patience),
            (128, 600, 150)
        );
        assert_eq!((c.decoder_epochs_max, c.decoder_patience), (4000, 1500));
        assert_eq!((c.wd_encoder, c.wd_decoder), (1e-2, 1e-5));
        assert_eq!((c.alpha, c.beta), (0.2, 0.8));
    }

    #[test]
    fn toml_round_trip_and_partial() {
        let c = TrainConfig {
            k: 4,
            ssl_mode: SslMode::DgiOnly,
            ..Default::default()
        };
        assert_eq!(TrainConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        let p = TrainConfig::from_toml("k = 3\naugmentation = \"aug2\"\n").unwrap();
        assert_eq!(p.k, 3);
        assert_eq!(p.augmentation, AugmentationPreset::Aug2);
        assert_eq!(p.hidden, 128);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(TrainConfig::from_toml("lr_encoder = 0.0").is_err());
        assert!(TrainConfig::from_toml("encoder_epochs_max = 0").is_err());
        assert!(TrainConfig::from_toml("alpha = -1.0").is_err());
        assert!(TrainConfig::from_toml("colour = 3").is_err());
        assert!(TrainConfig::from_toml("ssl_mode = \"both\"").is_err());
    }
}
