//! Flat `key = value` run configuration with dotted keys.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geodesic::{Connectivity, BOUNDS_MARGIN, DEFAULT_ENERGY_THRESHOLD, DEFAULT_INFLUENCE};
use crate::nets::TrainConfig;
use crate::vae::ModelConfig;

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Every key with its default, in echo order.
fn defaults() -> Vec<(&'static str, String)> {
    let m = ModelConfig::default();
    let t = TrainConfig::default();
    vec![
        ("gen.seed", "0".into()),
        ("gen.n_traj", "5".into()),
        ("gen.noise", "0.01".into()),
        ("gen.spread", "0.1".into()),
        ("gen.samples", crate::datasets::DEFAULT_SAMPLES.to_string()),
        ("gen.chain", String::new()),
        ("gen.branches", "4".into()),
        ("gen.targets", "1".into()),
        ("gen.starts", "3".into()),
        ("gen.goals", "3".into()),
        ("gen.per_pair", "2".into()),
        ("model.latent_dim", m.latent_dim.to_string()),
        ("model.hidden", join(&m.hidden)),
        ("model.rbf_k", m.rbf_k.to_string()),
        ("model.rbf_bandwidth_scale", m.rbf_bandwidth_scale.to_string()),
        ("model.sigma_init", m.sigma_init.to_string()),
        ("model.kappa_init", m.kappa_init.to_string()),
        ("model.sigma_max", m.sigma_max.to_string()),
        ("model.kappa_min", m.kappa_min.to_string()),
        ("model.eps_reg", m.eps_reg.to_string()),
        ("model.chain", String::new()),
        ("train.learning_rate", t.learning_rate.to_string()),
        ("train.batch_size", t.batch_size.to_string()),
        ("train.epochs", t.epochs.to_string()),
        ("train.pretrain_epochs", t.pretrain_epochs.to_string()),
        ("train.adam_beta1", t.adam_beta1.to_string()),
        ("train.adam_beta2", t.adam_beta2.to_string()),
        ("train.adam_eps", t.adam_eps.to_string()),
        ("train.kl_warmup_epochs", t.kl_warmup_epochs.to_string()),
        ("train.beta_position", t.beta_position.to_string()),
        ("train.beta_orientation", t.beta_orientation.to_string()),
        ("train.rbf_lr_scale", t.rbf_lr_scale.to_string()),
        ("train.signed_warmup", t.signed_warmup.to_string()),
        ("train.seed", t.seed.to_string()),
        ("grid.resolution", "0".into()),
        ("grid.margin", BOUNDS_MARGIN.to_string()),
        ("grid.connectivity", "full".into()),
        ("grid.influence", DEFAULT_INFLUENCE.to_string()),
        ("plan.samples", "100".into()),
        ("plan.control_points", "0".into()),
        ("plan.energy_threshold", DEFAULT_ENERGY_THRESHOLD.to_string()),
        ("render.resolution", "200".into()),
        ("render.format", "ppm,svg".into()),
        ("render.sigma", "false".into()),
        ("eval.seed", "0".into()),
        ("eval.points", "100".into()),
    ]
}

/// Effective configuration: defaults, then a config file, then overrides.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
    order: Vec<&'static str>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = defaults();
        Self { order: d.iter().map(|(k, _)| *k).collect(), values: d.into_iter().collect() }
    }
}

impl RunConfig {
    pub fn keys(&self) -> &[&'static str] {
        &self.order
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = self.order.iter().find(|k| **k == key).ok_or_else(|| Error::Argument(format!("unknown config key `{key}`")))?;
        self.values.insert(k, value.trim().to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| Error::Argument(format!("expected key=value, got `{pair}`")))?;
        self.set(k.trim(), v)
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse { line: i + 1, reason: format!("expected key = value, got `{line}`") })?;
            self.set(k.trim(), v).map_err(|e| Error::Parse { line: i + 1, reason: e.to_string() })?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Load { path: path.to_path_buf(), reason: e.to_string() })?;
        self.merge_str(&text).map_err(|e| Error::Load { path: path.to_path_buf(), reason: e.to_string() })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("unregistered config key {key}"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.raw(key);
        v.parse().map_err(|_| Error::Argument(format!("config key `{key}`: cannot parse `{v}`")))
    }

    /// Comma-separated list; empty means no entries.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let v = self.raw(key);
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',').map(|t| t.trim().parse().map_err(|_| Error::Argument(format!("config key `{key}`: cannot parse `{t}`")))).collect()
    }

    /// Keys under `prefix.` as `key = value` lines.
    pub fn echo(&self, prefixes: &[&str]) -> String {
        let mut out = String::new();
        for k in &self.order {
            if prefixes.iter().any(|p| k.starts_with(&format!("{p}."))) {
                out.push_str(&format!("{k} = {}\n", self.values[k]));
            }
        }
        out
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            latent_dim: self.get("model.latent_dim")?,
            hidden: self.list("model.hidden")?,
            rbf_k: self.get("model.rbf_k")?,
            rbf_bandwidth_scale: self.get("model.rbf_bandwidth_scale")?,
            sigma_init: self.get("model.sigma_init")?,
            kappa_init: self.get("model.kappa_init")?,
            sigma_max: self.get("model.sigma_max")?,
            kappa_min: self.get("model.kappa_min")?,
            eps_reg: self.get("model.eps_reg")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            learning_rate: self.get("train.learning_rate")?,
            batch_size: self.get("train.batch_size")?,
            epochs: self.get("train.epochs")?,
            pretrain_epochs: self.get("train.pretrain_epochs")?,
            adam_beta1: self.get("train.adam_beta1")?,
            adam_beta2: self.get("train.adam_beta2")?,
            adam_eps: self.get("train.adam_eps")?,
            kl_warmup_epochs: self.get("train.kl_warmup_epochs")?,
            beta_position: self.get("train.beta_position")?,
            beta_orientation: self.get("train.beta_orientation")?,
            rbf_lr_scale: self.get("train.rbf_lr_scale")?,
            signed_warmup: self.get("train.signed_warmup")?,
            seed: self.get("train.seed")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn connectivity(&self) -> Result<Connectivity> {
        match self.raw("grid.connectivity") {
            "full" => Ok(Connectivity::Full),
            "axis" => Ok(Connectivity::Axis),
            other => Err(Error::Argument(format!("grid.connectivity must be `full` or `axis`, got `{other}`"))),
        }
    }
}
