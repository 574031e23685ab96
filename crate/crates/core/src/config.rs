//! Flat key-value run configuration with dotted sections.
//!
//! The format is INI-like without section headers: one `section.key =
//! value` per line, `#` comments. Every key has a default, unknown keys
//! are rejected with the full list of valid keys, and
//! [`RunConfig::resolved_text`] serialises the effective configuration
//! back out so artifact directories can pin what actually ran.

use crate::degrade::{DegradationSpec, NoiseSource};
use crate::error::{Error, Result};
use crate::net::bridge_train::BridgeArch;
use crate::net::corpus::CorpusConfig;
use crate::net::vae::VaeArch;
use crate::net::TrainConfig;
use crate::sampler::{SamplerConfig, SamplerMode};
use crate::schedule::{NoiseSchedule, ScheduleKind};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: CorpusConfig,
    pub schedule: NoiseSchedule,
    pub sampler: SamplerConfig,
    pub vae_arch: VaeArch,
    pub bridge_arch: BridgeArch,
    pub train_vae: TrainConfig,
    pub train_prior: TrainConfig,
    pub train_bridge: TrainConfig,
    pub finetune: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = TrainConfig::default();
        RunConfig {
            corpus: CorpusConfig::default(),
            schedule: NoiseSchedule::brownian_bridge(1.0),
            sampler: SamplerConfig::default(),
            vae_arch: VaeArch::default(),
            bridge_arch: BridgeArch::default(),
            train_vae: TrainConfig {
                steps: 3000,
                batch_size: 32,
                learning_rate: 0.01,
                ..base.clone()
            },
            train_prior: TrainConfig {
                steps: 1200,
                batch_size: 32,
                learning_rate: 0.004,
                ..base.clone()
            },
            train_bridge: TrainConfig {
                steps: 3000,
                batch_size: 64,
                learning_rate: 0.01,
                ..base.clone()
            },
            finetune: TrainConfig {
                steps: 400,
                batch_size: 16,
                learning_rate: 0.002,
                ..base
            },
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: expected a number, got {v:?}")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: expected an integer, got {v:?}")))
}

fn parse_u32(key: &str, v: &str) -> Result<u32> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: expected an integer, got {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

fn parse_pair(key: &str, v: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!("{key}: expected `lo,hi`, got {v:?}")));
    }
    Ok((parse_f64(key, parts[0])?, parse_f64(key, parts[1])?))
}

fn parse_u32_pair(key: &str, v: &str) -> Result<(u32, u32)> {
    let (a, b) = parse_pair(key, v)?;
    Ok((a as u32, b as u32))
}

fn parse_u32_list(key: &str, v: &str) -> Result<Vec<u32>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_u32(key, s))
        .collect()
}

fn parse_usize_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_usize(key, s))
        .collect()
}

const TRAIN_KEYS: [&str; 17] = [
    "steps",
    "batch_size",
    "learning_rate",
    "momentum",
    "optimizer",
    "clip_norm",
    "lambda_rec",
    "lambda_adv",
    "lambda_fm",
    "lambda_kl",
    "lambda_mse",
    "lambda_cos",
    "lambda_pesq_proxy",
    "lambda_utmos_proxy",
    "lambda_wav",
    "t_min",
    "preflight",
];

fn apply_train_key(cfg: &mut TrainConfig, key: &str, sub: &str, value: &str) -> Result<bool> {
    match sub {
        "steps" => cfg.steps = parse_usize(key, value)?,
        "batch_size" => cfg.batch_size = parse_usize(key, value)?,
        "learning_rate" => cfg.learning_rate = parse_f64(key, value)?,
        "momentum" => cfg.momentum = parse_f64(key, value)?,
        "optimizer" => {
            cfg.optimizer = match value {
                "sgd" => crate::net::OptimizerKind::Sgd,
                "adam" => crate::net::OptimizerKind::Adam,
                _ => {
                    return Err(Error::Config(format!(
                        "{key}: expected `sgd` or `adam`, got {value:?}"
                    )))
                }
            }
        }
        "clip_norm" => cfg.clip_norm = parse_f64(key, value)?,
        "lambda_rec" => cfg.lambda_rec = parse_f64(key, value)?,
        "lambda_adv" => cfg.lambda_adv = parse_f64(key, value)?,
        "lambda_fm" => cfg.lambda_fm = parse_f64(key, value)?,
        "lambda_kl" => cfg.lambda_kl = parse_f64(key, value)?,
        "lambda_mse" => cfg.lambda_mse = parse_f64(key, value)?,
        "lambda_cos" => cfg.lambda_cos = parse_f64(key, value)?,
        "lambda_pesq_proxy" => cfg.lambda_pesq_proxy = parse_f64(key, value)?,
        "lambda_utmos_proxy" => cfg.lambda_utmos_proxy = parse_f64(key, value)?,
        "lambda_wav" => cfg.lambda_wav = parse_f64(key, value)?,
        "t_min" => cfg.t_min = parse_f64(key, value)?,
        "resolutions" => cfg.resolutions = parse_usize_list(key, value)?,
        "preflight" => cfg.preflight = parse_bool(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn valid_keys() -> Vec<String> {
    let mut keys = vec![
        "corpus.n_train".into(),
        "corpus.n_heldout".into(),
        "corpus.sample_rate".into(),
        "corpus.duration_s".into(),
        "corpus.frame_len".into(),
        "degrade.p_bw".into(),
        "degrade.bw_targets_hz".into(),
        "degrade.p_clip".into(),
        "degrade.clip_range".into(),
        "degrade.p_rev".into(),
        "degrade.p_noise".into(),
        "degrade.snr_range_db".into(),
        "degrade.p_eq".into(),
        "degrade.eq_count_range".into(),
        "degrade.eq_f0_range".into(),
        "degrade.eq_gain_range".into(),
        "degrade.eq_q_range".into(),
        "degrade.rir_rt60_range".into(),
        "degrade.noise_source".into(),
        "schedule.kind".into(),
        "schedule.g0".into(),
        "schedule.g1".into(),
        "schedule.t_min".into(),
        "sampler.mode".into(),
        "sampler.steps".into(),
        "sampler.t_min".into(),
        "net.latent_dim".into(),
        "net.enc_hidden".into(),
        "net.dec_hidden".into(),
        "net.disc_hidden".into(),
        "net.bridge_hidden".into(),
    ];
    for section in ["train_vae", "train_prior", "train_bridge", "finetune"] {
        for sub in TRAIN_KEYS {
            keys.push(format!("{section}.{sub}"));
        }
        keys.push(format!("{section}.resolutions"));
    }
    keys
}

impl RunConfig {
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let (section, sub) = key
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("key {key:?} has no section prefix")))?;
        let handled = match section {
            "corpus" => match sub {
                "n_train" => {
                    self.corpus.n_train = parse_usize(key, value)?;
                    true
                }
                "n_heldout" => {
                    self.corpus.n_heldout = parse_usize(key, value)?;
                    true
                }
                "sample_rate" => {
                    self.corpus.sample_rate = parse_u32(key, value)?;
                    true
                }
                "duration_s" => {
                    self.corpus.duration_s = parse_f64(key, value)?;
                    true
                }
                "frame_len" => {
                    self.corpus.frame_len = parse_usize(key, value)?;
                    self.vae_arch.frame_len = self.corpus.frame_len;
                    true
                }
                _ => false,
            },
            "degrade" => {
                let d: &mut DegradationSpec = &mut self.corpus.degradation;
                match sub {
                    "p_bw" => {
                        d.p_bw = parse_f64(key, value)?;
                        true
                    }
                    "bw_targets_hz" => {
                        d.bw_targets_hz = parse_u32_list(key, value)?;
                        true
                    }
                    "p_clip" => {
                        d.p_clip = parse_f64(key, value)?;
                        true
                    }
                    "clip_range" => {
                        d.clip_range = parse_pair(key, value)?;
                        true
                    }
                    "p_rev" => {
                        d.p_rev = parse_f64(key, value)?;
                        true
                    }
                    "p_noise" => {
                        d.p_noise = parse_f64(key, value)?;
                        true
                    }
                    "snr_range_db" => {
                        d.snr_range_db = parse_pair(key, value)?;
                        true
                    }
                    "p_eq" => {
                        d.p_eq = parse_f64(key, value)?;
                        true
                    }
                    "eq_count_range" => {
                        d.eq_count_range = parse_u32_pair(key, value)?;
                        true
                    }
                    "eq_f0_range" => {
                        d.eq_f0_range = parse_pair(key, value)?;
                        true
                    }
                    "eq_gain_range" => {
                        d.eq_gain_range = parse_pair(key, value)?;
                        true
                    }
                    "eq_q_range" => {
                        d.eq_q_range = parse_pair(key, value)?;
                        true
                    }
                    "rir_rt60_range" => {
                        d.rir_rt60_range = parse_pair(key, value)?;
                        true
                    }
                    "noise_source" => {
                        d.noise_source = if value == "white" {
                            NoiseSource::WhiteNoise
                        } else if let Some(dir) = value.strip_prefix("dir:") {
                            NoiseSource::Directory(PathBuf::from(dir))
                        } else {
                            return Err(Error::Config(format!(
                                "{key}: expected `white` or `dir:<path>`, got {value:?}"
                            )));
                        };
                        true
                    }
                    _ => false,
                }
            }
            "schedule" => match sub {
                "kind" => {
                    self.schedule.kind = match value {
                        "brownian-bridge" => ScheduleKind::BrownianBridge,
                        "gmax-linear" => ScheduleKind::GmaxLinear,
                        _ => {
                            return Err(Error::Config(format!(
                                "{key}: expected `brownian-bridge` or `gmax-linear`, got {value:?}"
                            )))
                        }
                    };
                    true
                }
                "g0" => {
                    self.schedule.g0 = parse_f64(key, value)?;
                    true
                }
                "g1" => {
                    self.schedule.g1 = parse_f64(key, value)?;
                    true
                }
                "t_min" => {
                    self.schedule.t_min = parse_f64(key, value)?;
                    true
                }
                _ => false,
            },
            "sampler" => match sub {
                "mode" => {
                    self.sampler.mode = match value {
                        "sde" => SamplerMode::Sde,
                        "ode" => SamplerMode::Ode,
                        _ => {
                            return Err(Error::Config(format!(
                                "{key}: expected `sde` or `ode`, got {value:?}"
                            )))
                        }
                    };
                    true
                }
                "steps" => {
                    self.sampler.n_steps = parse_usize(key, value)?;
                    true
                }
                "t_min" => {
                    self.sampler.t_min = parse_f64(key, value)?;
                    true
                }
                _ => false,
            },
            "net" => match sub {
                "latent_dim" => {
                    self.vae_arch.latent_dim = parse_usize(key, value)?;
                    true
                }
                "enc_hidden" => {
                    self.vae_arch.enc_hidden = parse_usize_list(key, value)?;
                    true
                }
                "dec_hidden" => {
                    self.vae_arch.dec_hidden = parse_usize_list(key, value)?;
                    true
                }
                "disc_hidden" => {
                    self.vae_arch.disc_hidden = parse_usize_list(key, value)?;
                    true
                }
                "bridge_hidden" => {
                    self.bridge_arch.hidden = parse_usize_list(key, value)?;
                    true
                }
                _ => false,
            },
            "train_vae" => apply_train_key(&mut self.train_vae, key, sub, value)?,
            "train_prior" => apply_train_key(&mut self.train_prior, key, sub, value)?,
            "train_bridge" => apply_train_key(&mut self.train_bridge, key, sub, value)?,
            "finetune" => apply_train_key(&mut self.finetune, key, sub, value)?,
            _ => false,
        };
        if !handled {
            return Err(Error::Config(format!(
                "unknown config key {key:?}; valid keys:\n  {}",
                valid_keys().join("\n  ")
            )));
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.apply_kv(key.trim(), value.trim())?;
        }
        cfg.schedule.validate()?;
        cfg.corpus.degradation.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::parse_str(&text)
    }

    /// Serialise the effective configuration, one key per line.
    pub fn resolved_text(&self) -> String {
        let mut out = String::new();
        let pair = |(a, b): (f64, f64)| format!("{a},{b}");
        let upair = |(a, b): (u32, u32)| format!("{a},{b}");
        let list = |v: &[u32]| {
            v.iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        let ulist = |v: &[usize]| {
            v.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        let c = &self.corpus;
        out.push_str(&format!("corpus.n_train = {}\n", c.n_train));
        out.push_str(&format!("corpus.n_heldout = {}\n", c.n_heldout));
        out.push_str(&format!("corpus.sample_rate = {}\n", c.sample_rate));
        out.push_str(&format!("corpus.duration_s = {}\n", c.duration_s));
        out.push_str(&format!("corpus.frame_len = {}\n", c.frame_len));
        let d = &c.degradation;
        out.push_str(&format!("degrade.p_bw = {}\n", d.p_bw));
        out.push_str(&format!(
            "degrade.bw_targets_hz = {}\n",
            list(&d.bw_targets_hz)
        ));
        out.push_str(&format!("degrade.p_clip = {}\n", d.p_clip));
        out.push_str(&format!("degrade.clip_range = {}\n", pair(d.clip_range)));
        out.push_str(&format!("degrade.p_rev = {}\n", d.p_rev));
        out.push_str(&format!("degrade.p_noise = {}\n", d.p_noise));
        out.push_str(&format!(
            "degrade.snr_range_db = {}\n",
            pair(d.snr_range_db)
        ));
        out.push_str(&format!("degrade.p_eq = {}\n", d.p_eq));
        out.push_str(&format!(
            "degrade.eq_count_range = {}\n",
            upair(d.eq_count_range)
        ));
        out.push_str(&format!("degrade.eq_f0_range = {}\n", pair(d.eq_f0_range)));
        out.push_str(&format!(
            "degrade.eq_gain_range = {}\n",
            pair(d.eq_gain_range)
        ));
        out.push_str(&format!("degrade.eq_q_range = {}\n", pair(d.eq_q_range)));
        out.push_str(&format!(
            "degrade.rir_rt60_range = {}\n",
            pair(d.rir_rt60_range)
        ));
        out.push_str(&format!(
            "degrade.noise_source = {}\n",
            match &d.noise_source {
                NoiseSource::WhiteNoise => "white".to_string(),
                NoiseSource::Directory(p) => format!("dir:{}", p.display()),
            }
        ));
        out.push_str(&format!(
            "schedule.kind = {}\n",
            match self.schedule.kind {
                ScheduleKind::BrownianBridge => "brownian-bridge",
                ScheduleKind::GmaxLinear => "gmax-linear",
            }
        ));
        out.push_str(&format!("schedule.g0 = {}\n", self.schedule.g0));
        out.push_str(&format!("schedule.g1 = {}\n", self.schedule.g1));
        out.push_str(&format!("schedule.t_min = {}\n", self.schedule.t_min));
        out.push_str(&format!(
            "sampler.mode = {}\n",
            match self.sampler.mode {
                SamplerMode::Sde => "sde",
                SamplerMode::Ode => "ode",
            }
        ));
        out.push_str(&format!("sampler.steps = {}\n", self.sampler.n_steps));
        out.push_str(&format!("sampler.t_min = {}\n", self.sampler.t_min));
        out.push_str(&format!("net.latent_dim = {}\n", self.vae_arch.latent_dim));
        out.push_str(&format!(
            "net.enc_hidden = {}\n",
            ulist(&self.vae_arch.enc_hidden)
        ));
        out.push_str(&format!(
            "net.dec_hidden = {}\n",
            ulist(&self.vae_arch.dec_hidden)
        ));
        out.push_str(&format!(
            "net.disc_hidden = {}\n",
            ulist(&self.vae_arch.disc_hidden)
        ));
        out.push_str(&format!(
            "net.bridge_hidden = {}\n",
            ulist(&self.bridge_arch.hidden)
        ));
        for (name, t) in [
            ("train_vae", &self.train_vae),
            ("train_prior", &self.train_prior),
            ("train_bridge", &self.train_bridge),
            ("finetune", &self.finetune),
        ] {
            out.push_str(&format!("{name}.steps = {}\n", t.steps));
            out.push_str(&format!("{name}.batch_size = {}\n", t.batch_size));
            out.push_str(&format!("{name}.learning_rate = {}\n", t.learning_rate));
            out.push_str(&format!("{name}.momentum = {}\n", t.momentum));
            out.push_str(&format!(
                "{name}.optimizer = {}\n",
                match t.optimizer {
                    crate::net::OptimizerKind::Sgd => "sgd",
                    crate::net::OptimizerKind::Adam => "adam",
                }
            ));
            out.push_str(&format!("{name}.clip_norm = {}\n", t.clip_norm));
            out.push_str(&format!("{name}.lambda_rec = {}\n", t.lambda_rec));
            out.push_str(&format!("{name}.lambda_adv = {}\n", t.lambda_adv));
            out.push_str(&format!("{name}.lambda_fm = {}\n", t.lambda_fm));
            out.push_str(&format!("{name}.lambda_kl = {}\n", t.lambda_kl));
            out.push_str(&format!("{name}.lambda_mse = {}\n", t.lambda_mse));
            out.push_str(&format!("{name}.lambda_cos = {}\n", t.lambda_cos));
            out.push_str(&format!(
                "{name}.lambda_pesq_proxy = {}\n",
                t.lambda_pesq_proxy
            ));
            out.push_str(&format!(
                "{name}.lambda_utmos_proxy = {}\n",
                t.lambda_utmos_proxy
            ));
            out.push_str(&format!("{name}.lambda_wav = {}\n", t.lambda_wav));
            out.push_str(&format!("{name}.t_min = {}\n", t.t_min));
            out.push_str(&format!("{name}.resolutions = {}\n", ulist(&t.resolutions)));
            out.push_str(&format!("{name}.preflight = {}\n", t.preflight));
        }
        out
    }
}
