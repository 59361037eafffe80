use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::accounting::{CostModel, BYTES_PER_MIB};
use crate::error::{Error, Result};
use crate::orchestrator::{Protocol, ProtocolConfig};

/// Environment variable that overrides the output root of every run.
pub const OUTPUT_ROOT_ENV: &str = "LANFL_OUTPUT_ROOT";

/// Top-level keys a config file must provide.
pub const REQUIRED_FIELDS: [&str; 3] = ["protocol", "params", "dataset"];

/// Default AP airtime capacity (Mbps), fitted to the 8-device PS/Ring
/// throughput measurements on one and four APs.
pub const DEFAULT_AP_CAPACITY_MBPS: f64 = 168.0;
/// Default per-direction wired uplink rate of an AP (Mbps), same fit.
pub const DEFAULT_BACKBONE_MBPS: f64 = 96.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub protocol: Protocol,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub world: WorldSpec,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub model: ModelKind,
    /// Wire size override in bytes. Defaults to 4 bytes per parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_bytes: Option<u64>,
    /// Wire size override in MiB; exclusive with `model_bytes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_mib: Option<f64>,
    pub params: ProtocolConfig,
    #[serde(default)]
    pub cost: CostModel,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_name() -> String {
    "run".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldSpec {
    /// Number of LAN domains (NL).
    pub lans: usize,
    /// Devices per LAN (NC).
    pub devices_per_lan: usize,
    pub aps_per_lan: usize,
    pub bandwidth: BandwidthSpec,
    /// Seconds per local epoch on every device.
    pub epoch_compute_time_s: f64,
    /// Relative spread of per-device epoch times, uniform in `[-j, j]`.
    pub epoch_time_jitter: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            lans: 20,
            devices_per_lan: 10,
            aps_per_lan: 1,
            bandwidth: BandwidthSpec::Fixed { mbps: vec![20.0] },
            epoch_compute_time_s: 1.0,
            epoch_time_jitter: 0.0,
        }
    }
}

/// How LAN links get their throughput. Per-LAN lists hold either one value
/// (applied to every LAN) or one value per LAN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum BandwidthSpec {
    /// Each LAN's links run at a fixed rate.
    Fixed { mbps: Vec<f64> },
    /// Shared AP airtime with optional wired uplinks between APs.
    Capacity {
        ap_capacity_mbps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        backbone_mbps: Option<f64>,
    },
    /// Shared AP airtime, with each LAN's capacity scaled so that its gating
    /// link runs at the listed rate when `params.nc_s` devices take part.
    Calibrated { mbps: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Synthetic {
        n_features: usize,
        n_classes: usize,
        class_sep: f64,
        noise_std: f64,
        samples_per_device: usize,
        #[serde(default = "default_shards")]
        shards_per_device: usize,
        #[serde(default = "unit_scale")]
        min_feature_scale: f64,
    },
    /// No data and no training; requires an explicit model size.
    AccountingOnly,
}

fn default_shards() -> usize {
    2
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    #[default]
    Logistic,
    Mlp { hidden: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Output directory. When absent, `$LANFL_OUTPUT_ROOT/<name>` or
    /// `runs/<name>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl RunConfig {
    /// Parse a config from JSON text, applying defaults and validating.
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(missing_fields(&REQUIRED_FIELDS));
        }
        let value: serde_json::Value = serde_json::from_str(text).map_err(parse_error)?;
        if let Some(obj) = value.as_object() {
            let missing: Vec<&str> = REQUIRED_FIELDS
                .iter()
                .copied()
                .filter(|k| !obj.contains_key(*k))
                .collect();
            if !missing.is_empty() {
                return Err(missing_fields(&missing));
            }
        }
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(parse_error)?;
        cfg.params.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Re-seed the run.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.params.seed = seed;
        self
    }

    pub fn model_bytes_override(&self) -> Option<u64> {
        self.model_bytes
            .or(self.model_mib.map(|m| (m * BYTES_PER_MIB as f64).round() as u64))
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.world;
        if w.lans == 0 {
            return Err(Error::field("world.lans", "must be >= 1"));
        }
        if w.devices_per_lan == 0 {
            return Err(Error::field("world.devices_per_lan", "must be >= 1"));
        }
        if w.aps_per_lan == 0 || w.aps_per_lan > w.devices_per_lan {
            return Err(Error::field("world.aps_per_lan", "must be in 1..=devices_per_lan"));
        }
        if !(w.epoch_compute_time_s >= 0.0 && w.epoch_compute_time_s.is_finite()) {
            return Err(Error::field("world.epoch_compute_time_s", "must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&w.epoch_time_jitter) {
            return Err(Error::field("world.epoch_time_jitter", "must be in [0, 1)"));
        }
        let check_list = |field: &str, v: &[f64]| -> Result<()> {
            if v.len() != 1 && v.len() != w.lans {
                return Err(Error::field(field, format!("needs 1 or {} entries, got {}", w.lans, v.len())));
            }
            if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::field(field, "rates must be positive"));
            }
            Ok(())
        };
        match &w.bandwidth {
            BandwidthSpec::Fixed { mbps } => check_list("world.bandwidth.mbps", mbps)?,
            BandwidthSpec::Calibrated { mbps } => check_list("world.bandwidth.mbps", mbps)?,
            BandwidthSpec::Capacity {
                ap_capacity_mbps,
                backbone_mbps,
            } => {
                if !(*ap_capacity_mbps > 0.0 && ap_capacity_mbps.is_finite()) {
                    return Err(Error::field("world.bandwidth.ap_capacity_mbps", "must be positive"));
                }
                if backbone_mbps.is_some_and(|b| !(b > 0.0 && b.is_finite())) {
                    return Err(Error::field("world.bandwidth.backbone_mbps", "must be positive"));
                }
            }
        }

        if self.model_bytes.is_some() && self.model_mib.is_some() {
            return Err(Error::field("model_mib", "give either model_bytes or model_mib, not both"));
        }
        if let Some(m) = self.model_mib {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::field("model_mib", "must be finite and >= 0"));
            }
        }
        if let ModelKind::Mlp { hidden: 0 } = self.model {
            return Err(Error::field("model.hidden", "must be >= 1"));
        }
        match &self.dataset {
            DatasetSpec::Synthetic {
                n_features,
                n_classes,
                noise_std,
                class_sep,
                samples_per_device,
                shards_per_device,
                min_feature_scale,
            } => {
                if !(*min_feature_scale > 0.0 && *min_feature_scale <= 1.0) {
                    return Err(Error::field("dataset.min_feature_scale", "must be in (0, 1]"));
                }
                if *n_features == 0 {
                    return Err(Error::field("dataset.n_features", "must be >= 1"));
                }
                if *n_classes < 2 {
                    return Err(Error::field("dataset.n_classes", "must be >= 2"));
                }
                if !(*noise_std >= 0.0 && class_sep.is_finite()) {
                    return Err(Error::field("dataset.noise_std", "must be >= 0"));
                }
                if *shards_per_device == 0 {
                    return Err(Error::field("dataset.shards_per_device", "must be >= 1"));
                }
                if *samples_per_device < *shards_per_device {
                    return Err(Error::field(
                        "dataset.samples_per_device",
                        "must be at least shards_per_device",
                    ));
                }
            }
            DatasetSpec::AccountingOnly => {
                if self.model_bytes_override().is_none() {
                    return Err(Error::field(
                        "model_bytes",
                        "accounting-only runs need model_bytes or model_mib",
                    ));
                }
            }
        }
        self.cost.validate()?;

        let p = &self.params;
        p.train.validate()?;
        if p.cloud_rounds == 0 {
            return Err(Error::field("params.cloud_rounds", "must be >= 1"));
        }
        if !(p.bw_mbps > 0.0 && p.bw_mbps.is_finite()) {
            return Err(Error::field("params.bw_mbps", "must be positive"));
        }
        let n = w.lans * w.devices_per_lan;
        match self.protocol {
            Protocol::Wanfl => {
                if p.n_s == 0 || p.n_s > n {
                    return Err(Error::field("params.n_s", format!("must be in 1..={n}")));
                }
            }
            Protocol::Lanfl => {
                if p.device_rounds == 0 {
                    return Err(Error::field("params.device_rounds", "must be >= 1"));
                }
                if p.nl_s == 0 || p.nl_s > w.lans {
                    return Err(Error::field("params.nl_s", format!("must be in 1..={}", w.lans)));
                }
                if p.nc_s < 2 || p.nc_s > w.devices_per_lan {
                    return Err(Error::field(
                        "params.nc_s",
                        format!("must be in 2..={}", w.devices_per_lan),
                    ));
                }
            }
        }
        if let BandwidthSpec::Calibrated { .. } = w.bandwidth {
            if p.nc_s < 2 || p.nc_s > w.devices_per_lan {
                return Err(Error::field(
                    "params.nc_s",
                    "calibrated bandwidth needs nc_s in 2..=devices_per_lan",
                ));
            }
        }
        Ok(())
    }

    /// Output directory: explicit override, then `$LANFL_OUTPUT_ROOT/<name>`,
    /// then the config's own `output.dir`, then `runs/<name>`.
    pub fn resolve_output_dir(&self, explicit: Option<&Path>) -> PathBuf {
        if let Some(p) = explicit {
            return p.to_path_buf();
        }
        if let Some(root) = std::env::var_os(OUTPUT_ROOT_ENV) {
            return PathBuf::from(root).join(&self.name);
        }
        self.output
            .dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.name))
    }
}

fn missing_fields(fields: &[&str]) -> Error {
    Error::field(fields.join(", "), "missing required field(s)")
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::ConfigParse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Read and validate a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_json(&text)
}
