use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{load_config, RunConfig};
use super::scenario::build_world;
use crate::accounting::RoundMetrics;
use crate::error::{Error, Result};
use crate::orchestrator::{run_protocol, Protocol, RunOutput};

pub const CONFIG_FILE: &str = "config.json";
pub const ROUNDS_FILE: &str = "rounds.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub const CSV_HEADER: [&str; 5] = ["cloud_round", "clock_hours", "wan_traffic_gb", "accuracy", "cost_usd"];

/// End-of-run totals; every field equals the last round's cumulative value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub protocol: Protocol,
    pub seed: u64,
    pub rounds: usize,
    pub accuracy: Option<f64>,
    pub wan_traffic_gb: f64,
    pub clock_hours: f64,
    pub cost_usd: f64,
    pub convergence_round: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lan_device_counts: Option<Vec<usize>>,
}

/// One row of `rounds.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub cloud_round: usize,
    pub clock_hours: f64,
    pub wan_traffic_gb: f64,
    pub accuracy: Option<f64>,
    pub cost_usd: f64,
}

impl From<&RoundMetrics> for RoundRow {
    fn from(m: &RoundMetrics) -> Self {
        RoundRow {
            cloud_round: m.cloud_round,
            clock_hours: m.cumulative_clock_time,
            wan_traffic_gb: m.cumulative_wan_traffic,
            accuracy: m.accuracy,
            cost_usd: m.cumulative_cost,
        }
    }
}

/// A finished run: config echo, per-round series and summary.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub config: RunConfig,
    pub rounds: Vec<RoundRow>,
    pub summary: Summary,
}

impl RunLog {
    pub fn from_output(config: RunConfig, out: &RunOutput) -> Self {
        let rounds: Vec<RoundRow> = out.metrics.iter().map(RoundRow::from).collect();
        let last = rounds.last();
        let summary = Summary {
            name: config.name.clone(),
            protocol: out.protocol,
            seed: config.seed,
            rounds: rounds.len(),
            accuracy: last.and_then(|r| r.accuracy),
            wan_traffic_gb: last.map_or(0.0, |r| r.wan_traffic_gb),
            clock_hours: last.map_or(0.0, |r| r.clock_hours),
            cost_usd: last.map_or(0.0, |r| r.cost_usd),
            convergence_round: out.convergence.map(|c| c.round),
            lan_device_counts: out.lan_device_counts.clone(),
        };
        RunLog {
            config,
            rounds,
            summary,
        }
    }

    pub fn rounds_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .has_headers(false)
            .from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rounds {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Write `config.json`, `rounds.csv` and `summary.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))
        };
        write(CONFIG_FILE, self.config.to_json()?)?;
        write(ROUNDS_FILE, self.rounds_csv()?)?;
        let mut summary = serde_json::to_string_pretty(&self.summary)?;
        summary.push('\n');
        write(SUMMARY_FILE, summary)
    }

    /// Load a run directory written by [`RunLog::write_to`].
    pub fn read_from(dir: &Path) -> Result<Self> {
        let config = load_config(&dir.join(CONFIG_FILE))?;
        let path = dir.join(ROUNDS_FILE);
        let mut reader = csv::Reader::from_path(&path)?;
        let rounds = reader.deserialize().collect::<Result<Vec<RoundRow>, _>>()?;
        let path = dir.join(SUMMARY_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(RunLog {
            config,
            rounds,
            summary: serde_json::from_str(&text)?,
        })
    }
}

/// Build the world, run the protocol, and return the log without touching
/// the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<RunLog> {
    let world = build_world(cfg)?;
    let out = run_protocol(cfg.protocol, &world, &cfg.params, &cfg.cost)?;
    Ok(RunLog::from_output(cfg.clone(), &out))
}

/// Run `cfg` and write its outputs. Returns the log and the directory used.
pub fn run_experiment(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<(RunLog, PathBuf)> {
    let log = execute(cfg)?;
    let dir = cfg.resolve_output_dir(out_dir);
    log.write_to(&dir)?;
    Ok((log, dir))
}

/// Expand a sweep grid (`{"dotted.path": [v1, v2, ...], ...}`) over `base`.
///
/// Keys vary in lexicographic order, the last key fastest. Run `i` is named
/// `<base name>-<i>`.
pub fn expand_grid(base: &RunConfig, grid_json: &str) -> Result<Vec<RunConfig>> {
    let grid: serde_json::Map<String, serde_json::Value> = serde_json::from_str(grid_json).map_err(|e| Error::ConfigParse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut axes = Vec::with_capacity(grid.len());
    for (key, values) in grid {
        match values {
            serde_json::Value::Array(v) if !v.is_empty() => axes.push((key, v)),
            _ => return Err(Error::field(key, "grid values must be a non-empty list")),
        }
    }
    let total: usize = axes.iter().map(|(_, v)| v.len()).product();
    let base_value = serde_json::to_value(base)?;
    let width = total.saturating_sub(1).to_string().len();

    (0..total)
        .map(|i| {
            let mut value = base_value.clone();
            let mut rest = i;
            let mut picks = vec![0; axes.len()];
            for (a, (_, vals)) in axes.iter().enumerate().rev() {
                picks[a] = rest % vals.len();
                rest /= vals.len();
            }
            for ((key, vals), &p) in axes.iter().zip(&picks) {
                set_path(&mut value, key, vals[p].clone())?;
            }
            let mut name = String::new();
            write!(name, "{}-{:0width$}", base.name, i).unwrap();
            value["name"] = serde_json::Value::String(name);
            // Outputs of a sweep always live under the sweep root.
            if let Some(o) = value.get_mut("output") {
                *o = serde_json::json!({});
            }
            RunConfig::from_json(&serde_json::to_string(&value)?).map(|c| c.with_seed(base.seed))
        })
        .collect()
}

fn set_path(value: &mut serde_json::Value, path: &str, new: serde_json::Value) -> Result<()> {
    let mut cur = value;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::field(path, format!("`{}` is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), new);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Err(Error::field(path, "empty path"))
}

/// Run every grid point of a sweep, one directory per run under `root`.
/// Grid points run on separate threads.
pub fn run_sweep(base: &RunConfig, grid_json: &str, root: &Path) -> Result<Vec<(RunLog, PathBuf)>> {
    let configs = expand_grid(base, grid_json)?;
    std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| {
                let dir = root.join(&cfg.name);
                s.spawn(move || run_experiment(cfg, Some(&dir)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}

/// One run's position relative to the target accuracy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub name: String,
    /// First 1-based round at or above the target, if any.
    pub round: Option<usize>,
    pub hours: Option<f64>,
    pub traffic_gb: Option<f64>,
    pub cost_usd: Option<f64>,
    /// Baseline hours / these hours.
    pub speedup: Option<f64>,
    /// Baseline traffic / this traffic.
    pub traffic_ratio: Option<f64>,
    /// Baseline cost / this cost.
    pub cost_ratio: Option<f64>,
}

fn ratio(base: Option<f64>, this: Option<f64>) -> Option<f64> {
    match (base, this) {
        (Some(b), Some(t)) if t > 0.0 => Some(b / t),
        (Some(b), Some(t)) if b == t => Some(1.0),
        _ => None,
    }
}

/// Compare runs at a target accuracy (fraction in `[0, 1]`). The first log
/// is the baseline; runs that never reach the target get empty cells.
pub fn compare_runs(logs: &[RunLog], target_accuracy: f64) -> Result<Vec<ComparisonRow>> {
    if logs.is_empty() {
        return Err(Error::Empty("run logs"));
    }
    let reached: Vec<Option<&RoundRow>> = logs
        .iter()
        .map(|l| l.rounds.iter().find(|r| r.accuracy.is_some_and(|a| a >= target_accuracy)))
        .collect();
    let base = reached[0];
    Ok(logs
        .iter()
        .zip(&reached)
        .map(|(log, hit)| {
            let field = |r: Option<&RoundRow>, f: fn(&RoundRow) -> f64| r.map(f);
            ComparisonRow {
                name: log.summary.name.clone(),
                round: hit.map(|r| r.cloud_round),
                hours: field(*hit, |r| r.clock_hours),
                traffic_gb: field(*hit, |r| r.wan_traffic_gb),
                cost_usd: field(*hit, |r| r.cost_usd),
                speedup: ratio(field(base, |r| r.clock_hours), field(*hit, |r| r.clock_hours)),
                traffic_ratio: ratio(field(base, |r| r.wan_traffic_gb), field(*hit, |r| r.wan_traffic_gb)),
                cost_ratio: ratio(field(base, |r| r.cost_usd), field(*hit, |r| r.cost_usd)),
            }
        })
        .collect())
}

/// Render a comparison as an aligned text table, `n/a` for missing cells.
pub fn format_comparison(rows: &[ComparisonRow], target_accuracy: f64) -> String {
    fn cell(v: Option<f64>, digits: usize, suffix: &str) -> String {
        v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}{suffix}"))
    }
    let header = ["run", "round", "hours", "traffic_gb", "cost_usd", "speedup", "traffic_ratio", "cost_ratio"];
    let body: Vec<[String; 8]> = rows
        .iter()
        .map(|r| {
            [
                r.name.clone(),
                r.round.map_or_else(|| "n/a".to_string(), |x| x.to_string()),
                cell(r.hours, 2, ""),
                cell(r.traffic_gb, 2, ""),
                cell(r.cost_usd, 2, ""),
                cell(r.speedup, 2, "x"),
                cell(r.traffic_ratio, 2, "x"),
                cell(r.cost_ratio, 2, "x"),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = format!("target accuracy {:.2}%\n", 100.0 * target_accuracy);
    let mut line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&header.map(String::from));
    for row in &body {
        line(row);
    }
    out
}
