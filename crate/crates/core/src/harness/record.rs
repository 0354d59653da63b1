use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::analysis::{estimates_to_csv, rescale_collapse, DiffusionEstimate, SystemScales};
use crate::dynamics::{RunMode, SpreadingCurve};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig1,
    Fig2,
    Quench,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Quench => "quench",
        }
    }
}

/// A realization that failed on both attempts and was left out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub mode: RunMode,
    pub s0: f64,
    pub fdot: f64,
    pub eps: f64,
    pub realization: usize,
    pub seeds: Vec<u64>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: Experiment,
    pub config: RunConfig,
    pub curves: Vec<SpreadingCurve>,
    pub estimates: Vec<DiffusionEstimate>,
    pub failures: Vec<FailureRecord>,
    /// Parameter points with no surviving realization.
    pub failed_points: Vec<String>,
    pub warnings: Vec<String>,
    pub version: String,
    pub wall_clock_seconds: f64,
}

impl ExperimentRecord {
    pub fn new(experiment: Experiment, config: RunConfig) -> Self {
        Self {
            experiment,
            config,
            curves: vec![],
            estimates: vec![],
            failures: vec![],
            failed_points: vec![],
            warnings: vec![],
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.failed_points.is_empty()
    }

    /// Everything except timing metadata, for reproducibility checks.
    pub fn payload_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("wall_clock_seconds");
        }
        Ok(serde_json::to_string(&v)?)
    }

    pub fn curve_stem(curve: &SpreadingCurve) -> String {
        let p = &curve.params;
        match curve.mode {
            RunMode::Quench => format!("quench_s0={}_eps={}", p.s0, p.eps),
            m => format!("{}_s0={}_fdot={}", m.as_str(), p.s0, p.fdot),
        }
    }

    /// Writes `record.json`, `config.toml`, one CSV and JSON pair per curve
    /// and, with estimates, `diffusion.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("config.toml", self.config.to_toml()?)?;
        write("record.json", serde_json::to_string_pretty(self)?)?;
        for c in &self.curves {
            c.write(dir, &Self::curve_stem(c))?;
        }
        if !self.estimates.is_empty() {
            write("diffusion.csv", estimates_to_csv(&self.estimates)?)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn write_series(path: &Path, header: [&str; 2], rows: impl Iterator<Item = (f64, f64)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for (a, b) in rows {
        w.write_record([format!("{a:e}"), format!("{b:e}")])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes plain two-column series: for `Fig1` one file per curve with
/// `(t/t_eps, dE^2 t_eps^2/hbar^2)`, for `Fig2` one file per `s0` with `(X, Y)`
/// sorted by `X`. A `<which>_manifest.json` lists the files.
pub fn emit_plotdata(record: &ExperimentRecord, which: Experiment, dir: &Path) -> Result<Vec<PathBuf>> {
    if record.experiment != which {
        return Err(Error::NotFound(format!(
            "record holds a {} experiment, not {}",
            record.experiment.as_str(),
            which.as_str()
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scales = SystemScales {
        omega_cl: record.config.band as f64,
        hbar: record.config.hbar,
        ..SystemScales::default()
    };
    let mut files = Vec::new();
    match which {
        Experiment::Fig1 => {
            if record.curves.is_empty() {
                return Err(Error::NotFound("record has no spreading curves".into()));
            }
            for c in &record.curves {
                let rescaled = rescale_collapse(std::slice::from_ref(c), &scales)?;
                let r = &rescaled.curves[0];
                let path = dir.join(format!("fig1_{}.csv", ExperimentRecord::curve_stem(c)));
                write_series(
                    &path,
                    ["t_over_t_eps", "dE2_scaled"],
                    r.x.iter().copied().zip(r.y.iter().copied()),
                )?;
                files.push(path);
            }
        }
        Experiment::Fig2 => {
            if record.estimates.is_empty() {
                return Err(Error::NotFound("record has no diffusion estimates".into()));
            }
            let mut s0s: Vec<f64> = record.estimates.iter().map(|e| e.s0).collect();
            s0s.sort_by(f64::total_cmp);
            s0s.dedup();
            for s0 in s0s {
                let mut pts: Vec<(f64, f64)> = record
                    .estimates
                    .iter()
                    .filter(|e| e.s0 == s0)
                    .map(|e| (e.x, e.y))
                    .collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                let path = dir.join(format!("fig2_s0={s0}.csv"));
                write_series(&path, ["X", "Y"], pts.into_iter())?;
                files.push(path);
            }
        }
        Experiment::Quench => {
            return Err(Error::NotFound("quench records have no plot series".into()));
        }
    }
    let manifest = dir.join(format!("{}_manifest.json", which.as_str()));
    let names: Vec<String> = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let body = serde_json::json!({
        "experiment": which,
        "files": names,
        "master_seed": record.config.master_seed,
        "version": record.version,
    });
    std::fs::write(&manifest, serde_json::to_string_pretty(&body)?)
        .map_err(|e| Error::io(&manifest, e))?;
    files.push(manifest);
    Ok(files)
}
