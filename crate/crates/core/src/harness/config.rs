use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::{derive_seed, BandProfile, LevelSpectrum};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Driven,
    Frozen,
    Quench,
    All,
}

impl Mode {
    pub fn driven(&self) -> bool {
        matches!(self, Mode::Driven | Mode::All)
    }

    pub fn frozen(&self) -> bool {
        matches!(self, Mode::Frozen | Mode::All)
    }
}

/// Everything a run depends on. Stored as TOML; every run writes the
/// resolved copy next to its output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "b")]
    pub band: usize,
    pub lambda: f64,
    pub hbar: f64,
    pub levels: LevelSpectrum,
    pub s0_list: Vec<f64>,
    pub fdot_list: Vec<f64>,
    /// Driving strengths given through `X = eps^(2/(2-s))`; when non-empty
    /// fig2 uses these instead of `fdot_list`.
    pub x_list: Vec<f64>,
    /// Perturbation strengths for quench runs.
    pub eps_list: Vec<f64>,
    pub mode: Mode,
    pub realizations: usize,
    pub master_seed: u64,
    /// Last sample time in units of `t_eps`.
    pub t_max_factor: f64,
    pub sample_points: usize,
    /// Diffusion fit window in units of `t_eps`.
    pub fit_window: (f64, f64),
    /// Upper bound on the integrator step; derived from the driving when absent.
    pub max_step: Option<f64>,
    pub output_dir: PathBuf,
    /// Worker threads, 0 for one per core.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 1024,
            band: 50,
            lambda: 1.0,
            hbar: 1.0,
            levels: LevelSpectrum::PicketFence,
            s0_list: vec![0.5, 1.0, 1.5],
            fdot_list: vec![5.0, 12.0],
            x_list: vec![],
            eps_list: vec![0.5, 1.0],
            mode: Mode::All,
            realizations: 16,
            master_seed: 20_070_101,
            t_max_factor: 10.0,
            sample_points: 40,
            fit_window: (2.0, 8.0),
            max_step: None,
            output_dir: PathBuf::from("out"),
            workers: 0,
        }
    }
}

impl RunConfig {
    /// Defaults for the diffusion sweep: a decade of `X` above the level spacing.
    pub fn fig2_defaults() -> Self {
        let (lo, hi, k) = (1.2_f64, 12.0_f64, 6);
        Self {
            mode: Mode::Driven,
            x_list: (0..k)
                .map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64))
                .collect(),
            t_max_factor: 8.0,
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn profile(&self, s0: f64) -> Result<BandProfile> {
        BandProfile::new(s0, self.lambda, 1, self.band)
    }

    /// `eps = sqrt(lambda) fdot`.
    pub fn eps_of_fdot(&self, fdot: f64) -> f64 {
        self.lambda.sqrt() * fdot
    }

    /// Driving rate giving scaling coordinate `x` for effective exponent `s`.
    pub fn fdot_of_x(&self, x: f64, s: f64) -> f64 {
        x.powf((2.0 - s) / 2.0) / self.lambda.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.band < 1 || self.n <= 4 * self.band {
            return Err(Error::Validation(format!(
                "need N > 4 b, got N = {}, b = {}",
                self.n, self.band
            )));
        }
        if self.realizations < 1 {
            return Err(Error::Validation("realizations must be at least 1".into()));
        }
        if self.s0_list.is_empty() {
            return Err(Error::Validation("s0_list is empty".into()));
        }
        for &s0 in &self.s0_list {
            self.profile(s0)?;
        }
        let positive = |name: &str, v: &[f64]| -> Result<()> {
            if let Some(x) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                return Err(Error::Validation(format!("{name} entries must be positive, got {x}")));
            }
            Ok(())
        };
        positive("fdot_list", &self.fdot_list)?;
        positive("x_list", &self.x_list)?;
        positive("eps_list", &self.eps_list)?;
        if !(self.hbar > 0.0) {
            return Err(Error::Validation("hbar must be positive".into()));
        }
        if !(self.t_max_factor > 0.0) || self.sample_points < 2 {
            return Err(Error::Validation(
                "t_max_factor must be positive and sample_points at least 2".into(),
            ));
        }
        if !(self.fit_window.0 > 0.0 && self.fit_window.1 > self.fit_window.0) {
            return Err(Error::Validation("fit_window must satisfy 0 < lo < hi".into()));
        }
        if self.max_step.is_some_and(|h| !(h > 0.0)) {
            return Err(Error::Validation("max_step must be positive".into()));
        }
        Ok(())
    }

    /// Seed of realization `r` at parameter point `point`; `attempt` > 0 gives
    /// the replacement drawn after a failure.
    pub fn realization_seed(&self, point: usize, r: usize, attempt: u64) -> u64 {
        derive_seed(
            derive_seed(derive_seed(self.master_seed, point as u64), r as u64),
            attempt,
        )
    }

    /// Checks that first-attempt and retry seeds over `points` points are all distinct.
    pub fn check_seed_uniqueness(&self, points: usize) -> Result<()> {
        let mut seen = HashSet::new();
        for p in 0..points {
            for r in 0..self.realizations {
                for a in 0..2 {
                    if !seen.insert(self.realization_seed(p, r, a)) {
                        return Err(Error::Config(format!(
                            "seed collision at point {p}, realization {r}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Command line values that replace config entries.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub s0: Option<Vec<f64>>,
    pub fdot: Option<Vec<f64>>,
    pub eps: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub band: Option<usize>,
    pub realizations: Option<usize>,
    pub mode: Option<Mode>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.seed {
            cfg.master_seed = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = &self.s0 {
            cfg.s0_list = v.clone();
        }
        if let Some(v) = &self.fdot {
            cfg.fdot_list = v.clone();
            cfg.x_list.clear();
        }
        if let Some(v) = &self.eps {
            cfg.eps_list = v.clone();
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.band {
            cfg.band = v;
        }
        if let Some(v) = self.realizations {
            cfg.realizations = v;
        }
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
    }
}
