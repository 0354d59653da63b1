//! Theory curves for coherent spreading and diffusion, diffusion fits and
//! the Wigner-time rescaling used to compare runs.
//!
//! All formulas carry unit prefactors; `s` is always the effective exponent
//! `s0 - sigma`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::SpreadingCurve;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemScales {
    pub omega0: f64,
    pub omega_cl: f64,
    pub hbar: f64,
    pub rho: f64,
}

impl Default for SystemScales {
    fn default() -> Self {
        Self {
            omega0: 1.0,
            omega_cl: 50.0,
            hbar: 1.0,
            rho: 1.0,
        }
    }
}

impl SystemScales {
    pub fn new(omega0: f64, omega_cl: f64, hbar: f64, rho: f64) -> Result<Self> {
        if !(omega0 > 0.0 && omega_cl > omega0 && hbar > 0.0 && rho > 0.0) {
            return Err(Error::Validation(format!(
                "invalid scales: omega0={omega0}, omega_cl={omega_cl}, hbar={hbar}, rho={rho}"
            )));
        }
        Ok(Self {
            omega0,
            omega_cl,
            hbar,
            rho,
        })
    }

    pub fn t_cl(&self) -> f64 {
        2.0 * PI / self.omega_cl
    }

    pub fn t_h(&self) -> f64 {
        2.0 * PI * self.hbar * self.rho
    }

    /// `t_cl` at least `ratio` times shorter than `t_H`.
    pub fn is_mesoscopic(&self, ratio: f64) -> bool {
        self.t_cl() * ratio <= self.t_h()
    }
}

fn check_exponent(s: f64) -> Result<()> {
    if !(s < 2.0) || !s.is_finite() {
        return Err(Error::Domain(format!("spectral exponent s = {s} must be below 2")));
    }
    Ok(())
}

/// `t_eps = (hbar/eps)^(2/(2-s))`.
pub fn wigner_time(eps: f64, s: f64, hbar: f64) -> Result<f64> {
    check_exponent(s)?;
    if !(eps > 0.0) || !(hbar > 0.0) {
        return Err(Error::Validation(format!(
            "wigner time needs eps > 0 and hbar > 0, got eps={eps}, hbar={hbar}"
        )));
    }
    Ok((hbar / eps).powf(2.0 / (2.0 - s)))
}

/// `D_eps = hbar^2 / t_eps^3`.
pub fn universal_diffusion(eps: f64, s: f64, hbar: f64) -> Result<f64> {
    Ok(hbar * hbar / wigner_time(eps, s, hbar)?.powi(3))
}

/// The same quantity written as `hbar^(-2(s+1)/(2-s)) eps^(6/(2-s))`.
pub fn universal_diffusion_explicit(eps: f64, s: f64, hbar: f64) -> Result<f64> {
    check_exponent(s)?;
    Ok(hbar.powf(-2.0 * (s + 1.0) / (2.0 - s)) * eps.powf(6.0 / (2.0 - s)))
}

/// Fermi golden rule rate `2 pi eps^2 / hbar`.
pub fn fgr_rate(eps: f64, hbar: f64) -> f64 {
    2.0 * PI * eps * eps / hbar
}

/// `t_eps / (hbar / Gamma_E)` for `s = 1`.
pub const WIGNER_TO_GOLDEN_RULE: f64 = 2.0 * PI;

/// `t_eps / (hbar^2 / D)^(1/3)` for `s = -1` with `D = pi eps^2`.
pub fn wigner_to_breaktime() -> f64 {
    PI.cbrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadingRegime {
    /// `t < t_cl`, continued linearly in `t` from the value at `t_cl`.
    Ballistic,
    /// `s > 0`, `t > t_cl`.
    Saturated,
    /// `s < 0`, `t_cl < t < t_eps`.
    Transient,
    /// `s < 0`, `t > t_eps`.
    Coherent,
}

pub fn spreading_regime(s: f64, eps: f64, t: f64, scales: &SystemScales) -> Result<SpreadingRegime> {
    if s == 0.0 {
        return Err(Error::Domain("coherent spreading is not defined for s = 0".into()));
    }
    if !(t > 0.0) {
        return Err(Error::Validation(format!("time must be positive, got {t}")));
    }
    if t < scales.t_cl() {
        return Ok(SpreadingRegime::Ballistic);
    }
    if s > 0.0 {
        return Ok(SpreadingRegime::Saturated);
    }
    if t < wigner_time(eps, s, scales.hbar)? {
        Ok(SpreadingRegime::Transient)
    } else {
        Ok(SpreadingRegime::Coherent)
    }
}

/// Predicted width `dE(t)` (not squared).
pub fn theory_spreading(s: f64, eps: f64, t: f64, scales: &SystemScales) -> Result<f64> {
    check_exponent(s)?;
    let at = |t: f64| -> Result<f64> {
        Ok(if s > 0.0 {
            eps * scales.omega_cl.powf(s / 2.0)
        } else {
            let t_eps = wigner_time(eps, s, scales.hbar)?;
            if t < t_eps {
                eps * t.powf(-s / 2.0)
            } else {
                scales.hbar / t_eps
            }
        })
    };
    match spreading_regime(s, eps, t, scales)? {
        SpreadingRegime::Ballistic => Ok(at(scales.t_cl())? * t / scales.t_cl()),
        _ => at(t),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionRegime {
    /// Linear response: `eps^2 omega_cl^s / t_phi` for `s > 0`,
    /// `eps^2 t_phi^(|s|-1)` for `s < 0` with `t_phi < t_eps`.
    Lrt,
    /// `s < 0`, `t_phi > t_eps`.
    StrongDriving,
    /// `t_phi` replaced by `t_eps`.
    Intrinsic,
}

pub fn theory_diffusion(
    s: f64,
    eps: f64,
    t_phi: f64,
    scales: &SystemScales,
    regime: DiffusionRegime,
) -> Result<f64> {
    check_exponent(s)?;
    let hbar = scales.hbar;
    if regime == DiffusionRegime::Intrinsic {
        return universal_diffusion(eps, s, hbar);
    }
    if !(t_phi > 0.0) {
        return Err(Error::Validation(format!("t_phi must be positive, got {t_phi}")));
    }
    if s == 0.0 {
        return Err(Error::Domain("diffusion regimes are not defined for s = 0".into()));
    }
    match regime {
        DiffusionRegime::Lrt if s > 0.0 => Ok(eps * eps * scales.omega_cl.powf(s) / t_phi),
        DiffusionRegime::Lrt => {
            let t_eps = wigner_time(eps, s, hbar)?;
            if t_phi > t_eps {
                return Err(Error::Validation(format!(
                    "weak driving needs t_phi <= t_eps, got t_phi={t_phi}, t_eps={t_eps}"
                )));
            }
            Ok(eps * eps * t_phi.powf(-s - 1.0))
        }
        DiffusionRegime::StrongDriving => {
            if s > 0.0 {
                return Err(Error::Validation("strong-driving regime needs s < 0".into()));
            }
            let t_eps = wigner_time(eps, s, hbar)?;
            if t_phi < t_eps {
                return Err(Error::Validation(format!(
                    "strong driving needs t_phi >= t_eps, got t_phi={t_phi}, t_eps={t_eps}"
                )));
            }
            let a = -s;
            Ok(hbar.powf(2.0 * a / (2.0 + a)) * eps.powf(4.0 / (2.0 + a)) / t_phi)
        }
        DiffusionRegime::Intrinsic => unreachable!(),
    }
}

/// Diffusion from the coherent width reached at `t_phi`: `dE^2 / (2 t_phi)`.
pub fn diffusion_from_spreading(delta_e: f64, t_phi: f64) -> f64 {
    delta_e * delta_e / (2.0 * t_phi)
}

/// Lower edge of the first-order tail, `[t^|s| + (eps t / hbar)^-2]^(-1/|s|)`.
pub fn core_width(s: f64, eps: f64, t: f64, hbar: f64) -> Result<f64> {
    if !(s < 0.0) {
        return Err(Error::Domain(format!("core width needs s < 0, got {s}")));
    }
    if !(t > 0.0) {
        return Err(Error::Validation(format!("time must be positive, got {t}")));
    }
    let a = -s;
    Ok((t.powf(a) + (eps * t / hbar).powi(-2)).powf(-1.0 / a))
}

/// Scaling coordinates `X = eps^(2/(2-s))`, `Y = D / eps^(6/(2-s))`.
pub fn scaling_coordinates(d: f64, eps: f64, s: f64) -> (f64, f64) {
    (eps.powf(2.0 / (2.0 - s)), d / eps.powf(6.0 / (2.0 - s)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitQuality {
    Good,
    /// Residuals inconsistent with a straight line.
    PoorFit,
    /// Negative slope beyond two standard errors.
    NonDiffusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionEstimate {
    pub d: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub fit_window: (f64, f64),
    pub n_points: usize,
    /// Reduced chi-square, `None` without usable weights.
    pub chi2_red: Option<f64>,
    /// RMS residual relative to the mean fitted value.
    pub rel_residual: f64,
    pub quality: FitQuality,
    pub s0: f64,
    pub sigma: f64,
    pub fdot: f64,
    pub eps: f64,
    pub t_eps: f64,
    pub x: f64,
    pub y: f64,
}

impl DiffusionEstimate {
    pub fn s(&self) -> f64 {
        self.s0 - self.sigma
    }

    pub fn csv_header() -> [&'static str; 8] {
        ["s0", "fdot", "eps", "t_eps", "D", "D_stderr", "X", "Y"]
    }

    pub fn csv_record(&self) -> [String; 8] {
        [
            self.s0.to_string(),
            self.fdot.to_string(),
            self.eps.to_string(),
            format!("{:e}", self.t_eps),
            format!("{:e}", self.d),
            format!("{:e}", self.stderr),
            format!("{:e}", self.x),
            format!("{:e}", self.y),
        ]
    }
}

pub fn estimates_to_csv(estimates: &[DiffusionEstimate]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(DiffusionEstimate::csv_header())?;
    for e in estimates {
        w.write_record(e.csv_record())?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Validation(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const MIN_FIT_POINTS: usize = 5;
pub const CHI2_THRESHOLD: f64 = 4.0;
pub const RESIDUAL_THRESHOLD: f64 = 0.01;

/// Straight-line fit `y = c + b t` with optional weights. Returns
/// `(b, c, var_b, chi2)`; `chi2` uses the weights, or unit weights without them.
fn linear_fit(t: &[f64], y: &[f64], w: Option<&[f64]>) -> (f64, f64, f64, f64) {
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let (mut s, mut st, mut sy) = (0.0, 0.0, 0.0);
    for i in 0..t.len() {
        s += weight(i);
        st += weight(i) * t[i];
        sy += weight(i) * y[i];
    }
    let (tm, ym) = (st / s, sy / s);
    let (mut stt, mut sty) = (0.0, 0.0);
    for i in 0..t.len() {
        stt += weight(i) * (t[i] - tm).powi(2);
        sty += weight(i) * (t[i] - tm) * (y[i] - ym);
    }
    let b = sty / stt;
    let c = ym - b * tm;
    let chi2: f64 = (0..t.len())
        .map(|i| weight(i) * (y[i] - c - b * t[i]).powi(2))
        .sum();
    (b, c, 1.0 / stt, chi2)
}

/// Fits `dE^2(t) = 2 D t + c` on `window`, weighting by the ensemble
/// standard error when every point in the window has one. A slope more than
/// two standard errors below zero is an error.
pub fn fit_diffusion(curve: &SpreadingCurve, window: (f64, f64)) -> Result<DiffusionEstimate> {
    let est = fit_diffusion_flagged(curve, window)?;
    if est.quality == FitQuality::NonDiffusive {
        return Err(Error::NonDiffusive {
            d: est.d,
            stderr: est.stderr,
        });
    }
    Ok(est)
}

/// [`fit_diffusion`] that reports a negative slope through `quality` instead.
pub fn fit_diffusion_flagged(
    curve: &SpreadingCurve,
    window: (f64, f64),
) -> Result<DiffusionEstimate> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::Window(format!("empty fit window [{lo}, {hi}]")));
    }
    let idx: Vec<usize> = (0..curve.times.len())
        .filter(|&i| curve.times[i] >= lo && curve.times[i] <= hi)
        .collect();
    if idx.len() < MIN_FIT_POINTS {
        return Err(Error::Window(format!(
            "{} samples in [{lo:.4}, {hi:.4}], need at least {MIN_FIT_POINTS}",
            idx.len()
        )));
    }
    let t: Vec<f64> = idx.iter().map(|&i| curve.times[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| curve.variance[i]).collect();
    let weighted = idx.iter().all(|&i| curve.stderr.get(i).is_some_and(|&e| e > 0.0));
    let w: Option<Vec<f64>> =
        weighted.then(|| idx.iter().map(|&i| curve.stderr[i].powi(-2)).collect());
    let n = t.len();
    let dof = (n - 2) as f64;
    let (b, c, var_b, chi2) = linear_fit(&t, &y, w.as_deref());

    let (chi2_red, slope_var) = match &w {
        Some(_) => {
            let r = chi2 / dof;
            (Some(r), var_b * r.max(1.0))
        }
        None => (None, var_b * chi2 / dof),
    };
    let mean_fit = t.iter().map(|ti| (c + b * ti).abs()).sum::<f64>() / n as f64;
    let rss: f64 = t.iter().zip(&y).map(|(ti, yi)| (yi - c - b * ti).powi(2)).sum();
    let rel_residual = if mean_fit > 0.0 {
        (rss / n as f64).sqrt() / mean_fit
    } else {
        0.0
    };

    let d = b / 2.0;
    let stderr = slope_var.sqrt() / 2.0;
    let poor = chi2_red.is_some_and(|r| r > CHI2_THRESHOLD) || rel_residual > RESIDUAL_THRESHOLD;
    let quality = if d < -2.0 * stderr {
        FitQuality::NonDiffusive
    } else if poor {
        FitQuality::PoorFit
    } else {
        FitQuality::Good
    };

    let p = &curve.params;
    let s = p.s();
    let t_eps = wigner_time(p.eps, s, p.hbar).unwrap_or(f64::NAN);
    let (x, yy) = scaling_coordinates(d, p.eps, s);
    Ok(DiffusionEstimate {
        d,
        stderr,
        intercept: c,
        fit_window: window,
        n_points: n,
        chi2_red,
        rel_residual,
        quality,
        s0: p.s0,
        sigma: p.sigma,
        fdot: p.fdot,
        eps: p.eps,
        t_eps,
        x,
        y: yy,
    })
}

/// Ordinary least-squares slope of `ln y` against `ln t` over `t` in
/// `[lo, hi]`, with its standard error.
pub fn log_log_slope(t: &[f64], y: &[f64], lo: f64, hi: f64) -> Result<(f64, f64)> {
    let (lt, ly): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(y)
        .filter(|(&ti, &yi)| ti >= lo && ti <= hi && ti > 0.0 && yi > 0.0)
        .map(|(ti, yi)| (ti.ln(), yi.ln()))
        .unzip();
    if lt.len() < 3 {
        return Err(Error::Window(format!(
            "{} usable samples in [{lo:.4}, {hi:.4}], need at least 3",
            lt.len()
        )));
    }
    let (b, _, var_b, rss) = linear_fit(&lt, &ly, None);
    Ok((b, (var_b * rss / (lt.len() - 2) as f64).sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledCurve {
    pub label: String,
    pub t_eps: f64,
    /// `t / t_eps`
    pub x: Vec<f64>,
    /// `dE^2 t_eps^2 / hbar^2`
    pub y: Vec<f64>,
}

impl RescaledCurve {
    /// Log-log interpolation at `x0`, `None` outside the sampled range.
    pub fn at(&self, x0: f64) -> Option<f64> {
        let k = self.x.partition_point(|&x| x < x0);
        if k == self.x.len() || (k == 0 && self.x[0] > x0) {
            return None;
        }
        if self.x[k] == x0 {
            return Some(self.y[k]);
        }
        let (x1, x2, y1, y2) = (self.x[k - 1], self.x[k], self.y[k - 1], self.y[k]);
        if y1 <= 0.0 || y2 <= 0.0 {
            return Some(y1 + (y2 - y1) * (x0 - x1) / (x2 - x1));
        }
        let f = (x0 / x1).ln() / (x2 / x1).ln();
        Some((y1.ln() + f * (y2 / y1).ln()).exp())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Collapse {
    pub curves: Vec<RescaledCurve>,
    /// Default comparison window in `t / t_eps`: from the latest `t_cl / t_eps`
    /// up to 1, clipped to the range every curve covers.
    pub transient_window: (f64, f64),
}

impl Collapse {
    /// Largest `(max - min) / mean` across curves on a log grid of `points`
    /// values of `t / t_eps` inside `window`.
    pub fn metric(&self, window: (f64, f64), points: usize) -> Result<f64> {
        let (lo, hi) = window;
        if !(lo > 0.0 && hi > lo) || points < 2 {
            return Err(Error::Window(format!("invalid collapse window [{lo}, {hi}]")));
        }
        let mut worst: f64 = 0.0;
        for k in 0..points {
            let x = lo * (hi / lo).powf(k as f64 / (points - 1) as f64);
            let vals: Vec<f64> = self
                .curves
                .iter()
                .map(|c| {
                    c.at(x).ok_or_else(|| {
                        Error::Window(format!("curve {} does not cover t/t_eps = {x:.4}", c.label))
                    })
                })
                .collect::<Result<_>>()?;
            let max = vals.iter().cloned().fold(f64::MIN, f64::max);
            let min = vals.iter().cloned().fold(f64::MAX, f64::min);
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            if mean > 0.0 {
                worst = worst.max((max - min) / mean);
            }
        }
        Ok(worst)
    }

    pub fn transient_metric(&self) -> Result<f64> {
        self.metric(self.transient_window, 20)
    }
}

/// Rescales each curve to `(t / t_eps, dE^2 t_eps^2 / hbar^2)`.
pub fn rescale_collapse(curves: &[SpreadingCurve], scales: &SystemScales) -> Result<Collapse> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Validation("no curves to rescale".into()))?;
    let s = first.params.s();
    if curves.iter().any(|c| (c.params.s() - s).abs() > 1e-12) {
        return Err(Error::Validation(
            "curves with different spectral exponents cannot be collapsed".into(),
        ));
    }
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 1.0;
    let mut out = Vec::with_capacity(curves.len());
    for c in curves {
        let hbar = c.params.hbar;
        let t_eps = wigner_time(c.params.eps, s, hbar)?;
        let x: Vec<f64> = c.times.iter().map(|t| t / t_eps).collect();
        let y = c
            .variance
            .iter()
            .map(|v| v * t_eps * t_eps / (hbar * hbar))
            .collect();
        lo = lo.max(scales.t_cl() / t_eps).max(x[0]);
        hi = hi.min(*x.last().unwrap());
        out.push(RescaledCurve {
            label: format!("{}_s0={}_fdot={}", c.mode.as_str(), c.params.s0, c.params.fdot),
            t_eps,
            x,
            y,
        });
    }
    Ok(Collapse {
        curves: out,
        transient_window: (lo, hi),
    })
}
