//! Spectral functions of the perturbation and of the driving source, and the
//! Kubo quadrature for the energy diffusion coefficient.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Driving power spectrum `S(omega) = eps^2 |omega|^-sigma delta_gamma(omega)`,
/// with `delta_gamma` a unit Lorentzian of half width `gamma = 1 / t_phi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrivingSpec {
    pub epsilon: f64,
    pub sigma: f64,
    /// Correlation time of the source, `f64::INFINITY` for strict DC driving.
    pub t_phi: f64,
}

impl DrivingSpec {
    pub fn new(epsilon: f64, sigma: f64, t_phi: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Validation(format!(
                "driving strength must be finite and non-negative, got {epsilon}"
            )));
        }
        if !(t_phi > 0.0) {
            return Err(Error::Validation(format!(
                "correlation time must be positive, got {t_phi}"
            )));
        }
        if !sigma.is_finite() {
            return Err(Error::Validation("spectral exponent must be finite".into()));
        }
        Ok(Self {
            epsilon,
            sigma,
            t_phi,
        })
    }

    pub fn from_gamma(epsilon: f64, sigma: f64, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(Error::Validation(format!(
                "linewidth must be non-negative, got {gamma}"
            )));
        }
        Self::new(epsilon, sigma, 1.0 / gamma)
    }

    pub fn gamma(&self) -> f64 {
        1.0 / self.t_phi
    }
}

pub fn lorentzian(omega: f64, gamma: f64) -> f64 {
    (gamma / PI) / (omega * omega + gamma * gamma)
}

pub fn driving_spectrum(spec: &DrivingSpec, omega: f64) -> Result<f64> {
    if omega == 0.0 && spec.sigma > 0.0 {
        return Err(Error::Singularity { sigma: spec.sigma });
    }
    let gamma = spec.gamma();
    if gamma == 0.0 {
        // delta function at the origin
        return if omega == 0.0 {
            Err(Error::Singularity { sigma: spec.sigma })
        } else {
            Ok(0.0)
        };
    }
    let power = if spec.sigma == 0.0 {
        1.0
    } else {
        omega.abs().powf(-spec.sigma)
    };
    Ok(spec.epsilon * spec.epsilon * power * lorentzian(omega, gamma))
}

/// `2 pi |omega|^(s0 - 1)` inside `omega0 <= |omega| <= omega_cl`, zero outside.
pub fn analytic_c(s0: f64, omega: f64, omega0: f64, omega_cl: f64) -> f64 {
    let w = omega.abs();
    if w < omega0 || w > omega_cl {
        0.0
    } else {
        2.0 * PI * w.powf(s0 - 1.0)
    }
}

/// Binned estimate of the spectral function of a perturbation given in an
/// eigenbasis. Frequencies are folded onto `|omega|` and the two signs are
/// averaged, so an ensemble estimate is directly comparable to [`analytic_c`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSamples {
    pub bin_width: f64,
    pub omega_bins: Vec<f64>,
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
}

impl SpectralSamples {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["omega", "C_value", "count"])?;
        for ((o, v), c) in self.omega_bins.iter().zip(&self.values).zip(&self.counts) {
            w.write_record([o.to_string(), v.to_string(), c.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        writeln!(out, "omega,C_value,count").unwrap();
        for ((o, v), c) in self.omega_bins.iter().zip(&self.values).zip(&self.counts) {
            writeln!(out, "{o},{v},{c}").unwrap();
        }
        String::from_utf8(out).unwrap()
    }

    /// Bin-wise mean over estimates sharing a bin width; bins missing from
    /// shorter estimates count as empty.
    pub fn mean(estimates: &[SpectralSamples]) -> Result<SpectralSamples> {
        let first = estimates
            .first()
            .ok_or_else(|| Error::Validation("no spectral estimates to average".into()))?;
        let len = estimates.iter().map(|e| e.values.len()).max().unwrap_or(0);
        let mut values = vec![0.0; len];
        let mut counts = vec![0; len];
        for e in estimates {
            if e.bin_width != first.bin_width {
                return Err(Error::Validation("bin widths differ".into()));
            }
            for (j, (v, c)) in e.values.iter().zip(&e.counts).enumerate() {
                values[j] += v;
                counts[j] += c;
            }
        }
        let m = estimates.len() as f64;
        values.iter_mut().for_each(|v| *v /= m);
        Ok(SpectralSamples {
            bin_width: first.bin_width,
            omega_bins: (0..len).map(|j| (j as f64 + 0.5) * first.bin_width).collect(),
            values,
            counts,
        })
    }
}

/// Default reference window: the central half of the spectrum, further
/// trimmed so that no reference level lies within `band` levels of an edge.
pub fn central_window(dim: usize, band: usize) -> std::ops::Range<usize> {
    let lo = (dim / 4).max(band);
    let hi = (dim - dim / 4).min(dim.saturating_sub(band));
    lo..hi.max(lo)
}

/// `C(omega) = <sum_n |V_{n,n0}|^2 2 pi delta(omega - (E_n - E_n0))>_{n0}`, binned
/// with width `bin_width` and averaged uniformly over `n0` in `window`.
pub fn estimate_c_in_window(
    v: MatRef<'_, f64>,
    energies: &[f64],
    bin_width: f64,
    window: std::ops::Range<usize>,
) -> Result<SpectralSamples> {
    let n = energies.len();
    if v.nrows() != n || v.ncols() != n {
        return Err(Error::Validation(
            "perturbation matrix and energy list differ in size".into(),
        ));
    }
    if !(bin_width > 0.0) {
        return Err(Error::Validation("bin width must be positive".into()));
    }
    if window.is_empty() || window.end > n {
        return Err(Error::Validation(format!(
            "reference window {window:?} is empty or exceeds {n} levels"
        )));
    }
    let span = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let nbins = ((span / bin_width).floor() as usize + 1).max(1);
    let mut sums = vec![0.0; nbins];
    let mut counts = vec![0usize; nbins];
    let refs = window.len() as f64;
    for n0 in window {
        for m in 0..n {
            if m == n0 {
                continue;
            }
            let j = ((energies[m] - energies[n0]).abs() / bin_width) as usize;
            let j = j.min(nbins - 1);
            sums[j] += v[(m, n0)] * v[(m, n0)];
            counts[j] += 1;
        }
    }
    let values = sums
        .iter()
        .map(|s| 2.0 * PI * s / (2.0 * bin_width * refs))
        .collect();
    Ok(SpectralSamples {
        bin_width,
        omega_bins: (0..nbins).map(|j| (j as f64 + 0.5) * bin_width).collect(),
        values,
        counts,
    })
}

/// [`estimate_c_in_window`] over the [`central_window`] with the given band guard.
pub fn estimate_c(
    v: MatRef<'_, f64>,
    energies: &[f64],
    bin_width: f64,
    band_guard: usize,
) -> Result<SpectralSamples> {
    estimate_c_in_window(
        v,
        energies,
        bin_width,
        central_window(energies.len(), band_guard),
    )
}

/// Spectral function entering the Kubo integral: the power law of
/// [`analytic_c`] continued flat below the infrared cutoff, so the DC limit
/// `gamma -> 0` stays finite and cutoff independent for `s0 = 1`.
pub fn kubo_spectral_function(s0: f64, omega: f64, omega0: f64, omega_cl: f64) -> f64 {
    let w = omega.abs();
    if w > omega_cl {
        0.0
    } else {
        2.0 * PI * w.max(omega0).powf(s0 - 1.0)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KuboResult {
    pub diffusion: f64,
    pub quadrature_error: f64,
}

/// `D = 1/2 int omega^2 C(omega) S(omega) d omega` over `|omega| <= omega_cl`.
pub fn kubo_diffusion(
    s0: f64,
    spec: &DrivingSpec,
    omega0: f64,
    omega_cl: f64,
) -> Result<KuboResult> {
    if !(omega0 > 0.0 && omega0 < omega_cl) {
        return Err(Error::Validation(format!(
            "cutoffs must satisfy 0 < omega0 < omega_cl, got {omega0}, {omega_cl}"
        )));
    }
    if !(s0 > 0.0 && s0 < 2.0) {
        return Err(Error::Validation(format!(
            "spectral exponent s0 must lie in (0, 2), got {s0}"
        )));
    }
    let eps2 = spec.epsilon * spec.epsilon;
    // omega^2 |omega|^-sigma near the origin
    let infrared_power = 2.0 - spec.sigma;
    if infrared_power <= -1.0 {
        return Err(Error::Divergent(format!(
            "omega^{infrared_power} is not integrable at omega = 0 (sigma = {})",
            spec.sigma
        )));
    }
    if eps2 == 0.0 {
        return Ok(KuboResult {
            diffusion: 0.0,
            quadrature_error: 0.0,
        });
    }
    let gamma = spec.gamma();
    if gamma == 0.0 {
        // strict DC limit: the Lorentzian collapses onto omega = 0
        let diffusion = if infrared_power > 0.0 {
            0.0
        } else if infrared_power == 0.0 {
            0.5 * eps2 * kubo_spectral_function(s0, 0.0, omega0, omega_cl)
        } else {
            return Err(Error::Divergent(format!(
                "DC limit of omega^{infrared_power} delta(omega) diverges"
            )));
        };
        return Ok(KuboResult {
            diffusion,
            quadrature_error: 0.0,
        });
    }
    // even integrand: D = int_0^omega_cl omega^(2 - sigma) C S_0 d omega
    let integrand = |w: f64| {
        if w == 0.0 {
            return if infrared_power == 0.0 {
                kubo_spectral_function(s0, 0.0, omega0, omega_cl) * eps2 * lorentzian(0.0, gamma)
            } else {
                0.0
            };
        }
        let pw = if infrared_power == 0.0 {
            1.0
        } else {
            w.powf(infrared_power)
        };
        pw * kubo_spectral_function(s0, w, omega0, omega_cl) * eps2 * lorentzian(w, gamma)
    };
    let mut breaks = vec![omega0];
    let mut g = gamma;
    while g < omega_cl {
        breaks.push(g);
        g *= 10.0;
    }
    let r = quadrature::integrate(integrand, 0.0, omega_cl, &breaks, 1e-11, 0.0, 20_000);
    if !(r.error <= 1e-8 * r.value.abs()) {
        return Err(Error::Divergent(format!(
            "quadrature did not converge: value {} error {}",
            r.value, r.error
        )));
    }
    Ok(KuboResult {
        diffusion: r.value,
        quadrature_error: r.error,
    })
}
