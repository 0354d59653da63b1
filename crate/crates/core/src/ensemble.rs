//! Random-matrix model: banded perturbations with a power-law bandprofile,
//! the parametric driven Hamiltonian
//!
//! ```text
//! H(t) = diag(E) + cos(fdot t) V1 + sin(fdot t) V2
//! ```
//!
//! and its frozen counterpart obtained from the adiabatic transformation at
//! `t = 0`.
//!
//! Units: `hbar = rho = 1` by default, the unperturbed levels form a picket
//! fence with unit spacing, so the level spacing `omega0` is 1 and the
//! bandwidth `omega_cl` equals `band_max`.

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenSystem};

/// Off-diagonal variance law `<|V_ij|^2> = lambda |i - j|^(s_lambda - 1)` for
/// `band_min <= |i - j| <= band_max`, zero elsewhere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandProfile {
    pub s_lambda: f64,
    pub lambda: f64,
    pub band_min: usize,
    pub band_max: usize,
}

impl BandProfile {
    pub fn new(s_lambda: f64, lambda: f64, band_min: usize, band_max: usize) -> Result<Self> {
        let profile = Self {
            s_lambda,
            lambda,
            band_min,
            band_max,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Unit prefactor, unit infrared cutoff.
    pub fn with_exponent(s_lambda: f64, band_max: usize) -> Result<Self> {
        Self::new(s_lambda, 1.0, 1, band_max)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Validation(format!(
                "bandprofile prefactor must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.s_lambda > 0.0 && self.s_lambda < 2.0) {
            return Err(Error::Validation(format!(
                "bandprofile exponent must lie in (0, 2), got {}",
                self.s_lambda
            )));
        }
        if self.band_min < 1 || self.band_min > self.band_max {
            return Err(Error::Validation(format!(
                "band offsets must satisfy 1 <= band_min <= band_max, got {}..={}",
                self.band_min, self.band_max
            )));
        }
        Ok(())
    }

    /// Variance of an element at `offset = |i - j|` for unit level spacing.
    pub fn variance(&self, offset: usize) -> f64 {
        if offset < self.band_min || offset > self.band_max {
            0.0
        } else {
            self.lambda * (offset as f64).powf(self.s_lambda - 1.0)
        }
    }

    /// Ultraviolet cutoff for unit level spacing.
    pub fn omega_cl(&self) -> f64 {
        self.band_max as f64
    }

    /// Sum of variances over one row deep inside the matrix.
    pub fn row_variance(&self) -> f64 {
        2.0 * (self.band_min..=self.band_max)
            .map(|k| self.variance(k))
            .sum::<f64>()
    }
}

/// Real symmetric banded matrix with zero diagonal. Only the upper band is
/// stored, so symmetry holds by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedMatrix {
    dim: usize,
    band_max: usize,
    // upper[i * (band_max + 1) + k] = M[i][i + k]; k = 0 is the (zero) diagonal
    upper: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(dim: usize, band_max: usize) -> Self {
        Self {
            dim,
            band_max,
            upper: vec![0.0; dim * (band_max + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn band_max(&self) -> usize {
        self.band_max
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        if k == 0 || k > self.band_max || hi >= self.dim {
            0.0
        } else {
            self.upper[lo * (self.band_max + 1) + k]
        }
    }

    /// Sets `M[i][j] = M[j][i] = value`. Diagonal and out-of-band writes are rejected.
    pub fn set(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        if k == 0 || k > self.band_max || hi >= self.dim {
            return Err(Error::Validation(format!(
                "entry ({i}, {j}) lies outside the off-diagonal band of width {}",
                self.band_max
            )));
        }
        self.upper[lo * (self.band_max + 1) + k] = value;
        Ok(())
    }

    /// Entries at a fixed offset `k`, i.e. `M[i][i + k]` for all valid `i`.
    pub fn diagonal_at(&self, k: usize) -> Vec<f64> {
        if k == 0 || k > self.band_max || k >= self.dim {
            return vec![0.0; self.dim.saturating_sub(k)];
        }
        (0..self.dim - k)
            .map(|i| self.upper[i * (self.band_max + 1) + k])
            .collect()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        Mat::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    /// `a * self + b * other`, both with the same shape.
    pub fn combine(&self, a: f64, other: &BandedMatrix, b: f64) -> BandedMatrix {
        assert_eq!(self.dim, other.dim);
        assert_eq!(self.band_max, other.band_max);
        BandedMatrix {
            dim: self.dim,
            band_max: self.band_max,
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    /// `y += scale * M x`
    pub fn apply_add(&self, scale: f64, x: &[C64], y: &mut [C64]) {
        let w = self.band_max + 1;
        for i in 0..self.dim {
            let row = &self.upper[i * w..(i + 1) * w];
            let kmax = self.band_max.min(self.dim - 1 - i);
            let xi = x[i];
            let mut acc = C64::new(0.0, 0.0);
            for k in 1..=kmax {
                let a = scale * row[k];
                acc += x[i + k] * a;
                y[i + k] += xi * a;
            }
            y[i] += acc;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Counter-based seed derivation. Every `(base, index)` pair gives a distinct
/// well-mixed 64-bit seed; chaining the call gives independent streams for
/// nested indices (parameter point, realization, retry attempt, matrix id).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `V_ij`, `band_min <= j - i <= band_max`, independently from a centered
/// Gaussian of variance `profile.variance(j - i)` and mirrors them.
pub fn sample_banded_matrix(profile: &BandProfile, dim: usize, seed: u64) -> Result<BandedMatrix> {
    profile.validate()?;
    if dim <= 2 * profile.band_max {
        return Err(Error::Config(format!(
            "matrix dimension {dim} must exceed twice the bandwidth {}",
            profile.band_max
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigmas: Vec<f64> = (0..=profile.band_max)
        .map(|k| profile.variance(k).sqrt())
        .collect();
    let mut m = BandedMatrix::zeros(dim, profile.band_max);
    let w = profile.band_max + 1;
    for i in 0..dim {
        for k in profile.band_min..=profile.band_max.min(dim - 1 - i) {
            let z: f64 = rng.sample(StandardNormal);
            m.upper[i * w + k] = z * sigmas[k];
        }
    }
    Ok(m)
}

/// How the unperturbed levels are laid out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LevelSpectrum {
    /// `E_i = (i - N/2) omega0`
    #[default]
    PicketFence,
    /// Picket fence plus independent uniform jitter in `[-omega0/2, omega0/2]`.
    Jittered,
}

pub fn unperturbed_levels(dim: usize, mode: LevelSpectrum, seed: u64) -> Vec<f64> {
    let center = (dim / 2) as f64;
    match mode {
        LevelSpectrum::PicketFence => (0..dim).map(|i| i as f64 - center).collect(),
        LevelSpectrum::Jittered => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..dim)
                .map(|i| i as f64 - center + rng.random_range(-0.5..=0.5))
                .collect()
        }
    }
}

/// `H(t) = diag(E) + cos(fdot t) V1 + sin(fdot t) V2` with `eps^2 = lambda fdot^2`.
#[derive(Clone, Debug)]
pub struct DrivenSystem {
    pub diag: Vec<f64>,
    pub v1: BandedMatrix,
    pub v2: BandedMatrix,
    pub fdot: f64,
    pub hbar: f64,
    pub rho: f64,
    pub profile: BandProfile,
}

impl DrivenSystem {
    /// Draws `V1` and `V2` from independent streams of `seed`.
    pub fn generate(
        profile: &BandProfile,
        dim: usize,
        fdot: f64,
        seed: u64,
        levels: LevelSpectrum,
    ) -> Result<Self> {
        if !fdot.is_finite() || fdot < 0.0 {
            return Err(Error::Validation(format!(
                "driving rate must be finite and non-negative, got {fdot}"
            )));
        }
        let v1 = sample_banded_matrix(profile, dim, derive_seed(seed, 1))?;
        let v2 = sample_banded_matrix(profile, dim, derive_seed(seed, 2))?;
        Ok(Self {
            diag: unperturbed_levels(dim, levels, derive_seed(seed, 3)),
            v1,
            v2,
            fdot,
            hbar: 1.0,
            rho: 1.0,
            profile: *profile,
        })
    }

    /// Assembles a system from explicit parts; only shapes are checked.
    pub fn from_parts(
        diag: Vec<f64>,
        v1: BandedMatrix,
        v2: BandedMatrix,
        fdot: f64,
        profile: BandProfile,
    ) -> Result<Self> {
        if v1.dim() != diag.len() || v2.dim() != diag.len() || v1.band_max() != v2.band_max() {
            return Err(Error::Validation(
                "diagonal and perturbation matrices have inconsistent shapes".into(),
            ));
        }
        Ok(Self {
            diag,
            v1,
            v2,
            fdot,
            hbar: 1.0,
            rho: 1.0,
            profile,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// RMS driving strength, `eps = sqrt(lambda) fdot`.
    pub fn eps(&self) -> f64 {
        self.profile.lambda.sqrt() * self.fdot
    }

    /// Index of the level at the band center.
    pub fn central_level(&self) -> usize {
        self.dim() / 2
    }

    /// Banded part of `H(t)`.
    pub fn perturbation_at(&self, t: f64) -> BandedMatrix {
        let f = self.fdot * t;
        self.v1.combine(f.cos(), &self.v2, f.sin())
    }

    /// Dense `H(t)`.
    pub fn build_hamiltonian(&self, t: f64) -> Mat<f64> {
        let f = self.fdot * t;
        let (c, s) = (f.cos(), f.sin());
        Mat::from_fn(self.dim(), self.dim(), |i, j| {
            let d = if i == j { self.diag[i] } else { 0.0 };
            d + c * self.v1.get(i, j) + s * self.v2.get(i, j)
        })
    }

    /// `y = (a diag(E) + c1 V1 + c2 V2) x`
    pub fn apply_combination(&self, a: f64, c1: f64, c2: f64, x: &[C64], y: &mut [C64]) {
        for ((yi, xi), e) in y.iter_mut().zip(x).zip(&self.diag) {
            *yi = xi * (a * e);
        }
        let band = self.v1.combine(c1, &self.v2, c2);
        band.apply_add(1.0, x, y);
    }

    /// `y = H(t) x`
    pub fn apply(&self, t: f64, x: &[C64], y: &mut [C64]) {
        let f = self.fdot * t;
        self.apply_combination(1.0, f.cos(), f.sin(), x, y);
    }
}

/// Eigenbasis of `H(0)` and the perturbation `V2 = dH/df (f = 0)` expressed in it.
pub struct AdiabaticCoupling {
    pub energies: Vec<f64>,
    pub basis: Mat<f64>,
    /// `V_nm = <n|V2|m>`
    pub v_adiabatic: Mat<f64>,
    pub hbar: f64,
}

/// Gap below which two adiabatic levels count as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

impl AdiabaticCoupling {
    pub fn new(sys: &DrivenSystem) -> Result<Self> {
        let h0 = sys.build_hamiltonian(0.0);
        let EigenSystem { values, vectors } = linalg::symmetric_eigen(h0.as_ref())?;
        for (n, pair) in values.windows(2).enumerate() {
            let gap = pair[1] - pair[0];
            if gap < DEGENERACY_GAP {
                return Err(Error::Degeneracy { n, m: n + 1, gap });
            }
        }
        let v2 = sys.v2.to_dense();
        let tmp = &v2 * &vectors;
        let mut v_ad = vectors.transpose() * &tmp;
        symmetrize(&mut v_ad);
        Ok(Self {
            energies: values,
            basis: vectors,
            v_adiabatic: v_ad,
            hbar: sys.hbar,
        })
    }

    /// Real antisymmetric `A` with `W = i A`, `A_nm = hbar V_nm / (E_n - E_m)`, `A_nn = 0`.
    pub fn w_matrix_imag(&self) -> Mat<f64> {
        let e = &self.energies;
        let n = e.len();
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                self.hbar * self.v_adiabatic[(i, j)] / (e[i] - e[j])
            }
        })
    }
}

fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn antisymmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = 0.0;
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] - m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
}

/// Dense Hermitian `H(0) + fdot W(0)` in the unperturbed basis, together with
/// the adiabatic frame it was built from.
pub struct FrozenSystem {
    pub h_frozen: Mat<C64>,
    pub reference: AdiabaticCoupling,
    pub fdot: f64,
}

impl FrozenSystem {
    pub fn dim(&self) -> usize {
        self.h_frozen.nrows()
    }

    /// Largest `|H - H^dagger|` element relative to the largest `|H|` element.
    pub fn hermiticity_defect(&self) -> f64 {
        let h = &self.h_frozen;
        let n = h.nrows();
        let mut defect: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                defect = defect.max((h[(i, j)] - h[(j, i)].conj()).norm());
                scale = scale.max(h[(i, j)].norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }
}

/// Freezes the adiabatic-frame Hamiltonian at `t = 0` and writes it back in
/// the unperturbed basis: `diag(E) + V1 + fdot U W U^T`, with the static part
/// taken as `V1`.
pub fn build_frozen_hamiltonian(sys: &DrivenSystem) -> Result<FrozenSystem> {
    let coupling = AdiabaticCoupling::new(sys)?;
    let a = coupling.w_matrix_imag();
    let u = &coupling.basis;
    let tmp = u * &a;
    let mut back = &tmp * u.transpose();
    antisymmetrize(&mut back);
    let h0 = sys.build_hamiltonian(0.0);
    let n = sys.dim();
    let h = Mat::from_fn(n, n, |i, j| {
        let im = if sys.fdot == 0.0 {
            0.0
        } else {
            sys.fdot * back[(i, j)]
        };
        C64::new(h0[(i, j)], im)
    });
    Ok(FrozenSystem {
        h_frozen: h,
        reference: coupling,
        fdot: sys.fdot,
    })
}
