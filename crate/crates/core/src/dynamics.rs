//! Wavepacket evolution and energy-spreading measurements.
//!
//! Time-dependent Hamiltonians are integrated with the fourth order
//! commutator-free Magnus scheme (two exponentials per step); each
//! exponential is a Lanczos approximation, so only matrix-vector products
//! are needed. Static dense Hamiltonians can instead be evolved exactly
//! through their eigendecomposition.

use std::path::Path;

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::ensemble::{BandedMatrix, DrivenSystem, FrozenSystem};
use crate::error::{Error, Result};
use crate::linalg::{self, KrylovOptions, ZERO};

/// Something that computes `y = A x`.
pub trait LinearOperator {
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

/// Hermitian `H(t)`. `combination` returns the operator `sum_k w_k H(t_k)`
/// for `terms = [(t_k, w_k)]`.
pub trait Hamiltonian: Sync {
    fn dim(&self) -> usize;

    fn is_static(&self) -> bool {
        false
    }

    fn combination<'a>(&'a self, terms: &[(f64, f64)]) -> Box<dyn LinearOperator + 'a>;
}

struct BandedOperator<'a> {
    diag: &'a [f64],
    diag_scale: f64,
    band: BandedMatrix,
}

impl LinearOperator for BandedOperator<'_> {
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for ((yi, xi), e) in y.iter_mut().zip(x).zip(self.diag) {
            *yi = xi * (self.diag_scale * e);
        }
        self.band.apply_add(1.0, x, y);
    }
}

impl Hamiltonian for DrivenSystem {
    fn dim(&self) -> usize {
        DrivenSystem::dim(self)
    }

    fn combination<'a>(&'a self, terms: &[(f64, f64)]) -> Box<dyn LinearOperator + 'a> {
        let (mut a, mut c1, mut c2) = (0.0, 0.0, 0.0);
        for &(t, w) in terms {
            let f = self.fdot * t;
            a += w;
            c1 += w * f.cos();
            c2 += w * f.sin();
        }
        Box::new(BandedOperator {
            diag: &self.diag,
            diag_scale: a,
            band: self.v1.combine(c1, &self.v2, c2),
        })
    }
}

/// `H = diag(E) + eps V`, constant in time.
#[derive(Clone, Debug)]
pub struct StaticBanded {
    pub diag: Vec<f64>,
    pub v: BandedMatrix,
    pub eps: f64,
}

impl Hamiltonian for StaticBanded {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn is_static(&self) -> bool {
        true
    }

    fn combination<'a>(&'a self, terms: &[(f64, f64)]) -> Box<dyn LinearOperator + 'a> {
        let w: f64 = terms.iter().map(|&(_, w)| w).sum();
        let zero = BandedMatrix::zeros(self.v.dim(), self.v.band_max());
        Box::new(BandedOperator {
            diag: &self.diag,
            diag_scale: w,
            band: self.v.combine(w * self.eps, &zero, 0.0),
        })
    }
}

struct DenseOperator {
    m: Mat<C64>,
}

impl LinearOperator for DenseOperator {
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        linalg::dense_apply(self.m.as_ref(), x, y);
    }
}

struct DenseRef<'a> {
    m: MatRef<'a, C64>,
}

impl LinearOperator for DenseRef<'_> {
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        linalg::dense_apply(self.m, x, y);
    }
}

/// Constant dense Hermitian matrix.
pub struct DenseStatic(pub Mat<C64>);

impl Hamiltonian for DenseStatic {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn is_static(&self) -> bool {
        true
    }

    fn combination<'a>(&'a self, terms: &[(f64, f64)]) -> Box<dyn LinearOperator + 'a> {
        let w: f64 = terms.iter().map(|&(_, w)| w).sum();
        if w == 1.0 {
            Box::new(DenseRef { m: self.0.as_ref() })
        } else {
            Box::new(DenseOperator {
                m: Mat::from_fn(self.0.nrows(), self.0.ncols(), |i, j| self.0[(i, j)] * w),
            })
        }
    }
}

/// Time-dependent Hamiltonian given as a closure returning the dense matrix.
pub struct DenseProvider<F> {
    pub dim: usize,
    pub provider: F,
}

impl<F> Hamiltonian for DenseProvider<F>
where
    F: Fn(f64) -> Mat<C64> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn combination<'a>(&'a self, terms: &[(f64, f64)]) -> Box<dyn LinearOperator + 'a> {
        let mut m = Mat::<C64>::zeros(self.dim, self.dim);
        for &(t, w) in terms {
            let h = (self.provider)(t);
            m = Mat::from_fn(self.dim, self.dim, |i, j| m[(i, j)] + h[(i, j)] * w);
        }
        Box::new(DenseOperator { m })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub amplitudes: Vec<C64>,
    pub t: f64,
}

impl WaveState {
    /// Basis state `|index>` at time zero.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { amplitudes, t: 0.0 }
    }

    pub fn from_real(v: impl IntoIterator<Item = f64>, t: f64) -> Self {
        Self {
            amplitudes: v.into_iter().map(|x| C64::new(x, 0.0)).collect(),
            t,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        linalg::norm_sqr(&self.amplitudes)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Probability carried by the first and last `band` components.
    pub fn edge_weight(&self, band: usize) -> f64 {
        let n = self.dim();
        let band = band.min(n / 2);
        self.amplitudes[..band]
            .iter()
            .chain(&self.amplitudes[n - band..])
            .map(|z| z.norm_sqr())
            .sum()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PropagatorOptions {
    /// Largest step for time-dependent Hamiltonians.
    pub max_step: f64,
    pub krylov: KrylovOptions,
    /// Tolerated `| |psi|^2 - 1 |` at any sample time.
    pub norm_tol: f64,
    pub hbar: f64,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self {
            max_step: 1e-2,
            krylov: KrylovOptions::default(),
            norm_tol: 1e-8,
            hbar: 1.0,
        }
    }
}

impl PropagatorOptions {
    /// Step bound for the driven model: resolves both the driving period and
    /// the bandwidth frequency.
    pub fn for_driving(fdot: f64, omega_cl: f64) -> Self {
        let fastest = fdot.max(omega_cl).max(1.0);
        Self {
            max_step: 0.2 / fastest,
            ..Self::default()
        }
    }
}

// fourth order commutator-free Magnus coefficients
const SQRT3_6: f64 = 0.288_675_134_594_812_9;
const CF4_NODES: [f64; 2] = [0.5 - SQRT3_6, 0.5 + SQRT3_6];
const CF4_WEIGHTS: [f64; 2] = [0.25 + SQRT3_6, 0.25 - SQRT3_6];

fn exp_step(
    op: &dyn LinearOperator,
    psi: &[C64],
    dt: f64,
    opts: &PropagatorOptions,
) -> Option<Vec<C64>> {
    linalg::expm_lanczos(|x, y| op.apply(x, y), psi, dt / opts.hbar, opts.krylov).map(|(v, _)| v)
}

/// Advances `psi` from `t` by `h`; `None` when a Krylov exponential fails.
fn step<H: Hamiltonian + ?Sized>(
    ham: &H,
    psi: &[C64],
    t: f64,
    h: f64,
    opts: &PropagatorOptions,
) -> Option<Vec<C64>> {
    if ham.is_static() {
        let op = ham.combination(&[(t, 1.0)]);
        return exp_step(op.as_ref(), psi, h, opts);
    }
    let (t1, t2) = (t + CF4_NODES[0] * h, t + CF4_NODES[1] * h);
    let first = ham.combination(&[(t1, CF4_WEIGHTS[0]), (t2, CF4_WEIGHTS[1])]);
    let mid = exp_step(first.as_ref(), psi, h, opts)?;
    drop(first);
    let second = ham.combination(&[(t1, CF4_WEIGHTS[1]), (t2, CF4_WEIGHTS[0])]);
    exp_step(second.as_ref(), &mid, h, opts)
}

/// Integrates `i hbar d psi/dt = H(t) psi` and hands the state at every
/// sample time to `observe`.
pub fn propagate_with<H, F>(
    ham: &H,
    psi0: &WaveState,
    sample_times: &[f64],
    opts: &PropagatorOptions,
    mut observe: F,
) -> Result<()>
where
    H: Hamiltonian + ?Sized,
    F: FnMut(&WaveState) -> Result<()>,
{
    if psi0.dim() != ham.dim() {
        return Err(Error::Validation(format!(
            "state dimension {} does not match Hamiltonian dimension {}",
            psi0.dim(),
            ham.dim()
        )));
    }
    if (psi0.norm_sqr() - 1.0).abs() > opts.norm_tol {
        return Err(Error::Validation("initial state is not normalized".into()));
    }
    if sample_times.windows(2).any(|w| !(w[1] > w[0]))
        || sample_times.first().is_some_and(|&t| t < psi0.t)
    {
        return Err(Error::Validation(
            "sample times must increase and not precede the initial time".into(),
        ));
    }
    let mut psi = psi0.amplitudes.clone();
    let mut t = psi0.t;
    let mut h_try = if ham.is_static() {
        f64::INFINITY
    } else {
        opts.max_step
    };
    for &target in sample_times {
        while t < target {
            let remaining = target - t;
            let mut h = h_try.min(remaining);
            if !ham.is_static() {
                // equal sub-steps up to the next sample
                let n = (remaining / opts.max_step).ceil().max(1.0);
                h = h.min(remaining / n);
            }
            loop {
                match step(ham, &psi, t, h, opts) {
                    Some(next) => {
                        psi = next;
                        t = if h == remaining { target } else { t + h };
                        if ham.is_static() {
                            h_try = (2.0 * h).max(h_try);
                        }
                        break;
                    }
                    None => {
                        h *= 0.5;
                        h_try = h;
                        if h < 1e-12 * target.abs().max(1.0) {
                            return Err(Error::IntegrationFailure {
                                t,
                                drift: (linalg::norm_sqr(&psi) - 1.0).abs(),
                            });
                        }
                    }
                }
            }
        }
        let drift = (linalg::norm_sqr(&psi) - 1.0).abs();
        if drift > opts.norm_tol {
            return Err(Error::IntegrationFailure { t: target, drift });
        }
        observe(&WaveState {
            amplitudes: psi.clone(),
            t: target,
        })?;
    }
    Ok(())
}

/// [`propagate_with`] collecting every sampled state.
pub fn propagate<H: Hamiltonian + ?Sized>(
    ham: &H,
    psi0: &WaveState,
    sample_times: &[f64],
    opts: &PropagatorOptions,
) -> Result<Vec<WaveState>> {
    let mut out = Vec::with_capacity(sample_times.len());
    propagate_with(ham, psi0, sample_times, opts, |s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Exact evolution under a constant dense Hamiltonian via its eigenbasis.
pub struct StationaryPropagator {
    values: Vec<f64>,
    vectors: Mat<C64>,
    hbar: f64,
}

impl StationaryPropagator {
    pub fn new(h: MatRef<'_, C64>, hbar: f64) -> Result<Self> {
        let eig = linalg::hermitian_eigen(h)?;
        Ok(Self {
            values: eig.values,
            vectors: eig.vectors,
            hbar,
        })
    }

    pub fn from_real(h: MatRef<'_, f64>, hbar: f64) -> Result<Self> {
        let eig = linalg::symmetric_eigen(h)?;
        Ok(Self {
            values: eig.values,
            vectors: to_complex(eig.vectors.as_ref()),
            hbar,
        })
    }

    /// Coefficients of `psi` in the eigenbasis.
    pub fn coefficients(&self, psi: &WaveState) -> Vec<C64> {
        let n = self.values.len();
        (0..n)
            .map(|k| {
                let col = self.vectors.col(k);
                (0..n).map(|i| col[i].conj() * psi.amplitudes[i]).sum()
            })
            .collect()
    }

    pub fn evolve(&self, coefficients: &[C64], t: f64) -> WaveState {
        let n = self.values.len();
        let mut out = vec![ZERO; n];
        for k in 0..n {
            let c = coefficients[k] * C64::from_polar(1.0, -self.values[k] * t / self.hbar);
            let col = self.vectors.col(k);
            for (i, o) in out.iter_mut().enumerate() {
                *o += col[i] * c;
            }
        }
        WaveState { amplitudes: out, t }
    }
}

/// Probability distribution over the levels of some reference Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyDistribution {
    pub energies: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub t: f64,
}

impl EnergyDistribution {
    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.energies
            .iter()
            .zip(&self.probabilities)
            .map(|(e, p)| e * p)
            .sum::<f64>()
            / self.total()
    }
}

/// Central second moment `sum P (E - <E>)^2`. `reference_energy` only enters
/// the returned drift `<E> - reference_energy`.
pub fn spreading_variance(dist: &EnergyDistribution, reference_energy: f64) -> (f64, f64) {
    let mean = dist.mean();
    let total = dist.total();
    let var = dist
        .energies
        .iter()
        .zip(&dist.probabilities)
        .map(|(e, p)| p * (e - mean) * (e - mean))
        .sum::<f64>()
        / total;
    (var, mean - reference_energy)
}

/// Overlaps of `psi` with the columns of a real orthonormal basis.
pub fn project_onto_basis(
    psi: &WaveState,
    energies: &[f64],
    basis: MatRef<'_, f64>,
) -> EnergyDistribution {
    let n = energies.len();
    let probabilities = (0..n)
        .map(|k| {
            let col = basis.col(k);
            let c: C64 = psi
                .amplitudes
                .iter()
                .enumerate()
                .map(|(i, a)| a * col[i])
                .sum();
            c.norm_sqr()
        })
        .collect();
    EnergyDistribution {
        energies: energies.to_vec(),
        probabilities,
        t: psi.t,
    }
}

/// `P_t(n) = |<n(t)|psi>|^2` over the eigenbasis of `h_t`.
pub fn project_adiabatic(psi: &WaveState, h_t: MatRef<'_, C64>) -> Result<EnergyDistribution> {
    let eig = linalg::hermitian_eigen(h_t)?;
    let n = eig.values.len();
    let probabilities = (0..n)
        .map(|k| {
            let col = eig.vectors.col(k);
            let c: C64 = (0..n).map(|i| col[i].conj() * psi.amplitudes[i]).sum();
            c.norm_sqr()
        })
        .collect();
    Ok(EnergyDistribution {
        energies: eig.values,
        probabilities,
        t: psi.t,
    })
}

/// Local density of states of the `n0`-th eigenstate of `h0` over the
/// eigenstates of `h_perturbed`.
pub fn ldos(
    h0: MatRef<'_, C64>,
    h_perturbed: MatRef<'_, C64>,
    n0: usize,
) -> Result<EnergyDistribution> {
    let eig0 = linalg::hermitian_eigen(h0)?;
    if n0 >= eig0.values.len() {
        return Err(Error::Validation(format!("level {n0} out of range")));
    }
    let state = WaveState {
        amplitudes: (0..eig0.values.len()).map(|i| eig0.vectors[(i, n0)]).collect(),
        t: 0.0,
    };
    project_adiabatic(&state, h_perturbed)
}

pub fn to_complex(m: MatRef<'_, f64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| C64::new(m[(i, j)], 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Driven,
    Frozen,
    Quench,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::Driven => "driven",
            RunMode::Frozen => "frozen",
            RunMode::Quench => "quench",
        }
    }
}

/// One realization's measured `dE^2(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub variance: Vec<f64>,
    /// Probability left in the initial level, when the measurement basis is fixed.
    pub survival: Option<Vec<f64>>,
    pub max_norm_drift: f64,
    pub max_edge_weight: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct RunGuards {
    /// Levels at each matrix edge watched by the edge guard.
    pub edge_band: usize,
    pub edge_tol: f64,
}

impl RunGuards {
    pub fn new(edge_band: usize) -> Self {
        Self {
            edge_band,
            edge_tol: 1e-6,
        }
    }

    fn check(&self, psi: &WaveState) -> Result<f64> {
        let w = psi.edge_weight(self.edge_band);
        if w > self.edge_tol {
            return Err(Error::EdgeGuard { t: psi.t, weight: w });
        }
        Ok(w)
    }
}

/// Central eigenstate of `H(0)`, taken from the adiabatic frame of `frozen`.
pub fn central_adiabatic_state(frozen: &FrozenSystem) -> WaveState {
    let n0 = frozen.dim() / 2;
    WaveState::from_real(
        (0..frozen.dim()).map(|i| frozen.reference.basis[(i, n0)]),
        0.0,
    )
}

/// Evolves under the driven Hamiltonian and records the energy variance in
/// the instantaneous adiabatic basis, `<H(t)^2> - <H(t)>^2`.
pub fn run_driven(
    sys: &DrivenSystem,
    psi0: &WaveState,
    sample_times: &[f64],
    opts: &PropagatorOptions,
    guards: &RunGuards,
) -> Result<Trajectory> {
    let mut variance = Vec::with_capacity(sample_times.len());
    let mut max_edge: f64 = 0.0;
    let mut max_drift: f64 = 0.0;
    propagate_with(sys, psi0, sample_times, opts, |psi| {
        max_edge = max_edge.max(guards.check(psi)?);
        max_drift = max_drift.max((psi.norm_sqr() - 1.0).abs());
        let (_, var) = linalg::operator_moments(&psi.amplitudes, |x, y| sys.apply(psi.t, x, y));
        variance.push(var);
        Ok(())
    })?;
    Ok(Trajectory {
        times: sample_times.to_vec(),
        variance,
        survival: None,
        max_norm_drift: max_drift,
        max_edge_weight: max_edge,
    })
}

/// Evolves under the frozen Hamiltonian (exactly, through its eigenbasis) and
/// measures the spreading over the eigenbasis of `H(0)`.
pub fn run_frozen(
    frozen: &FrozenSystem,
    sample_times: &[f64],
    guards: &RunGuards,
) -> Result<Trajectory> {
    let n0 = frozen.dim() / 2;
    let psi0 = central_adiabatic_state(frozen);
    let prop = StationaryPropagator::new(frozen.h_frozen.as_ref(), frozen.reference.hbar)?;
    let coeffs = prop.coefficients(&psi0);
    let mut variance = Vec::with_capacity(sample_times.len());
    let mut survival = Vec::with_capacity(sample_times.len());
    let mut max_edge: f64 = 0.0;
    let mut max_drift: f64 = 0.0;
    for &t in sample_times {
        let psi = prop.evolve(&coeffs, t);
        let drift = (psi.norm_sqr() - 1.0).abs();
        if drift > 1e-8 {
            return Err(Error::IntegrationFailure { t, drift });
        }
        max_drift = max_drift.max(drift);
        max_edge = max_edge.max(guards.check(&psi)?);
        let dist = project_onto_basis(
            &psi,
            &frozen.reference.energies,
            frozen.reference.basis.as_ref(),
        );
        survival.push(dist.probabilities[n0]);
        variance.push(spreading_variance(&dist, frozen.reference.energies[n0]).0);
    }
    Ok(Trajectory {
        times: sample_times.to_vec(),
        variance,
        survival: Some(survival),
        max_norm_drift: max_drift,
        max_edge_weight: max_edge,
    })
}

/// Sudden constant perturbation: evolves `|i0>` under `diag(E) + eps V`
/// (exactly, through its eigenbasis) and measures the spreading over the
/// unperturbed levels.
pub fn run_quench(
    ham: &StaticBanded,
    i0: usize,
    sample_times: &[f64],
    hbar: f64,
    guards: &RunGuards,
) -> Result<Trajectory> {
    let n = ham.dim();
    let mut dense = ham.v.to_dense();
    for i in 0..n {
        for j in 0..n {
            dense[(i, j)] *= ham.eps;
        }
        dense[(i, i)] += ham.diag[i];
    }
    let prop = StationaryPropagator::from_real(dense.as_ref(), hbar)?;
    let coeffs = prop.coefficients(&WaveState::basis(n, i0));
    let mut variance = Vec::with_capacity(sample_times.len());
    let mut survival = Vec::with_capacity(sample_times.len());
    let mut max_edge: f64 = 0.0;
    let mut max_drift: f64 = 0.0;
    for &t in sample_times {
        let psi = prop.evolve(&coeffs, t);
        let drift = (psi.norm_sqr() - 1.0).abs();
        if drift > 1e-8 {
            return Err(Error::IntegrationFailure { t, drift });
        }
        max_drift = max_drift.max(drift);
        max_edge = max_edge.max(guards.check(&psi)?);
        let dist = EnergyDistribution {
            energies: ham.diag.clone(),
            probabilities: psi.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
            t,
        };
        survival.push(dist.probabilities[i0]);
        variance.push(spreading_variance(&dist, ham.diag[i0]).0);
    }
    Ok(Trajectory {
        times: sample_times.to_vec(),
        variance,
        survival: Some(survival),
        max_norm_drift: max_drift,
        max_edge_weight: max_edge,
    })
}

/// Parameters a curve was generated with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    pub s0: f64,
    /// Spectral exponent of the driving: 2 for driven and frozen runs, 0 for quenches.
    pub sigma: f64,
    pub fdot: f64,
    pub eps: f64,
    pub dim: usize,
    pub band: usize,
    pub hbar: f64,
    pub seeds: Vec<u64>,
    /// Seeds of realizations that failed and were left out of the average.
    pub excluded_seeds: Vec<u64>,
}

impl CurveParams {
    /// Effective spectral exponent `s = s0 - sigma`.
    pub fn s(&self) -> f64 {
        self.s0 - self.sigma
    }
}

/// Ensemble-averaged `dE^2(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadingCurve {
    pub mode: RunMode,
    pub params: CurveParams,
    pub times: Vec<f64>,
    pub variance: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_realizations: usize,
    pub survival: Option<Vec<f64>>,
    pub per_realization: Vec<Vec<f64>>,
}

impl SpreadingCurve {
    /// Ordered mean and standard error over `trajectories`, which must share the time grid.
    pub fn from_trajectories(
        mode: RunMode,
        params: CurveParams,
        trajectories: &[Trajectory],
    ) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::Validation("no trajectories to average".into()))?;
        let times = first.times.clone();
        if trajectories.iter().any(|t| t.times != times) {
            return Err(Error::Validation("trajectories use different time grids".into()));
        }
        let m = trajectories.len() as f64;
        let k = times.len();
        let mut mean = vec![0.0; k];
        for tr in trajectories {
            for (acc, v) in mean.iter_mut().zip(&tr.variance) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        let stderr = (0..k)
            .map(|j| {
                if trajectories.len() < 2 {
                    return 0.0;
                }
                let ss: f64 = trajectories
                    .iter()
                    .map(|tr| (tr.variance[j] - mean[j]).powi(2))
                    .sum();
                (ss / (m - 1.0)).sqrt() / m.sqrt()
            })
            .collect();
        let survival = if trajectories.iter().all(|t| t.survival.is_some()) {
            let mut acc = vec![0.0; k];
            for tr in trajectories {
                for (a, s) in acc.iter_mut().zip(tr.survival.as_ref().unwrap()) {
                    *a += s;
                }
            }
            Some(acc.into_iter().map(|v| v / m).collect())
        } else {
            None
        };
        Ok(Self {
            mode,
            params,
            times,
            variance: mean,
            stderr,
            n_realizations: trajectories.len(),
            survival,
            per_realization: trajectories.iter().map(|t| t.variance.clone()).collect(),
        })
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "dE2_mean", "dE2_stderr", "n_realizations"])?;
        for ((t, v), e) in self.times.iter().zip(&self.variance).zip(&self.stderr) {
            w.write_record([
                format!("{t:e}"),
                format!("{v:e}"),
                format!("{e:e}"),
                self.n_realizations.to_string(),
            ])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Validation(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `<stem>.csv` and the `<stem>.json` sidecar.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let csv_path = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv_path, self.to_csv_string()?).map_err(|e| Error::io(&csv_path, e))?;
        let json_path = dir.join(format!("{stem}.json"));
        let sidecar = serde_json::json!({
            "mode": self.mode,
            "params": self.params,
            "n_realizations": self.n_realizations,
            "survival": self.survival,
            "per_realization": self.per_realization,
        });
        std::fs::write(&json_path, serde_json::to_string_pretty(&sidecar)?)
            .map_err(|e| Error::io(&json_path, e))?;
        Ok(())
    }
}

/// Log-spaced times from `t_lo` to `t_hi` inclusive.
pub fn log_time_grid(t_lo: f64, t_hi: f64, points: usize) -> Vec<f64> {
    assert!(t_lo > 0.0 && t_hi > t_lo && points >= 2);
    let r = (t_hi / t_lo).ln() / (points - 1) as f64;
    (0..points).map(|k| t_lo * (r * k as f64).exp()).collect()
}
