//! Sine eigenbasis of the Dirichlet Laplacian on (0,1).
//!
//! States are stored as coefficients against `e_k(x) = √2 sin(kπx)`, `k ≥ 1`.
//! The operator `A = ν ∂²ₓ` is diagonal in this basis with eigenvalues
//! `-μ_k`, `μ_k = ν π² k²`, so the semigroup, the `φ₁` operator
//! `A⁻¹(e^{hA} − Id)` and the interpolation norms `‖(−A)^r v‖` all act
//! mode by mode.
//!
//! Physical-space values live on the interior nodes `x_j = j/G`,
//! `j = 1..G−1`, of a uniform grid. Both directions of the transform are a
//! type-I discrete sine transform evaluated through a complex FFT of length
//! `2G`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Below this value of `μh` the `φ₁` multiplier switches to its Taylor series.
pub const PHI1_SERIES_THRESHOLD: f64 = 1e-5;

/// Coefficients `c_k = ⟨e_k, v⟩` of a function in the sine basis, `k = 1..=N`.
#[derive(Clone, PartialEq)]
pub struct SpectralVector {
    coeffs: Vec<f64>,
}

impl SpectralVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("spectral vector needs at least one mode"));
        }
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!(
                "coefficient of mode {} is not finite",
                k + 1
            )));
        }
        Ok(Self { coeffs })
    }

    /// Skips validation. Callers guarantee `coeffs` is non-empty.
    pub(crate) fn from_vec_unchecked(coeffs: Vec<f64>) -> Self {
        debug_assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "spectral vector needs at least one mode");
        Self {
            coeffs: vec![0.0; n],
        }
    }

    /// The basis vector `e_k` embedded in `n` modes (`k` is 1-based).
    pub fn basis(n: usize, k: usize) -> Self {
        assert!(k >= 1 && k <= n, "mode {k} outside 1..={n}");
        let mut v = Self::zeros(n);
        v.coeffs[k - 1] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of mode `k` (1-based); zero beyond the stored modes.
    pub fn mode(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.coeffs.get(k - 1).copied().unwrap_or(0.0)
    }

    /// Galerkin projection `P_n` (truncation or zero padding).
    pub fn resized(&self, n: usize) -> Self {
        assert!(n >= 1);
        let mut coeffs = vec![0.0; n];
        let m = n.min(self.dim());
        coeffs[..m].copy_from_slice(&self.coeffs[..m]);
        Self { coeffs }
    }

    /// `‖v‖_H`, the Euclidean norm of the coefficients.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }
}

impl fmt::Debug for SpectralVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SpectralVector").field(&self.coeffs).finish()
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Spectrum of `A = ν·Δ_Dirichlet`: `μ_k = ν π² k²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSpectrum {
    nu: f64,
}

impl OperatorSpectrum {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::invalid(format!(
                "diffusion coefficient must be positive, got {nu}"
            )));
        }
        Ok(Self { nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `μ_k` for a 1-based mode index. Mode 0 is not part of the basis.
    #[inline]
    pub fn mu(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        let k = k as f64;
        self.nu * PI * PI * k * k
    }
}

/// `μ_k = ν π² k²`.
pub fn eigenvalue(k: usize, nu: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::invalid("mode index must be at least 1"));
    }
    Ok(OperatorSpectrum::new(nu)?.mu(k))
}

/// `‖v‖_{H_r} = ‖(−A)^r v‖_H = (Σ_k μ_k^{2r} c_k²)^{1/2}`.
pub fn hr_norm(v: &SpectralVector, r: f64, spec: &OperatorSpectrum) -> f64 {
    if r == 0.0 {
        return v.norm();
    }
    v.coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| spec.mu(i + 1).powf(2.0 * r) * c * c)
        .sum::<f64>()
        .sqrt()
}

/// `(1 − e^{−μh})/μ`, the eigenvalue of `A⁻¹(e^{hA} − Id)` on `e_k` up to sign.
///
/// For `μh` below [`PHI1_SERIES_THRESHOLD`] the truncated series
/// `h(1 − x/2 + x²/6 − x³/24)` with `x = μh` is used.
#[inline]
pub fn phi1_multiplier(mu: f64, h: f64) -> f64 {
    let x = mu * h;
    if x < PHI1_SERIES_THRESHOLD {
        h * (1.0 - x / 2.0 * (1.0 - x / 3.0 * (1.0 - x / 4.0)))
    } else {
        -(-x).exp_m1() / mu
    }
}

fn check_time(h: f64) -> Result<()> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!(
            "time increment must be non-negative, got {h}"
        )));
    }
    Ok(())
}

/// `c_k ↦ e^{−μ_k h} c_k`.
pub fn apply_semigroup(
    v: &SpectralVector,
    h: f64,
    spec: &OperatorSpectrum,
) -> Result<SpectralVector> {
    check_time(h)?;
    Ok(SpectralVector::from_vec_unchecked(
        v.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| (-spec.mu(i + 1) * h).exp() * c)
            .collect(),
    ))
}

/// `c_k ↦ (1 − e^{−μ_k h})/μ_k · c_k`.
pub fn apply_phi1(v: &SpectralVector, h: f64, spec: &OperatorSpectrum) -> Result<SpectralVector> {
    check_time(h)?;
    Ok(SpectralVector::from_vec_unchecked(
        v.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| phi1_multiplier(spec.mu(i + 1), h) * c)
            .collect(),
    ))
}

/// Per-mode semigroup and `φ₁` factors for a fixed step `h`, precomputed once
/// per resolution and shared across paths.
#[derive(Debug, Clone)]
pub struct StepFactors {
    pub h: f64,
    pub decay: Vec<f64>,
    pub phi1: Vec<f64>,
}

impl StepFactors {
    pub fn new(spec: &OperatorSpectrum, modes: usize, h: f64) -> Result<Self> {
        check_time(h)?;
        let decay = (1..=modes).map(|k| (-spec.mu(k) * h).exp()).collect();
        let phi1 = (1..=modes)
            .map(|k| phi1_multiplier(spec.mu(k), h))
            .collect();
        Ok(Self { h, decay, phi1 })
    }

    pub fn modes(&self) -> usize {
        self.decay.len()
    }
}

/// Values at the interior nodes `x_j = j/G`, `j = 1..G−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: usize, values: Vec<f64>) -> Result<Self> {
        if grid < 2 {
            return Err(Error::invalid("grid size must be at least 2"));
        }
        check_dim(grid - 1, values.len())?;
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let g = self.grid as f64;
        (1..self.grid).map(move |j| j as f64 / g)
    }
}

/// Type-I discrete sine transform `S(x)_k = Σ_{j=1}^{G−1} x_j sin(πjk/G)`
/// of length `G − 1`, computed with a length-`2G` complex FFT of the odd
/// extension.
#[derive(Clone)]
pub struct SineTransform {
    grid: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SineTransform")
            .field("grid", &self.grid)
            .finish()
    }
}

impl SineTransform {
    pub fn new(grid: usize) -> Result<Self> {
        if grid < 2 {
            return Err(Error::invalid("grid size must be at least 2"));
        }
        let fft = FftPlanner::new().plan_fft_forward(2 * grid);
        Ok(Self { grid, fft })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// Applies the raw DST-I to `input` (zero-padded to `G − 1` entries)
    /// and writes `G − 1` outputs.
    fn dst1(&self, input: &[f64], out: &mut [f64]) {
        let g = self.grid;
        debug_assert!(input.len() < g && out.len() == g - 1);
        let mut buf = vec![Complex::new(0.0, 0.0); 2 * g];
        for (j, &x) in input.iter().enumerate() {
            buf[j + 1].re = x;
            buf[2 * g - j - 1].re = -x;
        }
        self.fft.process(&mut buf);
        for (k, o) in out.iter_mut().enumerate() {
            *o = -0.5 * buf[k + 1].im;
        }
    }

    /// Grid values `√2 Σ_k c_k sin(kπ x_j)` of a band-limited function.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() > self.grid - 1 {
            return Err(Error::DimensionMismatch {
                expected: self.grid - 1,
                found: coeffs.len(),
            });
        }
        let mut out = vec![0.0; self.grid - 1];
        self.dst1(coeffs, &mut out);
        out.iter_mut().for_each(|v| *v *= SQRT_2);
        Ok(out)
    }

    /// First `modes` sine coefficients of the trigonometric interpolant of
    /// the grid values: `c_k = (√2/G) Σ_j g_j sin(kπ x_j)`.
    pub fn analyze(&self, values: &[f64], modes: usize) -> Result<Vec<f64>> {
        check_dim(self.grid - 1, values.len())?;
        if modes > self.grid - 1 {
            return Err(Error::DimensionMismatch {
                expected: self.grid - 1,
                found: modes,
            });
        }
        let mut out = vec![0.0; self.grid - 1];
        self.dst1(values, &mut out);
        let scale = SQRT_2 / self.grid as f64;
        out.truncate(modes);
        out.iter_mut().for_each(|c| *c *= scale);
        Ok(out)
    }
}

/// Evaluates `v` on the interior nodes of a grid of size `G` (`G − 1 ≥ N`).
pub fn to_grid(v: &SpectralVector, grid: usize) -> Result<GridFunction> {
    if grid < 2 || grid - 1 < v.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim() + 1,
            found: grid,
        });
    }
    let values = SineTransform::new(grid)?.synthesize(v.coeffs())?;
    GridFunction::new(grid, values)
}

/// Exact sine coefficients (modes `1..=N`) of the interpolant of `g`.
pub fn from_grid(g: &GridFunction, modes: usize) -> Result<SpectralVector> {
    if modes == 0 {
        return Err(Error::invalid("at least one mode required"));
    }
    let coeffs = SineTransform::new(g.grid)?.analyze(&g.values, modes)?;
    SpectralVector::new(coeffs)
}

/// Trapezoidal `(∫₀¹|v|^q dx)^{1/q}` on the interior nodes with zero boundary
/// values.
pub fn lq_norm_on_grid(g: &GridFunction, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::invalid(format!(
            "L^q exponent must be >= 1, got {q}"
        )));
    }
    if q.is_infinite() {
        return Ok(sup_norm_on_grid(g));
    }
    Ok(lq_norm_values(&g.values, g.grid, q))
}

pub(crate) fn lq_norm_values(values: &[f64], grid: usize, q: f64) -> f64 {
    let sum: f64 = values.iter().map(|v| v.abs().powf(q)).sum();
    (sum / grid as f64).powf(1.0 / q)
}

/// Grid maximum of `|v|`.
pub fn sup_norm_on_grid(g: &GridFunction) -> f64 {
    g.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Smallest power of two `G` with `G − 1 ≥ min_interior`.
pub fn pow2_grid_for(min_interior: usize) -> usize {
    (min_interior + 1).next_power_of_two().max(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_synthesis(coeffs: &[f64], grid: usize) -> Vec<f64> {
        (1..grid)
            .map(|j| {
                let x = j as f64 / grid as f64;
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * SQRT_2 * ((i + 1) as f64 * PI * x).sin())
                    .sum()
            })
            .collect()
    }

    fn lcg_vector(n: usize, seed: u64) -> SpectralVector {
        let mut s = seed;
        let coeffs = (1..=n)
            .map(|k| {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64 - 0.5) / k as f64
            })
            .collect();
        SpectralVector::new(coeffs).unwrap()
    }

    #[test]
    fn eigenvalues() {
        assert!((eigenvalue(1, 1.0).unwrap() - 9.869_604_401_089_358).abs() < 1e-12);
        assert!((eigenvalue(2, 1.0).unwrap() - 4.0 * PI * PI).abs() < 1e-12);
        assert!((eigenvalue(3, 0.5).unwrap() - 44.413_219_804_902_11).abs() < 1e-10);
        assert!(eigenvalue(0, 1.0).is_err());
        assert!(eigenvalue(1, 0.0).is_err());
        assert!(eigenvalue(1, -2.0).is_err());
    }

    #[test]
    fn spectral_vector_rejects_bad_input() {
        assert!(SpectralVector::new(vec![]).is_err());
        assert!(SpectralVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(SpectralVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn hr_norm_of_first_mode() {
        let spec = OperatorSpectrum::new(1.0).unwrap();
        let e1 = SpectralVector::basis(4, 1);
        assert_eq!(hr_norm(&e1, 0.0, &spec), 1.0);
        assert!((hr_norm(&e1, 0.5, &spec) - PI).abs() < 1e-14);
    }

    #[test]
    fn semigroup_examples() {
        let spec = OperatorSpectrum::new(1.0).unwrap();
        let v = lcg_vector(8, 3);
        assert_eq!(apply_semigroup(&v, 0.0, &spec).unwrap(), v);
        let e1 = SpectralVector::basis(3, 1);
        let out = apply_semigroup(&e1, 0.1, &spec).unwrap();
        assert!((out.mode(1) - 0.372_707_838_853_437_9).abs() < 1e-12);
        assert!(apply_semigroup(&v, -1.0, &spec).is_err());
    }

    #[test]
    fn phi1_examples() {
        let spec = OperatorSpectrum::new(1.0).unwrap();
        let v = lcg_vector(5, 7);
        let zero = apply_phi1(&v, 0.0, &spec).unwrap();
        assert!(zero.coeffs().iter().all(|&c| c == 0.0));
        let e1 = SpectralVector::basis(1, 1);
        let out = apply_phi1(&e1, 1.0, &spec).unwrap();
        let expected = (1.0 - (-PI * PI).exp()) / (PI * PI);
        assert!((out.mode(1) - expected).abs() < 1e-15);
        assert!((out.mode(1) - 0.101_315_942_987_889_9).abs() < 1e-15);
        // Taylor limit.
        let mu = 1.0;
        let h = 1e-12;
        assert!(((phi1_multiplier(mu, h) - h) / h).abs() <= 1e-6);
        assert!(apply_phi1(&v, -0.5, &spec).is_err());
    }

    #[test]
    fn phi1_branches_agree_at_threshold() {
        for &mu in &[1.0, 9.87, 1e3, 1e6] {
            let h = PHI1_SERIES_THRESHOLD / mu;
            let x = mu * h;
            let series = h * (1.0 - x / 2.0 * (1.0 - x / 3.0 * (1.0 - x / 4.0)));
            let exact = -(-x).exp_m1() / mu;
            assert!(((series - exact) / exact).abs() < 1e-12, "mu={mu}");
        }
    }

    #[test]
    fn to_grid_single_mode() {
        let g = to_grid(&SpectralVector::basis(1, 1), 9).unwrap();
        for (j, v) in g.values().iter().enumerate() {
            let expected = SQRT_2 * (PI * (j + 1) as f64 / 9.0).sin();
            assert!((v - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn fft_synthesis_matches_naive_sum() {
        let v = lcg_vector(13, 11);
        for grid in [14, 17, 32, 65, 100] {
            let fast = to_grid(&v, grid).unwrap();
            let slow = naive_synthesis(v.coeffs(), grid);
            for (a, b) in fast.values().iter().zip(&slow) {
                assert!((a - b).abs() < 1e-13, "grid {grid}");
            }
        }
    }

    #[test]
    fn roundtrip_is_identity() {
        let v = lcg_vector(16, 5);
        let back = from_grid(&to_grid(&v, 65).unwrap(), 16).unwrap();
        for (a, b) in v.coeffs().iter().zip(back.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_dimension_errors() {
        let v = lcg_vector(16, 5);
        assert!(to_grid(&v, 16).is_err());
        assert!(to_grid(&v, 17).is_ok());
        assert!(GridFunction::new(9, vec![0.0; 7]).is_err());
        let g = to_grid(&v, 17).unwrap();
        assert!(from_grid(&g, 17).is_err());
    }

    #[test]
    fn parseval_on_grid() {
        let v = lcg_vector(20, 9);
        let g = to_grid(&v, 64).unwrap();
        let quad = lq_norm_on_grid(&g, 2.0).unwrap().powi(2);
        let exact = v.norm().powi(2);
        assert!(((quad - exact) / exact).abs() < 1e-10);
    }

    #[test]
    fn lq_norms() {
        let g = GridFunction::new(1025, vec![1.0; 1024]).unwrap();
        for q in [1.0, 2.0, 6.0, 17.5] {
            let n = lq_norm_on_grid(&g, q).unwrap();
            // Zero boundary values cost one trapezoid cell.
            assert!((n - 1.0).abs() <= 2.0 / 1025.0, "q={q}: {n}");
        }
        let e1 = to_grid(&SpectralVector::basis(1, 1), 1025).unwrap();
        assert!((lq_norm_on_grid(&e1, 2.0).unwrap() - 1.0).abs() < 1e-8);
        let sup = lq_norm_on_grid(&e1, f64::INFINITY).unwrap();
        assert!(((sup - SQRT_2) / SQRT_2).abs() < 1e-4);
        assert!(lq_norm_on_grid(&e1, 0.5).is_err());
    }

    #[test]
    fn step_factors_identity() {
        let spec = OperatorSpectrum::new(0.7).unwrap();
        let f = StepFactors::new(&spec, 40, 0.013).unwrap();
        for k in 1..=40 {
            let lhs = spec.mu(k) * f.phi1[k - 1] + f.decay[k - 1];
            assert!((lhs - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn pow2_grid() {
        assert_eq!(pow2_grid_for(385), 512);
        assert_eq!(pow2_grid_for(511), 512);
        assert_eq!(pow2_grid_for(512), 1024);
        assert_eq!(pow2_grid_for(1), 2);
    }
}
