//! Driving noise and the discretized Ornstein–Uhlenbeck process.
//!
//! The cylindrical Wiener process is represented by its basis coefficients:
//! independent scalar Brownian motions `β_k`, one per sine mode. A
//! [`NoiseTape`] fixes the master resolution (`M_master` steps of length
//! `T/M_master`, `N_master` modes) and a seed; the increment of `β_k` over
//! master step `j` on Monte Carlo path `p` is a pure function of
//! `(seed, p, j, k)`. Coarser time grids sum consecutive master increments,
//! coarser spatial resolutions drop the high modes, so every resolution of a
//! study is driven by the same Brownian path.
//!
//! Randomness comes from ChaCha8 used as a counter-based generator: the path
//! selects the stream, `(step, mode)` selects the word position, and each
//! element consumes one Box–Muller pair. The first normal of the pair is the
//! Wiener increment; the second is an independent auxiliary normal that lets
//! [`exact_projected_ou`] sample the stochastic convolution exactly.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{mean_and_stderr, CompensatedSum};
use crate::spectral::{
    check_dim, hr_norm, pow2_grid_for, OperatorSpectrum, SineTransform, SpectralVector, StepFactors,
};

pub const DEFAULT_M_MASTER: usize = 4096;
pub const DEFAULT_N_MASTER: usize = 512;

const HEADER_MAGIC: &[u8; 8] = b"SACTAPE1";
/// u32 words consumed per tape element (two u64 draws).
const WORDS_PER_ELEMENT: u128 = 4;

/// Seed and master resolution of the shared driving noise. Increments are
/// regenerated on demand and never stored with the header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseTape {
    seed: u64,
    m_master: usize,
    n_master: usize,
    horizon: f64,
}

/// One tape entry: the Wiener increment (variance `T/M_master`) and an
/// independent standard normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapeElement {
    pub increment: f64,
    pub auxiliary: f64,
}

/// Spec-level constructor: `generate_tape(seed, M_master, N_master, T)`.
pub fn generate_tape(
    seed: u64,
    m_master: usize,
    n_master: usize,
    horizon: f64,
) -> Result<NoiseTape> {
    NoiseTape::new(seed, m_master, n_master, horizon)
}

impl NoiseTape {
    pub fn new(seed: u64, m_master: usize, n_master: usize, horizon: f64) -> Result<Self> {
        if m_master == 0 || n_master == 0 {
            return Err(Error::invalid("tape needs at least one step and one mode"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self {
            seed,
            m_master,
            n_master,
            horizon,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn m_master(&self) -> usize {
        self.m_master
    }

    pub fn n_master(&self) -> usize {
        self.n_master
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.m_master as f64
    }

    fn rng(&self, path: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path);
        rng
    }

    #[inline]
    fn word_pos(step: usize, mode: usize) -> u128 {
        (((step as u128) << 32) | (mode as u128 - 1)) * WORDS_PER_ELEMENT
    }

    #[inline]
    fn draw(rng: &mut ChaCha8Rng) -> (f64, f64) {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
        let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        (r * c, r * s)
    }

    fn check_index(&self, step: usize, mode: usize) -> Result<()> {
        if step >= self.m_master {
            return Err(Error::invalid(format!(
                "step {step} outside 0..{}",
                self.m_master
            )));
        }
        if mode == 0 || mode > self.n_master {
            return Err(Error::invalid(format!(
                "mode {mode} outside 1..={}",
                self.n_master
            )));
        }
        Ok(())
    }

    /// Regenerates a single element independently of any other.
    pub fn element(&self, path: u64, step: usize, mode: usize) -> Result<TapeElement> {
        self.check_index(step, mode)?;
        let mut rng = self.rng(path);
        rng.set_word_pos(Self::word_pos(step, mode));
        let (z0, z1) = Self::draw(&mut rng);
        Ok(TapeElement {
            increment: z0 * self.dt().sqrt(),
            auxiliary: z1,
        })
    }

    /// Master-resolution increments of modes `1..=modes` on one path.
    pub fn path_noise(&self, path: u64, modes: usize) -> Result<PathNoise> {
        self.materialize(path, modes, false)
    }

    /// Like [`Self::path_noise`] but also keeps the auxiliary normals needed
    /// by [`exact_projected_ou`].
    pub fn path_noise_with_auxiliary(&self, path: u64, modes: usize) -> Result<PathNoise> {
        self.materialize(path, modes, true)
    }

    fn materialize(&self, path: u64, modes: usize, keep_aux: bool) -> Result<PathNoise> {
        if modes == 0 || modes > self.n_master {
            return Err(Error::invalid(format!(
                "requested {modes} modes from a tape with {} modes",
                self.n_master
            )));
        }
        let sd = self.dt().sqrt();
        let mut rng = self.rng(path);
        let mut increments = Vec::with_capacity(self.m_master * modes);
        let mut auxiliary = if keep_aux {
            Vec::with_capacity(self.m_master * modes)
        } else {
            Vec::new()
        };
        for step in 0..self.m_master {
            rng.set_word_pos(Self::word_pos(step, 1));
            for _ in 0..modes {
                let (z0, z1) = Self::draw(&mut rng);
                increments.push(z0 * sd);
                if keep_aux {
                    auxiliary.push(z1);
                }
            }
        }
        Ok(PathNoise {
            steps: self.m_master,
            modes,
            dt: self.dt(),
            increments,
            auxiliary: keep_aux.then_some(auxiliary),
        })
    }

    /// 40-byte provenance header: magic, seed, `M_master`, `N_master`
    /// (little-endian u64) and `T` (little-endian f64).
    pub fn write_header<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(HEADER_MAGIC)?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.m_master as u64).to_le_bytes())?;
        w.write_all(&(self.n_master as u64).to_le_bytes())?;
        w.write_all(&self.horizon.to_le_bytes())?;
        Ok(())
    }

    pub fn read_header<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = [0u8; 40];
        r.read_exact(&mut buf)?;
        if &buf[..8] != HEADER_MAGIC {
            return Err(Error::invalid("not a noise tape header"));
        }
        let word = |i: usize| u64::from_le_bytes(buf[i..i + 8].try_into().unwrap());
        Self::new(
            word(8),
            word(16) as usize,
            word(24) as usize,
            f64::from_le_bytes(buf[32..40].try_into().unwrap()),
        )
    }
}

/// Row-major (step × mode) Wiener increments of one path.
#[derive(Debug, Clone)]
pub struct PathNoise {
    steps: usize,
    modes: usize,
    dt: f64,
    increments: Vec<f64>,
    auxiliary: Option<Vec<f64>>,
}

impl PathNoise {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn row(&self, step: usize) -> &[f64] {
        &self.increments[step * self.modes..(step + 1) * self.modes]
    }

    pub fn auxiliary_row(&self, step: usize) -> Option<&[f64]> {
        self.auxiliary
            .as_ref()
            .map(|a| &a[step * self.modes..(step + 1) * self.modes])
    }
}

/// Per-step increments on a coarsened time grid.
#[derive(Debug, Clone)]
pub struct CoarseIncrements {
    steps: usize,
    modes: usize,
    h: f64,
    data: Vec<f64>,
}

impl CoarseIncrements {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Increments of step `m`, restricted to the first `modes` modes.
    pub fn row(&self, m: usize, modes: usize) -> &[f64] {
        debug_assert!(modes <= self.modes);
        let start = m * self.modes;
        &self.data[start..start + modes]
    }
}

/// Sums blocks of `M_master / M` consecutive master increments. Modes are
/// kept as-is; consumers read the first `N` of each row.
pub fn coarsen_increments(noise: &PathNoise, m: usize) -> Result<CoarseIncrements> {
    if m == 0 || !noise.steps.is_multiple_of(m) {
        return Err(Error::Divisibility {
            fine: noise.steps,
            coarse: m,
        });
    }
    let ratio = noise.steps / m;
    let modes = noise.modes;
    let mut data = vec![0.0; m * modes];
    for (i, block) in data.chunks_mut(modes).enumerate() {
        for j in i * ratio..(i + 1) * ratio {
            for (acc, x) in block.iter_mut().zip(noise.row(j)) {
                *acc += x;
            }
        }
    }
    Ok(CoarseIncrements {
        steps: m,
        modes,
        h: noise.dt * ratio as f64,
        data,
    })
}

/// State of the discretized OU process at a grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct OuState {
    pub t: f64,
    pub coeffs: SpectralVector,
}

/// `c_k ↦ e^{−μ_k h}(c_k + ΔW_k)`, `t ↦ t + h`.
pub fn ou_step(
    state: &OuState,
    increment: &SpectralVector,
    h: f64,
    spec: &OperatorSpectrum,
) -> Result<OuState> {
    check_dim(state.coeffs.dim(), increment.dim())?;
    if !(h >= 0.0) {
        return Err(Error::invalid("step size must be non-negative"));
    }
    let coeffs = state
        .coeffs
        .coeffs()
        .iter()
        .zip(increment.coeffs())
        .enumerate()
        .map(|(i, (c, dw))| (-spec.mu(i + 1) * h).exp() * (c + dw))
        .collect();
    Ok(OuState {
        t: state.t + h,
        coeffs: SpectralVector::from_vec_unchecked(coeffs),
    })
}

/// In-place OU step with precomputed decay factors.
#[inline]
pub(crate) fn ou_step_in_place(coeffs: &mut [f64], increment: &[f64], decay: &[f64]) {
    for ((c, dw), d) in coeffs.iter_mut().zip(increment).zip(decay) {
        *c = d * (*c + dw);
    }
}

/// Discretized OU path at the coarse grid times `0, h, …, T` from `x0`.
pub fn simulate_ou(
    x0: &[f64],
    increments: &CoarseIncrements,
    spec: &OperatorSpectrum,
) -> Result<Vec<Vec<f64>>> {
    let modes = x0.len();
    if modes > increments.modes {
        return Err(Error::DimensionMismatch {
            expected: increments.modes,
            found: modes,
        });
    }
    let factors = StepFactors::new(spec, modes, increments.h)?;
    let mut out = Vec::with_capacity(increments.steps + 1);
    let mut state = x0.to_vec();
    out.push(state.clone());
    for m in 0..increments.steps {
        ou_step_in_place(&mut state, increments.row(m, modes), &factors.decay);
        out.push(state.clone());
    }
    Ok(out)
}

/// `Var` of mode `k` of the discretized OU process after `steps` steps from
/// zero: `Σ_{j=0}^{steps−1} e^{−2μ(j+1)h} h`.
pub fn discrete_ou_variance(mu: f64, h: f64, steps: usize) -> f64 {
    let q = (-2.0 * mu * h).exp();
    // q(1 − q^steps)/(1 − q) · h, with expm1 for small μh.
    let num = -(-2.0 * mu * h * steps as f64).exp_m1();
    let den = -(-2.0 * mu * h).exp_m1();
    if den == 0.0 {
        return h * steps as f64;
    }
    h * q * num / den
}

/// `Var(∫₀ᵀ e^{−μ(T−s)} dβ_s) = (1 − e^{−2μT})/(2μ)`.
pub fn continuous_ou_variance(mu: f64, horizon: f64) -> f64 {
    -(-2.0 * mu * horizon).exp_m1() / (2.0 * mu)
}

/// Regression of `Z = ∫_0^h e^{−μ(h−s)} dβ_s` on `ΔW = β_h − β_0`:
/// `Z = b·ΔW + s·ζ` with `ζ` standard normal independent of `ΔW`.
/// Returns `(b, s)`.
pub fn ou_bridge_coefficients(mu: f64, h: f64) -> (f64, f64) {
    let x = mu * h;
    let b = if x < 1e-8 {
        1.0 - x / 2.0
    } else {
        -(-x).exp_m1() / x
    };
    // s²/h = (1 − e^{−2x})/(2x) − ((1 − e^{−x})/x)²
    let f = if x < 0.5 {
        let mut sum = 0.0;
        let mut pow = x * x;
        let mut fact = 24.0; // (n+2)! at n = 2
        for n in 2..40u32 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let coef = (2f64.powi(n as i32) * (n as f64 - 2.0) + 2.0) / fact;
            let term = sign * coef * pow;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
            pow *= x;
            fact *= (n + 3) as f64;
        }
        sum
    } else {
        -(-2.0 * x).exp_m1() / (2.0 * x) - b * b
    };
    (b, (h * f.max(0.0)).sqrt())
}

/// Exact sample of `P_N O` (no time discretization) on the master grid,
/// coupled to the tape increments: per master step,
/// `X ↦ e^{−μh}X + b·ΔW + s·ζ`. Returns the state at every master time.
pub fn exact_projected_ou(
    x0: &[f64],
    noise: &PathNoise,
    spec: &OperatorSpectrum,
) -> Result<Vec<Vec<f64>>> {
    let modes = x0.len();
    if modes > noise.modes {
        return Err(Error::DimensionMismatch {
            expected: noise.modes,
            found: modes,
        });
    }
    if noise.auxiliary.is_none() {
        return Err(Error::invalid(
            "exact OU sampling needs a tape with auxiliary normals",
        ));
    }
    let h = noise.dt;
    let coeffs: Vec<(f64, f64, f64)> = (1..=modes)
        .map(|k| {
            let mu = spec.mu(k);
            let (b, s) = ou_bridge_coefficients(mu, h);
            ((-mu * h).exp(), b, s)
        })
        .collect();
    let mut state = x0.to_vec();
    let mut out = Vec::with_capacity(noise.steps + 1);
    out.push(state.clone());
    for j in 0..noise.steps {
        let dw = noise.row(j);
        let aux = noise.auxiliary_row(j).expect("checked above");
        for (i, x) in state.iter_mut().enumerate() {
            let (d, b, s) = coeffs[i];
            *x = d * *x + b * dw[i] + s * aux[i];
        }
        out.push(state.clone());
    }
    Ok(out)
}

/// One row of [`ou_moment_diagnostics`].
#[derive(Debug, Clone, PartialEq)]
pub struct OuMomentRow {
    pub m: usize,
    pub n: usize,
    pub p: f64,
    pub gamma: f64,
    /// `sup_t E‖O_t‖^p_{H_γ}` over the grid times.
    pub hgamma_moment: f64,
    pub hgamma_stderr: Option<f64>,
    /// `E sup_t ‖O_t‖^p_{L^∞}` (grid maximum in space and time).
    pub sup_linf_moment: f64,
    pub sup_linf_stderr: Option<f64>,
}

/// Monte Carlo moments of the discretized OU process started from `x0`
/// (truncated to each `N`) over a grid of resolutions.
pub fn ou_moment_diagnostics(
    tape: &NoiseTape,
    spec: &OperatorSpectrum,
    x0: &SpectralVector,
    resolutions: &[(usize, usize)],
    paths: u64,
    p: f64,
    gamma: f64,
) -> Result<Vec<OuMomentRow>> {
    if !(p >= 2.0) {
        return Err(Error::invalid("moment exponent must be >= 2"));
    }
    if !(gamma < 0.25) {
        return Err(Error::invalid("H_gamma exponent must be < 1/4"));
    }
    if paths == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    let n_max = resolutions.iter().map(|r| r.1).max().unwrap_or(1);
    for &(m, n) in resolutions {
        if m == 0 || !tape.m_master().is_multiple_of(m) {
            return Err(Error::Divisibility {
                fine: tape.m_master(),
                coarse: m,
            });
        }
        if n == 0 {
            return Err(Error::invalid("mode count must be positive"));
        }
    }
    let transforms: Vec<SineTransform> = resolutions
        .iter()
        .map(|&(_, n)| SineTransform::new(pow2_grid_for(4 * n)))
        .collect::<Result<_>>()?;

    // per path, per resolution: (H_γ^p at each grid time, sup_t ‖·‖^p_{L∞})
    let per_path: Vec<Vec<(Vec<f64>, f64)>> = (0..paths)
        .into_par_iter()
        .map(|path| -> Result<Vec<(Vec<f64>, f64)>> {
            let noise = tape.path_noise(path, n_max)?;
            resolutions
                .iter()
                .zip(&transforms)
                .map(|(&(m, n), transform)| {
                    let inc = coarsen_increments(&noise, m)?;
                    let traj = simulate_ou(x0.resized(n).coeffs(), &inc, spec)?;
                    let mut hg = Vec::with_capacity(traj.len());
                    let mut sup = 0.0_f64;
                    for state in &traj {
                        let v = SpectralVector::from_vec_unchecked(state.clone());
                        hg.push(hr_norm(&v, gamma, spec).powf(p));
                        let grid = transform.synthesize(state)?;
                        sup = grid.iter().fold(sup, |a, x| a.max(x.abs()));
                    }
                    Ok((hg, sup.powf(p)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(resolutions.len());
    for (r, &(m, n)) in resolutions.iter().enumerate() {
        let mut best = (f64::NEG_INFINITY, None);
        for t in 0..=m {
            let samples: Vec<f64> = per_path.iter().map(|pp| pp[r].0[t]).collect();
            let (mean, se) = mean_and_stderr(&samples);
            if mean > best.0 {
                best = (mean, se);
            }
        }
        let sups: Vec<f64> = per_path.iter().map(|pp| pp[r].1).collect();
        let (sup_mean, sup_se) = mean_and_stderr(&sups);
        rows.push(OuMomentRow {
            m,
            n,
            p,
            gamma,
            hgamma_moment: best.0,
            hgamma_stderr: best.1,
            sup_linf_moment: sup_mean,
            sup_linf_stderr: sup_se,
        });
    }
    Ok(rows)
}

/// `Σ_k Var(mode k of O_T)` for the discretized OU process from zero:
/// the exact value of `E‖O^{M,N}_T‖²_H`.
pub fn discrete_ou_second_moment(spec: &OperatorSpectrum, m: usize, n: usize, horizon: f64) -> f64 {
    let h = horizon / m as f64;
    (1..=n)
        .map(|k| discrete_ou_variance(spec.mu(k), h, m))
        .collect::<CompensatedSum>()
        .value()
}
