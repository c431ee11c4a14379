//! Nonlinearity-truncated spectral Galerkin exponential Euler scheme.
//!
//! With `h = T/M`, `O₀ = Y₀ = P_N ξ` and `ΔW_m` the Galerkin-projected Wiener
//! increment over `[mh, (m+1)h]`:
//!
//! ```text
//! O_{m+1} = e^{hA}(O_m + ΔW_m)
//! Y_{m+1} = O_{m+1} + e^{hA}(Y_m − O_m)
//!           + 1{‖Y_m‖_{H_γ} + ‖O_m‖_{H_γ} ≤ (M/T)^χ} · A⁻¹(e^{hA} − Id) P_N F(Y_m)
//! ```
//!
//! The drift is dropped at steps where the indicator is false.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use crate::error::{Error, Result};
use crate::noise::{coarsen_increments, CoarseIncrements, NoiseTape};
use crate::nonlinearity::{CubicCoefficients, NemytskiiProjector};
use crate::spectral::{check_dim, hr_norm, OperatorSpectrum, SpectralVector, StepFactors};

pub const DEFAULT_GAMMA: f64 = 0.2;

/// Largest admissible threshold exponent for a given `γ`.
pub fn max_chi(gamma: f64) -> f64 {
    gamma / 3.0 - 1.0 / 18.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationParams {
    pub m: usize,
    pub n: usize,
    pub gamma: f64,
    pub chi: f64,
}

impl DiscretizationParams {
    pub fn new(m: usize, n: usize, gamma: f64, chi: f64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid("M and N must be at least 1"));
        }
        if !(gamma > 1.0 / 6.0 && gamma < 0.25) {
            return Err(Error::invalid(format!(
                "gamma must lie in (1/6, 1/4), got {gamma}"
            )));
        }
        if !(chi > 0.0 && chi <= max_chi(gamma)) {
            return Err(Error::invalid(format!(
                "chi must lie in (0, {}], got {chi}",
                max_chi(gamma)
            )));
        }
        Ok(Self { m, n, gamma, chi })
    }

    /// `γ = 0.2` and the largest admissible `χ`.
    pub fn with_defaults(m: usize, n: usize) -> Result<Self> {
        Self::new(m, n, DEFAULT_GAMMA, max_chi(DEFAULT_GAMMA))
    }

    pub fn with_resolution(&self, m: usize, n: usize) -> Result<Self> {
        Self::new(m, n, self.gamma, self.chi)
    }

    /// `(M/T)^χ`.
    pub fn threshold(&self, horizon: f64) -> f64 {
        (self.m as f64 / horizon).powf(self.chi)
    }
}

/// Initial value `ξ` by preset or explicit sine coefficients.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialValue {
    Zero,
    /// `ξ = e₁`.
    FirstMode,
    /// `ξ(x) = x(1 − x)`, with coefficients `√2·2(1 − (−1)^k)/(k³π³)`.
    Bump,
    Coefficients(Vec<f64>),
}

impl InitialValue {
    /// `P_N ξ`.
    pub fn projected(&self, n: usize) -> SpectralVector {
        match self {
            InitialValue::Zero => SpectralVector::zeros(n),
            InitialValue::FirstMode => SpectralVector::basis(n, 1),
            InitialValue::Bump => SpectralVector::from_vec_unchecked(bump_coefficients(n)),
            InitialValue::Coefficients(c) => {
                SpectralVector::from_vec_unchecked(c.clone()).resized(n)
            }
        }
    }
}

pub fn bump_coefficients(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| {
            if k % 2 == 1 {
                let kp = k as f64 * PI;
                4.0 * SQRT_2 / (kp * kp * kp)
            } else {
                0.0
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub horizon: f64,
    pub nu: f64,
    pub a: CubicCoefficients,
    pub xi: InitialValue,
}

impl ModelParams {
    pub fn new(horizon: f64, nu: f64, a: CubicCoefficients, xi: InitialValue) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("T must be positive, got {horizon}")));
        }
        OperatorSpectrum::new(nu)?;
        if let InitialValue::Coefficients(c) = &xi {
            SpectralVector::new(c.clone())?;
        }
        Ok(Self { horizon, nu, a, xi })
    }

    /// `F(v) = v − v³`, `ξ(x) = x(1 − x)`, `T = ν = 1`.
    pub fn allen_cahn_bump() -> Self {
        Self {
            horizon: 1.0,
            nu: 1.0,
            a: CubicCoefficients::allen_cahn(),
            xi: InitialValue::Bump,
        }
    }

    pub fn spectrum(&self) -> OperatorSpectrum {
        OperatorSpectrum::new(self.nu).expect("validated at construction")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub step: usize,
    pub y: SpectralVector,
    pub o: SpectralVector,
}

/// `‖Y‖_{H_γ} + ‖O‖_{H_γ} ≤ (M/T)^χ`.
pub fn truncation_indicator(
    y: &SpectralVector,
    o: &SpectralVector,
    d: &DiscretizationParams,
    horizon: f64,
    spec: &OperatorSpectrum,
) -> Result<bool> {
    check_dim(y.dim(), o.dim())?;
    Ok(hr_norm(y, d.gamma, spec) + hr_norm(o, d.gamma, spec) <= d.threshold(horizon))
}

/// One step of the scheme given the already advanced OU state `O_{m+1}`.
pub fn euler_step(
    state: &SchemeState,
    o_next: &SpectralVector,
    h: f64,
    model: &ModelParams,
    d: &DiscretizationParams,
) -> Result<SchemeState> {
    check_dim(state.y.dim(), state.o.dim())?;
    check_dim(state.y.dim(), o_next.dim())?;
    let spec = model.spectrum();
    let factors = StepFactors::new(&spec, state.y.dim(), h)?;
    let active = truncation_indicator(&state.y, &state.o, d, model.horizon, &spec)?;
    let drift = if active && !model.a.is_zero() {
        Some(NemytskiiProjector::with_default_grid(model.a, state.y.dim())?.project(&state.y)?)
    } else {
        None
    };
    let y = (0..state.y.dim())
        .map(|i| {
            let mut v =
                o_next.coeffs()[i] + factors.decay[i] * (state.y.coeffs()[i] - state.o.coeffs()[i]);
            if let Some(f) = &drift {
                v += factors.phi1[i] * f.coeffs()[i];
            }
            v
        })
        .collect();
    Ok(SchemeState {
        step: state.step + 1,
        y: SpectralVector::from_vec_unchecked(y),
        o: o_next.clone(),
    })
}

/// `Y` and `O` at the grid times `0, h, …, T`, with the truncation indicator
/// evaluated at each of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub h: f64,
    pub y: Vec<Vec<f64>>,
    pub o: Vec<Vec<f64>>,
    pub indicators: Vec<bool>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.y.len() - 1
    }

    pub fn modes(&self) -> usize {
        self.y[0].len()
    }

    pub fn state(&self, m: usize) -> SchemeState {
        SchemeState {
            step: m,
            y: SpectralVector::from_vec_unchecked(self.y[m].clone()),
            o: SpectralVector::from_vec_unchecked(self.o[m].clone()),
        }
    }

    /// Steps `m < M` at which the drift was suppressed.
    pub fn truncated_steps(&self) -> usize {
        self.indicators[..self.steps()]
            .iter()
            .filter(|&&b| !b)
            .count()
    }

    /// CSV with header `t,mode_index,Y_coeff,O_coeff,indicator`, one row per
    /// grid time and mode.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,mode_index,Y_coeff,O_coeff,indicator")?;
        for m in 0..self.y.len() {
            let t = m as f64 * self.h;
            let ind = u8::from(self.indicators[m]);
            for (k, (y, o)) in self.y[m].iter().zip(&self.o[m]).enumerate() {
                writeln!(w, "{t},{},{y},{o},{ind}", k + 1)?;
            }
        }
        Ok(())
    }
}

/// The scheme at one resolution with all per-mode factors precomputed.
#[derive(Debug, Clone)]
pub struct Scheme {
    model: ModelParams,
    disc: DiscretizationParams,
    factors: StepFactors,
    projector: Option<NemytskiiProjector>,
    weights: Vec<f64>,
    threshold: f64,
    y0: Vec<f64>,
}

impl Scheme {
    pub fn new(model: ModelParams, disc: DiscretizationParams) -> Result<Self> {
        let spec = model.spectrum();
        let h = model.horizon / disc.m as f64;
        let factors = StepFactors::new(&spec, disc.n, h)?;
        let projector = if model.a.is_zero() {
            None
        } else {
            Some(NemytskiiProjector::with_default_grid(model.a, disc.n)?)
        };
        let weights = (1..=disc.n)
            .map(|k| spec.mu(k).powf(2.0 * disc.gamma))
            .collect();
        let threshold = disc.threshold(model.horizon);
        let y0 = model.xi.projected(disc.n).into_vec();
        Ok(Self {
            model,
            disc,
            factors,
            projector,
            weights,
            threshold,
            y0,
        })
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn discretization(&self) -> &DiscretizationParams {
        &self.disc
    }

    pub fn h(&self) -> f64 {
        self.factors.h
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    fn hgamma(&self, v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(v)
            .map(|(w, c)| w * c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn indicator(&self, y: &[f64], o: &[f64]) -> bool {
        self.hgamma(y) + self.hgamma(o) <= self.threshold
    }

    /// Advances `(Y, O)` by one step in place; returns the indicator used.
    fn step_in_place(
        &self,
        y: &mut [f64],
        o: &mut [f64],
        dw: &[f64],
        drift: &mut [f64],
    ) -> Result<bool> {
        let active = self.indicator(y, o);
        let with_drift = match &self.projector {
            Some(p) if active => {
                p.project_into(y, drift)?;
                true
            }
            _ => false,
        };
        let decay = &self.factors.decay;
        for i in 0..y.len() {
            let o_next = decay[i] * (o[i] + dw[i]);
            let mut v = o_next + decay[i] * (y[i] - o[i]);
            if with_drift {
                v += self.factors.phi1[i] * drift[i];
            }
            y[i] = v;
            o[i] = o_next;
        }
        Ok(active)
    }

    /// Runs the scheme on increments whose step matches `T/M` and which carry
    /// at least `N` modes.
    pub fn run(&self, increments: &CoarseIncrements) -> Result<Trajectory> {
        if increments.steps() != self.disc.m {
            return Err(Error::DimensionMismatch {
                expected: self.disc.m,
                found: increments.steps(),
            });
        }
        if increments.modes() < self.disc.n {
            return Err(Error::DimensionMismatch {
                expected: self.disc.n,
                found: increments.modes(),
            });
        }
        let n = self.disc.n;
        let mut y = self.y0.clone();
        let mut o = self.y0.clone();
        let mut drift = vec![0.0; n];
        let mut traj = Trajectory {
            h: self.h(),
            y: Vec::with_capacity(self.disc.m + 1),
            o: Vec::with_capacity(self.disc.m + 1),
            indicators: Vec::with_capacity(self.disc.m + 1),
        };
        traj.y.push(y.clone());
        traj.o.push(o.clone());
        for m in 0..self.disc.m {
            let active = self.step_in_place(&mut y, &mut o, increments.row(m, n), &mut drift)?;
            traj.indicators.push(active);
            traj.y.push(y.clone());
            traj.o.push(o.clone());
        }
        traj.indicators.push(self.indicator(&y, &o));
        Ok(traj)
    }

    /// Only the final `Y_T` and the number of truncated steps, without
    /// storing the path.
    pub fn run_final(&self, increments: &CoarseIncrements) -> Result<(Vec<f64>, usize)> {
        if increments.steps() != self.disc.m || increments.modes() < self.disc.n {
            return Err(Error::invalid(
                "increments do not match the scheme resolution",
            ));
        }
        let n = self.disc.n;
        let mut y = self.y0.clone();
        let mut o = self.y0.clone();
        let mut drift = vec![0.0; n];
        let mut truncated = 0;
        for m in 0..self.disc.m {
            if !self.step_in_place(&mut y, &mut o, increments.row(m, n), &mut drift)? {
                truncated += 1;
            }
        }
        Ok((y, truncated))
    }

    /// Simulates path `path` of the tape.
    pub fn run_path(&self, tape: &NoiseTape, path: u64) -> Result<Trajectory> {
        check_tape(tape, &self.model, &self.disc)?;
        let noise = tape.path_noise(path, self.disc.n)?;
        self.run(&coarsen_increments(&noise, self.disc.m)?)
    }
}

fn check_tape(tape: &NoiseTape, model: &ModelParams, d: &DiscretizationParams) -> Result<()> {
    if (tape.horizon() - model.horizon).abs() > 1e-12 * model.horizon {
        return Err(Error::invalid(format!(
            "tape horizon {} differs from model horizon {}",
            tape.horizon(),
            model.horizon
        )));
    }
    if !tape.m_master().is_multiple_of(d.m) {
        return Err(Error::Divisibility {
            fine: tape.m_master(),
            coarse: d.m,
        });
    }
    if tape.n_master() < d.n {
        return Err(Error::invalid(format!(
            "tape carries {} modes, scheme needs {}",
            tape.n_master(),
            d.n
        )));
    }
    Ok(())
}

/// The scheme along path `path` of the tape at resolution `d`.
pub fn simulate_trajectory(
    model: &ModelParams,
    d: &DiscretizationParams,
    tape: &NoiseTape,
    path: u64,
) -> Result<Trajectory> {
    Scheme::new(model.clone(), *d)?.run_path(tape, path)
}

/// Checks that a reference resolution is fine enough for the targets: each
/// target `M` equals `M_ref` or is at most `M_ref/8`, and each target `N`
/// equals `N_ref` or is at most `N_ref/2`.
pub fn check_reference_order(targets: &[(usize, usize)], m_ref: usize, n_ref: usize) -> Result<()> {
    for &(m, n) in targets {
        if m != m_ref && 8 * m > m_ref {
            return Err(Error::ResolutionOrder(format!(
                "M = {m} is neither M_ref = {m_ref} nor at most M_ref/8"
            )));
        }
        if n != n_ref && 2 * n > n_ref {
            return Err(Error::ResolutionOrder(format!(
                "N = {n} is neither N_ref = {n_ref} nor at most N_ref/2"
            )));
        }
        if !m_ref.is_multiple_of(m) {
            return Err(Error::Divisibility {
                fine: m_ref,
                coarse: m,
            });
        }
    }
    Ok(())
}

/// The scheme at the reference resolution `(M_ref, N_ref)` along path
/// `path`, used as a proxy for the exact solution.
pub fn reference_solution(
    model: &ModelParams,
    d: &DiscretizationParams,
    tape: &NoiseTape,
    path: u64,
    m_ref: usize,
    n_ref: usize,
) -> Result<Trajectory> {
    simulate_trajectory(model, &d.with_resolution(m_ref, n_ref)?, tape, path)
}
