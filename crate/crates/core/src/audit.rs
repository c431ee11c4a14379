//! Randomized audits of the structural inequalities and exact error bounds.
//! Each audit reports the largest residual (positive means violated) over
//! its trials.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::Result;
use crate::linear_errors::{
    hs_bounds, hs_decreasing_in_semigroup_time, hs_increasing_in_increment_time, hs_norm_sq,
    reports_at, Modes,
};
use crate::noise::generate_tape;
use crate::nonlinearity::{
    check_coercivity_gradient, check_lipschitz, check_monotonicity, CubicCoefficients,
    DEFAULT_RESIDUAL_TOL,
};
use crate::scheme::{simulate_trajectory, DiscretizationParams, InitialValue, ModelParams};
use crate::spectral::{OperatorSpectrum, SpectralVector};

#[derive(Debug, Clone, PartialEq)]
pub struct AuditOutcome {
    pub name: &'static str,
    pub trials: usize,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl AuditOutcome {
    pub fn passed(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

/// Uniform and normal draws for the audits.
pub struct AuditRng(ChaCha8Rng);

impl AuditRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn index(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.0.next_u64() % (hi - lo + 1) as u64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Random coefficients with `1/k` decay and overall scale `scale`.
    pub fn vector(&mut self, n: usize, scale: f64) -> SpectralVector {
        SpectralVector::new((1..=n).map(|k| scale * self.normal() / k as f64).collect())
            .expect("finite")
    }

    /// Random admissible coefficients.
    pub fn coefficients(&mut self) -> CubicCoefficients {
        let a3 = -self.range(0.1, 2.0);
        CubicCoefficients::new(
            self.range(-2.0, 2.0),
            self.range(-2.0, 2.0),
            self.range(-2.0, 2.0),
            a3,
        )
        .expect("admissible")
    }
}

fn coefficient_sets(rng: &mut AuditRng, trial: usize) -> CubicCoefficients {
    match trial % 4 {
        0 => CubicCoefficients::allen_cahn(),
        1 => CubicCoefficients::new(0.0, 1.0, 0.0, 0.0).unwrap(),
        _ => rng.coefficients(),
    }
}

fn inequality_audit(
    name: &'static str,
    trials: usize,
    seed: u64,
    stream: u64,
    mut residual: impl FnMut(&mut AuditRng, CubicCoefficients, OperatorSpectrum) -> Result<f64>,
) -> Result<AuditOutcome> {
    let mut rng = AuditRng::new(seed, stream);
    let mut max_residual = f64::NEG_INFINITY;
    for trial in 0..trials {
        let a = coefficient_sets(&mut rng, trial);
        let spec = OperatorSpectrum::new(rng.range(0.2, 3.0))?;
        max_residual = max_residual.max(residual(&mut rng, a, spec)?);
    }
    Ok(AuditOutcome {
        name,
        trials,
        max_residual,
        tolerance: DEFAULT_RESIDUAL_TOL,
    })
}

pub fn audit_monotonicity(trials: usize, seed: u64) -> Result<AuditOutcome> {
    inequality_audit("monotonicity", trials, seed, 1, |rng, a, spec| {
        let n = rng.index(1, 16);
        let scale = rng.range(0.1, 3.0);
        check_monotonicity(&rng.vector(n, scale), &rng.vector(n, scale), &a, &spec)
    })
}

pub fn audit_lipschitz(trials: usize, seed: u64) -> Result<AuditOutcome> {
    inequality_audit("lipschitz", trials, seed, 2, |rng, a, _| {
        let n = rng.index(1, 16);
        let scale = rng.range(0.1, 3.0);
        check_lipschitz(&rng.vector(n, scale), &rng.vector(n, scale), &a)
    })
}

pub fn audit_coercivity_gradient(trials: usize, seed: u64) -> Result<AuditOutcome> {
    inequality_audit("coercivity_gradient", trials, seed, 3, |rng, a, spec| {
        let n = rng.index(1, 16);
        let scale = rng.range(0.1, 3.0);
        check_coercivity_gradient(&rng.vector(n, scale), &a, &spec)
    })
}

fn ordered_times(rng: &mut AuditRng) -> (f64, f64, f64) {
    let x = rng.range(0.0, 2.0);
    let y = rng.range(0.0, 2.0);
    (x.min(y), x.max(y), rng.range(0.0, 2.0))
}

/// Both monotonicity statements for the Hilbert–Schmidt sums of
/// `P_N e^{sA}(Id − e^{tA})`; residual 1 for any failure.
pub fn audit_hs_monotonicity(trials: usize, seed: u64) -> Result<AuditOutcome> {
    let mut rng = AuditRng::new(seed, 4);
    let mut failures = 0usize;
    for _ in 0..trials {
        let n = rng.index(1, 64);
        let nu = rng.range(0.2, 3.0);
        let (s1, s2, t) = ordered_times(&mut rng);
        if !hs_decreasing_in_semigroup_time(n, s1, s2, t, nu)? {
            failures += 1;
        }
        if !hs_increasing_in_increment_time(n, t, s1, s2, nu)? {
            failures += 1;
        }
    }
    Ok(AuditOutcome {
        name: "hs_monotonicity",
        trials,
        max_residual: failures as f64,
        tolerance: 0.0,
    })
}

/// `lower ≤ ‖P_N(−√t A)^{−1/2}(Id − e^{tA})‖_{HS} ≤ upper` at random
/// `N`, `t ≤ T`.
pub fn audit_hs_bounds(trials: usize, seed: u64) -> Result<AuditOutcome> {
    let mut rng = AuditRng::new(seed, 5);
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..trials {
        let modes = if trial % 8 == 0 {
            Modes::All
        } else {
            Modes::Finite(rng.index(1, 64))
        };
        let nu = rng.range(0.2, 3.0);
        let horizon = rng.range(0.1, 3.0);
        let t = rng.range(1e-3, 1.0) * horizon;
        let value = hs_norm_sq(modes, t, nu)?.sqrt();
        let (lower, upper) = hs_bounds(modes, t, horizon, nu);
        worst = worst.max(lower - value).max(value - upper);
    }
    Ok(AuditOutcome {
        name: "hs_bounds",
        trials,
        max_residual: worst,
        tolerance: 1e-12,
    })
}

/// Temporal, spatial and full sandwiches on `(M, N) ∈ {1, …, max}²`.
pub fn audit_error_sandwich(max: usize, horizon: f64, nu: f64) -> Result<AuditOutcome> {
    let mut worst = f64::NEG_INFINITY;
    for m in 1..=max {
        for n in 1..=max {
            for r in reports_at(m, Modes::Finite(n), horizon, nu)? {
                worst = worst.max(r.lower - r.exact).max(r.exact - r.upper);
            }
        }
    }
    Ok(AuditOutcome {
        name: "error_sandwich",
        trials: 3 * max * max,
        max_residual: worst,
        tolerance: 1e-12,
    })
}

/// With `a = 0` the scheme must reproduce the OU process exactly.
pub fn audit_linear_exactness(paths: u64, seed: u64) -> Result<AuditOutcome> {
    let model = ModelParams::new(1.0, 1.0, CubicCoefficients::zero(), InitialValue::Bump)?;
    let d = DiscretizationParams::with_defaults(32, 32)?;
    let tape = generate_tape(seed, 64, 32, 1.0)?;
    let mut worst = 0.0_f64;
    for path in 0..paths {
        let traj = simulate_trajectory(&model, &d, &tape, path)?;
        for (y, o) in traj.y.iter().zip(&traj.o) {
            for (a, b) in y.iter().zip(o) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(AuditOutcome {
        name: "linear_exactness",
        trials: paths as usize,
        max_residual: worst,
        tolerance: 1e-14,
    })
}

/// All audits with `trials` randomized trials each.
pub fn run_all(trials: usize, seed: u64, horizon: f64, nu: f64) -> Result<Vec<AuditOutcome>> {
    Ok(vec![
        audit_monotonicity(trials, seed)?,
        audit_lipschitz(trials, seed)?,
        audit_coercivity_gradient(trials, seed)?,
        audit_hs_monotonicity(trials, seed)?,
        audit_hs_bounds(trials, seed)?,
        audit_error_sandwich(64, horizon, nu)?,
        audit_linear_exactness(8, seed)?,
    ])
}

/// CSV with header `audit,trials,max_residual,tolerance,passed`.
pub fn write_outcomes_csv<W: Write>(outcomes: &[AuditOutcome], mut w: W) -> Result<()> {
    writeln!(w, "audit,trials,max_residual,tolerance,passed")?;
    for o in outcomes {
        writeln!(
            w,
            "{},{},{},{},{}",
            o.name,
            o.trials,
            o.max_residual,
            o.tolerance,
            o.passed()
        )?;
    }
    Ok(())
}
