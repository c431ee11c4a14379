//! Exact strong errors of the spectral Galerkin / exponential Euler
//! discretization of the linear stochastic heat equation
//! `dO = νΔO dt + dW`, `O₀ = 0`, together with explicit lower and upper
//! bounds of order `M^{−1/4}` and `N^{−1/2}`.
//!
//! With `μ_k = νπ²k²` and `h = T/M` every error is a sum of independent
//! per-mode variances given by the Itô isometry:
//!
//! * spatial: `‖O_T − P_N O_T‖² = Σ_{k>N} (1 − e^{−2μ_k T})/(2μ_k)`
//! * temporal: `‖P_N O_T − O^{M,N}_T‖² = Σ_{k≤N} ∫_0^T (e^{−μ_k(T−s)} − e^{−μ_k(T−⌊s⌋_h)})² ds`
//! * full: the sum of the two (the components are orthogonal).
//!
//! Infinite mode sums are summed directly until the exponentials drop below
//! `e^{−40}` and completed with the exact tail `Σ_{k≥K} 1/(2μ_k)`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{inverse_square_tail, CompensatedSum};

/// `μ h` beyond which `e^{−μh}` corrections are dropped from a mode term.
const NEGLIGIBLE_EXPONENT: f64 = 40.0;

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

#[inline]
fn mu(k: u64, nu: f64) -> f64 {
    nu * PI * PI * (k as f64) * (k as f64)
}

/// `Σ_{k≥K} 1/(2μ_k)`.
fn half_inverse_mu_tail(first: u64, nu: f64) -> f64 {
    inverse_square_tail(first) / (2.0 * nu * PI * PI)
}

/// Smallest `k` with `μ_k·t > NEGLIGIBLE_EXPONENT`.
fn negligible_from(t: f64, nu: f64) -> u64 {
    ((NEGLIGIBLE_EXPONENT / (nu * PI * PI * t)).sqrt().floor() as u64 + 1).max(1)
}

/// Mode count: finite `N` or all modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modes {
    Finite(usize),
    All,
}

impl Modes {
    pub fn finite(self) -> Option<usize> {
        match self {
            Modes::Finite(n) => Some(n),
            Modes::All => None,
        }
    }
}

impl fmt::Display for Modes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modes::Finite(n) => write!(f, "{n}"),
            Modes::All => f.write_str("all"),
        }
    }
}

/// `‖O_T − P_N O_T‖_{L²(ℙ;H)}`.
///
/// The tail is summed exactly (up to `e^{−40}` relative corrections), so
/// `tail_rel_tol` only needs to be positive; it bounds the neglected part
/// relative to the result and is checked against that bound.
pub fn spatial_error_exact(n: usize, horizon: f64, nu: f64, tail_rel_tol: f64) -> Result<f64> {
    check_positive("T", horizon)?;
    check_positive("nu", nu)?;
    check_positive("tail_rel_tol", tail_rel_tol)?;
    let first = n as u64 + 1;
    let cut = negligible_from(2.0 * horizon, nu).max(first);
    let mut sum = CompensatedSum::new();
    for k in first..cut {
        let m = mu(k, nu);
        sum.add(-(-2.0 * m * horizon).exp_m1() / (2.0 * m));
    }
    // Σ_{k≥cut} e^{−2μ_k T}/(2μ_k) is below e^{−40}·tail.
    let tail = half_inverse_mu_tail(cut, nu);
    sum.add(tail);
    let value = sum.value();
    if (-NEGLIGIBLE_EXPONENT).exp() * tail > tail_rel_tol * value {
        return Err(Error::invalid(format!(
            "tail tolerance {tail_rel_tol} below attainable accuracy"
        )));
    }
    Ok(value.sqrt())
}

/// `∫_0^h (e^{μu} − 1)² du · e^{−2μh}` in a form that is accurate for small
/// and large `μh`.
fn temporal_cell_integral(m: f64, h: f64) -> f64 {
    let x = m * h;
    if x <= 1.0 {
        // e^{2x}μB = Σ_{n≥2} (2^n − 2) x^{n+1}/(n+1)!
        let mut sum = 0.0;
        let mut pow = x * x * x;
        let mut fact = 6.0;
        let mut two = 4.0;
        for n in 2..60 {
            let term = (two - 2.0) * pow / fact;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            pow *= x;
            fact *= (n + 2) as f64;
            two *= 2.0;
        }
        (-2.0 * x).exp() / m * sum
    } else {
        let e1 = (-x).exp();
        -(-2.0 * x).exp_m1() / (2.0 * m) - 2.0 * e1 * (-(-x).exp_m1()) / m + h * e1 * e1
    }
}

/// Per-mode contribution `I_k` to the squared temporal error:
/// `[Σ_{j<M} e^{−2μjh}]·[(1−e^{−2μh})/(2μ) − 2e^{−μh}(1−e^{−μh})/μ + h e^{−2μh}]`.
pub fn temporal_mode_term(k: usize, m_steps: usize, horizon: f64, nu: f64) -> f64 {
    let m = mu(k as u64, nu);
    let h = horizon / m_steps as f64;
    let geometric = {
        let num = (-2.0 * m * horizon).exp_m1();
        let den = (-2.0 * m * h).exp_m1();
        if den == 0.0 {
            m_steps as f64
        } else {
            num / den
        }
    };
    geometric * temporal_cell_integral(m, h)
}

/// `‖P_N O_T − O^{M,N}_T‖_{L²(ℙ;H)}`, which equals the supremum of the same
/// quantity over `t ∈ [0, T]`.
pub fn temporal_error_exact(m_steps: usize, modes: Modes, horizon: f64, nu: f64) -> Result<f64> {
    check_positive("T", horizon)?;
    check_positive("nu", nu)?;
    if m_steps == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    let mut sum = CompensatedSum::new();
    match modes {
        Modes::Finite(0) => return Err(Error::invalid("N must be at least 1")),
        Modes::Finite(n) => {
            for k in 1..=n {
                sum.add(temporal_mode_term(k, m_steps, horizon, nu));
            }
        }
        Modes::All => {
            let h = horizon / m_steps as f64;
            let cut = negligible_from(h, nu);
            for k in 1..cut {
                sum.add(temporal_mode_term(k as usize, m_steps, horizon, nu));
            }
            sum.add(half_inverse_mu_tail(cut, nu));
        }
    }
    Ok(sum.value().sqrt())
}

/// `‖O_T − O^{M,N}_T‖_{L²(ℙ;H)} = (spatial² + temporal²)^{1/2}`.
pub fn full_error_exact(m_steps: usize, modes: Modes, horizon: f64, nu: f64) -> Result<f64> {
    let temporal = temporal_error_exact(m_steps, modes, horizon, nu)?;
    let spatial = match modes {
        Modes::Finite(n) => spatial_error_exact(n, horizon, nu, 1e-12)?,
        Modes::All => 0.0,
    };
    Ok(spatial.hypot(temporal))
}

fn temporal_upper_constant(horizon: f64, nu: f64) -> f64 {
    horizon.sqrt() / 2.0 * (1.0 / (PI * nu.sqrt()) + 1.0 / (nu * PI * PI) + 4.0 * PI * nu.sqrt())
}

/// `M^{−1/4} [√T/2 (1/(π√ν) + 1/(νπ²) + 4π√ν)]^{1/2}`.
pub fn bound_upper_temporal(m_steps: usize, horizon: f64, nu: f64) -> f64 {
    (m_steps as f64).powf(-0.25) * temporal_upper_constant(horizon, nu).sqrt()
}

/// The integral lower bound with the given denominator constant (8 for the
/// temporal error alone, 32 in the combined bound).
fn temporal_lower_with(m_steps: usize, modes: Modes, horizon: f64, nu: f64, denom: f64) -> f64 {
    let m = m_steps as f64;
    let t = horizon;
    let npi2 = nu * PI * PI;
    let (min_arg, upper_limit) = match modes {
        Modes::Finite(n) => {
            let nf = n as f64;
            let limit =
                t * (nf + 1.0) * (nf + 1.0) / (2.0 * m) - (1.0 + (t / (2.0 * m)).sqrt()).powi(2);
            ((t * nf * nf / (2.0 * m)).min(1.0), limit.max(0.0))
        }
        Modes::All => (1.0, f64::INFINITY),
    };
    let c = t.sqrt() * (-(-npi2 * t).exp_m1()) * (-(-npi2 * min_arg).exp_m1()).powi(2)
        / (denom * npi2 * SQRT_2);
    let a = (1.0 + t.sqrt()).powi(2);
    // ∫_0^X (x + a)^{−3/2} dx = 2(a^{−1/2} − (X + a)^{−1/2})
    let integral = 2.0 * (1.0 / a.sqrt() - 1.0 / (upper_limit + a).sqrt());
    m.powf(-0.25) * (c * integral).sqrt()
}

pub fn bound_lower_temporal(m_steps: usize, modes: Modes, horizon: f64, nu: f64) -> f64 {
    temporal_lower_with(m_steps, modes, horizon, nu, 8.0)
}

/// `√(1 − e^{−νT})/(2π√ν) · N^{−1/2}`.
pub fn bound_lower_spatial(n: usize, horizon: f64, nu: f64) -> f64 {
    (-(-nu * horizon).exp_m1()).sqrt() / (2.0 * PI * nu.sqrt()) / (n as f64).sqrt()
}

/// `N^{−1/2}/(π√(2ν))`.
pub fn bound_upper_spatial(n: usize, _horizon: f64, nu: f64) -> f64 {
    1.0 / (PI * (2.0 * nu).sqrt()) / (n as f64).sqrt()
}

/// Lower and upper bounds for the combined error.
pub fn bounds_full(m_steps: usize, modes: Modes, horizon: f64, nu: f64) -> (f64, f64) {
    match modes {
        Modes::Finite(n) => {
            let lower = temporal_lower_with(m_steps, modes, horizon, nu, 32.0)
                + (-(-nu * horizon).exp_m1()).sqrt() / (4.0 * PI * nu.sqrt()) / (n as f64).sqrt();
            let upper =
                bound_upper_temporal(m_steps, horizon, nu) + bound_upper_spatial(n, horizon, nu);
            (lower, upper)
        }
        Modes::All => (
            bound_lower_temporal(m_steps, modes, horizon, nu),
            bound_upper_temporal(m_steps, horizon, nu),
        ),
    }
}

/// `‖P_N (−√t A)^{−1/2}(Id − e^{tA})‖²_{HS} = Σ_{k≤N} (1 − e^{−μ_k t})²/(μ_k √t)`.
pub fn hs_norm_sq(modes: Modes, t: f64, nu: f64) -> Result<f64> {
    check_positive("t", t)?;
    check_positive("nu", nu)?;
    let term = |k: u64| {
        let m = mu(k, nu);
        (-(-m * t).exp_m1()).powi(2) / (m * t.sqrt())
    };
    let mut sum = CompensatedSum::new();
    match modes {
        Modes::Finite(n) => (1..=n as u64).for_each(|k| sum.add(term(k))),
        Modes::All => {
            let cut = negligible_from(t, nu);
            (1..cut).for_each(|k| sum.add(term(k)));
            sum.add(2.0 * half_inverse_mu_tail(cut, nu) / t.sqrt());
        }
    }
    Ok(sum.value())
}

/// Lower and upper bounds on `‖P_N (−√t A)^{−1/2}(Id − e^{tA})‖_{HS}` for
/// `t ∈ (0, T]`.
pub fn hs_bounds(modes: Modes, t: f64, horizon: f64, nu: f64) -> (f64, f64) {
    let npi2 = nu * PI * PI;
    let (min_arg, limit) = match modes {
        Modes::Finite(n) => {
            let nf = n as f64;
            (
                (t * nf * nf).min(1.0),
                (t * (nf + 1.0).powi(2) - (1.0 + t.sqrt()).powi(2)).max(0.0),
            )
        }
        Modes::All => (1.0, f64::INFINITY),
    };
    let a = (1.0 + horizon.sqrt()).powi(2);
    let c = (-(-npi2 * min_arg).exp_m1()).powi(2) / (2.0 * npi2);
    let lower = (c * 2.0 * (1.0 / a.sqrt() - 1.0 / (limit + a).sqrt())).sqrt();
    let upper = (1.0 / (PI * nu.sqrt()) + 1.0 / npi2 + 4.0 * PI * nu.sqrt()).sqrt();
    (lower, upper)
}

fn check_times(s1: f64, s2: f64, t: f64) -> Result<()> {
    if !(s1 >= 0.0 && s1 <= s2 && s2.is_finite() && t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid("need 0 <= s1 <= s2 and t >= 0"));
    }
    Ok(())
}

/// `Σ_{k≤N} (e^{−μ_k s₁}(1 − e^{−μ_k t}))² ≥ Σ_{k≤N} (e^{−μ_k s₂}(1 − e^{−μ_k t}))²`
/// for `s₁ ≤ s₂`.
pub fn hs_decreasing_in_semigroup_time(
    n: usize,
    s1: f64,
    s2: f64,
    t: f64,
    nu: f64,
) -> Result<bool> {
    check_times(s1, s2, t)?;
    let side = |s: f64| -> f64 {
        (1..=n as u64)
            .map(|k| {
                let m = mu(k, nu);
                ((-m * s).exp() * -(-m * t).exp_m1()).powi(2)
            })
            .sum()
    };
    Ok(side(s1) >= side(s2))
}

/// `Σ_{k≤N} (e^{−μ_k t}(1 − e^{−μ_k s₁}))² ≤ Σ_{k≤N} (e^{−μ_k t}(1 − e^{−μ_k s₂}))²`
/// for `s₁ ≤ s₂`.
pub fn hs_increasing_in_increment_time(
    n: usize,
    t: f64,
    s1: f64,
    s2: f64,
    nu: f64,
) -> Result<bool> {
    check_times(s1, s2, t)?;
    let side = |s: f64| -> f64 {
        (1..=n as u64)
            .map(|k| {
                let m = mu(k, nu);
                ((-m * t).exp() * -(-m * s).exp_m1()).powi(2)
            })
            .sum()
    };
    Ok(side(s1) <= side(s2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Temporal,
    Spatial,
    Full,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Temporal => "temporal",
            ErrorKind::Spatial => "spatial",
            ErrorKind::Full => "full",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBoundsReport {
    pub m: usize,
    pub n: Modes,
    pub kind: ErrorKind,
    pub exact: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ErrorBoundsReport {
    pub fn is_sandwiched(&self, tol: f64) -> bool {
        self.lower <= self.exact + tol && self.exact <= self.upper + tol
    }
}

/// Absolute slack allowed in sandwich checks.
pub const SANDWICH_TOL: f64 = 1e-12;

/// Temporal, spatial and full reports at one resolution; only the temporal
/// one for `N = all`.
pub fn reports_at(
    m_steps: usize,
    modes: Modes,
    horizon: f64,
    nu: f64,
) -> Result<Vec<ErrorBoundsReport>> {
    let temporal = temporal_error_exact(m_steps, modes, horizon, nu)?;
    let mut out = vec![ErrorBoundsReport {
        m: m_steps,
        n: modes,
        kind: ErrorKind::Temporal,
        exact: temporal,
        lower: bound_lower_temporal(m_steps, modes, horizon, nu),
        upper: bound_upper_temporal(m_steps, horizon, nu),
    }];
    if let Modes::Finite(n) = modes {
        let spatial = spatial_error_exact(n, horizon, nu, 1e-12)?;
        out.push(ErrorBoundsReport {
            m: m_steps,
            n: modes,
            kind: ErrorKind::Spatial,
            exact: spatial,
            lower: bound_lower_spatial(n, horizon, nu),
            upper: bound_upper_spatial(n, horizon, nu),
        });
        let (lower, upper) = bounds_full(m_steps, modes, horizon, nu);
        out.push(ErrorBoundsReport {
            m: m_steps,
            n: modes,
            kind: ErrorKind::Full,
            exact: spatial.hypot(temporal),
            lower,
            upper,
        });
    }
    Ok(out)
}

/// Reports over the product grid `m_grid × n_grid`, `M` outermost.
pub fn heat_error_table(
    m_grid: &[usize],
    n_grid: &[Modes],
    horizon: f64,
    nu: f64,
) -> Result<Vec<ErrorBoundsReport>> {
    let mut rows = Vec::new();
    for &m in m_grid {
        for &n in n_grid {
            rows.extend(reports_at(m, n, horizon, nu)?);
        }
    }
    Ok(rows)
}

/// CSV with header `M,N,exact,lower,upper,kind`.
pub fn write_reports_csv<W: Write>(rows: &[ErrorBoundsReport], mut w: W) -> Result<()> {
    writeln!(w, "M,N,exact,lower,upper,kind")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.m, r.n, r.exact, r.lower, r.upper, r.kind
        )?;
    }
    Ok(())
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log residuals.
    pub residual: f64,
    pub points: Vec<[f64; 2]>,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::DegenerateFit(format!(
            "nonpositive or non-finite point ({x}, {y})"
        )));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all resolutions are equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
        points: points.iter().map(|&(x, y)| [x, y]).collect(),
    })
}
