//! The cubic Nemytskii drift `F(v) = a₀ + a₁v + a₂v² + a₃v³`, its Galerkin
//! projection `P_N F(v)`, and residual checkers for the structural
//! inequalities the drift satisfies (one-sided Lipschitz/monotonicity, local
//! Lipschitz in `L⁶`, and the gradient part of the coercivity estimate).
//!
//! The odd part `a₁v + a₃v³` is formed pointwise on a grid with
//! `G − 1 ≥ 3N + 1` interior nodes, which makes the projection back onto the
//! first `N` modes free of aliasing. Even powers of a sine polynomial are
//! cosine polynomials with infinite sine series, so `a₀` and `a₂v²` are
//! projected analytically instead.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::spectral::{
    check_dim, lq_norm_values, pow2_grid_for, OperatorSpectrum, SineTransform, SpectralVector,
};

/// Residual tolerance used by the randomized inequality audits.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;

/// Coefficients of `F(v) = Σ_{k=0}^{3} a_k v^k` with `a₃ ≤ 0`, and `a₂ = 0`
/// whenever `a₃ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicCoefficients {
    a: [f64; 4],
}

impl CubicCoefficients {
    pub fn new(a0: f64, a1: f64, a2: f64, a3: f64) -> Result<Self> {
        let a = [a0, a1, a2, a3];
        if a.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("drift coefficients must be finite"));
        }
        if a3 > 0.0 {
            return Err(Error::invalid(format!(
                "cubic coefficient must be <= 0, got {a3}"
            )));
        }
        if a3 == 0.0 && a2 != 0.0 {
            return Err(Error::invalid(
                "quadratic coefficient must vanish when the cubic one does",
            ));
        }
        Ok(Self { a })
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// `F(v) = v − v³`.
    pub fn allen_cahn() -> Self {
        Self {
            a: [0.0, 1.0, 0.0, -1.0],
        }
    }

    pub fn zero() -> Self {
        Self { a: [0.0; 4] }
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.a
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().all(|&c| c == 0.0)
    }

    /// `F(x)` without the constant term.
    #[inline]
    fn eval_nonconstant(&self, x: f64) -> f64 {
        x * (self.a[1] + x * (self.a[2] + x * self.a[3]))
    }

    #[inline]
    fn eval_odd(&self, x: f64) -> f64 {
        x * (self.a[1] + x * x * self.a[3])
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.a[0] + self.eval_nonconstant(x)
    }

    fn indicator_a3_zero(&self) -> f64 {
        if self.a[3] == 0.0 {
            1.0
        } else {
            0.0
        }
    }

    /// `c = 2 max{1, 1/(|a₃| + 1_{a₃=0})} · max{1, max_{k∈{1,2}} (k|a_k|)²}`
    /// in `⟨v−w, A(v−w) + F(v) − F(w)⟩ ≤ c‖v−w‖²`.
    pub fn monotonicity_constant(&self) -> f64 {
        let denom = self.a[3].abs() + self.indicator_a3_zero();
        let k_max = (self.a[1].abs())
            .powi(2)
            .max((2.0 * self.a[2].abs()).powi(2));
        2.0 * 1.0_f64.max(1.0 / denom) * 1.0_f64.max(k_max)
    }

    /// `36 (max_{j∈{1,2,3}} |a_j|)²` in the local Lipschitz bound.
    pub fn lipschitz_constant(&self) -> f64 {
        let m = self.a[1..].iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        36.0 * m * m
    }

    /// `|a₁| + |a₂|²/(3|a₃| + 1_{a₃=0})`.
    pub fn coercivity_gradient_constant(&self) -> f64 {
        self.a[1].abs() + self.a[2] * self.a[2] / (3.0 * self.a[3].abs() + self.indicator_a3_zero())
    }
}

/// Sine coefficients of the constant function 1: `√2(1 − (−1)^k)/(kπ)`.
pub fn constant_function_coeffs(modes: usize) -> Vec<f64> {
    (1..=modes)
        .map(|k| {
            if k % 2 == 1 {
                2.0 * SQRT_2 / (k as f64 * PI)
            } else {
                0.0
            }
        })
        .collect()
}

/// `∫₀¹ cos(mπx) √2 sin(kπx) dx = √2·2k/(π(k² − m²))` for `k + m` odd, else 0.
fn cosine_sine_overlap(k: usize, m: usize) -> f64 {
    if (k + m).is_multiple_of(2) {
        return 0.0;
    }
    let (k, m) = (k as f64, m as f64);
    SQRT_2 * 2.0 * k / (PI * (k * k - m * m))
}

/// Adds `a₂ P_N(v²)` to `out`: `v² = Σ_m d_m cos(mπx)` with
/// `2 sin(iπx) sin(jπx) = cos((i−j)πx) − cos((i+j)πx)`.
fn add_quadratic(v: &[f64], a2: f64, overlap: &[f64], out: &mut [f64]) {
    let n = v.len();
    let mut d = vec![0.0; 2 * n + 1];
    for (i, &ci) in v.iter().enumerate() {
        for (j, &cj) in v.iter().enumerate() {
            let p = ci * cj;
            d[i.abs_diff(j)] += p;
            d[i + j + 2] -= p;
        }
    }
    for (k, o) in out.iter_mut().enumerate() {
        let row = &overlap[k * d.len()..(k + 1) * d.len()];
        *o += a2 * row.iter().zip(&d).map(|(s, dm)| s * dm).sum::<f64>();
    }
}

/// Minimum interior node count for alias-free cubic products of `modes` modes.
pub fn dealiased_interior_nodes(modes: usize) -> usize {
    3 * modes + 1
}

/// Reusable `v ↦ P_N F(v)` for a fixed mode count and grid.
#[derive(Debug, Clone)]
pub struct NemytskiiProjector {
    coeffs: CubicCoefficients,
    modes: usize,
    transform: SineTransform,
    constant: Vec<f64>,
    /// Row-major `N × (2N + 1)` overlaps, empty when `a₂ = 0`.
    overlap: Vec<f64>,
}

impl NemytskiiProjector {
    pub fn new(coeffs: CubicCoefficients, modes: usize, grid: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::invalid("at least one mode required"));
        }
        let required = dealiased_interior_nodes(modes);
        if grid < 2 || grid - 1 < required {
            return Err(Error::AliasRisk {
                grid,
                modes,
                required,
            });
        }
        let constant = constant_function_coeffs(modes)
            .into_iter()
            .map(|c| coeffs.a[0] * c)
            .collect();
        let overlap = if coeffs.a[2] == 0.0 {
            Vec::new()
        } else {
            (1..=modes)
                .flat_map(|k| (0..=2 * modes).map(move |m| cosine_sine_overlap(k, m)))
                .collect()
        };
        Ok(Self {
            coeffs,
            modes,
            transform: SineTransform::new(grid)?,
            constant,
            overlap,
        })
    }

    /// Uses the smallest power-of-two grid that is alias-free.
    pub fn with_default_grid(coeffs: CubicCoefficients, modes: usize) -> Result<Self> {
        Self::new(
            coeffs,
            modes,
            pow2_grid_for(dealiased_interior_nodes(modes)),
        )
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn grid(&self) -> usize {
        self.transform.grid()
    }

    pub fn coefficients(&self) -> &CubicCoefficients {
        &self.coeffs
    }

    /// Writes `P_N F(v)` into `out`. Both slices have `N` entries.
    pub fn project_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.modes, v.len())?;
        check_dim(self.modes, out.len())?;
        if self.coeffs.a[1..].iter().all(|&c| c == 0.0) {
            out.copy_from_slice(&self.constant);
            return Ok(());
        }
        out.copy_from_slice(&self.constant);
        if self.coeffs.a[1] != 0.0 || self.coeffs.a[3] != 0.0 {
            let mut values = self.transform.synthesize(v)?;
            values
                .iter_mut()
                .for_each(|x| *x = self.coeffs.eval_odd(*x));
            let projected = self.transform.analyze(&values, self.modes)?;
            out.iter_mut().zip(projected).for_each(|(o, p)| *o += p);
        }
        if !self.overlap.is_empty() {
            add_quadratic(v, self.coeffs.a[2], &self.overlap, out);
        }
        Ok(())
    }

    pub fn project(&self, v: &SpectralVector) -> Result<SpectralVector> {
        let mut out = vec![0.0; self.modes];
        self.project_into(v.coeffs(), &mut out)?;
        Ok(SpectralVector::from_vec_unchecked(out))
    }
}

/// `P_N F(v)` evaluated on a grid of size `grid` (`grid − 1 ≥ 3N + 1`).
pub fn project_f(v: &SpectralVector, a: &CubicCoefficients, grid: usize) -> Result<SpectralVector> {
    NemytskiiProjector::new(*a, v.dim(), grid)?.project(v)
}

fn audit_grid(modes: usize) -> Result<SineTransform> {
    SineTransform::new(pow2_grid_for(4 * modes + 1))
}

/// `⟨v−w, A(v−w) + F(v) − F(w)⟩ − c‖v−w‖²` with the drift pairing computed by
/// grid quadrature. Non-positive up to quadrature roundoff.
pub fn check_monotonicity(
    v: &SpectralVector,
    w: &SpectralVector,
    a: &CubicCoefficients,
    spec: &OperatorSpectrum,
) -> Result<f64> {
    check_dim(v.dim(), w.dim())?;
    let d = v.sub(w)?;
    let linear: f64 = -d
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| spec.mu(i + 1) * c * c)
        .sum::<f64>();
    let transform = audit_grid(v.dim())?;
    let gv = transform.synthesize(v.coeffs())?;
    let gw = transform.synthesize(w.coeffs())?;
    let drift: f64 = gv
        .iter()
        .zip(&gw)
        .map(|(&x, &y)| (x - y) * (a.eval_nonconstant(x) - a.eval_nonconstant(y)))
        .sum::<f64>()
        / transform.grid() as f64;
    Ok(linear + drift - a.monotonicity_constant() * d.norm().powi(2))
}

/// `‖F(v) − F(w)‖²_H − 36(max|a_j|)²‖v−w‖²_{L⁶}(1 + ‖v‖⁴_{L⁶} + ‖w‖⁴_{L⁶})`,
/// all norms by grid quadrature.
pub fn check_lipschitz(
    v: &SpectralVector,
    w: &SpectralVector,
    a: &CubicCoefficients,
) -> Result<f64> {
    check_dim(v.dim(), w.dim())?;
    let transform = audit_grid(v.dim())?;
    let g = transform.grid();
    let gv = transform.synthesize(v.coeffs())?;
    let gw = transform.synthesize(w.coeffs())?;
    let lhs: f64 = gv
        .iter()
        .zip(&gw)
        .map(|(&x, &y)| (a.eval_nonconstant(x) - a.eval_nonconstant(y)).powi(2))
        .sum::<f64>()
        / g as f64;
    let diff: Vec<f64> = gv.iter().zip(&gw).map(|(x, y)| x - y).collect();
    let d6 = lq_norm_values(&diff, g, 6.0);
    let v6 = lq_norm_values(&gv, g, 6.0);
    let w6 = lq_norm_values(&gw, g, 6.0);
    let rhs = a.lipschitz_constant() * d6 * d6 * (1.0 + v6.powi(4) + w6.powi(4));
    Ok(lhs - rhs)
}

/// `−ν Σ_{k=1}^{3} a_k ⟨v'', v^k⟩ − (|a₁| + |a₂|²/(3|a₃| + 1_{a₃=0}))‖v‖²_{H_{1/2}}`.
pub fn check_coercivity_gradient(
    v: &SpectralVector,
    a: &CubicCoefficients,
    spec: &OperatorSpectrum,
) -> Result<f64> {
    let transform = audit_grid(v.dim())?;
    let second: Vec<f64> = v
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let k = (i + 1) as f64;
            -PI * PI * k * k * c
        })
        .collect();
    let gv = transform.synthesize(v.coeffs())?;
    let gvpp = transform.synthesize(&second)?;
    let pairing: f64 = gv
        .iter()
        .zip(&gvpp)
        .map(|(&x, &xpp)| xpp * a.eval_nonconstant(x))
        .sum::<f64>()
        / transform.grid() as f64;
    let lhs = -spec.nu() * pairing;
    let h_half_sq: f64 = v
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| spec.mu(i + 1) * c * c)
        .sum();
    Ok(lhs - a.coercivity_gradient_constant() * h_half_sq)
}
