//! Monte Carlo strong errors of the scheme against a finer coupled
//! reference, convergence studies and moment audits.
//!
//! Every path is simulated independently from the shared noise tape, in
//! parallel; per-path results are collected in path order and reduced
//! sequentially with compensated sums, so output does not depend on the
//! number of threads.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linear_errors::{fit_rate, spatial_error_exact, temporal_error_exact, Modes, RateFit};
use crate::noise::{coarsen_increments, NoiseTape};
use crate::numeric::{mean_and_stderr, CompensatedSum};
use crate::scheme::{check_reference_order, DiscretizationParams, ModelParams, Scheme};
use crate::spectral::{hr_norm, SpectralVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Temporal,
    Spatial,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Temporal => "temporal",
            Axis::Spatial => "spatial",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub model: ModelParams,
    pub gamma: f64,
    pub chi: f64,
    pub m_grid: Vec<usize>,
    pub n_grid: Vec<usize>,
    pub m_ref: usize,
    pub n_ref: usize,
    /// `N` used along the temporal axis; defaults to `N_ref`.
    pub temporal_n: Option<usize>,
    /// `M` used along the spatial axis; defaults to `M_ref`.
    pub spatial_m: Option<usize>,
    pub paths: u64,
    pub seed: u64,
    /// With `a = 0`, fill the table from the exact linear errors instead of
    /// Monte Carlo.
    pub exact_linear: bool,
}

impl StudyConfig {
    pub fn temporal_n(&self) -> usize {
        self.temporal_n.unwrap_or(self.n_ref)
    }

    pub fn spatial_m(&self) -> usize {
        self.spatial_m.unwrap_or(self.m_ref)
    }

    pub fn discretization(&self, m: usize, n: usize) -> Result<DiscretizationParams> {
        DiscretizationParams::new(m, n, self.gamma, self.chi)
    }

    /// The resolutions of the convergence study, temporal axis first.
    pub fn targets(&self) -> Vec<(Axis, usize, usize)> {
        let mut t: Vec<_> = self
            .m_grid
            .iter()
            .map(|&m| (Axis::Temporal, m, self.temporal_n()))
            .collect();
        t.extend(
            self.n_grid
                .iter()
                .map(|&n| (Axis::Spatial, self.spatial_m(), n)),
        );
        t
    }

    /// The tape shared by the reference and all targets.
    pub fn tape(&self) -> Result<NoiseTape> {
        NoiseTape::new(self.seed, self.m_ref, self.n_ref, self.model.horizon)
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::Config("paths must be at least 1".into()));
        }
        if self.exact_linear && !self.model.a.is_zero() {
            return Err(Error::Config(
                "exact linear mode requires a = (0, 0, 0, 0)".into(),
            ));
        }
        self.discretization(self.m_ref, self.n_ref)?;
        let resolutions: Vec<(usize, usize)> =
            self.targets().iter().map(|&(_, m, n)| (m, n)).collect();
        for &(m, n) in &resolutions {
            self.discretization(m, n)?;
            if n > self.n_ref {
                return Err(Error::ResolutionOrder(format!(
                    "N = {n} exceeds N_ref = {}",
                    self.n_ref
                )));
            }
        }
        check_reference_order(&resolutions, self.m_ref, self.n_ref)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub kind: Axis,
    pub m: usize,
    pub n: usize,
    pub estimate: f64,
    /// `None` when a single path gives no spread estimate.
    pub stderr: Option<f64>,
    pub activation_fraction: f64,
    pub paths: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    /// CSV with header `kind,M,N,estimate,stderr,activation_fraction,paths,seed`;
    /// a missing standard error is written as `NA`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "kind,M,N,estimate,stderr,activation_fraction,paths,seed")?;
        for r in &self.rows {
            let se = r.stderr.map_or_else(|| "NA".to_string(), |s| s.to_string());
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.kind, r.m, r.n, r.estimate, se, r.activation_fraction, r.paths, r.seed
            )?;
        }
        Ok(())
    }

    pub fn axis(&self, axis: Axis) -> impl Iterator<Item = &ErrorRow> {
        self.rows.iter().filter(move |r| r.kind == axis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisFit {
    pub axis: Axis,
    #[serde(flatten)]
    pub fit: RateFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub table: ErrorTable,
    pub fits: Vec<AxisFit>,
}

impl StudyResult {
    pub fn fit(&self, axis: Axis) -> Option<&RateFit> {
        self.fits.iter().find(|f| f.axis == axis).map(|f| &f.fit)
    }

    pub fn fits_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.fits)?)
    }
}

/// Per-path squared differences at the coarse grid times of one target and
/// the number of truncated steps.
struct PathErrors {
    sq_diff: Vec<f64>,
    truncated: usize,
}

/// Estimates of `sup_t E‖X_ref(t) − Y(t)‖²_H` for several targets from one
/// set of coupled paths.
struct Estimate {
    estimate: f64,
    stderr: Option<f64>,
    activation_fraction: f64,
}

fn simulate_targets(cfg: &StudyConfig, targets: &[(usize, usize)]) -> Result<Vec<Estimate>> {
    cfg.validate()?;
    check_reference_order(targets, cfg.m_ref, cfg.n_ref)?;
    let tape = cfg.tape()?;
    let reference = Scheme::new(cfg.model.clone(), cfg.discretization(cfg.m_ref, cfg.n_ref)?)?;
    let schemes: Vec<Scheme> = targets
        .iter()
        .map(|&(m, n)| Scheme::new(cfg.model.clone(), cfg.discretization(m, n)?))
        .collect::<Result<_>>()?;

    let per_path: Vec<Vec<PathErrors>> = (0..cfg.paths)
        .into_par_iter()
        .map(|path| -> Result<Vec<PathErrors>> {
            let noise = tape.path_noise(path, cfg.n_ref)?;
            let ref_traj = reference.run(&coarsen_increments(&noise, cfg.m_ref)?)?;
            schemes
                .iter()
                .map(|scheme| {
                    let d = scheme.discretization();
                    let traj = if d.m == cfg.m_ref && d.n == cfg.n_ref {
                        ref_traj.clone()
                    } else {
                        scheme.run(&coarsen_increments(&noise, d.m)?)?
                    };
                    let ratio = cfg.m_ref / d.m;
                    let sq_diff = (0..=d.m)
                        .map(|i| {
                            let x = &ref_traj.y[i * ratio];
                            let y = &traj.y[i];
                            let mut s = CompensatedSum::new();
                            for (k, xr) in x.iter().enumerate() {
                                let diff = if k < d.n { xr - y[k] } else { *xr };
                                s.add(diff * diff);
                            }
                            s.value()
                        })
                        .collect();
                    Ok(PathErrors {
                        sq_diff,
                        truncated: traj.truncated_steps(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    Ok(targets
        .iter()
        .enumerate()
        .map(|(t, &(m, _))| {
            let mut best: (f64, Option<f64>) = (0.0, if cfg.paths > 1 { Some(0.0) } else { None });
            for i in 0..=m {
                let samples: Vec<f64> = per_path.iter().map(|p| p[t].sq_diff[i]).collect();
                let (mean, se) = mean_and_stderr(&samples);
                if mean > best.0 {
                    best = (mean, se);
                }
            }
            let (mean_sq, se_sq) = best;
            let estimate = mean_sq.sqrt();
            // delta method: se(√X) ≈ se(X)/(2√X)
            let stderr = se_sq.map(|s| {
                if estimate > 0.0 {
                    s / (2.0 * estimate)
                } else {
                    0.0
                }
            });
            let truncated: usize = per_path.iter().map(|p| p[t].truncated).sum();
            Estimate {
                estimate,
                stderr,
                activation_fraction: truncated as f64 / (cfg.paths as f64 * m as f64),
            }
        })
        .collect())
}

/// `(estimate, stderr, activation_fraction)` for the single target `(M, N)`.
///
/// The estimate is `sup_t (E‖X_ref(t) − Y^{M,N}(t)‖²_H)^{1/2}` over the
/// coarse grid times, with reference modes beyond `N` counted in the
/// difference; the activation fraction is the share of `(path, step)` pairs
/// with the drift suppressed.
pub fn strong_error_mc(cfg: &StudyConfig, m: usize, n: usize) -> Result<(f64, Option<f64>, f64)> {
    if n > cfg.n_ref {
        return Err(Error::ResolutionOrder(format!(
            "N = {n} exceeds N_ref = {}",
            cfg.n_ref
        )));
    }
    let e = simulate_targets(cfg, &[(m, n)])?.remove(0);
    Ok((e.estimate, e.stderr, e.activation_fraction))
}

/// Error table over the temporal and spatial axes and a rate fit per axis.
/// Rows at the reference resolution itself are tabulated but not fitted.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let targets = cfg.targets();
    let rows: Vec<ErrorRow> = if cfg.exact_linear {
        let (t, nu) = (cfg.model.horizon, cfg.model.nu);
        targets
            .iter()
            .map(|&(kind, m, n)| {
                let estimate = match kind {
                    Axis::Temporal => temporal_error_exact(m, Modes::Finite(n), t, nu)?,
                    Axis::Spatial => spatial_error_exact(n, t, nu, 1e-12)?,
                };
                Ok(ErrorRow {
                    kind,
                    m,
                    n,
                    estimate,
                    stderr: Some(0.0),
                    activation_fraction: 0.0,
                    paths: 0,
                    seed: cfg.seed,
                })
            })
            .collect::<Result<_>>()?
    } else {
        let resolutions: Vec<(usize, usize)> = targets.iter().map(|&(_, m, n)| (m, n)).collect();
        let estimates = simulate_targets(cfg, &resolutions)?;
        targets
            .iter()
            .zip(estimates)
            .map(|(&(kind, m, n), e)| ErrorRow {
                kind,
                m,
                n,
                estimate: e.estimate,
                stderr: e.stderr,
                activation_fraction: e.activation_fraction,
                paths: cfg.paths,
                seed: cfg.seed,
            })
            .collect()
    };
    let table = ErrorTable { rows };
    let mut fits = Vec::new();
    for axis in [Axis::Temporal, Axis::Spatial] {
        let points: Vec<(f64, f64)> = table
            .axis(axis)
            .filter(|r| !(r.m == cfg.m_ref && r.n == cfg.n_ref) || cfg.exact_linear)
            .map(|r| {
                let x = if axis == Axis::Temporal { r.m } else { r.n };
                (x as f64, r.estimate)
            })
            .collect();
        fits.push(AxisFit {
            axis,
            fit: fit_rate(&points)?,
        });
    }
    Ok(StudyResult { table, fits })
}

/// Whether refining along `axis` (increasing `M` or `N`) never raises the
/// estimate by more than `k` combined standard errors.
pub fn monotone_within(table: &ErrorTable, axis: Axis, k: f64) -> bool {
    let mut rows: Vec<&ErrorRow> = table.axis(axis).collect();
    rows.sort_by_key(|r| if axis == Axis::Temporal { r.m } else { r.n });
    rows.windows(2).all(|w| {
        let se = w[0].stderr.unwrap_or(0.0).hypot(w[1].stderr.unwrap_or(0.0));
        w[1].estimate <= w[0].estimate + k * se
    })
}

/// `E‖X_ref(t_i) − Y^{M,N}(t_i)‖²_H` at the coarse times `t_i = iT/M` for
/// `a = 0`, where both sides are discretized OU processes from `P ξ` driven
/// by the same Brownian motions. Computed exactly by the Itô isometry.
pub fn linear_reference_distance(
    model: &ModelParams,
    m: usize,
    n: usize,
    m_ref: usize,
    n_ref: usize,
) -> Result<Vec<f64>> {
    if m == 0 || !m_ref.is_multiple_of(m) || n == 0 || n > n_ref {
        return Err(Error::invalid("need M | M_ref and 1 <= N <= N_ref"));
    }
    let spec = model.spectrum();
    let ratio = m_ref / m;
    let h = model.horizon / m as f64;
    let hf = model.horizon / m_ref as f64;
    let xi = model.xi.projected(n_ref);
    let mut out = vec![CompensatedSum::new(); m + 1];
    for k in 1..=n_ref {
        let mu = spec.mu(k);
        let decay_h = (-2.0 * mu * h).exp();
        // Within one coarse step starting at time 0, a fine cell j < ratio
        // contributes (e^{−μ(h − j h_f)} − e^{−μh}·[coarse only]) squared.
        let cell: f64 = (0..ratio)
            .map(|j| {
                let fine = (-mu * (h - j as f64 * hf)).exp();
                let coarse = if k <= n { (-mu * h).exp() } else { 0.0 };
                (fine - coarse).powi(2) * hf
            })
            .sum();
        let mut var = 0.0;
        let xk = xi.mode(k);
        for (i, acc) in out.iter_mut().enumerate() {
            if i > 0 {
                var = decay_h * var + cell;
            }
            acc.add(var);
            if k > n {
                let det = (-mu * i as f64 * h).exp() * xk;
                acc.add(det * det);
            }
        }
    }
    Ok(out.iter().map(|s| s.value()).collect())
}

/// One row of [`moment_audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub m: usize,
    pub n: usize,
    pub p: f64,
    pub r: f64,
    /// `sup_t E‖Y_t‖^p_{H_r}` over the grid times.
    pub estimate: f64,
    pub stderr: Option<f64>,
    /// `E‖Y_T‖^p_{H_r}`.
    pub terminal: f64,
    pub terminal_stderr: Option<f64>,
    pub activation_fraction: f64,
    pub flagged: bool,
}

/// Empirical moments `E‖Y^{M,N}_t‖^p_{H_r}` over the resolution grid. All
/// resolutions share a tape at the finest `M` and `N` of the grid. A row is
/// flagged when its estimate exceeds three times the grid median by more
/// than three standard errors.
#[allow(clippy::too_many_arguments)]
pub fn moment_audit(
    model: &ModelParams,
    gamma: f64,
    chi: f64,
    resolutions: &[(usize, usize)],
    paths: u64,
    seed: u64,
    p: f64,
    r: f64,
) -> Result<Vec<MomentRow>> {
    if ![2.0, 4.0, 8.0].contains(&p) {
        return Err(Error::invalid(format!(
            "moment exponent must be 2, 4 or 8, got {p}"
        )));
    }
    if !(0.0..=gamma).contains(&r) {
        return Err(Error::invalid("norm exponent must lie in [0, gamma]"));
    }
    if paths == 0 || resolutions.is_empty() {
        return Err(Error::invalid("need at least one path and one resolution"));
    }
    let m_max = resolutions.iter().map(|x| x.0).max().unwrap();
    let n_max = resolutions.iter().map(|x| x.1).max().unwrap();
    let tape = NoiseTape::new(seed, m_max, n_max, model.horizon)?;
    let schemes: Vec<Scheme> = resolutions
        .iter()
        .map(|&(m, n)| Scheme::new(model.clone(), DiscretizationParams::new(m, n, gamma, chi)?))
        .collect::<Result<_>>()?;
    let spec = model.spectrum();

    let per_path: Vec<Vec<(Vec<f64>, usize)>> = (0..paths)
        .into_par_iter()
        .map(|path| -> Result<Vec<(Vec<f64>, usize)>> {
            let noise = tape.path_noise(path, n_max)?;
            schemes
                .iter()
                .map(|s| {
                    let traj = s.run(&coarsen_increments(&noise, s.discretization().m)?)?;
                    let norms = traj
                        .y
                        .iter()
                        .map(|y| {
                            hr_norm(&SpectralVector::from_vec_unchecked(y.clone()), r, &spec)
                                .powf(p)
                        })
                        .collect();
                    Ok((norms, traj.truncated_steps()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<MomentRow> = resolutions
        .iter()
        .enumerate()
        .map(|(idx, &(m, n))| {
            let mut best = (f64::NEG_INFINITY, None);
            let mut terminal = (0.0, None);
            for i in 0..=m {
                let samples: Vec<f64> = per_path.iter().map(|pp| pp[idx].0[i]).collect();
                let ms = mean_and_stderr(&samples);
                if ms.0 > best.0 {
                    best = ms;
                }
                if i == m {
                    terminal = ms;
                }
            }
            let truncated: usize = per_path.iter().map(|pp| pp[idx].1).sum();
            MomentRow {
                m,
                n,
                p,
                r,
                estimate: best.0,
                stderr: best.1,
                terminal: terminal.0,
                terminal_stderr: terminal.1,
                activation_fraction: truncated as f64 / (paths as f64 * m as f64),
                flagged: false,
            }
        })
        .collect();
    let mut sorted: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    for row in &mut rows {
        row.flagged = row.estimate > 3.0 * median + 3.0 * row.stderr.unwrap_or(0.0);
    }
    Ok(rows)
}
