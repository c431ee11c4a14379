//! Acceptance criteria. Each test prints one PASS/FAIL line to stderr.

mod common;

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use common::{integrate, loglog_slope, repo_root, report, temporal_mode_quadrature};
use sac_core::audit;
use sac_core::config::Config;
use sac_core::experiments::{moment_audit, monotone_within, run_convergence_study, Axis};
use sac_core::linear_errors::{
    spatial_error_exact, temporal_error_exact, temporal_mode_term, Modes,
};
use sac_core::noise::{coarsen_increments, exact_projected_ou, simulate_ou, NoiseTape};
use sac_core::numeric::mean_and_stderr;
use sac_core::scheme::{max_chi, ModelParams};
use sac_core::spectral::OperatorSpectrum;

const INEQ_TOL: f64 = 1e-12;

fn spatial_lower(n: usize, t: f64, nu: f64) -> f64 {
    (1.0 - (-nu * t).exp()).sqrt() / (2.0 * PI * nu.sqrt()) / (n as f64).sqrt()
}

fn spatial_upper(n: usize, nu: f64) -> f64 {
    1.0 / (PI * (2.0 * nu).sqrt()) / (n as f64).sqrt()
}

fn temporal_upper(m: usize, t: f64, nu: f64) -> f64 {
    let c = t.sqrt() / 2.0 * (1.0 / (PI * nu.sqrt()) + 1.0 / (nu * PI * PI) + 4.0 * PI * nu.sqrt());
    (m as f64).powf(-0.25) * c.sqrt()
}

/// The integral lower bound, evaluated by quadrature; `denom` is 8 for the
/// temporal error and 32 inside the full-discrete bound.
fn temporal_lower(m: usize, n: usize, t: f64, nu: f64, denom: f64) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let npi2 = nu * PI * PI;
    let limit = (t * (nf + 1.0).powi(2) / (2.0 * mf)
        - (1.0 + t.sqrt() / (2.0 * mf).sqrt()).powi(2))
    .max(0.0);
    let numer = t.sqrt()
        * (1.0 - (-npi2 * t).exp())
        * (1.0 - (-npi2 * (t * nf * nf / (2.0 * mf)).min(1.0)).exp()).powi(2);
    let a = (1.0 + t.sqrt()).powi(2);
    let integral = integrate(
        |x| numer / (denom * npi2 * 2f64.sqrt() * (x + a).powf(1.5)),
        0.0,
        limit,
        1e-13,
    );
    mf.powf(-0.25) * integral.sqrt()
}

/// Squared spatial error from `ζ(2) = π²/6`: `Σ_{k>N} (1 − e^{−2μ_k T})/(2μ_k)`.
fn spatial_error_sq_oracle(n: usize, t: f64, nu: f64) -> f64 {
    let npi2 = nu * PI * PI;
    let head: f64 = (1..=n).rev().map(|k| 1.0 / (k * k) as f64).sum();
    let decay: f64 = (n + 1..n + 200)
        .map(|k| {
            let mu = npi2 * (k * k) as f64;
            (-2.0 * mu * t).exp() / (2.0 * mu)
        })
        .sum();
    (PI * PI / 6.0 - head) / (2.0 * npi2) - decay
}

#[test]
fn criterion_1_spatial_sandwich() {
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_oracle = 0.0_f64;
    for n in 1..=256 {
        let e = spatial_error_exact(n, 1.0, 1.0, 1e-12).unwrap();
        worst = worst
            .max(spatial_lower(n, 1.0, 1.0) - e)
            .max(e - spatial_upper(n, 1.0));
        let oracle = spatial_error_sq_oracle(n, 1.0, 1.0).sqrt();
        worst_oracle = worst_oracle.max((e - oracle).abs() / oracle);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= INEQ_TOL && worst_oracle <= 1e-9 && secs < 1.0;
    report(
        "criterion 1 (spatial sandwich, N = 1..256)",
        pass,
        &format!("max violation {worst:.3e} (tol {INEQ_TOL:.0e}), max rel. deviation from zeta(2) oracle {worst_oracle:.2e}, {secs:.2} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_2_temporal_sandwich_and_slope() {
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    for m in 1..=64 {
        for n in 1..=64 {
            let e = temporal_error_exact(m, Modes::Finite(n), 1.0, 1.0).unwrap();
            worst = worst
                .max(temporal_lower(m, n, 1.0, 1.0, 8.0) - e)
                .max(e - temporal_upper(m, 1.0, 1.0));
        }
    }
    let points: Vec<(f64, f64)> = (2..=12)
        .map(|i| {
            let m = 1usize << i;
            (
                m as f64,
                temporal_error_exact(m, Modes::Finite(2048), 1.0, 1.0).unwrap(),
            )
        })
        .collect();
    let slope = loglog_slope(&points);
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= INEQ_TOL && (-0.30..=-0.20).contains(&slope) && secs < 10.0;
    report(
        "criterion 2 (temporal sandwich on {1..64}^2, slope at N = 2048)",
        pass,
        &format!("max violation {worst:.3e} (tol {INEQ_TOL:.0e}), slope over M = 4..4096 {slope:.4} (need [-0.30, -0.20]), {secs:.2} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_full_sandwich() {
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    for &t in &[0.5, 1.0, 2.0] {
        for &nu in &[0.5, 1.0, 2.0] {
            for n in 1..=64 {
                let spatial = spatial_error_exact(n, t, nu, 1e-12).unwrap();
                let spatial_lo =
                    (1.0 - (-nu * t).exp()).sqrt() / (4.0 * PI * nu.sqrt()) / (n as f64).sqrt();
                for m in 1..=64 {
                    let temporal = temporal_error_exact(m, Modes::Finite(n), t, nu).unwrap();
                    let full = spatial.hypot(temporal);
                    let lower = temporal_lower(m, n, t, nu, 32.0) + spatial_lo;
                    let upper = temporal_upper(m, t, nu) + spatial_upper(n, nu);
                    worst = worst.max(lower - full).max(full - upper);
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= INEQ_TOL && secs < 30.0;
    report(
        "criterion 3 (full sandwich, T, nu in {0.5, 1, 2})",
        pass,
        &format!("max violation {worst:.3e} (tol {INEQ_TOL:.0e}), {secs:.2} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_4_closed_form_vs_quadrature() {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for m in 1..=16 {
        for k in 1..=16 {
            let closed = temporal_mode_term(k, m, 1.0, 1.0);
            let quad = temporal_mode_quadrature(k, m, 1.0, 1.0, 1e-13);
            worst = worst.max((closed - quad).abs() / quad);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-10 && secs < 10.0;
    report(
        "criterion 4 (per-mode closed form vs adaptive quadrature, (M, N) in {1..16}^2)",
        pass,
        &format!("max relative error {worst:.2e} (tol 1e-10), {secs:.2} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_5_monte_carlo_bridge() {
    let start = Instant::now();
    let (m, n, paths) = (16usize, 64usize, 10_000u64);
    let spec = OperatorSpectrum::new(1.0).unwrap();
    let tape = NoiseTape::new(20_240, m, n, 1.0).unwrap();
    let x0 = vec![0.0; n];
    let samples: Vec<f64> = (0..paths)
        .map(|path| {
            let noise = tape.path_noise_with_auxiliary(path, n).unwrap();
            let exact = exact_projected_ou(&x0, &noise, &spec)
                .unwrap()
                .pop()
                .unwrap();
            let scheme = simulate_ou(&x0, &coarsen_increments(&noise, m).unwrap(), &spec)
                .unwrap()
                .pop()
                .unwrap();
            exact
                .iter()
                .zip(&scheme)
                .map(|(a, b)| (a - b).powi(2))
                .sum()
        })
        .collect();
    let (mean_sq, se_sq) = mean_and_stderr(&samples);
    let estimate = mean_sq.sqrt();
    let se = se_sq.unwrap() / (2.0 * estimate);
    let exact = temporal_error_exact(m, Modes::Finite(n), 1.0, 1.0).unwrap();
    let z = (estimate - exact) / se;
    let secs = start.elapsed().as_secs_f64();
    let pass = z.abs() <= 3.0 && secs < 60.0;
    report(
        "criterion 5 (MC bridge at (M, N) = (16, 64), 10^4 paths)",
        pass,
        &format!(
            "MC {estimate:.6} +- {se:.2e}, exact {exact:.6}, |z| = {:.2} (need <= 3), {secs:.2} s",
            z.abs()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_inequality_suites() {
    let start = Instant::now();
    let outcomes = [
        audit::audit_monotonicity(1000, 6).unwrap(),
        audit::audit_lipschitz(1000, 6).unwrap(),
        audit::audit_coercivity_gradient(1000, 6).unwrap(),
    ];
    let secs = start.elapsed().as_secs_f64();
    let pass = outcomes
        .iter()
        .all(|o| o.trials == 1000 && o.max_residual <= 1e-8)
        && secs < 30.0;
    let detail: Vec<String> = outcomes
        .iter()
        .map(|o| format!("{} {:.2e}", o.name, o.max_residual))
        .collect();
    report(
        "criterion 6 (inequality suites, 1000 trials each)",
        pass,
        &format!(
            "max residuals: {} (tol 1e-8), {secs:.2} s",
            detail.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_nonlinear_convergence() {
    let start = Instant::now();
    let cfg = Config::load(&repo_root().join("configs/allen_cahn.json"))
        .unwrap()
        .study_config()
        .unwrap();
    assert_eq!(cfg.model, ModelParams::allen_cahn_bump());
    assert_eq!((cfg.m_ref, cfg.n_ref, cfg.paths), (2048, 128, 200));
    assert_eq!(
        (cfg.m_grid.as_slice(), cfg.n_grid.as_slice()),
        (&[16, 32, 64, 128][..], &[8, 16, 32, 64][..])
    );
    assert_eq!((cfg.temporal_n(), cfg.spatial_m()), (128, 2048));
    let result = run_convergence_study(&cfg).unwrap();
    let temporal = result.fit(Axis::Temporal).unwrap().slope;
    let spatial = result.fit(Axis::Spatial).unwrap().slope;
    let monotone = monotone_within(&result.table, Axis::Temporal, 3.0)
        && monotone_within(&result.table, Axis::Spatial, 3.0);
    let secs = start.elapsed().as_secs_f64();
    let pass = temporal <= -0.15 && spatial <= -0.35 && monotone && secs < 900.0;
    let rows: Vec<String> = result
        .table
        .rows
        .iter()
        .map(|r| format!("({},{})={:.3e}", r.m, r.n, r.estimate))
        .collect();
    report(
        "criterion 7 (Allen-Cahn convergence, 200 paths)",
        pass,
        &format!(
            "temporal slope {temporal:.3} (need <= -0.15), spatial slope {spatial:.3} (need <= -0.35), monotone within 3 se: {monotone}, {secs:.1} s; {}",
            rows.join(" ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_moment_boundedness() {
    let start = Instant::now();
    let model = ModelParams::allen_cahn_bump();
    let gamma = 0.2;
    let chi = max_chi(gamma);
    let grid = [8usize, 16, 32, 64, 128];
    let resolutions: Vec<(usize, usize)> = grid
        .iter()
        .flat_map(|&m| grid.iter().map(move |&n| (m, n)))
        .collect();
    let rows = moment_audit(&model, gamma, chi, &resolutions, 200, 8, 2.0, gamma).unwrap();
    let mut terminal: Vec<f64> = rows.iter().map(|r| r.terminal).collect();
    terminal.sort_by(f64::total_cmp);
    let median = terminal[terminal.len() / 2];
    let flagged: Vec<String> = rows
        .iter()
        .filter(|r| r.terminal > 3.0 * median + 3.0 * r.terminal_stderr.unwrap_or(0.0))
        .map(|r| format!("({},{})", r.m, r.n))
        .collect();
    let (lo, hi) = (terminal[0], terminal[terminal.len() - 1]);

    let activation = moment_audit(
        &model,
        gamma,
        chi,
        &[(64, 64), (1024, 64)],
        200,
        8,
        2.0,
        gamma,
    )
    .unwrap();
    let (a64, a1024) = (
        activation[0].activation_fraction,
        activation[1].activation_fraction,
    );
    let secs = start.elapsed().as_secs_f64();
    let pass = flagged.is_empty() && a1024 <= a64 && secs < 600.0;
    report(
        "criterion 8 (moment boundedness and truncation activation)",
        pass,
        &format!(
            "terminal E|Y_T|^2 in [{lo:.4}, {hi:.4}], median {median:.4}, flagged {flagged:?}; activation fraction M=64: {a64:.4}, M=1024: {a1024:.4} (need M=1024 <= M=64), {secs:.1} s"
        ),
    );
    assert!(flagged.is_empty(), "moment growth flagged at {flagged:?}");
    assert!(
        a1024 <= a64,
        "activation fraction rose from {a64} at M = 64 to {a1024} at M = 1024"
    );
}

#[test]
fn criterion_9_determinism_across_threads() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = repo_root().join("configs/quick.json");
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_sac"))
            .args(["converge", "--threads", threads, "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        (
            std::fs::read(out.join("errors.csv")).unwrap(),
            std::fs::read(out.join("rates.json")).unwrap(),
        )
    };
    let one = run("1");
    let two = run("2");
    let four = run("4");
    let pass = one == two && one == four;
    let secs = start.elapsed().as_secs_f64();
    report(
        "criterion 9 (converge byte-identical across --threads 1, 2, 4)",
        pass,
        &format!(
            "errors.csv {} bytes, rates.json {} bytes, identical: {pass}, {secs:.2} s",
            one.0.len(),
            one.1.len()
        ),
    );
    assert!(pass);
}
