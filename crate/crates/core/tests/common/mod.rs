#![allow(dead_code)]

use std::io::Write;
use std::path::PathBuf;

/// Adaptive Simpson quadrature with absolute tolerance `eps`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // panels below this share of the request cannot move the total
    simpson_rec(f, a, b, fa, fm, fb, whole, eps, eps * 2f64.powi(-30), 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    floor: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // below this the difference is round-off
    let eps = eps
        .max(floor)
        .max(8.0 * f64::EPSILON * (left + right).abs());
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * eps, floor, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * eps, floor, depth - 1)
}

/// Adaptive Simpson to relative accuracy `rel`, using a coarse pass for scale.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    simpson(
        &f,
        a,
        b,
        rel * coarse(&f, a, b).abs().max(f64::MIN_POSITIVE),
    )
}

fn coarse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let peak = (0..=64)
        .map(|i| f(a + (b - a) * i as f64 / 64.0).abs())
        .fold(f64::MIN_POSITIVE, f64::max);
    simpson(f, a, b, 1e-3 * (b - a) * peak)
}

/// `E|P_N O_T − O^{M,N}_T|²` in mode `k` by quadrature of
/// `(e^{−μ(T−s)} − e^{−μ(T−⌊s⌋)})²` cell by cell.
pub fn temporal_mode_quadrature(k: usize, m: usize, horizon: f64, nu: f64, rel: f64) -> f64 {
    let mu = nu * std::f64::consts::PI.powi(2) * (k * k) as f64;
    let h = horizon / m as f64;
    let cell = |j: usize| {
        let left = j as f64 * h;
        let right = if j + 1 == m {
            horizon
        } else {
            (j + 1) as f64 * h
        };
        let f =
            move |s: f64| (-2.0 * mu * (horizon - s)).exp() * (-mu * (s - left)).exp_m1().powi(2);
        (f, left, right)
    };
    // tolerance relative to the whole mode, so cells far from the horizon stay cheap
    let total: f64 = (0..m)
        .map(|j| {
            let (f, a, b) = cell(j);
            coarse(&f, a, b)
        })
        .sum();
    let eps = rel * total.max(f64::MIN_POSITIVE) / m as f64;
    (0..m)
        .map(|j| {
            let (f, a, b) = cell(j);
            simpson(&f, a, b, eps)
        })
        .sum()
}

/// Writes a criterion line straight to stderr so it shows without `--nocapture`.
pub fn report(id: &str, pass: bool, detail: &str) {
    let line = format!("{} {id}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
