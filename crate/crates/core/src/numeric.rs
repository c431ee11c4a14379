//! Summation helpers shared by the exact series and the Monte Carlo
//! aggregation.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// `Σ_{k ≥ n} 1/k²` (the trigamma function at `n`), for `n ≥ 1`.
///
/// Small arguments are shifted up by direct summation until the asymptotic
/// expansion is accurate to machine precision.
pub fn inverse_square_tail(n: u64) -> f64 {
    assert!(n >= 1);
    const SHIFT: u64 = 32;
    let mut head = CompensatedSum::new();
    let mut x = n;
    while x < SHIFT {
        head.add(1.0 / (x as f64 * x as f64));
        x += 1;
    }
    let xf = x as f64;
    let inv = 1.0 / xf;
    let inv2 = inv * inv;
    // ψ₁(x) ~ 1/x + 1/(2x²) + Σ B_{2k}/x^{2k+1}
    let series = inv
        + 0.5 * inv2
        + inv
            * inv2
            * (1.0 / 6.0
                + inv2
                    * (-1.0 / 30.0
                        + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0)))));
    head.add(series);
    head.value()
}

/// Mean and standard error (`sample std / √n`) of a sample. The standard
/// error is `None` when fewer than two samples are available.
pub fn mean_and_stderr(samples: &[f64]) -> (f64, Option<f64>) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64;
    (mean, Some((var / n as f64).sqrt()))
}
