use std::fmt;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

/// Ensemble estimate of one quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub quantity: String,
    pub n: u64,
    pub mean: f64,
    /// Sample standard deviation (divisor `n - 1`) over `sqrt(n)`.
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub seed: u64,
    pub config_hash: String,
}

impl McEstimate {
    /// Mean of i.i.d. samples with a normal-approximation interval.
    pub fn from_samples(quantity: impl Into<String>, samples: &[f64], seed: u64, config_hash: &str) -> Self {
        let (mean, stderr) = mean_stderr(samples);
        Self {
            quantity: quantity.into(),
            n: samples.len() as u64,
            mean,
            stderr,
            ci95: (mean - Z95 * stderr, mean + Z95 * stderr),
            seed,
            config_hash: config_hash.to_string(),
        }
    }

    /// Fraction `k / n` with a Wilson interval.
    pub fn proportion(quantity: impl Into<String>, k: u64, n: u64, seed: u64, config_hash: &str) -> Self {
        assert!(n > 0 && k <= n, "proportion needs 0 <= k <= n, n > 0");
        let nf = n as f64;
        let p = k as f64 / nf;
        let stderr = if n > 1 {
            (p * (1.0 - p) / (nf - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            quantity: quantity.into(),
            n,
            mean: p,
            stderr,
            ci95: wilson(k, n, Z95),
            seed,
            config_hash: config_hash.to_string(),
        }
    }

    pub fn ci_width(&self) -> f64 {
        self.ci95.1 - self.ci95.0
    }

    pub fn contains(&self, v: f64) -> bool {
        self.ci95.0 <= v && v <= self.ci95.1
    }
}

impl fmt::Display for McEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} = {:.6} ± {:.6} (95% CI [{:.6}, {:.6}], n = {})",
            self.quantity, self.mean, self.stderr, self.ci95.0, self.ci95.1, self.n
        )
    }
}

/// Sample mean and standard error; `(NaN, NaN)` for no samples.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
