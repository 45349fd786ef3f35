use critrep::linalg::Rng;

/// Inverse-CDF sampler for `P(k) ∝ k^(−exponent)` on `1..=k_max`.
pub struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    pub fn new(exponent: f64, k_max: usize) -> Self {
        let mut cdf = Vec::with_capacity(k_max);
        let mut acc = 0.0;
        for k in 1..=k_max {
            acc += (k as f64).powf(-exponent);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Zipf { cdf }
    }

    pub fn sample(&self, rng: &mut Rng) -> u64 {
        let u = rng.uniform();
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1) as u64
            + 1
    }
}
