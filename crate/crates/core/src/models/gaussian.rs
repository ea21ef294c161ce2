use serde::{Deserialize, Serialize};

/// Variance floor shared by all Gaussian estimators.
pub const VAR_FLOOR: f64 = 1e-9;

/// Weighted running mean and variance of one attribute.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub weight: f64,
    pub mean: f64,
    m2: f64,
    pub min: f64,
    pub max: f64,
}

impl Gaussian {
    pub fn update(&mut self, x: f64, w: f64) {
        if w <= 0.0 {
            return;
        }
        if self.weight == 0.0 {
            self.min = x;
            self.max = x;
        } else {
            self.min = self.min.min(x);
            self.max = self.max.max(x);
        }
        self.weight += w;
        let delta = x - self.mean;
        self.mean += w * delta / self.weight;
        self.m2 += w * delta * (x - self.mean);
    }

    /// Sample variance (weight − 1 denominator), zero until weight exceeds one.
    pub fn variance(&self) -> f64 {
        if self.weight > 1.0 {
            (self.m2 / (self.weight - 1.0)).max(0.0)
        } else {
            0.0
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let var = self.variance().max(VAR_FLOOR);
        let d = x - self.mean;
        -0.5 * (std::f64::consts::TAU * var).ln() - d * d / (2.0 * var)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let var = self.variance();
        if var <= VAR_FLOOR {
            return if x >= self.mean { 1.0 } else { 0.0 };
        }
        0.5 * (1.0 + libm::erf((x - self.mean) / (2.0 * var).sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let mut g = Gaussian::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            g.update(x, 1.0);
        }
        assert_eq!(g.mean, 2.5);
        assert!((g.variance() - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!((g.min, g.max), (1.0, 4.0));
        assert!((g.cdf(2.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn weight_equals_repetition() {
        let mut a = Gaussian::default();
        let mut b = Gaussian::default();
        for (x, k) in [(1.0, 3.0), (5.0, 2.0)] {
            a.update(x, k);
            for _ in 0..k as usize {
                b.update(x, 1.0);
            }
        }
        assert!((a.mean - b.mean).abs() < 1e-12);
        assert!((a.variance() - b.variance()).abs() < 1e-12);
    }
}
