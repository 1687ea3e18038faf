/// Running mean and variance (Welford), mergeable across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStat {
    pub count: f64,
    pub mean: Vec<f64>,
    /// Sum of squared deviations from the mean.
    pub m2: Vec<f64>,
}

/// Variance floor used when normalizing.
pub const VAR_FLOOR: f64 = 1e-6;

impl RunningStat {
    pub fn new(dim: usize) -> Self {
        RunningStat { count: 0.0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        self.count += 1.0;
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / self.count;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    /// Folds `other` in as if its samples had been pushed here.
    pub fn merge(&mut self, other: &RunningStat) {
        if other.count == 0.0 {
            return;
        }
        if self.count == 0.0 {
            *self = other.clone();
            return;
        }
        let n = self.count + other.count;
        for i in 0..self.dim() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * other.count / n;
            self.m2[i] += other.m2[i] + d * d * self.count * other.count / n;
        }
        self.count = n;
    }

    /// Population variance, without the floor.
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0.0 {
            return vec![1.0; self.dim()];
        }
        self.m2.iter().map(|m| m / self.count).collect()
    }

    /// `(μ, 1/√ν)` for normalizing; identity until two samples are seen.
    pub fn normalizer(&self) -> (Vec<f64>, Vec<f64>) {
        if self.count < 2.0 {
            return (vec![0.0; self.dim()], vec![1.0; self.dim()]);
        }
        let inv = self.variance().iter().map(|v| 1.0 / v.max(VAR_FLOOR).sqrt()).collect();
        (self.mean.clone(), inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_brute_force_moments() {
        let xs: Vec<[f64; 2]> = (0..500).map(|i| [(i as f64 * 0.7).sin() * 3.0 + 1.0, (i % 7) as f64]).collect();
        let mut s = RunningStat::new(2);
        for x in &xs {
            s.push(x);
        }
        for d in 0..2 {
            let mean = xs.iter().map(|x| x[d]).sum::<f64>() / 500.0;
            let var = xs.iter().map(|x| (x[d] - mean).powi(2)).sum::<f64>() / 500.0;
            assert!((s.mean[d] - mean).abs() < 1e-12);
            assert!((s.variance()[d] - var).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_before_data() {
        let s = RunningStat::new(3);
        assert_eq!(s.normalizer(), (vec![0.0; 3], vec![1.0; 3]));
        let mut s = RunningStat::new(1);
        s.push(&[5.0]);
        s.push(&[5.0]);
        // Constant stream hits the floor instead of dividing by zero.
        assert_eq!(s.normalizer().1[0], 1.0 / VAR_FLOOR.sqrt());
    }

    proptest! {
        #[test]
        fn merge_equals_sequential(xs in proptest::collection::vec(-100.0f64..100.0, 2..60), cut in 0usize..60) {
            let cut = cut % xs.len();
            let mut all = RunningStat::new(1);
            let mut a = RunningStat::new(1);
            let mut b = RunningStat::new(1);
            for (i, x) in xs.iter().enumerate() {
                all.push(&[*x]);
                if i < cut { a.push(&[*x]) } else { b.push(&[*x]) }
            }
            a.merge(&b);
            prop_assert!((a.mean[0] - all.mean[0]).abs() < 1e-9);
            prop_assert!((a.m2[0] - all.m2[0]).abs() < 1e-6 * all.m2[0].max(1.0));
            prop_assert_eq!(a.count, all.count);
        }
    }
}
