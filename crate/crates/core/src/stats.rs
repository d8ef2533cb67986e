//! Small descriptive-statistics helpers shared across modules.

/// Running mean, variance and co-moment accumulator for a pair of series
/// (Welford's update).
#[derive(Clone, Copy, Debug, Default)]
pub struct PairMoments {
    n: u64,
    mean_x: f64,
    mean_y: f64,
    m2_x: f64,
    m2_y: f64,
    c_xy: f64,
}

impl PairMoments {
    #[inline]
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        self.m2_x += dx * (x - self.mean_x);
        self.m2_y += dy * (y - self.mean_y);
        self.c_xy += dx * (y - self.mean_y);
    }

    /// Pearson correlation, or `None` when either series is constant or
    /// fewer than two points were seen.
    pub fn correlation(&self) -> Option<f64> {
        if self.n < 2 || self.m2_x <= 0.0 || self.m2_y <= 0.0 {
            return None;
        }
        Some((self.c_xy / (self.m2_x * self.m2_y).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Pearson correlation of two equally long series.
pub fn pearson<T: Copy + Into<f64>>(x: &[T], y: &[T]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "series lengths differ");
    let mut acc = PairMoments::default();
    for (&a, &b) in x.iter().zip(y) {
        acc.push(a.into(), b.into());
    }
    acc.correlation()
}

/// Mean and `n - 1` variance.
pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
