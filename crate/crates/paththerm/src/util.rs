//! Small numeric helpers shared across modules.

/// Neumaier-compensated accumulator. Keeps long sums accurate to a few ulps
/// of the result regardless of term count or ordering.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of a slice.
pub fn compensated_total(values: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        acc.add(1e-16);
        acc.add(-1.0);
        assert_eq!(acc.value(), 1e-16);
    }

    #[test]
    fn compensated_total_matches_exact_on_alternating_series() {
        let terms: Vec<f64> = (0..10_000)
            .map(|i| if i % 2 == 0 { 0.1 } else { -0.1 })
            .collect();
        assert_eq!(compensated_total(&terms), 0.0);
    }
}
