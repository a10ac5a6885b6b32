//! Compensated summation.

use std::iter::Sum;
use std::ops::AddAssign;

/// Neumaier's variant of Kahan summation.
///
/// The running compensation captures the low-order bits lost in each
/// addition, including the case where the addend is larger than the running
/// sum, so the result is nearly independent of summation order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub const fn new() -> Self {
        Self {
            sum: 0.0,
            compensation: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial sum into this one, keeping both compensations.
    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl Sum<f64> for NeumaierSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

impl<'a> Sum<&'a f64> for NeumaierSum {
    fn sum<I: Iterator<Item = &'a f64>>(iter: I) -> Self {
        iter.copied().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_lost_by_naive_summation() {
        let data = [1.0, 1e100, 1.0, -1e100];
        let naive: f64 = data.iter().sum();
        let compensated: NeumaierSum = data.iter().sum();
        assert_eq!(naive, 0.0);
        assert_eq!(compensated.value(), 2.0);
    }

    #[test]
    fn merge_matches_single_pass() {
        let data: Vec<f64> = (1..=1000).map(|k| 1.0 / k as f64).collect();
        let whole: NeumaierSum = data.iter().sum();
        let mut left: NeumaierSum = data[..400].iter().sum();
        let right: NeumaierSum = data[400..].iter().sum();
        left.merge(&right);
        assert!((whole.value() - left.value()).abs() <= 1e-15 * whole.value());
    }
}
