use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::specfun::erfc;

/// Posterior mean and variance of `f(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConditionalMoments {
    pub weight: f64,
    pub mean: f64,
    pub var: f64,
    pub std: f64,
}

/// The posterior of `f` at one input as a weighted Gaussian mixture.
///
/// Only samples with nonzero weight are kept; sums run in sample order.
#[derive(Debug, Clone)]
pub struct PointPosterior {
    components: Vec<ConditionalMoments>,
    prior_variance: f64,
}

const MAX_DOUBLINGS: usize = 200;
const MAX_BISECTIONS: usize = 2000;
const DELTA_TOLERANCE: f64 = 1e-10;

impl PointPosterior {
    pub(crate) fn new(components: Vec<ConditionalMoments>, prior_variance: f64) -> Self {
        Self {
            components,
            prior_variance,
        }
    }

    /// `k(x, x)`.
    pub fn prior_variance(&self) -> f64 {
        self.prior_variance
    }

    /// `(weight, mean, std)` of every retained mixture component.
    pub fn components(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.components.iter().map(|c| (c.weight, c.mean, c.std))
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean).sum()
    }

    /// Law of total variance, centered at the mixture mean.
    pub(crate) fn mixture_variance_raw(&self) -> f64 {
        let mean = self.mean();
        self.components
            .iter()
            .map(|c| c.weight * (c.var + (c.mean - mean) * (c.mean - mean)))
            .sum()
    }

    pub fn variance(&self) -> f64 {
        self.mixture_variance_raw().max(0.0)
    }

    /// `delta(gamma) = Pr(f(x) > gamma)`, the weighted mean of
    /// `erfc((gamma - mean_m) / (sqrt 2 std_m)) / 2`.
    pub fn delta(&self, gamma: f64) -> f64 {
        let total: f64 = self
            .components
            .iter()
            .map(|c| c.weight * upper_tail_term(gamma, c.mean, c.std))
            .sum();
        (0.5 * total).clamp(0.0, 1.0)
    }

    /// `Pr(lower < f(x) <= upper) = delta(lower) - delta(upper)`.
    pub fn interval_probability(&self, lower: f64, upper: f64) -> Result<f64> {
        if !(lower < upper) {
            return Err(Error::InvalidArgument(format!(
                "interval bounds must satisfy lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok((self.delta(lower) - self.delta(upper)).max(0.0))
    }

    /// The level `gamma` with `delta(gamma) = target`, by bracketing and
    /// bisection. Stops once `|delta - target| <= 1e-10` or the bracket
    /// cannot be split further.
    pub fn solve_delta(&self, target: f64) -> Result<f64> {
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta target must lie in (0, 1), got {target}"
            )));
        }
        let center = self.mean();
        let spread = self
            .components
            .iter()
            .map(|c| c.std + (c.mean - center).abs())
            .fold(0.0, f64::max);
        let step0 = spread.max(1e-12 * (1.0 + center.abs()));

        let mut step = step0;
        let mut lo = center - step;
        let mut doublings = 0;
        while self.delta(lo) < target {
            step *= 2.0;
            lo = center - step;
            doublings += 1;
            if doublings > MAX_DOUBLINGS {
                return Err(Error::Bracketing { target, doublings });
            }
        }
        step = step0;
        let mut hi = center + step;
        doublings = 0;
        while self.delta(hi) > target {
            step *= 2.0;
            hi = center + step;
            doublings += 1;
            if doublings > MAX_DOUBLINGS {
                return Err(Error::Bracketing { target, doublings });
            }
        }

        let mut best = (f64::INFINITY, center);
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let d = self.delta(mid);
            let err = (d - target).abs();
            if err < best.0 {
                best = (err, mid);
            }
            if err <= DELTA_TOLERANCE || mid <= lo || mid >= hi {
                break;
            }
            if d > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(best.1)
    }
}

/// `erfc((gamma - mean) / (sqrt 2 std))`, a step when `std = 0`.
#[inline]
fn upper_tail_term(gamma: f64, mean: f64, std: f64) -> f64 {
    if std > 0.0 {
        erfc((gamma - mean) / (SQRT_2 * std))
    } else if gamma < mean {
        2.0
    } else if gamma > mean {
        0.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(mean: f64, std: f64) -> PointPosterior {
        PointPosterior::new(
            vec![ConditionalMoments {
                weight: 1.0,
                mean,
                var: std * std,
                std,
            }],
            10.0,
        )
    }

    #[test]
    fn single_gaussian_median_and_quantile() {
        let p = single(1.5, 0.3);
        assert_eq!(p.delta(1.5), 0.5);
        assert!((p.solve_delta(0.5).unwrap() - 1.5).abs() < 1e-8);
        let g = p.solve_delta(0.025).unwrap();
        assert!((g - (1.5 + 1.959_963_985 * 0.3)).abs() < 1e-6);
        let mass = p
            .interval_probability(1.5 - 1.959_963_985 * 0.3, 1.5 + 1.959_963_985 * 0.3)
            .unwrap();
        assert!((mass - 0.95).abs() < 1e-9);
    }

    #[test]
    fn delta_limits() {
        let p = single(-2.0, 0.5);
        assert!(p.delta(-2.0 + 40.0 * 0.5) <= 1e-300);
        assert_eq!(p.delta(-2.0 - 40.0 * 0.5), 1.0);
        assert!((p.interval_probability(-1e6, 1e6).unwrap() - 1.0).abs() < 1e-12);
        assert!(p.interval_probability(0.3, 0.3 + 1e-15).unwrap() < 1e-14);
        assert!(p.interval_probability(1.0, 1.0).is_err());
        assert!(p.solve_delta(0.0).is_err());
        assert!(p.solve_delta(1.0).is_err());
    }

    #[test]
    fn zero_std_is_a_step() {
        let p = single(0.7, 0.0);
        assert_eq!(p.delta(0.6), 1.0);
        assert_eq!(p.delta(0.7), 0.5);
        assert_eq!(p.delta(0.8), 0.0);
        let g = p.solve_delta(0.3).unwrap();
        assert!((g - 0.7).abs() < 1e-12);
    }

    #[test]
    fn mixture_moments() {
        let p = PointPosterior::new(
            vec![
                ConditionalMoments { weight: 0.25, mean: 1.0, var: 0.5, std: 0.5f64.sqrt() },
                ConditionalMoments { weight: 0.75, mean: -1.0, var: 2.0, std: 2f64.sqrt() },
            ],
            5.0,
        );
        assert!((p.mean() + 0.5).abs() < 1e-15);
        // E[var] + Var[mean] = 1.625 + 0.75
        assert!((p.variance() - 2.375).abs() < 1e-14);
        for t in [0.005, 0.5, 0.995] {
            let g = p.solve_delta(t).unwrap();
            assert!((p.delta(g) - t).abs() <= 1e-9);
        }
    }
}
