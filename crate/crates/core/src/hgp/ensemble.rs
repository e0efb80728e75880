use std::io::Write;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use super::posterior::{ConditionalMoments, PointPosterior, PosteriorSummary};
use super::HgpModel;
use crate::dataset::format_f64;
use crate::error::{Error, Result};
use crate::kernels::{back_substitute, forward_substitute, Points, SeKernel};

/// One proposal sample with its cached noisy-Gram factorization.
#[derive(Debug, Clone)]
pub struct EnsembleSample {
    pub h: DVector<f64>,
    /// Lower Cholesky factor of `K + diag(exp h)/S`.
    pub lower: DMatrix<f64>,
    /// `(K + diag(exp h)/S)^{-1} ybar`.
    pub alpha: DVector<f64>,
    pub log_weight: f64,
}

/// Weighted proposal samples; every posterior query is a weighted sum over
/// them. Immutable once built.
#[derive(Debug)]
pub struct ImportanceEnsemble {
    kernel_f: SeKernel,
    inputs: Points,
    samples: Vec<EnsembleSample>,
    weights: Vec<f64>,
    ess: f64,
    quadratic: OnceLock<DMatrix<f64>>,
}

/// Normalizes log-weights by max subtraction. Returns the weights and the
/// effective sample size `1 / sum w^2`.
pub fn normalize_log_weights(log_weights: &[f64]) -> Result<(Vec<f64>, f64)> {
    if log_weights.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::InvalidArgument("log-weights must not be NaN or +inf".into()));
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument("every importance weight is zero".into()));
    }
    let unnormalized: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = unnormalized.iter().sum();
    // the maximal term contributes exactly 1
    assert!(total >= 1.0);
    let weights: Vec<f64> = unnormalized.iter().map(|u| u / total).collect();
    let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    Ok((weights, ess))
}

impl ImportanceEnsemble {
    pub(crate) fn from_weighted_samples(
        model: &HgpModel,
        samples: Vec<EnsembleSample>,
    ) -> Result<Self> {
        let log_weights: Vec<f64> = samples.iter().map(|s| s.log_weight).collect();
        let (weights, ess) = normalize_log_weights(&log_weights)?;
        Ok(Self {
            kernel_f: model.kernel_f().clone(),
            inputs: model.dataset().inputs().clone(),
            samples,
            weights,
            ess,
            quadratic: OnceLock::new(),
        })
    }

    /// The same samples with replacement log-weights.
    pub fn reweighted(&self, log_weights: &[f64]) -> Result<Self> {
        if log_weights.len() != self.samples.len() {
            return Err(Error::DimensionMismatch {
                expected: self.samples.len(),
                got: log_weights.len(),
            });
        }
        let (weights, ess) = normalize_log_weights(log_weights)?;
        let samples = self
            .samples
            .iter()
            .zip(log_weights)
            .map(|(s, &l)| EnsembleSample {
                log_weight: l,
                ..s.clone()
            })
            .collect();
        Ok(Self {
            kernel_f: self.kernel_f.clone(),
            inputs: self.inputs.clone(),
            samples,
            weights,
            ess,
            quadratic: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[EnsembleSample] {
        &self.samples
    }

    pub fn log_weights(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.log_weight).collect()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn effective_sample_size(&self) -> f64 {
        self.ess
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.dim()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.inputs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Mean and standard deviation of `f(x)` given sample `m`:
    /// `k(x)^T alpha_m` and `sqrt(k(x,x) - k(x)^T K~_m^{-1} k(x))`.
    pub fn conditional_moments(&self, m: usize, x: &[f64]) -> Result<(f64, f64)> {
        self.check_input(x)?;
        if m >= self.samples.len() {
            return Err(Error::InvalidArgument(format!(
                "sample index {m} out of range for ensemble of {}",
                self.samples.len()
            )));
        }
        let k = self.kernel_f.cross_vector_unchecked(&self.inputs, x);
        let c = self.moments_for(m, &k, self.kernel_f.eval_unchecked(x, x))?;
        Ok((c.mean, c.std))
    }

    fn moments_for(&self, m: usize, k: &DVector<f64>, prior: f64) -> Result<ConditionalMoments> {
        let sample = &self.samples[m];
        let mean = k.dot(&sample.alpha);
        let mut v = k.clone();
        forward_substitute(&sample.lower, v.as_mut_slice());
        let var = prior - v.norm_squared();
        if var < -1e-9 {
            return Err(Error::NegativeVariance { sample: m, value: var });
        }
        let var = var.max(0.0);
        Ok(ConditionalMoments {
            weight: self.weights[m],
            mean,
            var,
            std: var.sqrt(),
        })
    }

    /// Evaluates every sample with nonzero weight at `x`. The result answers
    /// mean, variance, CDF and quantile queries without touching the
    /// factorizations again.
    pub fn at(&self, x: &[f64]) -> Result<PointPosterior> {
        self.check_input(x)?;
        let k = self.kernel_f.cross_vector_unchecked(&self.inputs, x);
        let prior = self.kernel_f.eval_unchecked(x, x);
        let active: Vec<usize> = (0..self.samples.len())
            .filter(|&m| self.weights[m] > 0.0)
            .collect();
        let moments =
            crate::par::try_map_indexed(active.len(), |i| self.moments_for(active[i], &k, prior))?;
        Ok(PointPosterior::new(moments, prior))
    }

    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        Ok(self.at(x)?.mean())
    }

    /// Posterior variance, computed from the mixture identity and checked
    /// against the quadratic form `k(x,x) + k(x)^T K(D) k(x)`. The quadratic
    /// form cancels terms of size `k(x,x)`, so agreement is measured on that
    /// scale.
    pub fn posterior_variance(&self, x: &[f64]) -> Result<f64> {
        Ok(self.summary(x)?.variance)
    }

    pub fn summary(&self, x: &[f64]) -> Result<PosteriorSummary> {
        let point = self.at(x)?;
        let mixture = point.mixture_variance_raw();
        let quadratic = self.quadratic_form_variance(x)?;
        let scale = mixture.abs().max(quadratic.abs()).max(point.prior_variance());
        if (mixture - quadratic).abs() > 1e-6 * scale {
            return Err(Error::Inconsistent { mixture, quadratic });
        }
        Ok(PosteriorSummary {
            mean: point.mean(),
            variance: mixture.max(0.0),
        })
    }

    pub fn delta(&self, x: &[f64], gamma: f64) -> Result<f64> {
        Ok(self.at(x)?.delta(gamma))
    }

    pub fn interval_probability(&self, x: &[f64], lower: f64, upper: f64) -> Result<f64> {
        self.at(x)?.interval_probability(lower, upper)
    }

    pub fn solve_delta(&self, x: &[f64], target: f64) -> Result<f64> {
        self.at(x)?.solve_delta(target)
    }

    /// `K(D) = E[a a^T] - E[a] E[a]^T - E[K~^{-1}]` with `a = K~^{-1} ybar`,
    /// built once from explicit inverses of the sampled noisy Grams.
    pub fn quadratic_matrix(&self) -> &DMatrix<f64> {
        self.quadratic.get_or_init(|| {
            let n = self.inputs.len();
            let active: Vec<usize> = (0..self.samples.len())
                .filter(|&m| self.weights[m] > 0.0)
                .collect();
            let inverses = crate::par::map_indexed(active.len(), |i| {
                let lower = &self.samples[active[i]].lower;
                let mut inv = DMatrix::<f64>::identity(n, n);
                for mut col in inv.column_iter_mut() {
                    let s = col.as_mut_slice();
                    forward_substitute(lower, s);
                    back_substitute(lower, s);
                }
                inv
            });
            let mut second = DMatrix::<f64>::zeros(n, n);
            let mut first = DVector::<f64>::zeros(n);
            let mut inv_mean = DMatrix::<f64>::zeros(n, n);
            for (i, &m) in active.iter().enumerate() {
                let w = self.weights[m];
                let a = &self.samples[m].alpha;
                second += (a * a.transpose()) * w;
                first += a * w;
                inv_mean += &inverses[i] * w;
            }
            second - &first * first.transpose() - inv_mean
        })
    }

    pub fn quadratic_form_variance(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let k = self.kernel_f.cross_vector_unchecked(&self.inputs, x);
        let q = self.quadratic_matrix();
        Ok(self.kernel_f.eval_unchecked(x, x) + k.dot(&(q * &k)))
    }

    /// Per-sample diagnostics: `sample,log_weight,weight,ess`.
    pub fn write_weights_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["sample", "log_weight", "weight", "ess"])?;
        let ess = format_f64(self.ess);
        for (m, s) in self.samples.iter().enumerate() {
            w.write_record([
                m.to_string(),
                format_f64(s.log_weight),
                format_f64(self.weights[m]),
                ess.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_weight_is_one() {
        let (w, ess) = normalize_log_weights(&[-1234.5]).unwrap();
        assert_eq!(w, vec![1.0]);
        assert_eq!(ess, 1.0);
    }

    #[test]
    fn normalization_is_stable_and_shift_invariant() {
        let logs = [-1000.0, -1001.0, -999.5, -1e6];
        let (w, ess) = normalize_log_weights(&logs).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&v| v >= 0.0));
        assert!((1.0..=4.0).contains(&ess));
        assert_eq!(w[3], 0.0);
        let shifted: Vec<f64> = logs.iter().map(|l| l + 4096.0).collect();
        let (w2, _) = normalize_log_weights(&shifted).unwrap();
        assert_eq!(w, w2);
    }

    #[test]
    fn rejects_degenerate_log_weights() {
        assert!(normalize_log_weights(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).is_err());
        assert!(normalize_log_weights(&[0.0, f64::NAN]).is_err());
    }
}
