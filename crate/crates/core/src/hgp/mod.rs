//! Heteroscedastic GP posterior inference.
//!
//! The latent log noise variance `h` at the training inputs is integrated out
//! by autonormalized importance sampling. Samples come from a Gaussian
//! proposal `q(h) = N(mu_h, Sigma_h)` obtained by treating the log-variance
//! statistics `z_d` as Gaussian observations of `h_d` with variance
//! `omega^2`:
//!
//! ```text
//! mu_h    = L (L + omega^2 I)^{-1} z
//! Sigma_h = L - L (L + omega^2 I)^{-1} L
//! ```
//!
//! Each sample is weighted by
//! `N(ybar | 0, K + diag(exp h)/S) N(h | 0, L) / q(h)`, an unnormalized
//! ratio of the posterior `p(h | X, ybar)` to the proposal. Given `h`, the
//! latent function is an ordinary GP, so every posterior quantity is a
//! weighted mixture of per-sample Gaussian conditionals.

mod ensemble;
mod posterior;

pub use ensemble::{EnsembleSample, ImportanceEnsemble};
pub use posterior::{PointPosterior, PosteriorSummary};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::ReplicatedDataset;
use crate::error::{Error, Result};
use crate::kernels::{chol_jitter, cholesky_lower, forward_substitute, GramFactor, SeKernel};
use crate::kernels::log_normal_from_parts;

/// Jitter added to `L` and `Sigma_h` unless configured otherwise.
pub const DEFAULT_JITTER: f64 = 1e-12;

/// `exp(h_d)` is clamped to this range before it enters the noise Gram.
pub const NOISE_CLAMP: (f64, f64) = (1e-300, 1e300);

#[derive(Debug, Clone)]
pub struct HgpModel {
    dataset: ReplicatedDataset,
    kernel_f: SeKernel,
    kernel_h: SeKernel,
    gram_f: DMatrix<f64>,
    gram_h: GramFactor,
    proposal_mean: DVector<f64>,
    proposal_cov: GramFactor,
    omega_sq: f64,
    jitter: f64,
}

impl HgpModel {
    pub fn fit(
        dataset: ReplicatedDataset,
        kernel_f: SeKernel,
        kernel_h: SeKernel,
        jitter: f64,
    ) -> Result<Self> {
        let omega = dataset.variance_stats()?.omega;
        Self::fit_with_omega_sq(dataset, kernel_f, kernel_h, jitter, omega * omega)
    }

    /// As [`HgpModel::fit`] but with the statistic variance `omega^2`
    /// supplied explicitly.
    pub fn fit_with_omega_sq(
        dataset: ReplicatedDataset,
        kernel_f: SeKernel,
        kernel_h: SeKernel,
        jitter: f64,
        omega_sq: f64,
    ) -> Result<Self> {
        if !(omega_sq > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "omega^2 must be positive, got {omega_sq}"
            )));
        }
        let z = dataset.variance_stats()?.log_variance.clone();
        let inputs = dataset.inputs();
        let gram_f = kernel_f.gram(inputs)?;
        let gram_h_raw = kernel_h.gram(inputs)?;
        let n = inputs.len();

        let shifted = chol_jitter(&gram_h_raw, omega_sq)?;
        let proposal_mean = &gram_h_raw * shifted.solve(&z);
        let gain = shifted.solve_matrix(&gram_h_raw);
        let mut cov = &gram_h_raw - &gram_h_raw.transpose() * gain;
        for j in 0..n {
            for i in (j + 1)..n {
                let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
        }
        let proposal_cov = chol_jitter(&cov, jitter)?;
        let gram_h = chol_jitter(&gram_h_raw, jitter)?;

        Ok(Self {
            dataset,
            kernel_f,
            kernel_h,
            gram_f,
            gram_h,
            proposal_mean,
            proposal_cov,
            omega_sq,
            jitter,
        })
    }

    pub fn dataset(&self) -> &ReplicatedDataset {
        &self.dataset
    }

    pub fn kernel_f(&self) -> &SeKernel {
        &self.kernel_f
    }

    pub fn kernel_h(&self) -> &SeKernel {
        &self.kernel_h
    }

    /// `K_D`, the Gram of the latent-function kernel.
    pub fn gram_f(&self) -> &DMatrix<f64> {
        &self.gram_f
    }

    /// `L_D` with its jittered factor.
    pub fn gram_h(&self) -> &GramFactor {
        &self.gram_h
    }

    pub fn proposal_mean(&self) -> &DVector<f64> {
        &self.proposal_mean
    }

    /// Symmetrized `Sigma_h`; the factor includes the jitter.
    pub fn proposal_cov(&self) -> &GramFactor {
        &self.proposal_cov
    }

    pub fn omega_sq(&self) -> f64 {
        self.omega_sq
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    /// `K + diag(exp h) / S` with `exp h` clamped to [`NOISE_CLAMP`].
    pub fn noisy_gram(&self, h: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_len(h)?;
        let s = self.dataset.replicates() as f64;
        let mut k = self.gram_f.clone();
        for (d, &hd) in h.iter().enumerate() {
            k[(d, d)] += hd.exp().clamp(NOISE_CLAMP.0, NOISE_CLAMP.1) / s;
        }
        Ok(k)
    }

    fn check_len(&self, h: &DVector<f64>) -> Result<()> {
        if h.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: h.len(),
            });
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("log-variance sample must be finite".into()));
        }
        Ok(())
    }

    /// `log N(ybar | 0, K~(h)) + log N(h | 0, L + eps I) - log N(h | mu_h, Sigma_h + eps I)`.
    pub fn log_unnormalized_weight(&self, h: &DVector<f64>) -> Result<f64> {
        Ok(self.evaluate_sample(h.clone())?.log_weight)
    }

    pub(crate) fn evaluate_sample(&self, h: DVector<f64>) -> Result<EnsembleSample> {
        let noisy = self.noisy_gram(&h)?;
        let lower = cholesky_lower(&noisy, 0.0)?;
        let mut white = self.dataset.mean().clone();
        forward_substitute(&lower, white.as_mut_slice());
        let log_det: f64 = 2.0 * lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let log_lik = log_normal_from_parts(white.norm_squared(), log_det, self.len());
        let mut alpha = white;
        crate::kernels::back_substitute(&lower, alpha.as_mut_slice());

        let zero = DVector::zeros(self.len());
        let log_prior = self.gram_h.log_normal_density(&h, &zero);
        let log_proposal = self.proposal_cov.log_normal_density(&h, &self.proposal_mean);
        Ok(EnsembleSample {
            h,
            lower,
            alpha,
            log_weight: log_lik + log_prior - log_proposal,
        })
    }

    /// `mu_h + chol(Sigma_h + eps I) xi` with `xi` from stream `index` of `seed`.
    pub fn proposal_draw(&self, seed: u64, index: u64) -> DVector<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let xi = DVector::from_iterator(
            self.len(),
            (0..self.len()).map(|_| StandardNormal.sample(&mut rng)),
        );
        &self.proposal_mean + self.proposal_cov.lower() * xi
    }

    /// Draws `count` proposal samples and weights them. Sample `m` uses RNG
    /// stream `m` of `seed`, so the ensemble does not depend on scheduling.
    pub fn draw_ensemble(&self, count: usize, seed: u64) -> Result<ImportanceEnsemble> {
        if count == 0 {
            return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
        }
        let samples = crate::par::try_map_indexed(count, |m| {
            self.evaluate_sample(self.proposal_draw(seed, m as u64))
        })?;
        ImportanceEnsemble::from_weighted_samples(self, samples)
    }

    /// Ensemble over caller-supplied log-variance vectors, weighted as usual.
    pub fn ensemble_from_samples(&self, hs: Vec<DVector<f64>>) -> Result<ImportanceEnsemble> {
        if hs.is_empty() {
            return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
        }
        let samples = crate::par::try_map_indexed(hs.len(), |m| self.evaluate_sample(hs[m].clone()))?;
        ImportanceEnsemble::from_weighted_samples(self, samples)
    }
}
