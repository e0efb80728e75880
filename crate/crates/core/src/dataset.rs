//! Replicated training observations and their sufficient statistics.
//!
//! Every input `x_d` carries `S` outputs `y_{d,s}`. For `S >= 2` the sample
//! variance feeds a log-variance statistic
//! `z_d = ln V_d + ln(S-1) - ln 2 - psi((S-1)/2)`, whose conditional mean
//! given `h_d` is `h_d` and whose conditional variance is
//! `omega^2 = psi'((S-1)/2)`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::Points;
use crate::specfun::{digamma, trigamma};

/// Noise variances are floored here so a vanishing truth stays simulable.
pub const MIN_NOISE_VARIANCE: f64 = 1e-30;

#[derive(Debug, Clone)]
pub struct ReplicatedDataset {
    inputs: Points,
    outputs: DMatrix<f64>,
    mean: DVector<f64>,
    stats: Option<VarianceStats>,
}

/// Statistics that exist only with at least two replicates.
#[derive(Debug, Clone)]
pub struct VarianceStats {
    pub sample_variance: DVector<f64>,
    pub log_variance: DVector<f64>,
    pub omega: f64,
}

/// `z` statistic for one input from its unbiased sample variance.
pub fn log_variance_statistic(sample_variance: f64, replicates: usize) -> Result<f64> {
    if replicates < 2 {
        return Err(Error::InsufficientReplicates(replicates));
    }
    let dof = (replicates - 1) as f64;
    Ok(sample_variance.ln() + dof.ln() - std::f64::consts::LN_2 - digamma(0.5 * dof)?)
}

/// Standard deviation of the `z` statistic given `h`.
pub fn log_variance_spread(replicates: usize) -> Result<f64> {
    if replicates < 2 {
        return Err(Error::InsufficientReplicates(replicates));
    }
    Ok(trigamma(0.5 * (replicates - 1) as f64)?.sqrt())
}

impl ReplicatedDataset {
    /// `outputs` is D x S: one row per input, one column per replicate.
    pub fn new(inputs: Points, outputs: DMatrix<f64>) -> Result<Self> {
        if inputs.len() != outputs.nrows() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: outputs.nrows(),
            });
        }
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("dataset has no inputs".into()));
        }
        if let Some((first, second)) = inputs.find_duplicate() {
            return Err(Error::DuplicateInput { first, second });
        }
        let replicates = outputs.ncols();
        if replicates == 0 {
            return Err(Error::InsufficientReplicates(0));
        }
        if outputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("outputs must be finite".into()));
        }
        let s = replicates as f64;
        let mean = DVector::from_iterator(
            outputs.nrows(),
            outputs.row_iter().map(|row| row.iter().sum::<f64>() / s),
        );
        let stats = if replicates >= 2 {
            let mut var = DVector::zeros(outputs.nrows());
            let mut z = DVector::zeros(outputs.nrows());
            for (d, row) in outputs.row_iter().enumerate() {
                let v = row.iter().map(|y| (y - mean[d]).powi(2)).sum::<f64>() / (s - 1.0);
                if !(v > 0.0) {
                    return Err(Error::ZeroSampleVariance { index: d });
                }
                var[d] = v;
                z[d] = log_variance_statistic(v, replicates)?;
            }
            Some(VarianceStats {
                sample_variance: var,
                log_variance: z,
                omega: log_variance_spread(replicates)?,
            })
        } else {
            None
        };
        Ok(Self {
            inputs,
            outputs,
            mean,
            stats,
        })
    }

    /// Draws `y_{d,s} = f(x_d) + w_{d,s}` with `w_{d,s} ~ N(0, exp h(x_d))`.
    /// Replicates are consumed row by row from a single seeded stream.
    pub fn simulate<F, H>(
        truth_mean: F,
        truth_log_variance: H,
        inputs: Points,
        replicates: usize,
        seed: u64,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
        H: Fn(&[f64]) -> f64,
    {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut outputs = DMatrix::zeros(inputs.len(), replicates);
        for (d, x) in inputs.iter().enumerate() {
            let h = truth_log_variance(x);
            if h.is_nan() || h == f64::INFINITY {
                return Err(Error::InvalidArgument(format!(
                    "truth log-variance at input {d} is {h}"
                )));
            }
            let sd = h.exp().max(MIN_NOISE_VARIANCE).sqrt();
            let f = truth_mean(x);
            for s in 0..replicates {
                let xi: f64 = StandardNormal.sample(&mut rng);
                outputs[(d, s)] = f + sd * xi;
            }
        }
        Self::new(inputs, outputs)
    }

    pub fn inputs(&self) -> &Points {
        &self.inputs
    }

    pub fn outputs(&self) -> &DMatrix<f64> {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn replicates(&self) -> usize {
        self.outputs.ncols()
    }

    /// Per-input sample means.
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn variance_stats(&self) -> Result<&VarianceStats> {
        self.stats
            .as_ref()
            .ok_or(Error::InsufficientReplicates(self.replicates()))
    }

    /// CSV with header `x1..xn,y1..yS`, values at 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = (1..=self.inputs.dim())
            .map(|i| format!("x{i}"))
            .chain((1..=self.replicates()).map(|s| format!("y{s}")))
            .collect();
        w.write_record(&header)?;
        for (d, x) in self.inputs.iter().enumerate() {
            let row: Vec<String> = x
                .iter()
                .copied()
                .chain(self.outputs.row(d).iter().copied())
                .map(format_f64)
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let dim = headers.iter().filter(|h| h.starts_with('x')).count();
        let replicates = headers.iter().filter(|h| h.starts_with('y')).count();
        if dim + replicates != headers.len() || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "dataset header must be x1..xn,y1..yS, got {headers:?}"
            )));
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for record in r.records() {
            let record = record?;
            for (i, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("cannot parse {field:?} as a number"))
                })?;
                if i < dim {
                    xs.push(v);
                } else {
                    ys.push(v);
                }
            }
        }
        let inputs = Points::new(dim, xs)?;
        let outputs = DMatrix::from_row_slice(inputs.len(), replicates, &ys);
        Self::new(inputs, outputs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Scientific notation with 17 significant digits; parses back exactly.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Disturbance used in the tracking experiment:
/// `f(x) = -10 sin(pi x1) - 10 sin(2 pi x2)`.
pub fn benchmark_mean(x: &[f64]) -> f64 {
    use std::f64::consts::PI;
    -10.0 * (PI * x[0]).sin() - 10.0 * (2.0 * PI * x[1]).sin()
}

/// `ln g(x)^2` with `g(x)^2 = 0.1 + 1.5 / (1 + exp(-10 x2))`.
pub fn benchmark_log_variance(x: &[f64]) -> f64 {
    (0.1 + 1.5 / (1.0 + (-10.0 * x[1]).exp())).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(y: [f64; 2]) -> ReplicatedDataset {
        let x = Points::from_rows(&[vec![0.0]]).unwrap();
        ReplicatedDataset::new(x, DMatrix::from_row_slice(1, 2, &y)).unwrap()
    }

    #[test]
    fn two_replicate_statistics() {
        let ds = two_point([1.0, 3.0]);
        assert_eq!(ds.mean()[0], 2.0);
        let st = ds.variance_stats().unwrap();
        assert_eq!(st.sample_variance[0], 2.0);
        // psi'(1/2) = pi^2/2
        assert!((st.omega - 2.221_441_469_079_183).abs() < 1e-12);
        // ln 2 + ln 1 - ln 2 - psi(1/2) = gamma + 2 ln 2
        assert!((st.log_variance[0] - 1.963_510_026_021_423_5).abs() < 1e-12);
    }

    #[test]
    fn replicate_order_does_not_matter() {
        let x = Points::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.5, -0.5, 4.0, 4.5, 3.0]);
        let b = DMatrix::from_row_slice(2, 3, &[-0.5, 1.0, 2.5, 3.0, 4.0, 4.5]);
        let da = ReplicatedDataset::new(x.clone(), a).unwrap();
        let db = ReplicatedDataset::new(x, b).unwrap();
        assert!((da.mean() - db.mean()).amax() < 1e-15);
        let va = &da.variance_stats().unwrap().sample_variance;
        let vb = &db.variance_stats().unwrap().sample_variance;
        assert!((va - vb).amax() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_data() {
        let x = Points::from_rows(&[vec![0.0], vec![0.0]]).unwrap();
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            ReplicatedDataset::new(x, y),
            Err(Error::DuplicateInput { .. })
        ));
        let x = Points::from_rows(&[vec![0.0]]).unwrap();
        let y = DMatrix::from_row_slice(1, 2, &[1.5, 1.5]);
        assert!(matches!(
            ReplicatedDataset::new(x.clone(), y),
            Err(Error::ZeroSampleVariance { index: 0 })
        ));
        let single = ReplicatedDataset::new(x, DMatrix::from_row_slice(1, 1, &[1.0])).unwrap();
        assert!(matches!(
            single.variance_stats(),
            Err(Error::InsufficientReplicates(1))
        ));
    }

    #[test]
    fn zero_noise_simulation_recovers_truth() {
        let x = Points::grid(2, 4, -1.0, 1.0).unwrap();
        let ds = ReplicatedDataset::simulate(benchmark_mean, |_| f64::NEG_INFINITY, x, 1, 1).unwrap();
        for (d, p) in ds.inputs().iter().enumerate() {
            assert!((ds.mean()[d] - benchmark_mean(p)).abs() < 1e-10);
        }
    }

    #[test]
    fn simulation_is_seeded() {
        let x = Points::grid(2, 10, -1.0, 1.0).unwrap();
        let a = ReplicatedDataset::simulate(benchmark_mean, benchmark_log_variance, x.clone(), 2, 9)
            .unwrap();
        let b = ReplicatedDataset::simulate(benchmark_mean, benchmark_log_variance, x.clone(), 2, 9)
            .unwrap();
        let c = ReplicatedDataset::simulate(benchmark_mean, benchmark_log_variance, x, 2, 10)
            .unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a.outputs(), b.outputs());
        assert_ne!(a.outputs(), c.outputs());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let x = Points::grid(2, 3, -1.0, 1.0).unwrap();
        let ds = ReplicatedDataset::simulate(benchmark_mean, benchmark_log_variance, x, 2, 3).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,y1,y2\n"));
        let back = ReplicatedDataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.inputs(), ds.inputs());
        assert_eq!(back.outputs(), ds.outputs());
    }

    #[test]
    fn benchmark_truth_at_origin() {
        assert_eq!(benchmark_mean(&[0.0, 0.0]), 0.0);
        assert!((benchmark_log_variance(&[0.0, 0.0]) - 0.85f64.ln()).abs() < 1e-15);
    }
}
