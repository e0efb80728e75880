//! Squared-exponential kernels, Gram matrices and jittered Cholesky factors.
//!
//! The kernel is parameterized as
//! `k(a, b) = amplitude * exp(-0.5 * sum_i precision_i * (a_i - b_i)^2)`,
//! i.e. the weights multiply the squared displacement directly (they are
//! inverse squared lengthscales).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A set of input points of common dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not split into points of dimension {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("input coordinates must be finite".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// A pair `(i, j)`, `i < j`, of exactly coinciding points, if any.
    pub fn find_duplicate(&self) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        let cmp = |a: &usize, b: &usize| {
            self.point(*a)
                .partial_cmp(self.point(*b))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(b))
        };
        order.sort_unstable_by(cmp);
        order
            .windows(2)
            .find(|w| self.point(w[0]) == self.point(w[1]))
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
    }

    /// Tensor grid of `per_axis^dim` points with `per_axis` equally spaced
    /// values on `[lower, upper]` (endpoints included). The last coordinate
    /// varies fastest.
    pub fn grid(dim: usize, per_axis: usize, lower: f64, upper: f64) -> Result<Self> {
        if per_axis < 2 || !(upper > lower) {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 points per axis on a nonempty interval, got {per_axis} on [{lower}, {upper}]"
            )));
        }
        let axis: Vec<f64> = (0..per_axis)
            .map(|i| lower + (upper - lower) * i as f64 / (per_axis - 1) as f64)
            .collect();
        let total = per_axis.pow(dim as u32);
        let mut data = Vec::with_capacity(total * dim);
        for flat in 0..total {
            let mut rem = flat;
            let mut coords = vec![0.0; dim];
            for c in (0..dim).rev() {
                coords[c] = axis[rem % per_axis];
                rem /= per_axis;
            }
            data.extend(coords);
        }
        Self::new(dim, data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeKernel {
    amplitude: f64,
    precision: Vec<f64>,
}

impl SeKernel {
    pub fn new(amplitude: f64, precision: Vec<f64>) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel amplitude must be positive, got {amplitude}"
            )));
        }
        if precision.is_empty() || precision.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "kernel precision weights must be positive, got {precision:?}"
            )));
        }
        Ok(Self {
            amplitude,
            precision,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn precision(&self) -> &[f64] {
        &self.precision
    }

    pub fn dim(&self) -> usize {
        self.precision.len()
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_dim(a.len())?;
        self.check_dim(b.len())?;
        Ok(self.eval_unchecked(a, b))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let q: f64 = self
            .precision
            .iter()
            .zip(a.iter().zip(b))
            .map(|(p, (x, y))| p * (x - y) * (x - y))
            .sum();
        self.amplitude * (-0.5 * q).exp()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// Gram matrix over pairwise-distinct inputs. Each unordered pair is
    /// evaluated once, so the result is exactly symmetric.
    pub fn gram(&self, inputs: &Points) -> Result<DMatrix<f64>> {
        self.check_dim(inputs.dim())?;
        if let Some((first, second)) = inputs.find_duplicate() {
            return Err(Error::DuplicateInput { first, second });
        }
        let n = inputs.len();
        let mut gram = DMatrix::zeros(n, n);
        for j in 0..n {
            gram[(j, j)] = self.amplitude;
            for i in (j + 1)..n {
                let v = self.eval_unchecked(inputs.point(i), inputs.point(j));
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        Ok(gram)
    }

    /// `[k(x, x_1), ..., k(x, x_D)]`.
    pub fn cross_vector(&self, inputs: &Points, x: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(inputs.dim())?;
        self.check_dim(x.len())?;
        Ok(self.cross_vector_unchecked(inputs, x))
    }

    pub(crate) fn cross_vector_unchecked(&self, inputs: &Points, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            inputs.len(),
            inputs.iter().map(|p| self.eval_unchecked(x, p)),
        )
    }
}

/// A symmetric positive-definite matrix together with the lower Cholesky
/// factor of `matrix + jitter * I`.
#[derive(Debug, Clone)]
pub struct GramFactor {
    matrix: DMatrix<f64>,
    lower: DMatrix<f64>,
    jitter: f64,
}

/// Cholesky factorization of `a + jitter * I`. Reads only the lower triangle.
pub fn chol_jitter(a: &DMatrix<f64>, jitter: f64) -> Result<GramFactor> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if !(jitter >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "jitter must be nonnegative, got {jitter}"
        )));
    }
    let lower = cholesky_lower(a, jitter)?;
    Ok(GramFactor {
        matrix: a.clone(),
        lower,
        jitter,
    })
}

pub(crate) fn cholesky_lower(a: &DMatrix<f64>, jitter: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L y = b` in place for lower-triangular `L`.
pub(crate) fn forward_substitute(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `L^T x = y` in place for lower-triangular `L`.
pub(crate) fn back_substitute(l: &DMatrix<f64>, y: &mut [f64]) {
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
}

impl GramFactor {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `L^{-1} b`.
    pub fn whiten(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut y = b.clone();
        forward_substitute(&self.lower, y.as_mut_slice());
        y
    }

    /// `(A + jitter I)^{-1} b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut y = self.whiten(b);
        back_substitute(&self.lower, y.as_mut_slice());
        y
    }

    /// `(A + jitter I)^{-1} B` column by column.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = b.clone();
        for mut col in out.column_iter_mut() {
            let s = col.as_mut_slice();
            forward_substitute(&self.lower, s);
            back_substitute(&self.lower, s);
        }
        out
    }

    /// `log det(A + jitter I)`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// `b^T (A + jitter I)^{-1} b`.
    pub fn quad_form(&self, b: &DVector<f64>) -> f64 {
        self.whiten(b).norm_squared()
    }

    /// `log N(x | mean, A + jitter I)`.
    pub fn log_normal_density(&self, x: &DVector<f64>, mean: &DVector<f64>) -> f64 {
        let diff = x - mean;
        log_normal_from_parts(self.quad_form(&diff), self.log_det(), self.dim())
    }
}

pub(crate) fn log_normal_from_parts(quad: f64, log_det: f64, dim: usize) -> f64 {
    const LN_2PI: f64 = 1.837_877_066_409_345_5;
    -0.5 * (quad + log_det + dim as f64 * LN_2PI)
}
