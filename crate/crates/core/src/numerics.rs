//! Random streams, min-max scaling, a row-major matrix and a finite-difference
//! gradient used as a test oracle.
//!
//! # Reproducibility
//!
//! [`RngStream`] is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded through
//! `seed_from_u64`. Uniform draws take the top 53 bits of `next_u64`. Standard
//! normal draws use the Box–Muller transform; each pair of uniforms produces two
//! normals and the second is cached for the next call. Child streams are seeded
//! by folding the parent seed and the label words through SplitMix64, so a child
//! depends only on `(parent seed, labels)` and never on how far the parent has
//! advanced.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RowMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("RowMatrix::from_vec", rows * cols, data.len())?;
        Ok(RowMatrix { rows, cols, data })
    }

    /// Build from a list of equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len("RowMatrix::from_rows", cols, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        Ok(RowMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        RowMatrix { rows, cols, data }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> RowMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        RowMatrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Contiguous block of rows `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> RowMatrix {
        RowMatrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    pub fn transpose(&self) -> RowMatrix {
        RowMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Source of the random draws consumed by stochastic units.
///
/// Implemented by [`RngStream`]; tests substitute scripted draws.
pub trait NoiseSource {
    /// One draw from N(0, 1).
    fn standard_normal(&mut self) -> f64;
    /// One draw from U[0, 1).
    fn uniform(&mut self) -> f64;
}

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded deterministic random stream (ChaCha8 + Box–Muller).
///
/// Not meant to be shared between workers: derive one [`child`](Self::child)
/// per worker instead.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream identified by `(self.seed, labels)`.
    pub fn child(&self, labels: &[u64]) -> RngStream {
        let mut h = splitmix64(self.seed ^ 0xC0FF_EE00_D15E_A5E5);
        for &label in labels {
            h = splitmix64(h ^ splitmix64(label));
        }
        RngStream::new(h)
    }

    /// One standard-normal draw.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`, rejection-sampled to avoid modulo bias.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let x = self.rng.next_u64();
            if x <= zone {
                return (x % n) as usize;
            }
        }
    }
}

impl NoiseSource for RngStream {
    fn standard_normal(&mut self) -> f64 {
        self.gaussian()
    }

    fn uniform(&mut self) -> f64 {
        RngStream::uniform(self)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Draw one standard normal from `stream`.
pub fn gaussian_sample(stream: &mut RngStream) -> f64 {
    stream.gaussian()
}

/// Per-column min-max scaler onto [0, 1]. Constant columns map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Scaler {
    pub fn fit(matrix: &RowMatrix) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::invalid("cannot fit a scaler on an empty matrix"));
        }
        if !matrix.all_finite() {
            return Err(Error::invalid("cannot fit a scaler on non-finite entries"));
        }
        let mut min = matrix.row(0).to_vec();
        let mut max = min.clone();
        for row in matrix.rows_iter().skip(1) {
            for (j, &x) in row.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        Ok(Scaler { min, max })
    }

    /// Scaler for a single column of values.
    pub fn fit_column(values: &[f64]) -> Result<Self> {
        let m = RowMatrix::from_vec(values.len(), 1, values.to_vec())?;
        Scaler::fit(&m)
    }

    pub fn from_bounds(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        check_len("Scaler::from_bounds", min.len(), max.len())?;
        for (lo, hi) in min.iter().zip(&max) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(format!("bad scaler bounds [{lo}, {hi}]")));
            }
        }
        Ok(Scaler { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    #[inline]
    pub fn apply_value(&self, column: usize, x: f64) -> f64 {
        let range = self.max[column] - self.min[column];
        if range == 0.0 {
            0.0
        } else {
            (x - self.min[column]) / range
        }
    }

    #[inline]
    pub fn invert_value(&self, column: usize, s: f64) -> f64 {
        let range = self.max[column] - self.min[column];
        self.min[column] + s * range
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        check_len("Scaler::apply_row", self.width(), row.len())?;
        Ok(row.iter().enumerate().map(|(j, &x)| self.apply_value(j, x)).collect())
    }

    pub fn apply(&self, matrix: &RowMatrix) -> Result<RowMatrix> {
        check_len("Scaler::apply", self.width(), matrix.ncols())?;
        Ok(RowMatrix::from_fn(matrix.nrows(), matrix.ncols(), |i, j| {
            self.apply_value(j, matrix.get(i, j))
        }))
    }

    pub fn invert(&self, matrix: &RowMatrix) -> Result<RowMatrix> {
        check_len("Scaler::invert", self.width(), matrix.ncols())?;
        Ok(RowMatrix::from_fn(matrix.nrows(), matrix.ncols(), |i, j| {
            self.invert_value(j, matrix.get(i, j))
        }))
    }
}

/// Fit a scaler on `matrix`.
pub fn fit_scaler(matrix: &RowMatrix) -> Result<Scaler> {
    Scaler::fit(matrix)
}

/// Central-difference gradient `(f(p + h e_k) - f(p - h e_k)) / 2h`.
pub fn finite_diff_gradient(mut f: impl FnMut(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    assert!(h > 0.0, "finite difference step must be positive");
    let mut probe = p.to_vec();
    (0..p.len())
        .map(|k| {
            probe[k] = p[k] + h;
            let up = f(&probe);
            probe[k] = p[k] - h;
            let down = f(&probe);
            probe[k] = p[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaussian_moments() {
        let mut s = RngStream::new(2024);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| gaussian_sample(&mut s)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn same_seed_same_draws() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..100 {
            assert_eq!(a.gaussian().to_bits(), b.gaussian().to_bits());
        }
    }

    #[test]
    fn children_depend_on_seed_and_label_only() {
        let mut parent = RngStream::new(7);
        let before = parent.child(&[1, 2]);
        parent.uniform();
        let after = parent.child(&[1, 2]);
        let (mut x, mut y) = (before.clone(), after);
        assert_eq!(x.uniform().to_bits(), y.uniform().to_bits());
        let mut other = parent.child(&[2, 1]);
        let mut x2 = before;
        assert_ne!(x2.uniform(), other.uniform());
    }

    #[test]
    fn scaler_affine_and_constant_columns() {
        let m = RowMatrix::from_rows(&[[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]]).unwrap();
        let s = fit_scaler(&m).unwrap();
        let scaled = s.apply(&m).unwrap();
        assert_eq!(scaled.as_slice(), &[0.0, 0.0, 0.5, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn scaler_rejects_non_finite() {
        let m = RowMatrix::from_rows(&[[1.0], [f64::NAN]]).unwrap();
        assert!(matches!(fit_scaler(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn finite_difference_examples() {
        let g = finite_diff_gradient(|p| p[0] * p[0], &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-6);
        let g = finite_diff_gradient(|_| 4.2, &[1.0, -2.0, 0.5], 1e-5);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    proptest! {
        #[test]
        fn finite_difference_sum_of_squares(p in prop::collection::vec(-10.0f64..10.0, 1..8)) {
            let g = finite_diff_gradient(|q| q.iter().map(|x| x * x).sum(), &p, 1e-5);
            for (gk, pk) in g.iter().zip(&p) {
                prop_assert!((gk - 2.0 * pk).abs() < 1e-6);
            }
        }

        #[test]
        fn scaler_range_and_round_trip(
            rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20)
        ) {
            let m = RowMatrix::from_rows(&rows).unwrap();
            let s = Scaler::fit(&m).unwrap();
            let scaled = s.apply(&m).unwrap();
            prop_assert!(scaled.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
            let back = s.invert(&scaled).unwrap();
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let (x, y) = (m.get(i, j), back.get(i, j));
                    if s.max()[j] > s.min()[j] {
                        let scale = x.abs().max(s.min()[j].abs()).max(s.max()[j].abs());
                        prop_assert!((x - y).abs() <= 1e-12 * scale, "{x} vs {y}");
                    }
                }
            }
        }

        #[test]
        fn streams_are_reproducible(seed in any::<u64>()) {
            let mut a = RngStream::new(seed);
            let mut b = RngStream::new(seed);
            for _ in 0..16 {
                prop_assert_eq!(a.gaussian().to_bits(), b.gaussian().to_bits());
                prop_assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
            }
        }
    }
}
