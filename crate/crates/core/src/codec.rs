//! Configuration gate, block allocation, per-worker weights and the linear
//! block encoder.
//!
//! Worker and group indices are zero-based throughout the library: group `j`
//! owns workers `j*r .. (j+1)*r`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;

/// Largest compression ratio accepted without an explicit opt-in. Above this
/// the Vandermonde solves lose too many digits in 64-bit arithmetic.
pub const MAX_STABLE_COMPRESSION: usize = 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error(
        "infeasible: s = {adversaries} exceeds (P - r_c)/2 = ({workers} - {compression})/2; \
         a mechanism with compression {compression} tolerates at most {max_tolerable} adversaries \
         among {workers} workers"
    )]
    Infeasible {
        workers: usize,
        adversaries: usize,
        compression: usize,
        max_tolerable: i64,
    },
    #[error("redundancy r = 2s + r_c = {redundancy} does not divide P = {workers}")]
    NotDivisible { workers: usize, redundancy: usize },
    #[error(
        "compression ratio {compression} exceeds the stable limit {limit}; \
         use MechanismConfig::with_large_compression to override"
    )]
    CompressionAboveLimit { compression: usize, limit: usize },
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// A validated `(P, s, r_c, d)` tuple with its derived quantities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismConfig {
    workers: usize,
    max_adversaries: usize,
    compression: usize,
    dim: usize,
    redundancy: usize,
    groups: usize,
    compressed_dim: usize,
    padded_dim: usize,
}

/// Checks feasibility and derives `r = 2s + r_c`, `q = P / r`,
/// `d_c = ceil(d / r_c)` and `d_pad = d_c * r_c`.
pub fn validate_config(
    workers: usize,
    max_adversaries: usize,
    compression: usize,
    dim: usize,
) -> Result<MechanismConfig, CodecError> {
    MechanismConfig::build(
        workers,
        max_adversaries,
        compression,
        dim,
        Some(MAX_STABLE_COMPRESSION),
    )
}

impl MechanismConfig {
    pub fn new(
        workers: usize,
        max_adversaries: usize,
        compression: usize,
        dim: usize,
    ) -> Result<Self, CodecError> {
        validate_config(workers, max_adversaries, compression, dim)
    }

    /// Same gate as [`validate_config`] without the compression ceiling.
    pub fn with_large_compression(
        workers: usize,
        max_adversaries: usize,
        compression: usize,
        dim: usize,
    ) -> Result<Self, CodecError> {
        if compression > MAX_STABLE_COMPRESSION {
            log::warn!(
                "compression ratio {compression} is above {MAX_STABLE_COMPRESSION}; \
                 decoding may be numerically unreliable"
            );
        }
        Self::build(workers, max_adversaries, compression, dim, None)
    }

    fn build(
        workers: usize,
        max_adversaries: usize,
        compression: usize,
        dim: usize,
        limit: Option<usize>,
    ) -> Result<Self, CodecError> {
        if workers == 0 {
            return Err(CodecError::InvalidParameter {
                name: "P",
                reason: "need at least one worker".into(),
            });
        }
        if compression == 0 {
            return Err(CodecError::InvalidParameter {
                name: "r_c",
                reason: "compression ratio must be positive".into(),
            });
        }
        if dim == 0 {
            return Err(CodecError::InvalidParameter {
                name: "d",
                reason: "model dimension must be positive".into(),
            });
        }
        if let Some(limit) = limit {
            if compression > limit {
                return Err(CodecError::CompressionAboveLimit { compression, limit });
            }
        }
        let redundancy = 2 * max_adversaries + compression;
        if redundancy > workers {
            return Err(CodecError::Infeasible {
                workers,
                adversaries: max_adversaries,
                compression,
                max_tolerable: max_tolerable_adversaries(workers, compression),
            });
        }
        if !workers.is_multiple_of(redundancy) {
            return Err(CodecError::NotDivisible {
                workers,
                redundancy,
            });
        }
        let compressed_dim = dim.div_ceil(compression);
        Ok(Self {
            workers,
            max_adversaries,
            compression,
            dim,
            redundancy,
            groups: workers / redundancy,
            compressed_dim,
            padded_dim: compressed_dim * compression,
        })
    }

    /// `P`
    pub fn workers(&self) -> usize {
        self.workers
    }
    /// `s`
    pub fn max_adversaries(&self) -> usize {
        self.max_adversaries
    }
    /// `r_c`
    pub fn compression(&self) -> usize {
        self.compression
    }
    /// `d`
    pub fn dim(&self) -> usize {
        self.dim
    }
    /// `r = 2s + r_c`
    pub fn redundancy(&self) -> usize {
        self.redundancy
    }
    /// `q = P / r`
    pub fn groups(&self) -> usize {
        self.groups
    }
    /// `d_c`
    pub fn compressed_dim(&self) -> usize {
        self.compressed_dim
    }
    /// `d_c * r_c`, the gradient length after zero padding.
    pub fn padded_dim(&self) -> usize {
        self.padded_dim
    }

    pub fn group_of(&self, worker: usize) -> usize {
        worker / self.redundancy
    }

    pub fn group_members(&self, group: usize) -> std::ops::Range<usize> {
        group * self.redundancy..(group + 1) * self.redundancy
    }
}

impl fmt::Display for MechanismConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P={} s={} r_c={} d={} (r={}, q={}, d_c={})",
            self.workers,
            self.max_adversaries,
            self.compression,
            self.dim,
            self.redundancy,
            self.groups,
            self.compressed_dim
        )
    }
}

/// `floor((P - r_c) / 2)`, negative when `r_c > P`.
pub fn max_tolerable_adversaries(workers: usize, compression: usize) -> i64 {
    (workers as i64 - compression as i64).div_euclid(2)
}

/// Closest worker count `P' >= 2s + r_c` that is a multiple of `2s + r_c`.
/// Ties round up.
pub fn nearest_feasible_workers(
    workers: usize,
    max_adversaries: usize,
    compression: usize,
) -> usize {
    let r = 2 * max_adversaries + compression;
    let below = (workers / r) * r;
    let above = below + r;
    if below < r {
        return r;
    }
    if workers - below < above - workers {
        below
    } else {
        above
    }
}

/// Block-diagonal assignment `I_q (x) 1_{r x r}`, stored implicitly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AllocationMatrix {
    workers: usize,
    redundancy: usize,
}

pub fn build_allocation(cfg: &MechanismConfig) -> AllocationMatrix {
    AllocationMatrix {
        workers: cfg.workers(),
        redundancy: cfg.redundancy(),
    }
}

impl AllocationMatrix {
    pub fn size(&self) -> usize {
        self.workers
    }

    /// Whether worker `row` is assigned gradient `col`.
    pub fn entry(&self, row: usize, col: usize) -> bool {
        row / self.redundancy == col / self.redundancy
    }

    /// Gradients assigned to `worker`.
    pub fn support(&self, worker: usize) -> std::ops::Range<usize> {
        let g = worker / self.redundancy;
        g * self.redundancy..(g + 1) * self.redundancy
    }

    pub fn nnz(&self) -> usize {
        self.workers * self.redundancy
    }

    /// `||A||_0 / P`
    pub fn redundancy_ratio(&self) -> f64 {
        self.nnz() as f64 / self.workers as f64
    }

    pub fn to_dense(&self) -> DMatrix<u8> {
        DMatrix::from_fn(self.workers, self.workers, |j, k| {
            u8::from(self.entry(j, k))
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    /// `w_k = k / P` for `k = 1..P`.
    #[default]
    Equispaced,
    /// Chebyshev points of `[-1, 1]` inside every group, ordered outside-in
    /// in `(+x, -x)` pairs and scaled by a per-group factor in `(0.75, 1]` so
    /// all `P` values stay distinct. Keeps the group Vandermonde systems well
    /// conditioned when `q > 1` or `r_c` is large.
    Chebyshev,
}

/// One evaluation point per worker: distinct, nonzero, finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    values: Vec<f64>,
}

/// Equispaced weights `w_k = k / P`.
pub fn make_weights(cfg: &MechanismConfig) -> WeightSet {
    WeightSet::generate(cfg, WeightScheme::Equispaced)
}

impl WeightSet {
    pub fn generate(cfg: &MechanismConfig, scheme: WeightScheme) -> Self {
        let p = cfg.workers();
        let values = match scheme {
            WeightScheme::Equispaced => (1..=p).map(|k| k as f64 / p as f64).collect(),
            WeightScheme::Chebyshev => {
                let r = cfg.redundancy();
                let q = cfg.groups();
                let nodes = interleaved_chebyshev(r);
                (0..q)
                    .flat_map(|j| {
                        let scale = 1.0 - j as f64 / (4.0 * q as f64);
                        nodes.iter().map(move |x| scale * x)
                    })
                    .collect()
            }
        };
        Self { values }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self, CodecError> {
        if let Some(bad) = values.iter().find(|w| !w.is_finite() || **w == 0.0) {
            return Err(CodecError::InvalidWeights(format!(
                "weights must be finite and nonzero, got {bad}"
            )));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(CodecError::InvalidWeights(
                "weights must be pairwise distinct".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, worker: usize) -> f64 {
        self.values[worker]
    }

    /// Weights of the `r` members of `group`.
    pub fn group(&self, cfg: &MechanismConfig, group: usize) -> &[f64] {
        &self.values[cfg.group_members(group)]
    }

    /// Smallest pairwise gap.
    pub fn min_gap(&self) -> f64 {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        sorted
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

fn interleaved_chebyshev(r: usize) -> Vec<f64> {
    // an even node count keeps zero out of the set
    let m = r + r % 2;
    let positive: Vec<f64> = (1..=m / 2)
        .map(|k| ((2 * k - 1) as f64 * PI / (2 * m) as f64).cos())
        .collect();
    positive.iter().flat_map(|&x| [x, -x]).take(r).collect()
}

/// `r x (v+1)` matrix with entry `(k, l) = w_{j r + k}^l`.
pub fn vandermonde(
    cfg: &MechanismConfig,
    weights: &WeightSet,
    group: usize,
    degree: usize,
) -> DMatrix<f64> {
    let nodes = weights.group(cfg, group);
    DMatrix::from_fn(nodes.len(), degree + 1, |k, l| nodes[k].powi(l as i32))
}

/// Gradients as columns of a `d_pad x P` matrix; rows past `d` stay zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientMatrix {
    values: DMatrix<f64>,
    logical_dim: usize,
}

impl GradientMatrix {
    pub fn zeros(cfg: &MechanismConfig) -> Self {
        Self {
            values: DMatrix::zeros(cfg.padded_dim(), cfg.workers()),
            logical_dim: cfg.dim(),
        }
    }

    /// Builds from `P` gradients of length `d`.
    pub fn from_columns(cfg: &MechanismConfig, columns: &[Vec<f64>]) -> Result<Self, CodecError> {
        if columns.len() != cfg.workers() {
            return Err(CodecError::DimensionMismatch {
                what: "gradient count",
                expected: cfg.workers(),
                found: columns.len(),
            });
        }
        let mut out = Self::zeros(cfg);
        for (k, col) in columns.iter().enumerate() {
            out.set_column(k, col)?;
        }
        Ok(out)
    }

    /// Builds from a `d x P` matrix.
    pub fn from_matrix(cfg: &MechanismConfig, m: &DMatrix<f64>) -> Result<Self, CodecError> {
        if m.ncols() != cfg.workers() {
            return Err(CodecError::DimensionMismatch {
                what: "gradient count",
                expected: cfg.workers(),
                found: m.ncols(),
            });
        }
        if m.nrows() != cfg.dim() {
            return Err(CodecError::DimensionMismatch {
                what: "gradient length",
                expected: cfg.dim(),
                found: m.nrows(),
            });
        }
        let mut values = DMatrix::zeros(cfg.padded_dim(), cfg.workers());
        values.rows_mut(0, cfg.dim()).copy_from(m);
        Ok(Self {
            values,
            logical_dim: cfg.dim(),
        })
    }

    pub fn set_column(&mut self, worker: usize, gradient: &[f64]) -> Result<(), CodecError> {
        if gradient.len() != self.logical_dim {
            return Err(CodecError::DimensionMismatch {
                what: "gradient length",
                expected: self.logical_dim,
                found: gradient.len(),
            });
        }
        let col = self.column_mut(worker);
        col[..gradient.len()].copy_from_slice(gradient);
        Ok(())
    }

    pub fn logical_dim(&self) -> usize {
        self.logical_dim
    }

    pub fn padded_dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn workers(&self) -> usize {
        self.values.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Padded gradient of one worker slot.
    pub fn column(&self, k: usize) -> &[f64] {
        let n = self.values.nrows();
        &self.values.as_slice()[k * n..(k + 1) * n]
    }

    fn column_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.values.nrows();
        &mut self.values.as_mut_slice()[k * n..(k + 1) * n]
    }

    /// Sum of the gradients in `cols`, summed left to right.
    pub fn sum_of(&self, cols: std::ops::Range<usize>) -> Vec<f64> {
        let mut acc = vec![0.0; self.padded_dim()];
        for k in cols {
            for (a, g) in acc.iter_mut().zip(self.column(k)) {
                *a += g;
            }
        }
        acc
    }

    /// `G 1_P` truncated to the logical dimension.
    pub fn total(&self) -> Vec<f64> {
        let mut t = self.sum_of(0..self.workers());
        t.truncate(self.logical_dim);
        t
    }
}

/// `d_c x P` matrix of worker outputs (honest `Z` or received `R`).
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedMatrix {
    values: DMatrix<f64>,
}

impl EncodedMatrix {
    pub fn zeros(compressed_dim: usize, workers: usize) -> Self {
        Self {
            values: DMatrix::zeros(compressed_dim, workers),
        }
    }

    pub fn from_matrix(values: DMatrix<f64>) -> Self {
        Self { values }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.values
    }

    pub fn compressed_dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn workers(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, k: usize) -> &[f64] {
        let n = self.values.nrows();
        &self.values.as_slice()[k * n..(k + 1) * n]
    }

    pub fn column_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.values.nrows();
        &mut self.values.as_mut_slice()[k * n..(k + 1) * n]
    }

    /// The `d_c x r` block received from `group`.
    pub fn group_block(&self, cfg: &MechanismConfig, group: usize) -> DMatrix<f64> {
        self.values
            .columns(group * cfg.redundancy(), cfg.redundancy())
            .into_owned()
    }
}

/// `W_j ybar` with `W_j = I_{d_c} (x) [1, w, ..., w^{r_c-1}]`, evaluated chunk
/// by chunk with Horner's rule.
pub fn encode_worker(ybar: &[f64], w: f64, cfg: &MechanismConfig) -> Result<Vec<f64>, CodecError> {
    if ybar.len() != cfg.padded_dim() {
        return Err(CodecError::DimensionMismatch {
            what: "summed gradient length",
            expected: cfg.padded_dim(),
            found: ybar.len(),
        });
    }
    Ok(encode_chunks(ybar, w, cfg.compression()))
}

fn encode_chunks(ybar: &[f64], w: f64, compression: usize) -> Vec<f64> {
    ybar.chunks_exact(compression)
        .map(|chunk| chunk.iter().rev().fold(0.0, |acc, &y| acc * w + y))
        .collect()
}

pub fn encode_all(
    gradients: &GradientMatrix,
    allocation: &AllocationMatrix,
    weights: &WeightSet,
    cfg: &MechanismConfig,
) -> Result<EncodedMatrix, CodecError> {
    encode_all_with(gradients, allocation, weights, cfg, Exec::default())
}

/// [`encode_all`] with an explicit execution strategy. Groups are encoded
/// independently, so the result is identical for every strategy.
pub fn encode_all_with(
    gradients: &GradientMatrix,
    allocation: &AllocationMatrix,
    weights: &WeightSet,
    cfg: &MechanismConfig,
    exec: Exec,
) -> Result<EncodedMatrix, CodecError> {
    let checks = [
        ("gradient rows", cfg.padded_dim(), gradients.padded_dim()),
        ("gradient count", cfg.workers(), gradients.workers()),
        ("allocation size", cfg.workers(), allocation.size()),
        ("weight count", cfg.workers(), weights.len()),
    ];
    for (what, expected, found) in checks {
        if expected != found {
            return Err(CodecError::DimensionMismatch {
                what,
                expected,
                found,
            });
        }
    }
    let r = cfg.redundancy();
    let blocks = exec.map(cfg.groups(), |j| {
        let first = j * r;
        // every member of the group shares the same allocated sum
        let ybar = gradients.sum_of(allocation.support(first));
        cfg.group_members(j)
            .map(|k| encode_chunks(&ybar, weights.get(k), cfg.compression()))
            .collect::<Vec<_>>()
    });
    let mut z = EncodedMatrix::zeros(cfg.compressed_dim(), cfg.workers());
    for (k, col) in blocks.into_iter().flatten().enumerate() {
        z.column_mut(k).copy_from_slice(&col);
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hundred_workers_five_groups() {
        let cfg = validate_config(100, 5, 10, 200).unwrap();
        assert_eq!(cfg.redundancy(), 20);
        assert_eq!(cfg.groups(), 5);
        assert_eq!(cfg.compressed_dim(), 20);
        assert_eq!(cfg.padded_dim(), 200);
    }

    #[test]
    fn four_worker_example() {
        let cfg = validate_config(4, 1, 2, 2).unwrap();
        assert_eq!(
            (cfg.redundancy(), cfg.groups(), cfg.compressed_dim()),
            (4, 1, 1)
        );
    }

    #[test]
    fn too_many_adversaries_is_infeasible() {
        let err = validate_config(10, 5, 2, 4).unwrap_err();
        assert!(matches!(
            err,
            CodecError::Infeasible {
                max_tolerable: 4,
                ..
            }
        ));
        assert!(err.to_string().contains("(P - r_c)/2"));
    }

    #[test]
    fn divisibility_gate() {
        assert_eq!(
            validate_config(6, 1, 2, 4).unwrap_err(),
            CodecError::NotDivisible {
                workers: 6,
                redundancy: 4
            }
        );
    }

    #[test]
    fn padding_rounds_up() {
        let cfg = validate_config(12, 1, 4, 10).unwrap();
        assert_eq!(cfg.compressed_dim(), 3);
        assert_eq!(cfg.padded_dim(), 12);
    }

    #[test]
    fn compression_ceiling() {
        assert!(matches!(
            validate_config(15, 0, 15, 15),
            Err(CodecError::CompressionAboveLimit { .. })
        ));
        assert!(MechanismConfig::with_large_compression(15, 0, 15, 15).is_ok());
    }

    #[test]
    fn zero_inputs_rejected() {
        assert!(validate_config(0, 0, 1, 1).is_err());
        assert!(validate_config(4, 0, 0, 1).is_err());
        assert!(validate_config(4, 0, 1, 0).is_err());
    }

    #[test]
    fn nearest_feasible() {
        assert_eq!(nearest_feasible_workers(10, 1, 2), 12);
        assert_eq!(nearest_feasible_workers(9, 1, 2), 8);
        assert_eq!(nearest_feasible_workers(2, 1, 2), 4);
        assert_eq!(nearest_feasible_workers(101, 5, 10), 100);
    }

    #[test]
    fn single_group_allocation_is_all_ones() {
        let cfg = validate_config(4, 1, 2, 2).unwrap();
        let a = build_allocation(&cfg).to_dense();
        assert!(a.iter().all(|&x| x == 1));
    }

    #[test]
    fn allocation_block_structure() {
        let cfg = validate_config(100, 5, 10, 200).unwrap();
        let a = build_allocation(&cfg);
        assert_eq!(a.nnz(), 2000);
        assert_eq!(a.redundancy_ratio(), 20.0);
        let dense = a.to_dense();
        for k in 0..100 {
            assert_eq!(
                dense.column(k).iter().map(|&x| x as usize).sum::<usize>(),
                20
            );
        }
        for j in 0..100 {
            for k in 0..100 {
                assert_eq!(dense[(j, k)] == 1, cfg.group_of(j) == cfg.group_of(k));
            }
        }
    }

    #[test]
    fn equispaced_weights() {
        let cfg = validate_config(1, 0, 1, 1).unwrap();
        assert_eq!(make_weights(&cfg).as_slice(), &[1.0]);
        let cfg = validate_config(4, 1, 2, 2).unwrap();
        assert_eq!(make_weights(&cfg).as_slice(), &[0.25, 0.5, 0.75, 1.0]);
        let cfg = validate_config(20, 5, 10, 10).unwrap();
        let w = make_weights(&cfg);
        assert_eq!(w.len(), 20);
        assert_relative_eq!(w.min_gap(), 1.0 / 20.0, epsilon = 1e-15);
    }

    #[test]
    fn chebyshev_weights_are_valid() {
        for (p, s, rc) in [
            (4, 1, 2),
            (12, 2, 2),
            (100, 5, 10),
            (15, 1, 1),
            (21, 3, 1),
            (60, 2, 8),
        ] {
            let cfg = validate_config(p, s, rc, rc).unwrap();
            let w = WeightSet::generate(&cfg, WeightScheme::Chebyshev);
            assert_eq!(w.len(), p);
            assert!(
                WeightSet::from_values(w.as_slice().to_vec()).is_ok(),
                "P={p}"
            );
            assert!(w.as_slice().iter().all(|x| x.abs() <= 1.0));
        }
    }

    #[test]
    fn weight_validation() {
        assert!(WeightSet::from_values(vec![0.5, 0.5]).is_err());
        assert!(WeightSet::from_values(vec![0.0, 0.5]).is_err());
        assert!(WeightSet::from_values(vec![f64::NAN]).is_err());
    }

    #[test]
    fn vandermonde_shapes() {
        let cfg = validate_config(4, 1, 2, 2).unwrap();
        let w = make_weights(&cfg);
        let v0 = vandermonde(&cfg, &w, 0, 0);
        assert_eq!(v0.shape(), (4, 1));
        assert!(v0.iter().all(|&x| x == 1.0));
        let v1 = vandermonde(&cfg, &w, 0, 1);
        let expect = DMatrix::from_row_slice(4, 2, &[1.0, 0.25, 1.0, 0.5, 1.0, 0.75, 1.0, 1.0]);
        assert_eq!(v1, expect);
    }

    #[test]
    fn vandermonde_rows_are_geometric() {
        let cfg = validate_config(12, 2, 2, 4).unwrap();
        let w = make_weights(&cfg);
        let v = vandermonde(&cfg, &w, 1, 5);
        for (k, worker) in cfg.group_members(1).enumerate() {
            let mut p = 1.0;
            for l in 0..6 {
                assert_relative_eq!(v[(k, l)], p, max_relative = 1e-15);
                p *= w.get(worker);
            }
        }
    }

    #[test]
    fn encode_worker_examples() {
        let cfg = validate_config(4, 1, 2, 2).unwrap();
        assert_eq!(encode_worker(&[0.0, 0.0], 0.5, &cfg).unwrap(), vec![0.0]);
        assert_eq!(encode_worker(&[3.0, 8.0], 0.5, &cfg).unwrap(), vec![7.0]);
        let cfg = validate_config(4, 1, 2, 4).unwrap();
        // dense oracle: I_2 (x) [1, 2] times (1,2,3,4) = (1+4, 3+8)
        assert_eq!(
            encode_worker(&[1.0, 2.0, 3.0, 4.0], 2.0, &cfg).unwrap(),
            vec![5.0, 11.0]
        );
        assert!(matches!(
            encode_worker(&[1.0], 2.0, &cfg),
            Err(CodecError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn encode_all_shares_group_sum() {
        let cfg = validate_config(4, 1, 2, 2).unwrap();
        let g = GradientMatrix::from_columns(
            &cfg,
            &[
                vec![1.0, 2.0],
                vec![3.0, -1.0],
                vec![0.0, 4.0],
                vec![2.0, 2.0],
            ],
        )
        .unwrap();
        let w = make_weights(&cfg);
        let z = encode_all(&g, &build_allocation(&cfg), &w, &cfg).unwrap();
        for k in 0..4 {
            assert_relative_eq!(z.column(k)[0], 6.0 + 7.0 * w.get(k), max_relative = 1e-15);
        }
        let zero = encode_all(
            &GradientMatrix::zeros(&cfg),
            &build_allocation(&cfg),
            &w,
            &cfg,
        )
        .unwrap();
        assert!(zero.matrix().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn encode_all_matches_across_strategies() {
        let cfg = validate_config(24, 1, 4, 9).unwrap();
        let cols: Vec<Vec<f64>> = (0..24)
            .map(|k| {
                (0..9)
                    .map(|i| ((k * 31 + i * 7) % 13) as f64 - 6.0)
                    .collect()
            })
            .collect();
        let g = GradientMatrix::from_columns(&cfg, &cols).unwrap();
        let a = build_allocation(&cfg);
        let w = make_weights(&cfg);
        let seq = encode_all_with(&g, &a, &w, &cfg, Exec::Sequential).unwrap();
        let par = encode_all_with(&g, &a, &w, &cfg, Exec::Parallel).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn padded_rows_stay_zero() {
        let cfg = validate_config(4, 0, 4, 5).unwrap();
        let g = GradientMatrix::from_columns(&cfg, &vec![vec![1.0; 5]; 4]).unwrap();
        assert_eq!(g.padded_dim(), 8);
        for k in 0..4 {
            assert_eq!(&g.column(k)[5..], &[0.0, 0.0, 0.0]);
        }
        assert_eq!(g.total(), vec![4.0; 5]);
    }
}
