//! Reference implementations that share no code path with the fast encoder
//! and decoder: a dense Kronecker encoder and an exhaustive subset search
//! that recovers a group sum as a sparse-recovery problem.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::codec::{CodecError, MechanismConfig, WeightSet};

/// Largest group size the subset search accepts.
pub const MAX_BRUTE_FORCE_GROUP: usize = 12;

const ACCEPT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("no subset of at most {max} excluded columns explains the received block")]
    NoConsistentSubset { max: usize },
    #[error("subsets {first:?} and {other:?} explain the block with different gradients")]
    AmbiguousRecovery {
        first: Vec<usize>,
        other: Vec<usize>,
    },
    #[error("group of {size} columns exceeds the enumeration cap {cap}")]
    GroupTooLarge { size: usize, cap: usize },
    #[error("received block is {found} rows, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// `I_{d_c} (x) [1, w, ..., w^{r_c - 1}]` as an explicit `d_c x d_pad` matrix.
pub fn dense_encoder_matrix(w: f64, compressed_dim: usize, compression: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(compressed_dim, compressed_dim * compression);
    for p in 0..compressed_dim {
        let mut power = 1.0;
        for l in 0..compression {
            m[(p, p * compression + l)] = power;
            power *= w;
        }
    }
    m
}

/// Encodes by materialising the full encoder matrix.
pub fn dense_encode(ybar: &[f64], w: f64, cfg: &MechanismConfig) -> Result<Vec<f64>, CodecError> {
    if ybar.len() != cfg.padded_dim() {
        return Err(CodecError::DimensionMismatch {
            what: "summed gradient length",
            expected: cfg.padded_dim(),
            found: ybar.len(),
        });
    }
    let m = dense_encoder_matrix(w, cfg.compressed_dim(), cfg.compression());
    let out = m * DVector::from_column_slice(ybar);
    Ok(out.as_slice().to_vec())
}

/// Parameters of a single group, not required to satisfy `r = 2s + r_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupCode {
    pub weights: Vec<f64>,
    pub max_adversaries: usize,
    pub compression: usize,
    pub compressed_dim: usize,
}

impl GroupCode {
    pub fn from_config(cfg: &MechanismConfig, weights: &WeightSet, group: usize) -> Self {
        Self {
            weights: weights.group(cfg, group).to_vec(),
            max_adversaries: cfg.max_adversaries(),
            compression: cfg.compression(),
            compressed_dim: cfg.compressed_dim(),
        }
    }

    pub fn padded_dim(&self) -> usize {
        self.compressed_dim * self.compression
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceOutcome {
    /// Recovered group sum, length `d_pad`.
    pub ybar: Vec<f64>,
    /// First consistent subset in (size, lexicographic) order.
    pub excluded: Vec<usize>,
    pub subsets_examined: usize,
    pub consistent_subsets: usize,
}

/// Tries every exclusion set `S` with `|S| <= s`, solves the remaining
/// equations `z_k = W_k g` by least squares and keeps the subsets whose
/// residual is below `1e-8 (1 + ||R_j||)`. All accepted subsets must agree on
/// `g`.
pub fn brute_force_group_decode(
    code: &GroupCode,
    block: &DMatrix<f64>,
) -> Result<BruteForceOutcome, OracleError> {
    let r = code.weights.len();
    if r > MAX_BRUTE_FORCE_GROUP {
        return Err(OracleError::GroupTooLarge {
            size: r,
            cap: MAX_BRUTE_FORCE_GROUP,
        });
    }
    if block.nrows() != code.compressed_dim || block.ncols() != r {
        return Err(OracleError::DimensionMismatch {
            expected: code.compressed_dim,
            found: block.nrows(),
        });
    }
    let d_pad = code.padded_dim();
    let encoders: Vec<DMatrix<f64>> = code
        .weights
        .iter()
        .map(|&w| dense_encoder_matrix(w, code.compressed_dim, code.compression))
        .collect();
    let accept = ACCEPT_TOLERANCE * (1.0 + block.norm());

    let mut examined = 0;
    let mut accepted: Vec<(Vec<usize>, DVector<f64>, bool)> = Vec::new();
    for size in 0..=code.max_adversaries.min(r) {
        for excluded in (0..r).combinations(size) {
            examined += 1;
            let kept: Vec<usize> = (0..r).filter(|k| !excluded.contains(k)).collect();
            let rows = kept.len() * code.compressed_dim;
            let mut a = DMatrix::zeros(rows, d_pad);
            let mut b = DVector::zeros(rows);
            for (i, &k) in kept.iter().enumerate() {
                let off = i * code.compressed_dim;
                a.view_mut((off, 0), (code.compressed_dim, d_pad))
                    .copy_from(&encoders[k]);
                for p in 0..code.compressed_dim {
                    b[off + p] = block[(p, k)];
                }
            }
            let (g, full_rank) = qr_least_squares(&a, &b);
            let residual = (&a * &g - &b).norm();
            if residual < accept {
                accepted.push((excluded, g, full_rank));
            }
        }
    }

    let Some((first, g0, unique)) = accepted.first().cloned() else {
        return Err(OracleError::NoConsistentSubset {
            max: code.max_adversaries,
        });
    };
    let agree = ACCEPT_TOLERANCE * (1.0 + g0.norm());
    if !unique {
        let other = accepted
            .get(1)
            .map(|a| a.0.clone())
            .unwrap_or_else(|| first.clone());
        return Err(OracleError::AmbiguousRecovery { first, other });
    }
    for (other, g, _) in accepted.iter().skip(1) {
        if (g - &g0).norm() > agree {
            return Err(OracleError::AmbiguousRecovery {
                first,
                other: other.clone(),
            });
        }
    }
    Ok(BruteForceOutcome {
        ybar: g0.as_slice().to_vec(),
        excluded: first,
        subsets_examined: examined,
        consistent_subsets: accepted.len(),
    })
}

/// Least squares through column-pivoted Householder QR. Returns the solution
/// and whether `a` has full column rank; rank-deficient systems get a basic
/// solution on the leading pivots.
fn qr_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, bool) {
    let n = a.ncols();
    let qr = a.clone().col_piv_qr();
    let q = qr.q();
    let r = qr.r();
    let p = qr.p();
    let k = r.nrows().min(n);
    let lead = if k > 0 { r[(0, 0)].abs() } else { 0.0 };
    let rank = (0..k)
        .take_while(|&i| r[(i, i)].abs() > 1e-12 * lead)
        .count();
    let qtb = q.tr_mul(b);
    let mut y = DVector::zeros(n);
    if rank > 0 {
        let r11 = r.view((0, 0), (rank, rank));
        if let Some(sol) = r11.solve_upper_triangular(&qtb.rows(0, rank)) {
            y.rows_mut(0, rank).copy_from(&sol);
        }
    }
    p.inv_permute_rows(&mut y);
    (y, rank == n)
}

/// `sum_{i=0}^{s} C(r, i)`.
pub fn subset_count(r: usize, s: usize) -> usize {
    (0..=s.min(r))
        .map(|i| (0..i).fold(1usize, |acc, j| acc * (r - j) / (j + 1)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_worker, make_weights, validate_config};

    #[test]
    fn basis_vectors_pick_encoder_columns() {
        let cfg = validate_config(4, 0, 4, 8).unwrap();
        let mut e1 = vec![0.0; 8];
        e1[0] = 1.0;
        assert_eq!(dense_encode(&e1, 0.3, &cfg).unwrap(), vec![1.0, 0.0]);
        let mut e2 = vec![0.0; 8];
        e2[1] = 1.0;
        assert_eq!(dense_encode(&e2, 0.3, &cfg).unwrap(), vec![0.3, 0.0]);
    }

    #[test]
    fn dense_matches_sparse_example() {
        let cfg = validate_config(4, 1, 2, 4).unwrap();
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(
            dense_encode(&y, 2.0, &cfg).unwrap(),
            encode_worker(&y, 2.0, &cfg).unwrap()
        );
    }

    fn group_block(code: &GroupCode, ybar: &[f64]) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = code
            .weights
            .iter()
            .map(|&w| {
                dense_encoder_matrix(w, code.compressed_dim, code.compression)
                    * DVector::from_column_slice(ybar)
            })
            .collect();
        DMatrix::from_columns(&cols)
    }

    #[test]
    fn clean_block_accepts_empty_subset() {
        let cfg = validate_config(4, 1, 2, 4).unwrap();
        let code = GroupCode::from_config(&cfg, &make_weights(&cfg), 0);
        let ybar = [1.0, -2.0, 0.5, 3.0];
        let out = brute_force_group_decode(&code, &group_block(&code, &ybar)).unwrap();
        assert!(out.excluded.is_empty());
        assert_eq!(out.subsets_examined, subset_count(4, 1));
        for (a, b) in out.ybar.iter().zip(&ybar) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn single_corruption_is_excluded() {
        let cfg = validate_config(4, 1, 2, 2).unwrap();
        let code = GroupCode::from_config(&cfg, &make_weights(&cfg), 0);
        let ybar = [3.0, 7.0];
        for bad in 0..4 {
            let mut block = group_block(&code, &ybar);
            block[(0, bad)] += 5.0;
            let out = brute_force_group_decode(&code, &block).unwrap();
            assert_eq!(out.excluded, vec![bad]);
            assert!((out.ybar[0] - 3.0).abs() < 1e-10 && (out.ybar[1] - 7.0).abs() < 1e-10);
        }
    }

    #[test]
    fn two_corruptions_with_budget_one_fail() {
        let cfg = validate_config(4, 1, 2, 2).unwrap();
        let code = GroupCode::from_config(&cfg, &make_weights(&cfg), 0);
        let mut block = group_block(&code, &[3.0, 7.0]);
        block[(0, 0)] += 5.0;
        block[(0, 3)] -= 2.0;
        assert_eq!(
            brute_force_group_decode(&code, &block).unwrap_err(),
            OracleError::NoConsistentSubset { max: 1 }
        );
    }

    #[test]
    fn undersized_group_is_ambiguous() {
        // r = 3 < 2s + r_c = 4: x = (-w_1, 1) is invisible to worker 0, so
        // corrupting worker 1 by (Zx)_1 makes g and g + x both consistent
        let w = vec![0.25, 0.5, 0.75];
        let code = GroupCode {
            weights: w.clone(),
            max_adversaries: 1,
            compression: 2,
            compressed_dim: 1,
        };
        let g = [3.0, 7.0];
        let x = [-w[0], 1.0];
        let mut block = group_block(&code, &g);
        block[(0, 1)] += x[0] + w[1] * x[1];
        assert!(matches!(
            brute_force_group_decode(&code, &block),
            Err(OracleError::AmbiguousRecovery { .. })
        ));
    }

    #[test]
    fn cap_is_enforced() {
        let code = GroupCode {
            weights: (1..=13).map(|k| k as f64).collect(),
            max_adversaries: 1,
            compression: 1,
            compressed_dim: 1,
        };
        assert!(matches!(
            brute_force_group_decode(&code, &DMatrix::zeros(1, 13)),
            Err(OracleError::GroupTooLarge { .. })
        ));
    }

    #[test]
    fn subset_counts() {
        assert_eq!(subset_count(4, 1), 5);
        assert_eq!(subset_count(6, 2), 1 + 6 + 15);
        assert_eq!(subset_count(5, 0), 1);
    }
}
