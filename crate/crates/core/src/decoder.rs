//! Group-wise decoding: probe, locate, recover, sum.
//!
//! For each group `j` the received block `R_j` (`d_c x r`) is collapsed by a
//! random probe `f ~ N(1, I)` into `r_jc = f R_j`. Honest entries of `r_jc`
//! are samples of one polynomial `Q` of degree `r_c - 1`, so a rational
//! interpolant `N / D` with `deg N = r_c + s - 1` and monic `deg D = s` fits
//! every entry, with the roots of `D` sitting on corrupted weights. The
//! smallest consistent denominator degree is used, and `Q` is refitted on the
//! nodes farthest from the roots of `D`; entries that disagree with `Q` are
//! flagged.
//! The group sum is then rebuilt from the first `r_c` unflagged columns by a
//! square Vandermonde solve.
//!
//! The interpolant is represented in the Chebyshev basis of the group's
//! weights mapped onto `[-1, 1]`. The space of rational functions is the same
//! as with monomials in `w`; only the conditioning improves.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::codec::{EncodedMatrix, MechanismConfig, WeightSet};
use crate::exec::Exec;
use crate::linalg::{self, AffineMap};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("group {group}: located {} suspects {located:?}, more than s = {max}", located.len())]
    TooManyAdversaries {
        group: usize,
        located: Vec<usize>,
        max: usize,
    },
    #[error("group {group}: only {honest} trusted columns, need {needed}")]
    InsufficientHonest {
        group: usize,
        honest: usize,
        needed: usize,
    },
    #[error("group {group}: locator residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    NumericalFailure {
        group: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("group {group}: selected Vandermonde submatrix is singular")]
    SingularSubmatrix { group: usize },
    #[error("locator denominator vanishes at w = {w}")]
    PoleAtEvaluationPoint { w: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecoderOptions {
    /// Entry `k` is flagged when `|Q(w_k) - r_jc[k]| > tolerance * scale`,
    /// where `scale` is the larger of `max |Q(w_k)|` and the median `|r_jc|`.
    pub mismatch_tolerance: f64,
    /// Relative singular-value cutoff for the locator least-squares solve.
    pub locator_rcond: f64,
    /// Maximum locator residual relative to the right-hand side.
    pub residual_tolerance: f64,
    pub exec: Exec,
}

impl Default for DecoderOptions {
    fn default() -> Self {
        Self {
            mismatch_tolerance: 1e-6,
            locator_rcond: 1e-13,
            residual_tolerance: 1e-6,
            exec: Exec::default(),
        }
    }
}

/// Random probe for one `(iteration, group)` pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeVector {
    pub values: Vec<f64>,
    pub seed: u64,
    pub iteration: u64,
    pub group: usize,
}

/// Draws `f ~ N(1, I_{d_c})` from the stream owned by `(seed, iteration, group)`.
pub fn probe(cfg: &MechanismConfig, seed: u64, iteration: u64, group: usize) -> ProbeVector {
    let mut rng = rng::stream(
        seed,
        rng::DOMAIN_PROBE,
        rng::pair_id(iteration, group as u64),
    );
    let values = (0..cfg.compressed_dim())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            1.0 + z
        })
        .collect();
    ProbeVector {
        values,
        seed,
        iteration,
        group,
    }
}

/// One fresh probe per group for this iteration.
pub fn derive_probes(cfg: &MechanismConfig, seed: u64, iteration: u64) -> Vec<ProbeVector> {
    (0..cfg.groups())
        .map(|j| probe(cfg, seed, iteration, j))
        .collect()
}

/// `r_jc = f R_j`.
pub fn compress_received(
    block: &DMatrix<f64>,
    probe: &ProbeVector,
) -> Result<Vec<f64>, DecodeError> {
    if block.nrows() != probe.values.len() {
        return Err(DecodeError::DimensionMismatch {
            what: "probe length",
            expected: block.nrows(),
            found: probe.values.len(),
        });
    }
    Ok(block
        .column_iter()
        .map(|col| col.iter().zip(&probe.values).map(|(r, f)| r * f).sum())
        .collect())
}

/// Rational interpolant `N(t) / D(t)` over `t = (w - center) / half_width`,
/// with `N = sum numerator[i] T_i` and `D = T_s + sum denominator[i] T_i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocatorSolution {
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    /// `N / D` reduced to a polynomial of degree `r_c - 1`, when known.
    quotient: Option<Vec<f64>>,
    center: f64,
    half_width: f64,
    pub residual: f64,
    pub rank: usize,
}

impl LocatorSolution {
    /// Builds a solution from coefficients in the Chebyshev basis of
    /// `(w - center) / half_width`.
    pub fn from_parts(
        numerator: Vec<f64>,
        denominator: Vec<f64>,
        center: f64,
        half_width: f64,
    ) -> Self {
        Self {
            numerator,
            denominator,
            quotient: None,
            center,
            half_width,
            residual: 0.0,
            rank: 0,
        }
    }

    pub fn numerator(&self) -> &[f64] {
        &self.numerator
    }

    /// Lower-order denominator coefficients; the leading `T_s` term is implicit.
    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn quotient(&self) -> Option<&[f64]> {
        self.quotient.as_deref()
    }

    /// All `r_c + 2s` unknowns, numerator first.
    pub fn coefficients(&self) -> Vec<f64> {
        self.numerator
            .iter()
            .chain(&self.denominator)
            .copied()
            .collect()
    }

    fn map(&self) -> AffineMap {
        AffineMap {
            center: self.center,
            half_width: self.half_width,
        }
    }

    fn denominator_at(&self, t: f64) -> f64 {
        let s = self.denominator.len();
        linalg::chebyshev_t(s, t) + linalg::clenshaw(&self.denominator, t)
    }

    /// Reduced polynomial at `w`, if the quotient was computed.
    pub fn eval_reduced(&self, w: f64) -> Option<f64> {
        let t = self.map().apply(w);
        self.quotient.as_ref().map(|q| linalg::clenshaw(q, t))
    }
}

/// Evaluates the rational locator at `w`. A denominator below
/// `1e-12 (1 + |N(w)|)` is reported as a pole.
pub fn eval_locator(sol: &LocatorSolution, w: f64) -> Result<f64, DecodeError> {
    let t = sol.map().apply(w);
    let num = linalg::clenshaw(&sol.numerator, t);
    let den = sol.denominator_at(t);
    if den.abs() < 1e-12 * (1.0 + num.abs()) {
        return Err(DecodeError::PoleAtEvaluationPoint { w });
    }
    Ok(num / den)
}

/// Solves for the rational interpolant through `r_jc` at the group weights,
/// then divides out the denominator by weighted least squares.
pub fn solve_locator(
    cfg: &MechanismConfig,
    weights: &WeightSet,
    group: usize,
    r_jc: &[f64],
) -> Result<LocatorSolution, DecodeError> {
    solve_locator_with(cfg, weights, group, r_jc, &DecoderOptions::default())
}

/// As [`solve_locator`] with explicit tolerances.
///
/// Denominator degrees `0..=s` are tried in turn. A degree `t` is accepted
/// when its system is consistent within `residual_tolerance` and the reduced
/// polynomial disagrees with at most `t` entries: a degree-`t` denominator
/// cannot explain more. Stopping at the smallest such degree keeps the solve
/// full rank when fewer than `s` entries are corrupted.
pub fn solve_locator_with(
    cfg: &MechanismConfig,
    weights: &WeightSet,
    group: usize,
    r_jc: &[f64],
    opts: &DecoderOptions,
) -> Result<LocatorSolution, DecodeError> {
    locate_compressed(cfg, weights, group, r_jc, opts).map(|l| l.solution)
}

/// Least-squares fit of `N - r D = 0` with `deg N = r_c + degree - 1` and
/// monic `deg D = degree`. Returns the fit and the right-hand-side norm.
fn locator_system(
    ts: &[f64],
    r_jc: &[f64],
    rc: usize,
    degree: usize,
    rcond: f64,
) -> (linalg::LeastSquares, f64) {
    let n_num = rc + degree;
    let mut a = DMatrix::zeros(ts.len(), n_num + degree);
    let mut rhs = DVector::zeros(ts.len());
    for (k, (&t, &y)) in ts.iter().zip(r_jc).enumerate() {
        let row = linalg::chebyshev_row(t, n_num.max(degree + 1));
        for l in 0..n_num {
            a[(k, l)] = row[l];
        }
        for l in 0..degree {
            a[(k, n_num + l)] = -y * row[l];
        }
        rhs[k] = y * row[degree];
    }
    let ls = linalg::lstsq(&a, &rhs, rcond, true);
    (ls, rhs.norm())
}

/// Reduces `N / D` to `Q`: the `deg D` entries where `|D|` is smallest are
/// taken as the roots of `D` and dropped, and `Q` is the least-squares
/// polynomial of degree `r_c - 1` through the rest. When `D` vanishes on the
/// corrupted entries this is an exact fit to honest data; otherwise the fit
/// absorbs a corrupted entry and the mismatch test rejects it.
fn reduce_quotient(
    sol: &LocatorSolution,
    ts: &[f64],
    r_jc: &[f64],
    rc: usize,
    rcond: f64,
) -> Vec<f64> {
    let degree = sol.denominator.len();
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&a, &b| {
        sol.denominator_at(ts[a])
            .abs()
            .total_cmp(&sol.denominator_at(ts[b]).abs())
            .then(a.cmp(&b))
    });
    let mut keep: Vec<usize> = order[degree..].to_vec();
    keep.sort_unstable();
    let mut qa = DMatrix::zeros(keep.len(), rc);
    let mut qb = DVector::zeros(keep.len());
    for (i, &k) in keep.iter().enumerate() {
        let row = linalg::chebyshev_row(ts[k], rc);
        for l in 0..rc {
            qa[(i, l)] = row[l];
        }
        qb[i] = r_jc[k];
    }
    linalg::lstsq(&qa, &qb, rcond, false)
        .solution
        .as_slice()
        .to_vec()
}

/// Flagged entries of one group with the evidence behind them.
#[derive(Clone, Debug)]
pub(crate) struct GroupLocation {
    pub located: Vec<usize>,
    pub solution: LocatorSolution,
    pub max_honest_mismatch: f64,
    pub threshold: f64,
}

/// Compares `r_jc` with the reduced polynomial of `solution`.
fn flag_entries(
    solution: LocatorSolution,
    nodes: &[f64],
    r_jc: &[f64],
    tolerance: f64,
) -> GroupLocation {
    let fitted: Vec<f64> = nodes
        .iter()
        .map(|&w| solution.eval_reduced(w).unwrap_or(f64::NAN))
        .collect();
    let mut mags: Vec<f64> = r_jc.iter().map(|y| y.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let median = mags[mags.len() / 2];
    let peak = fitted.iter().fold(0.0f64, |m, q| m.max(q.abs()));
    let threshold = tolerance * peak.max(median);

    let mut located = Vec::new();
    let mut max_honest_mismatch = 0.0f64;
    for (k, (q, y)) in fitted.iter().zip(r_jc).enumerate() {
        let gap = (q - y).abs();
        // NaN gaps are flagged too
        if !(gap <= threshold) {
            located.push(k);
        } else {
            max_honest_mismatch = max_honest_mismatch.max(gap);
        }
    }
    GroupLocation {
        located,
        solution,
        max_honest_mismatch,
        threshold,
    }
}

fn locate_compressed(
    cfg: &MechanismConfig,
    weights: &WeightSet,
    group: usize,
    r_jc: &[f64],
    opts: &DecoderOptions,
) -> Result<GroupLocation, DecodeError> {
    let r = cfg.redundancy();
    if r_jc.len() != r {
        return Err(DecodeError::DimensionMismatch {
            what: "compressed block length",
            expected: r,
            found: r_jc.len(),
        });
    }
    let s = cfg.max_adversaries();
    let rc = cfg.compression();
    let nodes = weights.group(cfg, group);
    let map = AffineMap::spanning(nodes);
    let ts: Vec<f64> = nodes.iter().map(|&w| map.apply(w)).collect();
    let y_norm = r_jc.iter().map(|y| y * y).sum::<f64>().sqrt();

    let mut inconsistent = None;
    let mut overflagged = None;
    for degree in 0..=s {
        let (ls, rhs_norm) = locator_system(&ts, r_jc, rc, degree, opts.locator_rcond);
        let tolerance = opts.residual_tolerance * rhs_norm.max(y_norm);
        if !(ls.residual <= tolerance) {
            inconsistent = Some((ls.residual, tolerance));
            continue;
        }
        let n_num = rc + degree;
        let coeffs = ls.solution.as_slice();
        let mut solution = LocatorSolution {
            numerator: coeffs[..n_num].to_vec(),
            denominator: coeffs[n_num..].to_vec(),
            quotient: None,
            center: map.center,
            half_width: map.half_width,
            residual: ls.residual,
            rank: ls.rank,
        };
        solution.quotient = Some(reduce_quotient(
            &solution,
            &ts,
            r_jc,
            rc,
            opts.locator_rcond,
        ));
        let location = flag_entries(solution, nodes, r_jc, opts.mismatch_tolerance);
        if location.located.len() <= degree {
            return Ok(location);
        }
        overflagged = Some(location.located);
    }
    if let Some(located) = overflagged {
        return Err(DecodeError::TooManyAdversaries {
            group,
            located: located.iter().map(|k| group * r + k).collect(),
            max: s,
        });
    }
    let (residual, tolerance) = inconsistent.expect("at least one degree tried");
    Err(DecodeError::NumericalFailure {
        group,
        residual,
        tolerance,
    })
}

pub(crate) fn locate_group(
    cfg: &MechanismConfig,
    weights: &WeightSet,
    group: usize,
    block: &DMatrix<f64>,
    probe: &ProbeVector,
    opts: &DecoderOptions,
) -> Result<GroupLocation, DecodeError> {
    let r_jc = compress_received(block, probe)?;
    locate_compressed(cfg, weights, group, &r_jc, opts)
}

/// Local indices (`0..r`) of the workers in `group` whose columns disagree
/// with the locator polynomial.
pub fn locate_adversaries(
    cfg: &MechanismConfig,
    weights: &WeightSet,
    group: usize,
    block: &DMatrix<f64>,
    probe: &ProbeVector,
) -> Result<Vec<usize>, DecodeError> {
    locate_group(
        cfg,
        weights,
        group,
        block,
        probe,
        &DecoderOptions::default(),
    )
    .map(|l| l.located)
}

/// Rebuilds the group sum `ybar_j` (length `d_pad`) from the first `r_c`
/// indices of `trusted` in ascending order.
pub fn block_decode(
    cfg: &MechanismConfig,
    weights: &WeightSet,
    group: usize,
    block: &DMatrix<f64>,
    trusted: &[usize],
) -> Result<Vec<f64>, DecodeError> {
    block_decode_inner(cfg, weights, group, block, trusted).map(|(y, _)| y)
}

fn block_decode_inner(
    cfg: &MechanismConfig,
    weights: &WeightSet,
    group: usize,
    block: &DMatrix<f64>,
    trusted: &[usize],
) -> Result<(Vec<f64>, f64), DecodeError> {
    let rc = cfg.compression();
    let dc = cfg.compressed_dim();
    if block.shape() != (dc, cfg.redundancy()) {
        return Err(DecodeError::DimensionMismatch {
            what: "received block columns",
            expected: cfg.redundancy(),
            found: block.ncols(),
        });
    }
    let mut chosen: Vec<usize> = trusted.to_vec();
    chosen.sort_unstable();
    chosen.dedup();
    if chosen.len() < rc {
        return Err(DecodeError::InsufficientHonest {
            group,
            honest: chosen.len(),
            needed: rc,
        });
    }
    chosen.truncate(rc);
    let nodes = weights.group(cfg, group);
    let v = DMatrix::from_fn(rc, rc, |i, l| nodes[chosen[i]].powi(l as i32));
    let b = DMatrix::from_fn(rc, dc, |i, p| block[(p, chosen[i])]);
    let cond = linalg::condition_number(&v);
    let x = v
        .lu()
        .solve(&b)
        .ok_or(DecodeError::SingularSubmatrix { group })?;
    // column p of x holds the chunk ybar[p*rc .. (p+1)*rc]
    Ok((x.as_slice().to_vec(), cond))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupDiagnostics {
    pub group: usize,
    /// Global worker indices flagged in this group.
    pub located: Vec<usize>,
    pub locator_residual: f64,
    pub locator_rank: usize,
    /// Largest `|Q(w_k) - r_jc[k]|` among unflagged entries.
    pub max_honest_mismatch: f64,
    pub mismatch_threshold: f64,
    /// Condition number of the Vandermonde submatrix used for recovery.
    pub block_condition: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecodeReport {
    /// Recovered `G 1_P`, padding removed.
    pub sum: Vec<f64>,
    pub groups: Vec<GroupDiagnostics>,
}

impl DecodeReport {
    /// Sorted global indices of every flagged worker.
    pub fn located(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .groups
            .iter()
            .flat_map(|g| g.located.iter().copied())
            .collect();
        all.sort_unstable();
        all
    }
}

pub fn decode(
    cfg: &MechanismConfig,
    weights: &WeightSet,
    received: &EncodedMatrix,
    probes: &[ProbeVector],
) -> Result<DecodeReport, DecodeError> {
    decode_with(cfg, weights, received, probes, &DecoderOptions::default())
}

pub fn decode_with(
    cfg: &MechanismConfig,
    weights: &WeightSet,
    received: &EncodedMatrix,
    probes: &[ProbeVector],
    opts: &DecoderOptions,
) -> Result<DecodeReport, DecodeError> {
    let checks = [
        (
            "received rows",
            cfg.compressed_dim(),
            received.compressed_dim(),
        ),
        ("received columns", cfg.workers(), received.workers()),
        ("probe count", cfg.groups(), probes.len()),
        ("weight count", cfg.workers(), weights.len()),
    ];
    for (what, expected, found) in checks {
        if expected != found {
            return Err(DecodeError::DimensionMismatch {
                what,
                expected,
                found,
            });
        }
    }
    let r = cfg.redundancy();
    let per_group = opts.exec.try_map(cfg.groups(), |j| {
        let block = received.group_block(cfg, j);
        let loc = locate_group(cfg, weights, j, &block, &probes[j], opts)?;
        let trusted: Vec<usize> = (0..r).filter(|k| !loc.located.contains(k)).collect();
        let (ybar, cond) = block_decode_inner(cfg, weights, j, &block, &trusted)?;
        let diag = GroupDiagnostics {
            group: j,
            located: loc.located.iter().map(|k| j * r + k).collect(),
            locator_residual: loc.solution.residual,
            locator_rank: loc.solution.rank,
            max_honest_mismatch: loc.max_honest_mismatch,
            mismatch_threshold: loc.threshold,
            block_condition: cond,
        };
        Ok((ybar, diag))
    })?;

    let mut sum = vec![0.0; cfg.padded_dim()];
    let mut groups = Vec::with_capacity(per_group.len());
    for (ybar, diag) in per_group {
        for (acc, y) in sum.iter_mut().zip(&ybar) {
            *acc += y;
        }
        groups.push(diag);
    }
    sum.truncate(cfg.dim());
    Ok(DecodeReport { sum, groups })
}
