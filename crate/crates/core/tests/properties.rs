use byzcode::adversary::alie;
use byzcode::codec::{validate_config, CodecError, MechanismConfig, MAX_STABLE_COMPRESSION};
use byzcode::digitcodec::{pack, unpack, DigitBlock};
use byzcode::oracle::dense_encode;
use byzcode::{encode_worker, make_weights};
use proptest::prelude::*;

/// Feasible configurations with small groups.
fn feasible_config() -> impl Strategy<Value = MechanismConfig> {
    (0usize..=3, 1usize..=6, 1usize..=4, 1usize..=5).prop_map(|(s, rc, q, mult)| {
        let r = 2 * s + rc;
        validate_config(r * q, s, rc, rc * mult).expect("constructed feasible")
    })
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn feasibility_gate_matches_divisibility_rule(p in 1usize..200, s in 0usize..40, rc in 1usize..=MAX_STABLE_COMPRESSION) {
        let r = 2 * s + rc;
        let ok = r <= p && p % r == 0;
        let res = validate_config(p, s, rc, rc);
        prop_assert_eq!(res.is_ok(), ok, "P={} s={} r_c={}: {:?}", p, s, rc, res);
        match res {
            Ok(cfg) => {
                prop_assert_eq!(cfg.redundancy(), r);
                prop_assert_eq!(cfg.groups() * r, p);
            }
            Err(CodecError::Infeasible { .. }) => prop_assert!(r > p),
            Err(CodecError::NotDivisible { .. }) => prop_assert!(r <= p && p % r != 0),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn encoder_is_linear(cfg in feasible_config(), seed in any::<u64>(), alpha in -5.0f64..5.0, beta in -5.0f64..5.0) {
        let d_pad = cfg.padded_dim();
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let a: Vec<f64> = (0..d_pad).map(|_| next()).collect();
        let b: Vec<f64> = (0..d_pad).map(|_| next()).collect();
        let w = make_weights(&cfg);
        for &wk in w.as_slice() {
            let combo: Vec<f64> = a.iter().zip(&b).map(|(p, q)| alpha * p + beta * q).collect();
            let lhs = encode_worker(&combo, wk, &cfg).unwrap();
            let ea = encode_worker(&a, wk, &cfg).unwrap();
            let eb = encode_worker(&b, wk, &cfg).unwrap();
            let rhs: Vec<f64> = ea.iter().zip(&eb).map(|(p, q)| alpha * p + beta * q).collect();
            prop_assert!(rel_err(&lhs, &rhs) <= 1e-12 || rhs.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn sparse_encoder_matches_dense_kronecker(cfg in feasible_config(), vals in prop::collection::vec(-1e3f64..1e3, 70)) {
        let ybar: Vec<f64> = vals.iter().cycle().take(cfg.padded_dim()).copied().collect();
        let w = make_weights(&cfg);
        for &wk in w.as_slice() {
            let fast = encode_worker(&ybar, wk, &cfg).unwrap();
            let dense = dense_encode(&ybar, wk, &cfg).unwrap();
            prop_assert!(rel_err(&fast, &dense) <= 1e-12, "w={}", wk);
        }
    }

    #[test]
    fn equispaced_weights_have_gap_one_over_p(p in 1usize..300) {
        let cfg = validate_config(p, 0, 1, 1).unwrap();
        let w = make_weights(&cfg);
        prop_assert_eq!(w.len(), p);
        // a single weight has no pair, so the gap is infinite
        let expected = if p > 1 { 1.0 / p as f64 } else { f64::INFINITY };
        prop_assert!(w.min_gap() == expected || (w.min_gap() - expected).abs() < 1e-12);
        prop_assert!(w.as_slice().iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn alie_is_mean_at_zero_and_permutation_invariant(cols in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 1..8), z in -3.0f64..3.0, rot in 0usize..8) {
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let m = cols.len() as f64;
        let at_zero = alie(&refs, 0.0);
        for i in 0..3 {
            let mean = cols.iter().map(|c| c[i]).sum::<f64>() / m;
            prop_assert!((at_zero[i] - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
        }
        let mut rotated = refs.clone();
        rotated.rotate_left(rot % refs.len());
        rotated.reverse();
        let a = alie(&refs, z);
        let b = alie(&rotated, z);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn digit_codec_round_trips(rc in 1usize..=6, budget in 1u32..=6, blocks in 1usize..4, seed in any::<u64>()) {
        prop_assume!(rc as u32 * budget < 38);
        let limit = 10i64.pow(budget);
        let mut x = seed | 1;
        let values: Vec<i64> = (0..rc * blocks)
            .map(|_| {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                (x % limit as u64) as i64
            })
            .collect();
        let block = DigitBlock::new(&values, budget).unwrap();
        let packed = pack(&block, rc).unwrap();
        prop_assert_eq!(packed.len(), blocks);
        prop_assert_eq!(unpack(&packed, rc, budget).unwrap(), block);
    }
}
