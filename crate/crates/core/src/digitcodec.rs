//! Decimal digit interleaving.
//!
//! `pack` squeezes `r_c` non-negative integers into one by writing digit `j`
//! of the `l`-th input (1-based `l`) at decimal position `r_c * j + l` of the
//! output. `unpack` reads the digits back. Position 0 is never used.
//!
//! ```text
//! (123, 456, 789), r_c = 3
//! position: 9 8 7 6 5 4 3 2 1 0
//! digit:    7 4 1 8 5 2 9 6 3 0   -> 7418529630
//! ```
//!
//! This shows that any encoder can be compressed losslessly by `r_c` if one
//! allows irregular (digit-level) maps. It is not used by the main pipeline.

use thiserror::Error;

/// Decimal digits that fit in a `u128`.
const MAX_OUTPUT_DIGITS: u32 = 38;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DigitError {
    #[error("negative input {0}")]
    NegativeInput(i64),
    #[error("value {value} has more than {budget} digits")]
    DigitOverflow { value: u128, budget: u32 },
    #[error("r_c = {compression} with {budget}-digit values needs more than {MAX_OUTPUT_DIGITS} output digits")]
    CapacityExceeded { compression: usize, budget: u32 },
    #[error("block length {len} is not a multiple of r_c = {compression}")]
    LengthNotDivisible { len: usize, compression: usize },
    #[error("compression ratio must be positive")]
    ZeroCompression,
    #[error("{0} is not the image of any packed block (nonzero units digit)")]
    InvalidPacked(u128),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitBlock {
    values: Vec<u64>,
    digit_budget: u32,
}

impl DigitBlock {
    pub fn new(values: &[i64], digit_budget: u32) -> Result<Self, DigitError> {
        let limit = 10u128.checked_pow(digit_budget).unwrap_or(u128::MAX);
        let values = values
            .iter()
            .map(|&v| {
                if v < 0 {
                    return Err(DigitError::NegativeInput(v));
                }
                if v as u128 >= limit {
                    return Err(DigitError::DigitOverflow {
                        value: v as u128,
                        budget: digit_budget,
                    });
                }
                Ok(v as u64)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            values,
            digit_budget,
        })
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn digit_budget(&self) -> u32 {
        self.digit_budget
    }
}

fn check_capacity(compression: usize, budget: u32) -> Result<(), DigitError> {
    if compression == 0 {
        return Err(DigitError::ZeroCompression);
    }
    let digits = (compression as u128) * budget as u128 + 1;
    if digits > MAX_OUTPUT_DIGITS as u128 {
        return Err(DigitError::CapacityExceeded {
            compression,
            budget,
        });
    }
    Ok(())
}

pub fn pack(xs: &DigitBlock, compression: usize) -> Result<Vec<u128>, DigitError> {
    check_capacity(compression, xs.digit_budget)?;
    if !xs.values.len().is_multiple_of(compression) {
        return Err(DigitError::LengthNotDivisible {
            len: xs.values.len(),
            compression,
        });
    }
    Ok(xs
        .values
        .chunks_exact(compression)
        .map(|chunk| {
            let mut out = 0u128;
            for (l, &x) in chunk.iter().enumerate() {
                let mut rest = x;
                let mut j = 0u32;
                while rest > 0 {
                    let digit = (rest % 10) as u128;
                    let pos = compression as u32 * j + l as u32 + 1;
                    out += digit * 10u128.pow(pos);
                    rest /= 10;
                    j += 1;
                }
            }
            out
        })
        .collect())
}

pub fn unpack(
    ys: &[u128],
    compression: usize,
    digit_budget: u32,
) -> Result<DigitBlock, DigitError> {
    check_capacity(compression, digit_budget)?;
    let limit = 10u128.pow(compression as u32 * digit_budget + 1);
    let mut values = Vec::with_capacity(ys.len() * compression);
    for &y in ys {
        if y >= limit {
            return Err(DigitError::DigitOverflow {
                value: y,
                budget: digit_budget,
            });
        }
        if y % 10 != 0 {
            return Err(DigitError::InvalidPacked(y));
        }
        let mut chunk = vec![0u64; compression];
        let mut rest = y / 10;
        let mut pos = 0usize;
        while rest > 0 {
            let digit = (rest % 10) as u64;
            let l = pos % compression;
            let j = (pos / compression) as u32;
            chunk[l] += digit * 10u64.pow(j);
            rest /= 10;
            pos += 1;
        }
        values.extend(chunk);
    }
    Ok(DigitBlock {
        values,
        digit_budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_follows_digit_law() {
        let x = DigitBlock::new(&[123, 456, 789], 4).unwrap();
        assert_eq!(pack(&x, 3).unwrap(), vec![7_418_529_630]);
        assert_eq!(
            unpack(&[7_418_529_630], 3, 4).unwrap().values(),
            &[123, 456, 789]
        );
    }

    #[test]
    fn published_example_value_is_not_in_digit_law_image() {
        // 9638529630 repeats the units digits in the top three places; under
        // the positional law it decodes to different inputs
        assert_eq!(
            unpack(&[9_638_529_630], 3, 4).unwrap().values(),
            &[323, 656, 989]
        );
    }

    #[test]
    fn zeros_and_identity() {
        let z = DigitBlock::new(&[0, 0, 0, 0], 3).unwrap();
        assert_eq!(pack(&z, 2).unwrap(), vec![0, 0]);
        assert_eq!(unpack(&[0, 0], 2, 3).unwrap(), z);
        let x = DigitBlock::new(&[5, 907, 12], 3).unwrap();
        let packed = pack(&x, 1).unwrap();
        assert_eq!(packed, vec![50, 9070, 120]);
        assert_eq!(unpack(&packed, 1, 3).unwrap(), x);
    }

    #[test]
    fn errors() {
        assert_eq!(
            DigitBlock::new(&[-1], 2).unwrap_err(),
            DigitError::NegativeInput(-1)
        );
        assert!(matches!(
            DigitBlock::new(&[100], 2),
            Err(DigitError::DigitOverflow { .. })
        ));
        let x = DigitBlock::new(&[1, 2, 3], 2).unwrap();
        assert!(matches!(
            pack(&x, 2),
            Err(DigitError::LengthNotDivisible { .. })
        ));
        assert!(matches!(pack(&x, 0), Err(DigitError::ZeroCompression)));
        let wide = DigitBlock::new(&[1; 10], 4).unwrap();
        assert!(matches!(
            pack(&wide, 10),
            Err(DigitError::CapacityExceeded { .. })
        ));
        assert_eq!(
            unpack(&[11], 2, 2).unwrap_err(),
            DigitError::InvalidPacked(11)
        );
        assert!(matches!(
            unpack(&[100_000], 2, 2),
            Err(DigitError::DigitOverflow { .. })
        ));
    }
}
