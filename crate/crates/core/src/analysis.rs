//! Size of the tree-structure space.

use num_bigint::BigUint;

/// Upper bound on the number of distinct depth-`depth` trees over `n`
/// samples and `p` features:
///
/// `p^(2^D − 1) · Π_{t=0}^{D−1} (⌊n / 2^t⌋ − 1)^(2^t)`.
///
/// A level whose factor is not positive makes the product zero.
pub fn struct_count_upper_bound(n: u64, p: u64, depth: u32) -> BigUint {
    let internal = (1u64 << depth) - 1;
    let mut out = BigUint::from(p).pow(internal as u32);
    for t in 0..depth {
        let per_node = (n >> t).saturating_sub(1);
        if per_node == 0 {
            return BigUint::ZERO;
        }
        out *= BigUint::from(per_node).pow(1u32 << t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(struct_count_upper_bound(1030, 8, 2), BigUint::from(139_191_134_208u64));
        assert_eq!(struct_count_upper_bound(3, 2, 1), BigUint::from(4u32));
        assert_eq!(struct_count_upper_bound(8, 2, 2), BigUint::from(504u32));
    }

    #[test]
    fn degenerate_levels_give_zero() {
        assert_eq!(struct_count_upper_bound(1, 3, 1), BigUint::ZERO);
        assert_eq!(struct_count_upper_bound(3, 2, 2), BigUint::ZERO);
        assert_eq!(struct_count_upper_bound(100, 0, 2), BigUint::ZERO);
    }

    #[test]
    fn depth_zero_is_one() {
        assert_eq!(struct_count_upper_bound(10, 4, 0), BigUint::from(1u32));
    }

    #[test]
    fn large_inputs_do_not_overflow() {
        let b = struct_count_upper_bound(2_000_000, 7, 4);
        assert!(b.bits() > 200);
    }
}
