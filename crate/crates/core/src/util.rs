//! Deterministic reductions and small shared helpers.
//!
//! Every sum that feeds a reported number goes through [`pairwise_sum`], whose
//! reduction tree depends only on the slice length. Parallel code fills value
//! buffers by index and then reduces sequentially, so results are bit-identical
//! for any thread count.

use rayon::prelude::*;

const PAIRWISE_LEAF: usize = 64;

/// Pairwise (cascade) summation with a shape fixed by `xs.len()`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_LEAF {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Weighted dot product `Σ w_i a_i b_i` with deterministic reduction.
pub fn dot_w(a: &[f64], b: &[f64], w: &[f64], buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(a.iter().zip(b).zip(w).map(|((x, y), wi)| wi * x * y));
    pairwise_sum(buf)
}

/// Fill `out[i] = f(i)` in parallel; content is index-deterministic.
pub fn par_fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    out.par_iter_mut().enumerate().for_each(|(i, slot)| {
        *slot = f(i);
    });
}

/// Map `0..n` through `f` into a fresh vector, in parallel.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send + Default + Clone,
    F: Fn(usize) -> T + Sync,
{
    let mut out = vec![T::default(); n];
    par_fill(&mut out, f);
    out
}

/// Principal value of an angle in (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a % (2.0 * std::f64::consts::PI);
    if x > std::f64::consts::PI {
        x -= 2.0 * std::f64::consts::PI;
    } else if x <= -std::f64::consts::PI {
        x += 2.0 * std::f64::consts::PI;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn pairwise_is_shape_stable() {
        let xs: Vec<f64> = (0..10_001).map(|i| ((i * 37) % 101) as f64 * 1e-3).collect();
        let a = pairwise_sum(&xs);
        let b = pairwise_sum(&xs);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn wrap_angle_principal_branch() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(0.3) - 0.3).abs() < 1e-15);
    }
}
