//! Seeded random inputs for the verification suites: tensors with uniform
//! components, well-conditioned constant matrices, and smooth bounded
//! expression fields (trig/polynomial combinations, no singular functions).

use crate::expr::Expr;
use crate::matrix::Matrix;
use crate::tensor::{Tensor, TensorField, TensorType};
use crate::COORD_FRAME;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tensor with components uniform in `[-1, 1]`, in the coordinate frame.
pub fn random_tensor(rng: &mut impl Rng, ttype: TensorType, n: usize, at: Vec<f64>) -> Tensor {
    let components = (0..ttype.component_count(n))
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    Tensor::new(ttype, n, at, COORD_FRAME, components).expect("generated components are finite")
}

/// Random tensor type with `p <= max_p`, `q <= max_q`.
pub fn random_type(rng: &mut impl Rng, max_p: usize, max_q: usize) -> TensorType {
    TensorType::new(rng.gen_range(0..=max_p), rng.gen_range(0..=max_q))
}

/// Random constant matrix with entries in `[-1, 1]` and `|det| >= min_det`
/// (resampled until well conditioned at this scale).
pub fn random_invertible(rng: &mut impl Rng, n: usize, min_det: f64) -> Matrix {
    loop {
        let m = Matrix::from_fn(n, |_, _| rng.gen_range(-1.0..=1.0));
        if m.det().abs() >= min_det {
            return m;
        }
    }
}

/// Random smooth scalar field: a short sum of bounded terms built from
/// constants, coordinates, sines and cosines. Safe to evaluate and
/// differentiate anywhere.
pub fn random_smooth_expr(rng: &mut impl Rng, n: usize) -> Expr {
    fn var(rng: &mut impl Rng, n: usize) -> Expr {
        Expr::var(rng.gen_range(1..=n))
    }
    let mut sum = Expr::constant(rng.gen_range(-1.0..=1.0));
    let terms = rng.gen_range(2..=4);
    for _ in 0..terms {
        let c = Expr::constant(rng.gen_range(-1.0..=1.0));
        let term = match rng.gen_range(0..5) {
            0 => var(rng, n),
            1 => var(rng, n).sin(),
            2 => var(rng, n).cos(),
            3 => var(rng, n) * var(rng, n),
            _ => var(rng, n).sin() * var(rng, n).cos(),
        };
        sum = sum + c * term;
    }
    sum
}

/// Random tensor field of the given type with smooth components.
pub fn random_tensor_field(rng: &mut impl Rng, ttype: TensorType, n: usize) -> TensorField {
    let components = (0..ttype.component_count(n))
        .map(|_| random_smooth_expr(rng, n))
        .collect();
    TensorField::new(ttype, n, components).expect("component count is correct by construction")
}

/// Random smooth vector field as `n` expressions.
pub fn random_vector_field(rng: &mut impl Rng, n: usize) -> Vec<Expr> {
    (0..n).map(|_| random_smooth_expr(rng, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_reproducible() {
        let mut a = rng(9);
        let mut b = rng(9);
        let ta = random_tensor(&mut a, TensorType::new(1, 1), 2, vec![0.0, 0.0]);
        let tb = random_tensor(&mut b, TensorType::new(1, 1), 2, vec![0.0, 0.0]);
        assert_eq!(ta, tb);
    }

    #[test]
    fn smooth_fields_evaluate_and_differentiate_everywhere() {
        let mut r = rng(11);
        for _ in 0..20 {
            let e = random_smooth_expr(&mut r, 3);
            let d = e.diff(2);
            for p in [[0.0, 0.0, 0.0], [10.0, -7.0, 3.3], [-100.0, 5.0, 0.1]] {
                e.eval(&p).unwrap();
                d.eval(&p).unwrap();
            }
        }
    }

    #[test]
    fn random_invertible_meets_det_floor() {
        let mut r = rng(5);
        for _ in 0..20 {
            let m = random_invertible(&mut r, 3, 0.1);
            assert!(m.det().abs() >= 0.1);
        }
    }
}
