//! The flat linear transport engine.
//!
//! A [`TransportLaw`] is an invertible matrix field `F` over the chart. It
//! moves tensors from `x` to `y` through the matrix `H(y,x) = F(y)⁻¹ F(x)`:
//! contravariant slots contract with `H(y,x)`, covariant slots with the
//! inverse components, so that scalars and complete contractions are
//! preserved. `F` is determined by the transport only up to a constant left
//! factor ([`TransportLaw::gauge_left_multiply`]).

use crate::chart::{Chart, Frame, MatrixField, DEFAULT_SEED, INVERTIBILITY_TOL, SAMPLE_COUNT};
use crate::fieldgen;
use crate::matrix::Matrix;
use crate::tensor::{self, Tensor, TensorType};
use crate::{Error, Result, COORD_FRAME};
use rand::Rng;
use serde::Serialize;

/// Anything that moves coordinate-frame tensors between chart points through
/// a two-point matrix. Implemented by [`TransportLaw`] and by the
/// deliberately broken [`CorruptedTransport`] used as a negative control.
pub trait TensorTransport {
    fn chart(&self) -> &Chart;

    /// The matrix `H(to, from)` acting on vector components.
    fn transport_matrix(&self, from: &[f64], to: &[f64]) -> Result<Matrix>;

    /// Transport a tensor attached at `from` (coordinate-frame components).
    fn transport_tensor(&self, from: &[f64], to: &[f64], t: &Tensor) -> Result<Tensor> {
        if t.at() != from {
            return Err(tensor::TensorError::PointMismatch {
                a: t.at().to_vec(),
                b: from.to_vec(),
            }
            .into());
        }
        if t.frame() != COORD_FRAME {
            return Err(tensor::TensorError::FrameMismatch {
                a: t.frame().to_string(),
                b: COORD_FRAME.to_string(),
            }
            .into());
        }
        let h = self.transport_matrix(from, to)?;
        push_tensor(&h, t, to)
    }
}

/// Apply the transport matrix `h` to every contravariant slot of `t` and its
/// inverse (transposed pairing) to every covariant slot; reattach at `to`.
pub fn push_tensor(h: &Matrix, t: &Tensor, to: &[f64]) -> Result<Tensor> {
    let ttype = t.ttype();
    let n = t.n();
    let mut components = t.components().to_vec();
    if ttype.q > 0 {
        let det = h.det();
        let k = h.inverse().ok_or(Error::Singular {
            point: to.to_vec(),
            det,
        })?;
        let kt = k.transpose();
        for slot in 0..ttype.q {
            apply_along_axis(&mut components, n, ttype.rank(), ttype.p + slot, &kt);
        }
    }
    for slot in 0..ttype.p {
        apply_along_axis(&mut components, n, ttype.rank(), slot, h);
    }
    Ok(Tensor::new(ttype, n, to.to_vec(), COORD_FRAME, components)?)
}

/// In-place contraction of `m` with one axis of a dense rank-`rank` array.
pub(crate) fn apply_along_axis(
    components: &mut Vec<f64>,
    n: usize,
    rank: usize,
    axis: usize,
    m: &Matrix,
) {
    let axis_stride = n.pow((rank - 1 - axis) as u32);
    let outer = components.len() / (axis_stride * n);
    let mut out = vec![0.0; components.len()];
    for hi in 0..outer {
        for lo in 0..axis_stride {
            let base = hi * n * axis_stride + lo;
            for k in 0..n {
                let mut sum = 0.0;
                for i in 0..n {
                    sum += m.get(k, i) * components[base + i * axis_stride];
                }
                out[base + k * axis_stride] = sum;
            }
        }
    }
    *components = out;
}

/// A flat linear transport generated by an invertible frame field `F`.
#[derive(Debug, Clone)]
pub struct TransportLaw {
    f: MatrixField,
    label: String,
}

impl TransportLaw {
    /// Checks `|det F| > 1e-9` on the sample lattice and that `H(x,x)` is the
    /// identity to within 1e-12 there.
    pub fn new(f: MatrixField, label: impl Into<String>) -> Result<TransportLaw> {
        let label = label.into();
        for p in f.chart().sample_points(SAMPLE_COUNT, DEFAULT_SEED) {
            let det = f.det_at(&p)?;
            if det.abs() <= INVERTIBILITY_TOL {
                return Err(Error::Singular { point: p, det });
            }
            let h_xx = f.eval_inverse(&p)?.mul(&f.eval(&p)?);
            let defect = h_xx.max_abs_diff(&Matrix::identity(f.n()));
            if defect > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "frame field is too ill-conditioned: H(x,x) deviates from the identity by {defect:e} at {p:?}"
                )));
            }
        }
        Ok(TransportLaw { f, label })
    }

    pub fn frame_field(&self) -> &MatrixField {
        &self.f
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Inverse-component matrix (`H(to,from)⁻¹`), the one acting on covector
    /// components.
    pub fn covariant_matrix(&self, from: &[f64], to: &[f64]) -> Result<Matrix> {
        let h = self.transport_matrix(from, to)?;
        let det = h.det();
        h.inverse().ok_or(Error::Singular {
            point: to.to_vec(),
            det,
        })
    }

    /// Replace `F` by `D·F` for a constant invertible `D`; the transport
    /// itself is unchanged.
    pub fn gauge_left_multiply(&self, d: &Matrix) -> Result<TransportLaw> {
        let det = d.det();
        if det.abs() <= INVERTIBILITY_TOL {
            return Err(Error::InvalidArgument(format!(
                "gauge matrix is singular (det = {det:e})"
            )));
        }
        TransportLaw::new(self.f.mul_constant_left(d), format!("{}|gauge", self.label))
    }

    /// The frame `E_{i'} = (F⁻¹)^i_{i'} E_i` in which transport components
    /// are Kronecker deltas. Symbolic, hence limited to `n <= 4`; use
    /// [`TransportLaw::adapted_frame_at`] for pointwise values in any
    /// dimension.
    pub fn adapted_frame(&self) -> Result<Frame> {
        Frame::new(self.f.symbolic_inverse()?, "adapted")
    }

    /// The adapted frame matrix `F(p)⁻¹` at a single point.
    pub fn adapted_frame_at(&self, p: &[f64]) -> Result<Matrix> {
        self.f.eval_inverse(p)
    }

    /// The tensor field `x ↦ L_{y→x} A0` obtained by spreading `A0` (attached
    /// at `y`) over the chart.
    pub fn extend(&self, y: &[f64], a0: &Tensor) -> Result<ExtendedField> {
        self.chart().require_inside(y)?;
        if a0.at() != y {
            return Err(tensor::TensorError::PointMismatch {
                a: a0.at().to_vec(),
                b: y.to_vec(),
            }
            .into());
        }
        Ok(ExtendedField {
            law: self.clone(),
            origin: y.to_vec(),
            a0: a0.clone(),
        })
    }
}

impl TensorTransport for TransportLaw {
    fn chart(&self) -> &Chart {
        self.f.chart()
    }

    fn transport_matrix(&self, from: &[f64], to: &[f64]) -> Result<Matrix> {
        let f_from = self.f.eval(from)?;
        let f_to_inv = self.f.eval_inverse(to)?;
        Ok(f_to_inv.mul(&f_from))
    }
}

/// Negative control: a law whose transport matrix is offset away from the
/// factorized form, breaking composition and identity.
#[derive(Debug, Clone)]
pub struct CorruptedTransport {
    inner: TransportLaw,
    offset: f64,
}

impl CorruptedTransport {
    pub fn new(inner: TransportLaw, offset: f64) -> CorruptedTransport {
        CorruptedTransport { inner, offset }
    }
}

impl TensorTransport for CorruptedTransport {
    fn chart(&self) -> &Chart {
        self.inner.chart()
    }

    fn transport_matrix(&self, from: &[f64], to: &[f64]) -> Result<Matrix> {
        let h = self.inner.transport_matrix(from, to)?;
        Ok(h.add(&Matrix::filled(h.n(), self.offset)))
    }
}

/// The tensor field `(L_y A)(x) = L_{y→x} A(y)`.
#[derive(Debug, Clone)]
pub struct ExtendedField {
    law: TransportLaw,
    origin: Vec<f64>,
    a0: Tensor,
}

impl ExtendedField {
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn ttype(&self) -> TensorType {
        self.a0.ttype()
    }

    pub fn at(&self, x: &[f64]) -> Result<Tensor> {
        self.law.transport_tensor(&self.origin, x, &self.a0)
    }
}

/// Worst observed violation of each transport axiom over seeded random
/// trials; all entries of a passing report stay below 1e-9.
#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub trials: usize,
    pub seed: u64,
    /// (2.2) `L(λA + μA') = λLA + μLA'`
    pub linearity: f64,
    /// (2.3) `L(A⊗B) = LA ⊗ LB`
    pub multiplicativity: f64,
    /// (2.4) `L ∘ C = C ∘ L`
    pub contraction: f64,
    /// (2.5) `L_{y→z} ∘ L_{x→y} = L_{x→z}`
    pub composition: f64,
    /// (2.6) `L_{x→x} = id`
    pub identity: f64,
    /// (2.7) `L_{y→x} ∘ L_{x→y} = id`, including the matrix form
    pub inverse: f64,
    /// (2.11) scalars are untouched
    pub scalar_invariance: f64,
    /// (2.13) `H · H⁻¹ = δ`
    pub matrix_inverse: f64,
}

impl AxiomReport {
    pub fn max_violation(&self) -> f64 {
        [
            self.linearity,
            self.multiplicativity,
            self.contraction,
            self.composition,
            self.identity,
            self.inverse,
            self.scalar_invariance,
            self.matrix_inverse,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_violation() < tolerance
    }
}

/// Exercise the transport axioms on random points, tensors up to type (2,2),
/// and random scalars, all drawn from a seeded generator.
pub fn check_axioms<T: TensorTransport>(law: &T, trials: usize, seed: u64) -> Result<AxiomReport> {
    assert!(trials >= 1);
    let chart = law.chart();
    let n = chart.n();
    let mut rng = fieldgen::rng(seed);
    let mut report = AxiomReport {
        trials,
        seed,
        linearity: 0.0,
        multiplicativity: 0.0,
        contraction: 0.0,
        composition: 0.0,
        identity: 0.0,
        inverse: 0.0,
        scalar_invariance: 0.0,
        matrix_inverse: 0.0,
    };

    for _ in 0..trials {
        let x = chart.random_point(&mut rng);
        let y = chart.random_point(&mut rng);
        let z = chart.random_point(&mut rng);

        // (2.2) linearity
        let ttype = fieldgen::random_type(&mut rng, 2, 2);
        let a = fieldgen::random_tensor(&mut rng, ttype, n, x.clone());
        let a2 = fieldgen::random_tensor(&mut rng, ttype, n, x.clone());
        let lambda = rng.gen_range(-2.0..=2.0);
        let mu = rng.gen_range(-2.0..=2.0);
        let lhs = law.transport_tensor(&x, &y, &tensor::linear_combine(lambda, &a, mu, &a2)?)?;
        let rhs = tensor::linear_combine(
            lambda,
            &law.transport_tensor(&x, &y, &a)?,
            mu,
            &law.transport_tensor(&x, &y, &a2)?,
        )?;
        report.linearity = report.linearity.max(lhs.max_abs_diff(&rhs));

        // (2.3) multiplicativity, with the product capped at type (2,2)
        let p1 = rng.gen_range(0..=2);
        let q1 = rng.gen_range(0..=2);
        let b1 = fieldgen::random_tensor(&mut rng, TensorType::new(p1, q1), n, x.clone());
        let t2 = TensorType::new(rng.gen_range(0..=2 - p1), rng.gen_range(0..=2 - q1));
        let b2 = fieldgen::random_tensor(&mut rng, t2, n, x.clone());
        let lhs = law.transport_tensor(&x, &y, &tensor::tensor_product(&b1, &b2)?)?;
        let rhs = tensor::tensor_product(
            &law.transport_tensor(&x, &y, &b1)?,
            &law.transport_tensor(&x, &y, &b2)?,
        )?;
        report.multiplicativity = report.multiplicativity.max(lhs.max_abs_diff(&rhs));

        // (2.4) contraction commutes
        let ct = TensorType::new(rng.gen_range(1..=2), rng.gen_range(1..=2));
        let c = fieldgen::random_tensor(&mut rng, ct, n, x.clone());
        let upper = rng.gen_range(1..=ct.p);
        let lower = rng.gen_range(1..=ct.q);
        let lhs = law.transport_tensor(&x, &y, &tensor::contract(&c, upper, lower)?)?;
        let rhs = tensor::contract(&law.transport_tensor(&x, &y, &c)?, upper, lower)?;
        report.contraction = report.contraction.max(lhs.max_abs_diff(&rhs));

        // (2.5) composition through y
        let via = law.transport_tensor(&y, &z, &law.transport_tensor(&x, &y, &a)?)?;
        let direct = law.transport_tensor(&x, &z, &a)?;
        report.composition = report.composition.max(via.max_abs_diff(&direct));

        // (2.6) identity
        let at_x = law.transport_tensor(&x, &x, &a)?;
        report.identity = report.identity.max(at_x.max_abs_diff(&a));

        // (2.7) inverse, tensor and matrix form
        let back = law.transport_tensor(&y, &x, &law.transport_tensor(&x, &y, &a)?)?;
        let mut inv_violation = back.max_abs_diff(&a);
        let h_xy = law.transport_matrix(&y, &x)?;
        let h_yx = law.transport_matrix(&x, &y)?;
        inv_violation = inv_violation.max(h_xy.mul(&h_yx).max_abs_diff(&Matrix::identity(n)));
        report.inverse = report.inverse.max(inv_violation);

        // (2.11) scalars
        let s = Tensor::scalar(rng.gen_range(-5.0..=5.0), x.clone());
        let moved = law.transport_tensor(&x, &y, &s)?;
        report.scalar_invariance = report
            .scalar_invariance
            .max((moved.scalar_value() - s.scalar_value()).abs());

        // (2.13) H · H⁻¹ = δ
        if let Some(k) = h_yx.inverse() {
            report.matrix_inverse = report
                .matrix_inverse
                .max(h_yx.mul(&k).max_abs_diff(&Matrix::identity(n)));
        } else {
            report.matrix_inverse = f64::INFINITY;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use std::f64::consts::{FRAC_PI_2, LN_2};

    #[test]
    fn transport_matrix_is_identity_at_equal_points() {
        for law in catalog::all() {
            let p = law.chart().center();
            let h = law.transport_matrix(&p, &p).unwrap();
            assert!(h.max_abs_diff(&Matrix::identity(law.chart().n())) < 1e-14);
        }
    }

    #[test]
    fn diag_exp_transport_matrix() {
        let law = catalog::diag_exp();
        let h = law.transport_matrix(&[0.0, 0.0], &[LN_2, 0.0]).unwrap();
        assert!((h.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((h.get(1, 1) - 1.0).abs() < 1e-12);
        assert!(h.get(0, 1).abs() < 1e-15 && h.get(1, 0).abs() < 1e-15);
    }

    #[test]
    fn rotation_transport_matrix_is_backwards_rotation() {
        let law = catalog::rotation();
        let h = law
            .transport_matrix(&[0.0, 0.0], &[FRAC_PI_2, 0.0])
            .unwrap();
        let expected = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert!(h.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn scalars_ride_along_unchanged() {
        let law = catalog::rotation();
        let s = Tensor::scalar(7.0, vec![0.0, 0.0]);
        let moved = law.transport_tensor(&[0.0, 0.0], &[1.0, 0.5], &s).unwrap();
        assert_eq!(moved.scalar_value(), 7.0);
        assert_eq!(moved.at(), &[1.0, 0.5]);
    }

    #[test]
    fn diag_exp_vector_transport() {
        let law = catalog::diag_exp();
        let v = Tensor::vector(vec![2.0, 3.0], vec![0.0, 0.0]);
        let moved = law.transport_tensor(&[0.0, 0.0], &[LN_2, 0.0], &v).unwrap();
        assert!((moved.components()[0] - 1.0).abs() < 1e-12);
        assert!((moved.components()[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_covector_transport_preserves_pairing() {
        let law = catalog::rotation();
        let from = [0.0, 0.0];
        let to = [FRAC_PI_2, 0.0];
        let w = Tensor::covector(vec![1.0, 0.0], from.to_vec());
        let moved = law.transport_tensor(&from, &to, &w).unwrap();
        assert!(moved.components()[0].abs() < 1e-12);
        assert!((moved.components()[1] + 1.0).abs() < 1e-12);

        // pairing ⟨Lω, Lv⟩ = ⟨ω, v⟩
        let v = Tensor::vector(vec![0.3, -0.8], from.to_vec());
        let lv = law.transport_tensor(&from, &to, &v).unwrap();
        let before: f64 = w
            .components()
            .iter()
            .zip(v.components())
            .map(|(a, b)| a * b)
            .sum();
        let after: f64 = moved
            .components()
            .iter()
            .zip(lv.components())
            .map(|(a, b)| a * b)
            .sum();
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn transport_rejects_detached_tensor() {
        let law = catalog::identity();
        let v = Tensor::vector(vec![1.0, 0.0], vec![0.5, 0.5]);
        assert!(law.transport_tensor(&[0.0, 0.0], &[1.0, 1.0], &v).is_err());
    }

    #[test]
    fn axioms_hold_exactly_for_the_identity_law() {
        let report = check_axioms(&catalog::identity(), 25, 42).unwrap();
        assert_eq!(report.max_violation(), 0.0);
    }

    #[test]
    fn axioms_hold_for_diag_exp() {
        let report = check_axioms(&catalog::diag_exp(), 100, 42).unwrap();
        assert!(report.passes(1e-9), "{report:?}");
    }

    #[test]
    fn corrupted_law_breaks_composition() {
        let law = CorruptedTransport::new(catalog::diag_exp(), 0.01);
        let report = check_axioms(&law, 100, 42).unwrap();
        assert!(report.composition > 1e-3, "{report:?}");
        assert!(!report.passes(1e-9));
    }

    #[test]
    fn gauge_left_multiply_keeps_transport() {
        let law = catalog::diag_exp();
        let swap = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let swapped = law.gauge_left_multiply(&swap).unwrap();
        let doubled = law
            .gauge_left_multiply(&Matrix::identity(2).scale(2.0))
            .unwrap();
        for (x, y) in law.chart().sample_pairs(50, DEFAULT_SEED) {
            let h = law.transport_matrix(&x, &y).unwrap();
            assert!(h.max_abs_diff(&swapped.transport_matrix(&x, &y).unwrap()) < 1e-10);
            assert!(h.max_abs_diff(&doubled.transport_matrix(&x, &y).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn gauge_rejects_singular_multiplier() {
        let law = catalog::identity();
        let d = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(law.gauge_left_multiply(&d).is_err());
    }

    #[test]
    fn adapted_frame_of_identity_is_coordinate_frame() {
        let law = catalog::identity();
        let frame = law.adapted_frame().unwrap();
        let m = frame.matrix().eval(&[0.3, 0.4]).unwrap();
        assert!(m.max_abs_diff(&Matrix::identity(2)) < 1e-15);
    }

    #[test]
    fn adapted_frame_vectors_are_transport_invariant() {
        for law in [catalog::rotation(), catalog::shear()] {
            let frame = law.adapted_frame().unwrap();
            for (x, y) in law.chart().sample_pairs(50, DEFAULT_SEED) {
                let ex = frame.matrix().eval(&x).unwrap();
                let ey = frame.matrix().eval(&y).unwrap();
                let h = law.transport_matrix(&x, &y).unwrap();
                // transported frame components in the frame itself: E(y)⁻¹ H E(x) = δ
                let in_frame = ey.inverse().unwrap().mul(&h).mul(&ex);
                assert!(
                    in_frame.max_abs_diff(&Matrix::identity(2)) < 1e-10,
                    "law {}",
                    law.label()
                );
            }
        }
    }

    #[test]
    fn extended_field_from_identity_is_constant() {
        let law = catalog::identity();
        let a0 = Tensor::vector(vec![1.0, -2.0], vec![0.0, 0.0]);
        let field = law.extend(&[0.0, 0.0], &a0).unwrap();
        let t = field.at(&[0.7, -0.7]).unwrap();
        assert_eq!(t.components(), a0.components());
    }

    #[test]
    fn extended_field_of_diag_exp_decays() {
        // H(x, y) = diag(e^{y1-x1}, e^{y2-x2}); from the origin the field is
        // (e^{-x1}, e^{-x2}).
        let law = catalog::diag_exp();
        let a0 = Tensor::vector(vec![1.0, 1.0], vec![0.0, 0.0]);
        let field = law.extend(&[0.0, 0.0], &a0).unwrap();
        let t = field.at(&[1.0, 1.0]).unwrap();
        let e_inv = (-1.0f64).exp();
        assert!((t.components()[0] - e_inv).abs() < 1e-12);
        assert!((t.components()[1] - e_inv).abs() < 1e-12);

        // cross-check against the transport matrix at a sweep of points
        for x in law.chart().sample_points(20, DEFAULT_SEED) {
            let expected = law
                .transport_matrix(&[0.0, 0.0], &x)
                .unwrap()
                .mul_vec(a0.components());
            let got = field.at(&x).unwrap();
            assert!((got.components()[0] - expected[0]).abs() < 1e-12);
            assert!((got.components()[1] - expected[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn extended_field_at_origin_is_a0() {
        let law = catalog::diag_exp();
        let a0 = Tensor::vector(vec![0.25, -4.0], vec![0.1, 0.2]);
        let field = law.extend(&[0.1, 0.2], &a0).unwrap();
        let t = field.at(&[0.1, 0.2]).unwrap();
        assert!(t.max_abs_diff(&a0) < 1e-14);
    }
}
