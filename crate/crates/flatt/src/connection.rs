//! Linear connections derived from transport laws.
//!
//! The connection of a law with frame field `F` has coordinate components
//! `Γ_k = F⁻¹ ∂F/∂x^k` (superscript as row index). Everything here is built
//! on that: covariant derivatives, the curvature matrices
//! `R_kl = -(∂_l Γ_k - ∂_k Γ_l + Γ_l Γ_k - Γ_k Γ_l)` (identically zero for
//! derived connections), torsion `T^i_{jk} = -(Γ^i_{jk} - Γ^i_{kj}) - C^i_{jk}`,
//! and parallel transport as an initial-value problem along a path.

use crate::chart::{self, Chart, Frame, FrameConnection, MatrixField};
use crate::expr::Expr;
use crate::matrix::Matrix;
use crate::numeric::{self, FdScheme};
use crate::tensor::{Tensor, TensorField, TensorType};
use crate::transport::{apply_along_axis, TensorTransport, TransportLaw};
use crate::{Error, Result, COORD_FRAME};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    DerivedFromFrameField,
    UserSupplied,
}

#[derive(Debug, Clone)]
enum GammaRep {
    /// `Γ_k` as symbolic matrix fields; exact derivatives available.
    Symbolic(Vec<MatrixField>),
    /// For `n > 4`, where the symbolic inverse is out of reach: evaluate
    /// `Γ_k(p) = F(p)⁻¹ ∂_k F(p)` with a numeric inverse and symbolic
    /// entry derivatives.
    FrameField(MatrixField),
}

#[derive(Debug, Clone)]
pub struct Connection {
    rep: GammaRep,
    provenance: Provenance,
}

/// Build the connection generated by a transport law: `Γ_k = F⁻¹ ∂_k F`.
pub fn derive_connection(law: &TransportLaw) -> Result<Connection> {
    let f = law.frame_field();
    let n = f.n();
    let rep = if n <= 4 {
        let f_inv = f.symbolic_inverse()?;
        let gammas = (1..=n).map(|k| f_inv.mul_symbolic(&f.partial(k))).collect();
        GammaRep::Symbolic(gammas)
    } else {
        GammaRep::FrameField(f.clone())
    };
    Ok(Connection {
        rep,
        provenance: Provenance::DerivedFromFrameField,
    })
}

impl Connection {
    /// A user-supplied connection from its coordinate components; `gammas[k]`
    /// is the matrix `Γ_{k+1}` with entry `(i, j) = Γ^i_{j,k+1}`.
    pub fn from_gammas(gammas: Vec<MatrixField>) -> Result<Connection> {
        let n = gammas
            .first()
            .ok_or_else(|| Error::InvalidArgument("a connection needs n >= 1 matrices".into()))?
            .n();
        if gammas.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: gammas.len(),
            });
        }
        let chart = gammas[0].chart().clone();
        if gammas.iter().any(|g| g.chart() != &chart) {
            return Err(Error::InvalidArgument(
                "all connection matrices must share one chart".into(),
            ));
        }
        Ok(Connection {
            rep: GammaRep::Symbolic(gammas),
            provenance: Provenance::UserSupplied,
        })
    }

    pub fn zero(chart: Chart) -> Connection {
        let n = chart.n();
        Connection::from_gammas(vec![MatrixField::zero(chart); n]).unwrap()
    }

    pub fn chart(&self) -> &Chart {
        match &self.rep {
            GammaRep::Symbolic(gammas) => gammas[0].chart(),
            GammaRep::FrameField(f) => f.chart(),
        }
    }

    pub fn n(&self) -> usize {
        self.chart().n()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Symbolic component fields, when this representation has them
    /// (`n <= 4` or user-supplied).
    pub fn gamma_exprs(&self) -> Option<&[MatrixField]> {
        match &self.rep {
            GammaRep::Symbolic(gammas) => Some(gammas),
            GammaRep::FrameField(_) => None,
        }
    }

    /// All matrices `Γ_k(p)`, `k = 1..=n`.
    pub fn gamma_at(&self, p: &[f64]) -> Result<Vec<Matrix>> {
        match &self.rep {
            GammaRep::Symbolic(gammas) => gammas.iter().map(|g| g.eval(p)).collect(),
            GammaRep::FrameField(f) => {
                let f_inv = f.eval_inverse(p)?;
                (1..=f.n())
                    .map(|k| Ok(f_inv.mul(&f.partial(k).eval(p)?)))
                    .collect()
            }
        }
    }

    /// A single matrix `Γ_k(p)`, `k` 1-based; cheaper than [`Connection::gamma_at`]
    /// inside integrators that only move along one axis.
    pub fn gamma_direction_at(&self, p: &[f64], k: usize) -> Result<Matrix> {
        match &self.rep {
            GammaRep::Symbolic(gammas) => gammas[k - 1].eval(p),
            GammaRep::FrameField(f) => Ok(f.eval_inverse(p)?.mul(&f.partial(k).eval(p)?)),
        }
    }

    /// The matrices `∂Γ_k/∂x^l (p)` for all `k`, exact in both
    /// representations (`∂_l Γ_k = -Γ_l Γ_k + F⁻¹ ∂²_{lk} F` in the frame
    /// field form).
    pub fn gamma_partial_at(&self, p: &[f64], l: usize) -> Result<Vec<Matrix>> {
        match &self.rep {
            GammaRep::Symbolic(gammas) => gammas.iter().map(|g| g.partial(l).eval(p)).collect(),
            GammaRep::FrameField(f) => {
                let f_inv = f.eval_inverse(p)?;
                let gamma = self.gamma_at(p)?;
                (1..=f.n())
                    .map(|k| {
                        let second = f.partial(k).partial(l).eval(p)?;
                        Ok(f_inv.mul(&second).sub(&gamma[l - 1].mul(&gamma[k - 1])))
                    })
                    .collect()
            }
        }
    }

    /// Covariant derivative `(∇_V S)(p)` for tensor fields up to type (2,2):
    /// the directional derivative of the components plus `+Γ` corrections on
    /// contravariant and `-Γ` corrections on covariant slots.
    pub fn covariant_derivative(&self, v: &[Expr], s: &TensorField, p: &[f64]) -> Result<Tensor> {
        let n = self.n();
        let ttype = s.ttype();
        if ttype.p > 2 || ttype.q > 2 {
            return Err(Error::UnsupportedTensorType {
                p: ttype.p,
                q: ttype.q,
                max_p: 2,
                max_q: 2,
                operation: "covariant_derivative",
            });
        }
        if v.len() != n || s.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len().max(s.n()),
            });
        }
        self.chart().require_inside(p)?;
        let v_at: Vec<f64> = v
            .iter()
            .map(|e| e.eval(p))
            .collect::<std::result::Result<_, _>>()?;
        let mut partials = Vec::with_capacity(n);
        for k in 1..=n {
            partials.push(s.partial(k).eval_at(p, COORD_FRAME)?.components().to_vec());
        }
        let s_at = s.eval_at(p, COORD_FRAME)?;
        let gammas = self.gamma_at(p)?;
        Ok(assemble_covariant(
            n,
            ttype,
            &v_at,
            &gammas,
            &partials,
            s_at.components(),
            p.to_vec(),
        ))
    }

    /// Curvature tensor `R^i_{jkl}` at `p` as a `(1,3)`-tensor with index
    /// order `(i; j, k, l)`; the matrix `R_kl` has `(i, j)` entry `R^i_{jkl}`.
    pub fn curvature_tensor(&self, p: &[f64]) -> Result<Tensor> {
        let n = self.n();
        let gamma = self.gamma_at(p)?;
        let mut dgamma = Vec::with_capacity(n); // [l][k]
        for l in 1..=n {
            dgamma.push(self.gamma_partial_at(p, l)?);
        }
        let mut components = vec![0.0; n * n * n * n];
        for k in 0..n {
            for l in 0..n {
                let r_kl = dgamma[l][k]
                    .sub(&dgamma[k][l])
                    .add(&gamma[l].mul(&gamma[k]))
                    .sub(&gamma[k].mul(&gamma[l]))
                    .scale(-1.0);
                for i in 0..n {
                    for j in 0..n {
                        components[((i * n + j) * n + k) * n + l] = r_kl.get(i, j);
                    }
                }
            }
        }
        Ok(Tensor::new(
            TensorType::new(1, 3),
            n,
            p.to_vec(),
            COORD_FRAME,
            components,
        )?)
    }

    /// Largest curvature component over the given points, with the point
    /// where it is attained.
    pub fn curvature_max(&self, points: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        let mut max = 0.0;
        let mut worst = points
            .first()
            .cloned()
            .unwrap_or_else(|| self.chart().center());
        for p in points {
            let r = self.curvature_tensor(p)?.max_abs();
            if r > max {
                max = r;
                worst = p.clone();
            }
        }
        Ok((max, worst))
    }

    /// Torsion tensor `T^i_{jk}` at `p`, antisymmetric in `(j, k)`. In the
    /// coordinate frame (`frame = None`) this is `-(Γ^i_{jk} - Γ^i_{kj})`;
    /// in an anholonomic frame the transformed components and the structure
    /// coefficients both enter.
    pub fn torsion_tensor(&self, frame: Option<&Frame>, p: &[f64]) -> Result<Tensor> {
        let n = self.n();
        match frame {
            None => {
                let gamma = self.gamma_at(p)?;
                let mut components = vec![0.0; n * n * n];
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            components[(i * n + j) * n + k] =
                                -(gamma[k].get(i, j) - gamma[j].get(i, k));
                        }
                    }
                }
                Ok(Tensor::new(
                    TensorType::new(1, 2),
                    n,
                    p.to_vec(),
                    COORD_FRAME,
                    components,
                )?)
            }
            Some(f) => {
                let fc = transform_connection(self, f)?;
                let gamma = fc.matrices_at(p)?;
                let c = f.structure_coefficients(p)?;
                let mut components = vec![0.0; n * n * n];
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            components[(i * n + j) * n + k] = -(gamma[k].get(i, j)
                                - gamma[j].get(i, k))
                                - c.component(&[i], &[j, k]);
                        }
                    }
                }
                Ok(Tensor::new(
                    TensorType::new(1, 2),
                    n,
                    p.to_vec(),
                    f.tag(),
                    components,
                )?)
            }
        }
    }

    /// Largest torsion component (coordinate frame) over the given points.
    pub fn torsion_max(&self, points: &[Vec<f64>]) -> Result<f64> {
        let mut max = 0.0f64;
        for p in points {
            max = max.max(self.torsion_tensor(None, p)?.max_abs());
        }
        Ok(max)
    }

    /// Parallel transport of `b0` along the path `γ(t)` (one expression per
    /// coordinate in the parameter `t`) from `t0` to `t1`: integrates
    /// `∇_{γ̇} B = 0` with fixed-step RK4. Supported types: (0,0), (1,0),
    /// (0,1), (1,1).
    pub fn parallel_transport_path(
        &self,
        path: &[Expr],
        t0: f64,
        t1: f64,
        b0: &Tensor,
        steps: usize,
    ) -> Result<Tensor> {
        let n = self.n();
        if path.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: path.len(),
            });
        }
        let ttype = b0.ttype();
        if ttype.p > 1 || ttype.q > 1 {
            return Err(Error::UnsupportedTensorType {
                p: ttype.p,
                q: ttype.q,
                max_p: 1,
                max_q: 1,
                operation: "parallel_transport_path",
            });
        }
        let velocity: Vec<Expr> = path.iter().map(|e| e.diff(1)).collect();
        let point_at = |t: f64| -> Result<Vec<f64>> {
            let p: Vec<f64> = path
                .iter()
                .map(|e| e.eval(&[t]))
                .collect::<std::result::Result<_, _>>()?;
            if self.chart().contains(&p) {
                Ok(p)
            } else {
                Err(Error::PathExitsChart { t, point: p })
            }
        };
        let start = point_at(t0)?;
        if b0
            .at()
            .iter()
            .zip(&start)
            .any(|(a, b)| (a - b).abs() > 1e-9)
        {
            return Err(crate::tensor::TensorError::PointMismatch {
                a: b0.at().to_vec(),
                b: start,
            }
            .into());
        }

        let rhs = |t: f64, state: &[f64]| -> Result<Vec<f64>> {
            let p = point_at(t)?;
            let gammas = self.gamma_at(&p)?;
            let mut g = Matrix::zeros(n);
            for (k, gk) in gammas.iter().enumerate() {
                let vk = velocity[k].eval(&[t])?;
                g = g.add(&gk.scale(vk));
            }
            Ok(match (ttype.p, ttype.q) {
                (0, 0) => vec![0.0],
                (1, 0) => g.mul_vec(state).iter().map(|x| -x).collect(),
                (0, 1) => g.transpose().mul_vec(state),
                (1, 1) => {
                    let b = Matrix::from_fn(n, |i, j| state[i * n + j]);
                    let gb = g.mul(&b);
                    let bg = b.mul(&g);
                    (0..n * n)
                        .map(|idx| bg.get(idx / n, idx % n) - gb.get(idx / n, idx % n))
                        .collect()
                }
                _ => unreachable!("type checked above"),
            })
        };
        let end_components = numeric::rk4_integrate(rhs, b0.components(), t0, t1, steps)?;
        let end = point_at(t1)?;
        Ok(Tensor::new(ttype, n, end, COORD_FRAME, end_components)?)
    }
}

/// Transform coordinate-frame connection components into `frame` (the
/// symbolic form of the transformation law; needs symbolic components and
/// `n <= 4`).
pub fn transform_connection(conn: &Connection, frame: &Frame) -> Result<FrameConnection> {
    let gammas = conn
        .gamma_exprs()
        .ok_or(Error::SymbolicInversionUnsupported { n: conn.n() })?;
    chart::transform_components(gammas, frame)
}

/// Max `|∇(L_y A0)|` over 50 lattice points and all coordinate directions:
/// the covariant derivative of a transported field must vanish. The extended
/// field is only pointwise evaluable, so its component derivatives come from
/// the Richardson finite-difference oracle (base step 1e-4).
pub fn check_annihilation(
    law: &TransportLaw,
    conn: &Connection,
    y: &[f64],
    a0: &Tensor,
) -> Result<f64> {
    let field = law.extend(y, a0)?;
    let n = law.chart().n();
    let ttype = a0.ttype();
    let scheme = numeric::default_scheme();
    let points = law.chart().sample_points(50, chart::DEFAULT_SEED);
    let mut worst = 0.0f64;
    for p in &points {
        let s_at = field.at(p)?;
        let mut partials = Vec::with_capacity(n);
        for k in 1..=n {
            partials.push(fd_field_partial(&field, p, k, &scheme)?);
        }
        let gammas = conn.gamma_at(p)?;
        for dir in 0..n {
            let mut v = vec![0.0; n];
            v[dir] = 1.0;
            let nabla = assemble_covariant(
                n,
                ttype,
                &v,
                &gammas,
                &partials,
                s_at.components(),
                p.clone(),
            );
            worst = worst.max(nabla.max_abs());
        }
    }
    Ok(worst)
}

/// Componentwise Richardson central difference of a pointwise-evaluable
/// tensor field.
fn fd_field_partial(
    field: &crate::transport::ExtendedField,
    p: &[f64],
    k: usize,
    scheme: &FdScheme,
) -> Result<Vec<f64>> {
    let axis = k - 1;
    let central = |h: f64| -> Result<Vec<f64>> {
        let mut hi = p.to_vec();
        let mut lo = p.to_vec();
        hi[axis] += h;
        lo[axis] -= h;
        let t_hi = field.at(&hi)?;
        let t_lo = field.at(&lo)?;
        Ok(t_hi
            .components()
            .iter()
            .zip(t_lo.components())
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect())
    };
    if scheme.richardson {
        let d_h = central(scheme.h)?;
        let d_h2 = central(scheme.h / 2.0)?;
        Ok(d_h
            .iter()
            .zip(&d_h2)
            .map(|(a, b)| (4.0 * b - a) / 3.0)
            .collect())
    } else {
        central(scheme.h)
    }
}

/// Shared assembly of the covariant-derivative component formula from
/// evaluated pieces: `Σ_k V^k ∂_k S` plus `+Γ`/`-Γ` slot corrections.
fn assemble_covariant(
    n: usize,
    ttype: TensorType,
    v_at: &[f64],
    gammas: &[Matrix],
    partials: &[Vec<f64>],
    s_components: &[f64],
    at: Vec<f64>,
) -> Tensor {
    let count = ttype.component_count(n);
    let mut result = vec![0.0; count];
    for (k, partial) in partials.iter().enumerate() {
        for (slot, value) in result.iter_mut().zip(partial) {
            *slot += v_at[k] * value;
        }
    }
    if ttype.rank() > 0 {
        // direction-contracted connection matrix G = Σ_k V^k Γ_k
        let mut g = Matrix::zeros(n);
        for (k, gk) in gammas.iter().enumerate() {
            g = g.add(&gk.scale(v_at[k]));
        }
        let gt = g.transpose();
        for axis in 0..ttype.p {
            let mut corrected = s_components.to_vec();
            apply_along_axis(&mut corrected, n, ttype.rank(), axis, &g);
            for (slot, value) in result.iter_mut().zip(&corrected) {
                *slot += value;
            }
        }
        for axis in 0..ttype.q {
            let mut corrected = s_components.to_vec();
            apply_along_axis(&mut corrected, n, ttype.rank(), ttype.p + axis, &gt);
            for (slot, value) in result.iter_mut().zip(&corrected) {
                *slot -= value;
            }
        }
    }
    Tensor::new(ttype, n, at, COORD_FRAME, result).expect("assembled components are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::chart::DEFAULT_SEED;
    use crate::expr::parse_expr;
    use crate::fieldgen;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_law_has_zero_connection() {
        let conn = derive_connection(&catalog::identity()).unwrap();
        for p in conn.chart().sample_points(10, DEFAULT_SEED) {
            for g in conn.gamma_at(&p).unwrap() {
                assert_eq!(g.max_abs(), 0.0);
            }
        }
    }

    #[test]
    fn diag_exp_connection_components() {
        let conn = derive_connection(&catalog::diag_exp()).unwrap();
        for p in conn.chart().sample_points(20, DEFAULT_SEED) {
            let g = conn.gamma_at(&p).unwrap();
            let expected1 = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
            let expected2 = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]);
            assert!(g[0].max_abs_diff(&expected1) < 1e-12);
            assert!(g[1].max_abs_diff(&expected2) < 1e-12);
        }
    }

    #[test]
    fn rotation_connection_is_constant_generator() {
        let conn = derive_connection(&catalog::rotation()).unwrap();
        let j = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        for p in conn.chart().sample_points(20, DEFAULT_SEED) {
            let g = conn.gamma_at(&p).unwrap();
            assert!(g[0].max_abs_diff(&j) < 1e-12);
            assert!(g[1].max_abs() < 1e-12);
        }
    }

    /// Finite-difference oracle for `Γ_k(x) = ∂H(x,y)/∂y^k |_{y=x}`.
    #[test]
    fn derived_connection_matches_transport_matrix_derivative() {
        for law in catalog::all() {
            let conn = derive_connection(&law).unwrap();
            let n = law.chart().n();
            for p in law.chart().sample_points(10, DEFAULT_SEED) {
                let gammas = conn.gamma_at(&p).unwrap();
                for k in 0..n {
                    let fd = Matrix::from_fn(n, |i, j| {
                        let h = 1e-5;
                        let mut hi = p.clone();
                        let mut lo = p.clone();
                        hi[k] += h;
                        lo[k] -= h;
                        // H(p, y) = transport matrix from y to p
                        let plus = law.transport_matrix(&hi, &p).unwrap();
                        let minus = law.transport_matrix(&lo, &p).unwrap();
                        (plus.get(i, j) - minus.get(i, j)) / (2.0 * h)
                    });
                    assert!(
                        gammas[k].max_abs_diff(&fd) < 1e-6,
                        "law {} direction {k} at {p:?}",
                        law.label()
                    );
                }
            }
        }
    }

    #[test]
    fn zero_connection_on_constant_field_gives_zero() {
        let chart = Chart::symmetric(2, 2.0);
        let conn = Connection::zero(chart.clone());
        let s = TensorField::constant(&Tensor::vector(vec![1.0, 2.0], vec![0.0, 0.0]));
        let v = vec![Expr::one(), Expr::zero()];
        let d = conn.covariant_derivative(&v, &s, &[0.5, -0.5]).unwrap();
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn zero_connection_reduces_to_directional_derivative() {
        let chart = Chart::symmetric(2, 4.0);
        let conn = Connection::zero(chart);
        let s = TensorField::scalar(2, parse_expr("x1^2", 2).unwrap());
        let v = vec![Expr::one(), Expr::zero()];
        let d = conn.covariant_derivative(&v, &s, &[3.0, 0.0]).unwrap();
        assert!((d.scalar_value() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn diag_exp_connection_corrects_constant_vector_field() {
        let conn = derive_connection(&catalog::diag_exp()).unwrap();
        let s = TensorField::constant(&Tensor::vector(vec![1.0, 0.0], vec![0.0, 0.0]));
        let v = vec![Expr::one(), Expr::zero()];
        let d = conn.covariant_derivative(&v, &s, &[0.0, 0.0]).unwrap();
        assert!((d.components()[0] - 1.0).abs() < 1e-12);
        assert!(d.components()[1].abs() < 1e-12);
    }

    #[test]
    fn covariant_derivative_rejects_large_types() {
        let conn = Connection::zero(Chart::symmetric(2, 1.0));
        let ttype = TensorType::new(3, 0);
        let s = TensorField::new(ttype, 2, vec![Expr::zero(); 8]).unwrap();
        assert!(matches!(
            conn.covariant_derivative(&[Expr::one(), Expr::zero()], &s, &[0.0, 0.0]),
            Err(Error::UnsupportedTensorType { .. })
        ));
    }

    /// Richardson oracle for the defining limit of the derived connection:
    /// `(L_{x_ε→x} S(x_ε) - S(x))/ε` extrapolated over ε = 1e-3, 1e-4.
    fn fd_limit(law: &TransportLaw, v_at: &[f64], s: &TensorField, p: &[f64]) -> Tensor {
        let quotient = |eps: f64| -> Tensor {
            let x_eps: Vec<f64> = p.iter().zip(v_at).map(|(x, v)| x + eps * v).collect();
            let s_eps = s.eval_at(&x_eps, COORD_FRAME).unwrap();
            let pulled = law.transport_tensor(&x_eps, p, &s_eps).unwrap();
            let s_p = s.eval_at(p, COORD_FRAME).unwrap();
            crate::tensor::linear_combine(1.0 / eps, &pulled, -1.0 / eps, &s_p).unwrap()
        };
        let q1 = quotient(1e-3);
        let q2 = quotient(1e-4);
        // first-order one-sided quotient: D ≈ (10 Q(ε/10) - Q(ε)) / 9
        crate::tensor::linear_combine(10.0 / 9.0, &q2, -1.0 / 9.0, &q1).unwrap()
    }

    #[test]
    fn covariant_derivative_matches_transport_limit() {
        let mut rng = fieldgen::rng(17);
        for law in [catalog::diag_exp(), catalog::rotation()] {
            let conn = derive_connection(&law).unwrap();
            let n = law.chart().n();
            for ttype in [
                TensorType::new(0, 0),
                TensorType::new(1, 0),
                TensorType::new(0, 1),
                TensorType::new(1, 1),
            ] {
                for _ in 0..5 {
                    let v = fieldgen::random_vector_field(&mut rng, n);
                    let s = fieldgen::random_tensor_field(&mut rng, ttype, n);
                    let p = law.chart().random_point(&mut rng);
                    let exact = conn.covariant_derivative(&v, &s, &p).unwrap();
                    let v_at: Vec<f64> = v.iter().map(|e| e.eval(&p).unwrap()).collect();
                    let fd = fd_limit(&law, &v_at, &s, &p);
                    assert!(
                        exact.max_abs_diff(&fd) < 1e-5,
                        "law {} type ({},{}) at {:?}: {:e}",
                        law.label(),
                        ttype.p,
                        ttype.q,
                        p,
                        exact.max_abs_diff(&fd)
                    );
                }
            }
        }
    }

    #[test]
    fn derived_connections_are_flat() {
        for law in catalog::all() {
            let conn = derive_connection(&law).unwrap();
            let points = law.chart().sample_points(100, DEFAULT_SEED);
            let (max, _) = conn.curvature_max(&points).unwrap();
            assert!(max < 1e-10, "law {}: max |R| = {max:e}", law.label());
        }
    }

    /// Independent finite-difference evaluation of the curvature formula.
    fn fd_curvature_max(conn: &Connection, p: &[f64]) -> f64 {
        let n = conn.n();
        let h = 1e-4;
        let dgamma = |l: usize, k: usize| -> Matrix {
            let mut hi = p.to_vec();
            let mut lo = p.to_vec();
            hi[l] += h;
            lo[l] -= h;
            let plus = conn.gamma_at(&hi).unwrap();
            let minus = conn.gamma_at(&lo).unwrap();
            plus[k].sub(&minus[k]).scale(1.0 / (2.0 * h))
        };
        let gamma = conn.gamma_at(p).unwrap();
        let mut max = 0.0f64;
        for k in 0..n {
            for l in 0..n {
                let r = dgamma(l, k)
                    .sub(&dgamma(k, l))
                    .add(&gamma[l].mul(&gamma[k]))
                    .sub(&gamma[k].mul(&gamma[l]))
                    .scale(-1.0);
                max = max.max(r.max_abs());
            }
        }
        max
    }

    #[test]
    fn non_flat_control_has_the_expected_curvature() {
        let conn = Connection::from_gammas(catalog::non_flat_control_gammas()).unwrap();
        let p = [1.0, 1.0];
        let r = conn.curvature_tensor(&p).unwrap();
        // R^1_{221}: the only independent nonzero component is ∓1
        assert!((r.component(&[0], &[1, 1, 0]) - (-1.0)).abs() < 1e-12);
        assert!((r.component(&[0], &[1, 0, 1]) - 1.0).abs() < 1e-12);
        assert!(r.max_abs() > 0.5);

        // cross-check the full tensor against the finite-difference assembly
        let fd_max = fd_curvature_max(&conn, &p);
        assert!((r.max_abs() - fd_max).abs() < 1e-6);
    }

    #[test]
    fn torsion_of_symmetric_connection_vanishes() {
        let chart = Chart::symmetric(2, 2.0);
        // Γ^i_{jk} symmetric in (j,k): Γ_1 = [[0, a],[0, 0]], Γ_2 = [[a, 0],[0, 0]]
        // means Γ^1_{21} = Γ^1_{12} = a.
        let a = parse_expr("x2", 2).unwrap();
        let g1 = MatrixField::from_rows(
            chart.clone(),
            vec![
                vec![Expr::zero(), a.clone()],
                vec![Expr::zero(), Expr::zero()],
            ],
        )
        .unwrap();
        let g2 = MatrixField::from_rows(
            chart.clone(),
            vec![vec![a, Expr::zero()], vec![Expr::zero(), Expr::zero()]],
        )
        .unwrap();
        let conn = Connection::from_gammas(vec![g1, g2]).unwrap();
        for p in chart.sample_points(20, DEFAULT_SEED) {
            assert!(conn.torsion_tensor(None, &p).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn diag_exp_is_torsion_free_and_shear_is_not() {
        let diag = derive_connection(&catalog::diag_exp()).unwrap();
        for p in diag.chart().sample_points(20, DEFAULT_SEED) {
            assert!(diag.torsion_tensor(None, &p).unwrap().max_abs() < 1e-12);
        }

        let shear = derive_connection(&catalog::shear()).unwrap();
        for p in shear.chart().sample_points(20, DEFAULT_SEED) {
            let t = shear.torsion_tensor(None, &p).unwrap();
            assert!((t.component(&[0], &[0, 1]) - 1.0).abs() < 1e-12); // T^1_{12}
            assert!((t.component(&[0], &[1, 0]) + 1.0).abs() < 1e-12); // T^1_{21}
            assert!(t.component(&[1], &[0, 1]).abs() < 1e-12);
            assert!(t.component(&[1], &[1, 0]).abs() < 1e-12);
        }
    }

    #[test]
    fn torsion_in_the_coordinate_frame_object_matches_the_default() {
        let conn = derive_connection(&catalog::shear()).unwrap();
        let frame = Frame::coordinate(conn.chart().clone());
        for p in conn.chart().sample_points(10, DEFAULT_SEED) {
            let plain = conn.torsion_tensor(None, &p).unwrap();
            let framed = conn.torsion_tensor(Some(&frame), &p).unwrap();
            assert!(plain.max_abs_diff(&framed) < 1e-12);
        }
    }

    #[test]
    fn torsion_transforms_as_a_tensor_under_constant_frames() {
        // constant frame: C = 0 and T'^i_{jk} = (A⁻¹)^i_m T^m_{ab} A^a_j A^b_k
        let law = catalog::shear();
        let conn = derive_connection(&law).unwrap();
        let chart = law.chart().clone();
        let a = MatrixField::from_rows(
            chart.clone(),
            vec![
                vec![Expr::constant(2.0), Expr::constant(1.0)],
                vec![Expr::zero(), Expr::constant(0.5)],
            ],
        )
        .unwrap();
        let frame = Frame::new(a.clone(), "const").unwrap();
        let n = 2;
        for p in chart.sample_points(10, DEFAULT_SEED) {
            let t = conn.torsion_tensor(None, &p).unwrap();
            let framed = conn.torsion_tensor(Some(&frame), &p).unwrap();
            let a_at = a.eval(&p).unwrap();
            let a_inv = a.eval_inverse(&p).unwrap();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut expected = 0.0;
                        for m in 0..n {
                            for x in 0..n {
                                for y in 0..n {
                                    expected += a_inv.get(i, m)
                                        * t.component(&[m], &[x, y])
                                        * a_at.get(x, j)
                                        * a_at.get(y, k);
                                }
                            }
                        }
                        let got = framed.component(&[i], &[j, k]);
                        assert!(
                            (got - expected).abs() < 1e-12,
                            "T'^{i}_{j}{k} at {p:?}: {got} vs {expected}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn transformed_connection_in_adapted_frame_vanishes() {
        let law = catalog::rotation();
        let conn = derive_connection(&law).unwrap();
        let frame = law.adapted_frame().unwrap();
        let fc = transform_connection(&conn, &frame).unwrap();
        for p in law.chart().sample_points(50, DEFAULT_SEED) {
            let comps = fc.components_at(&p).unwrap();
            let max = comps.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            assert!(max < 1e-10, "at {p:?}: {max:e}");
        }
    }

    #[test]
    fn parallel_transport_with_zero_connection_is_constant() {
        let conn = Connection::zero(Chart::symmetric(2, 2.0));
        let path = [parse_expr("x1", 1).unwrap(), Expr::zero()];
        // the path parameter is nominally "t"; any single-variable expression works
        let b0 = Tensor::vector(vec![0.3, -0.4], vec![0.0, 0.0]);
        let out = conn
            .parallel_transport_path(&path, 0.0, 1.5, &b0, 100)
            .unwrap();
        assert_eq!(out.components(), b0.components());
        assert_eq!(out.at(), &[1.5, 0.0]);
    }

    #[test]
    fn rotation_parallel_transport_matches_transport_matrix() {
        let law = catalog::rotation();
        let conn = derive_connection(&law).unwrap();
        let path = [parse_expr("x1", 1).unwrap(), Expr::zero()];
        let b0 = Tensor::vector(vec![1.0, 0.0], vec![0.0, 0.0]);
        let ode = conn
            .parallel_transport_path(&path, 0.0, FRAC_PI_2, &b0, 1000)
            .unwrap();
        assert!(ode.components()[0].abs() < 1e-8);
        assert!((ode.components()[1] + 1.0).abs() < 1e-8);

        let closed = law
            .transport_tensor(&[0.0, 0.0], &[FRAC_PI_2, 0.0], &b0)
            .unwrap();
        assert!(ode.max_abs_diff(&closed) < 1e-7);
    }

    #[test]
    fn parallel_transport_is_path_independent() {
        let law = catalog::rotation();
        let conn = derive_connection(&law).unwrap();
        let straight = [parse_expr("x1", 1).unwrap(), Expr::zero()];
        let wavy = [
            parse_expr("x1", 1).unwrap(),
            parse_expr("sin(2 * x1)", 1).unwrap(),
        ];
        let b0 = Tensor::vector(vec![0.7, 0.2], vec![0.0, 0.0]);
        let a = conn
            .parallel_transport_path(&straight, 0.0, FRAC_PI_2, &b0, 1000)
            .unwrap();
        let b = conn
            .parallel_transport_path(&wavy, 0.0, FRAC_PI_2, &b0, 1000)
            .unwrap();
        assert!(a.max_abs_diff(&b) < 1e-7);
    }

    #[test]
    fn parallel_transport_handles_covectors_and_mixed_tensors() {
        let law = catalog::diag_exp();
        let conn = derive_connection(&law).unwrap();
        let path = [parse_expr("x1", 1).unwrap(), parse_expr("x1^2", 1).unwrap()];
        let t0 = 0.0;
        let t1 = 1.0;
        let from = [0.0, 0.0];
        let to = [1.0, 1.0];

        let w0 = Tensor::covector(vec![1.0, -2.0], from.to_vec());
        let ode = conn
            .parallel_transport_path(&path, t0, t1, &w0, 1000)
            .unwrap();
        let closed = law.transport_tensor(&from, &to, &w0).unwrap();
        assert!(ode.max_abs_diff(&closed) < 1e-7);

        let m0 = Tensor::new(
            TensorType::new(1, 1),
            2,
            from.to_vec(),
            COORD_FRAME,
            vec![0.5, -1.0, 2.0, 0.25],
        )
        .unwrap();
        let ode = conn
            .parallel_transport_path(&path, t0, t1, &m0, 1000)
            .unwrap();
        let closed = law.transport_tensor(&from, &to, &m0).unwrap();
        assert!(ode.max_abs_diff(&closed) < 1e-7);
    }

    #[test]
    fn parallel_transport_rejects_paths_leaving_the_chart() {
        let conn = Connection::zero(Chart::symmetric(2, 1.0));
        let path = [parse_expr("x1", 1).unwrap(), Expr::zero()];
        let b0 = Tensor::vector(vec![1.0, 0.0], vec![0.0, 0.0]);
        assert!(matches!(
            conn.parallel_transport_path(&path, 0.0, 5.0, &b0, 10),
            Err(Error::PathExitsChart { .. })
        ));
    }

    #[test]
    fn rk4_convergence_is_fourth_order() {
        let law = catalog::rotation();
        let conn = derive_connection(&law).unwrap();
        let path = [parse_expr("x1", 1).unwrap(), Expr::zero()];
        let b0 = Tensor::vector(vec![1.0, 0.0], vec![0.0, 0.0]);
        let closed = law
            .transport_tensor(&[0.0, 0.0], &[FRAC_PI_2, 0.0], &b0)
            .unwrap();
        let err = |steps: usize| {
            conn.parallel_transport_path(&path, 0.0, FRAC_PI_2, &b0, steps)
                .unwrap()
                .max_abs_diff(&closed)
        };
        let (e1, e2, e3) = (err(10), err(20), err(40));
        let slope = ((e1 / e2).log2() + (e2 / e3).log2()) / 2.0;
        assert!((3.5..=4.5).contains(&slope), "slope {slope}");
    }

    #[test]
    fn annihilation_is_exact_for_identity() {
        let law = catalog::identity();
        let conn = derive_connection(&law).unwrap();
        let a0 = Tensor::vector(vec![1.0, -1.0], vec![0.0, 0.0]);
        let v = check_annihilation(&law, &conn, &[0.0, 0.0], &a0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn annihilation_holds_for_diag_exp_vector() {
        let law = catalog::diag_exp();
        let conn = derive_connection(&law).unwrap();
        let a0 = Tensor::vector(vec![1.0, 1.0], vec![0.0, 0.0]);
        let v = check_annihilation(&law, &conn, &[0.0, 0.0], &a0).unwrap();
        assert!(v < 1e-6, "violation {v:e}");
    }

    #[test]
    fn annihilation_holds_for_rotation_covector() {
        let law = catalog::rotation();
        let conn = derive_connection(&law).unwrap();
        let a0 = Tensor::covector(vec![0.0, 1.0], vec![0.0, 0.0]);
        let v = check_annihilation(&law, &conn, &[0.0, 0.0], &a0).unwrap();
        assert!(v < 1e-6, "violation {v:e}");
    }
}
