//! Dense `(p,q)`-tensors attached to a point and a frame.
//!
//! Components are stored flat in row-major order with all contravariant
//! indices leading: a `(p,q)`-tensor in dimension `n` holds `n^(p+q)` entries
//! indexed `(i1…ip, j1…jq)`. The same convention is used everywhere in the
//! crate.

use crate::expr::Expr;
use crate::COORD_FRAME;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TensorError {
    #[error("component count {got} does not match n^(p+q) = {expected}")]
    ComponentCount { expected: usize, got: usize },
    #[error("tensor has a non-finite component at flat index {0}")]
    NonFinite(usize),
    #[error("tensors are attached to different points: {a:?} vs {b:?}")]
    PointMismatch { a: Vec<f64>, b: Vec<f64> },
    #[error("tensors are expressed in different frames: '{a}' vs '{b}'")]
    FrameMismatch { a: String, b: String },
    #[error("tensor types differ: ({0},{1}) vs ({2},{3})")]
    TypeMismatch(usize, usize, usize, usize),
    #[error("dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("contraction slot out of range: upper {upper} of {p}, lower {lower} of {q}")]
    BadSlot {
        upper: usize,
        lower: usize,
        p: usize,
        q: usize,
    },
    #[error("operation requires at least one upper and one lower slot, tensor is ({0},{1})")]
    NothingToContract(usize, usize),
}

/// A tensor type: `p` contravariant and `q` covariant slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorType {
    pub p: usize,
    pub q: usize,
}

impl TensorType {
    pub fn new(p: usize, q: usize) -> TensorType {
        TensorType { p, q }
    }

    pub fn rank(&self) -> usize {
        self.p + self.q
    }

    pub fn component_count(&self, n: usize) -> usize {
        n.pow(self.rank() as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorWire", into = "TensorWire")]
pub struct Tensor {
    ttype: TensorType,
    n: usize,
    at: Vec<f64>,
    frame: String,
    components: Vec<f64>,
}

/// Wire form used for the JSON serialization.
#[derive(Serialize, Deserialize)]
struct TensorWire {
    p: usize,
    q: usize,
    n: usize,
    at: Vec<f64>,
    frame: String,
    components: Vec<f64>,
}

impl From<Tensor> for TensorWire {
    fn from(t: Tensor) -> TensorWire {
        TensorWire {
            p: t.ttype.p,
            q: t.ttype.q,
            n: t.n,
            at: t.at,
            frame: t.frame,
            components: t.components,
        }
    }
}

impl TryFrom<TensorWire> for Tensor {
    type Error = TensorError;

    fn try_from(wire: TensorWire) -> Result<Tensor, TensorError> {
        Tensor::new(
            TensorType::new(wire.p, wire.q),
            wire.n,
            wire.at,
            wire.frame,
            wire.components,
        )
    }
}

impl Tensor {
    pub fn new(
        ttype: TensorType,
        n: usize,
        at: Vec<f64>,
        frame: impl Into<String>,
        components: Vec<f64>,
    ) -> Result<Tensor, TensorError> {
        let expected = ttype.component_count(n);
        if components.len() != expected {
            return Err(TensorError::ComponentCount {
                expected,
                got: components.len(),
            });
        }
        if let Some(i) = components.iter().position(|c| !c.is_finite()) {
            return Err(TensorError::NonFinite(i));
        }
        Ok(Tensor {
            ttype,
            n,
            at,
            frame: frame.into(),
            components,
        })
    }

    pub fn scalar(value: f64, at: Vec<f64>) -> Tensor {
        let n = at.len();
        Tensor::new(TensorType::new(0, 0), n, at, COORD_FRAME, vec![value]).unwrap()
    }

    pub fn vector(components: Vec<f64>, at: Vec<f64>) -> Tensor {
        let n = at.len();
        Tensor::new(TensorType::new(1, 0), n, at, COORD_FRAME, components).unwrap()
    }

    pub fn covector(components: Vec<f64>, at: Vec<f64>) -> Tensor {
        let n = at.len();
        Tensor::new(TensorType::new(0, 1), n, at, COORD_FRAME, components).unwrap()
    }

    pub fn zero(ttype: TensorType, n: usize, at: Vec<f64>, frame: impl Into<String>) -> Tensor {
        Tensor::new(ttype, n, at, frame, vec![0.0; ttype.component_count(n)]).unwrap()
    }

    pub fn ttype(&self) -> TensorType {
        self.ttype
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn at(&self) -> &[f64] {
        &self.at
    }

    pub fn frame(&self) -> &str {
        &self.frame
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    /// The single component of a `(0,0)`-tensor.
    pub fn scalar_value(&self) -> f64 {
        assert_eq!(self.ttype.rank(), 0, "scalar_value on a non-scalar tensor");
        self.components[0]
    }

    /// Component by multi-index, 0-based, contravariant indices first.
    pub fn component(&self, upper: &[usize], lower: &[usize]) -> f64 {
        assert_eq!(upper.len(), self.ttype.p);
        assert_eq!(lower.len(), self.ttype.q);
        let mut flat = 0;
        for &i in upper.iter().chain(lower.iter()) {
            debug_assert!(i < self.n);
            flat = flat * self.n + i;
        }
        self.components[flat]
    }

    /// Attach the same components to a different point/frame.
    pub fn with_location(&self, at: Vec<f64>, frame: impl Into<String>) -> Tensor {
        Tensor {
            ttype: self.ttype,
            n: self.n,
            at,
            frame: frame.into(),
            components: self.components.clone(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.components.len(), other.components.len());
        self.components
            .iter()
            .zip(&other.components)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tensor serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Tensor, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    fn check_same_site(&self, other: &Tensor) -> Result<(), TensorError> {
        if self.n != other.n {
            return Err(TensorError::DimensionMismatch(self.n, other.n));
        }
        if self.at != other.at {
            return Err(TensorError::PointMismatch {
                a: self.at.clone(),
                b: other.at.clone(),
            });
        }
        if self.frame != other.frame {
            return Err(TensorError::FrameMismatch {
                a: self.frame.clone(),
                b: other.frame.clone(),
            });
        }
        Ok(())
    }
}

/// Tensor product; `a`'s indices lead in each variance block.
pub fn tensor_product(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    a.check_same_site(b)?;
    let n = a.n;
    let ttype = TensorType::new(a.ttype.p + b.ttype.p, a.ttype.q + b.ttype.q);
    let mut components = vec![0.0; ttype.component_count(n)];

    // Strides for decomposing a flat result index into the four blocks
    // (a-upper, b-upper, a-lower, b-lower) and recomposing flat a/b indices.
    let pow = |e: usize| n.pow(e as u32);
    let (pb, qa, qb) = (b.ttype.p, a.ttype.q, b.ttype.q);
    for (flat, slot) in components.iter_mut().enumerate() {
        let mut rest = flat;
        let bl = rest % pow(qb);
        rest /= pow(qb);
        let al = rest % pow(qa);
        rest /= pow(qa);
        let bu = rest % pow(pb);
        rest /= pow(pb);
        let au = rest;
        let a_flat = au * pow(qa) + al;
        let b_flat = bu * pow(qb) + bl;
        *slot = a.components[a_flat] * b.components[b_flat];
    }
    Tensor::new(ttype, n, a.at.clone(), a.frame.clone(), components)
}

/// Contract one contravariant against one covariant slot (both 1-based).
pub fn contract(t: &Tensor, upper_slot: usize, lower_slot: usize) -> Result<Tensor, TensorError> {
    let (p, q) = (t.ttype.p, t.ttype.q);
    if p == 0 || q == 0 {
        return Err(TensorError::NothingToContract(p, q));
    }
    if !(1..=p).contains(&upper_slot) || !(1..=q).contains(&lower_slot) {
        return Err(TensorError::BadSlot {
            upper: upper_slot,
            lower: lower_slot,
            p,
            q,
        });
    }
    let n = t.n;
    let rank = p + q;
    let upper_axis = upper_slot - 1;
    let lower_axis = p + lower_slot - 1;

    let ttype = TensorType::new(p - 1, q - 1);
    let mut components = vec![0.0; ttype.component_count(n)];
    let mut index = vec![0usize; rank];
    for (flat_out, slot) in components.iter_mut().enumerate() {
        // spread the output multi-index over the non-contracted axes
        let mut rest = flat_out;
        for axis in (0..rank).rev() {
            if axis == upper_axis || axis == lower_axis {
                continue;
            }
            index[axis] = rest % n;
            rest /= n;
        }
        let mut sum = 0.0;
        for k in 0..n {
            index[upper_axis] = k;
            index[lower_axis] = k;
            let flat_in = index.iter().fold(0, |acc, &i| acc * n + i);
            sum += t.components[flat_in];
        }
        *slot = sum;
    }
    Tensor::new(ttype, n, t.at.clone(), t.frame.clone(), components)
}

/// Componentwise `λ·a + μ·b`.
pub fn linear_combine(lambda: f64, a: &Tensor, mu: f64, b: &Tensor) -> Result<Tensor, TensorError> {
    a.check_same_site(b)?;
    if a.ttype != b.ttype {
        return Err(TensorError::TypeMismatch(
            a.ttype.p, a.ttype.q, b.ttype.p, b.ttype.q,
        ));
    }
    let components = a
        .components
        .iter()
        .zip(&b.components)
        .map(|(x, y)| lambda * x + mu * y)
        .collect();
    Tensor::new(a.ttype, a.n, a.at.clone(), a.frame.clone(), components)
}

/// A tensor field with expression-valued components over the chart
/// coordinates; the exactly differentiable cousin of [`Tensor`].
#[derive(Debug, Clone)]
pub struct TensorField {
    ttype: TensorType,
    n: usize,
    components: Vec<Expr>,
}

impl TensorField {
    pub fn new(
        ttype: TensorType,
        n: usize,
        components: Vec<Expr>,
    ) -> Result<TensorField, TensorError> {
        let expected = ttype.component_count(n);
        if components.len() != expected {
            return Err(TensorError::ComponentCount {
                expected,
                got: components.len(),
            });
        }
        Ok(TensorField {
            ttype,
            n,
            components,
        })
    }

    pub fn scalar(n: usize, e: Expr) -> TensorField {
        TensorField::new(TensorType::new(0, 0), n, vec![e]).unwrap()
    }

    pub fn constant(t: &Tensor) -> TensorField {
        TensorField {
            ttype: t.ttype(),
            n: t.n(),
            components: t.components().iter().map(|&c| Expr::constant(c)).collect(),
        }
    }

    pub fn ttype(&self) -> TensorType {
        self.ttype
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// Componentwise partial derivative with respect to `xk` (1-based).
    pub fn partial(&self, k: usize) -> TensorField {
        TensorField {
            ttype: self.ttype,
            n: self.n,
            components: self.components.iter().map(|e| e.diff(k)).collect(),
        }
    }

    pub fn eval_at(&self, p: &[f64], frame: impl Into<String>) -> crate::Result<Tensor> {
        let mut components = Vec::with_capacity(self.components.len());
        for e in &self.components {
            components.push(e.eval(p)?);
        }
        Ok(Tensor::new(
            self.ttype,
            self.n,
            p.to_vec(),
            frame,
            components,
        )?)
    }
}
