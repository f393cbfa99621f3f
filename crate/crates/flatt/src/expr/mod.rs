//! Closed-form scalar expressions over chart coordinates `x1…xn`.
//!
//! Expressions are immutable trees shared through [`Arc`]; evaluation,
//! differentiation and printing are pure, so values can be used from many
//! threads at once. Construction goes through smart constructors (also hit by
//! the `std::ops` impls) that perform the only simplifications this crate
//! does: constant folding plus `x+0`, `x-0`, `x*1`, `x*0`, `x/1`, `x^1`.
//! Everything downstream relies on evaluation equality, not canonical forms.
//!
//! The concrete grammar accepted by [`parse_expr`] is documented in
//! `docs/grammar.txt` at the repository root.

mod parse;

pub use parse::{parse_expr, parse_expr_named, ParseError, ParseErrorKind};

use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sinh => "sinh",
            UnaryOp::Cosh => "cosh",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            UnaryOp::Neg => -v,
            UnaryOp::Sin => v.sin(),
            UnaryOp::Cos => v.cos(),
            UnaryOp::Tan => v.tan(),
            UnaryOp::Exp => v.exp(),
            UnaryOp::Log => v.ln(),
            UnaryOp::Sqrt => v.sqrt(),
            UnaryOp::Sinh => v.sinh(),
            UnaryOp::Cosh => v.cosh(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// A scalar expression in the coordinates `x1…xn`.
///
/// Variable indices are 1-based to match the surface syntax; `Var(1)` is `x1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Arc<Expr>),
    Binary(BinaryOp, Arc<Expr>, Arc<Expr>),
}

/// Evaluation failures: the expression left its real domain.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("domain error in `{subexpr}`: {kind}")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    /// Printed form of the offending subexpression.
    pub subexpr: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalErrorKind {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("square root of negative value {0}")]
    SqrtNegative(f64),
    #[error("power is undefined for base {base} and exponent {exponent}")]
    PowDomain { base: f64, exponent: f64 },
    #[error("result is not finite")]
    NonFinite,
    #[error("variable x{index} but the point has {len} coordinates")]
    VarIndex { index: usize, len: usize },
}

impl Expr {
    /// A finite real constant. `-0.0` is normalized to `0.0` so that printing
    /// stays within the grammar.
    pub fn constant(c: f64) -> Expr {
        assert!(
            c.is_finite(),
            "expression constants must be finite, got {c}"
        );
        Expr::Const(if c == 0.0 { 0.0 } else { c })
    }

    /// The coordinate variable `xk`, 1-based.
    pub fn var(k: usize) -> Expr {
        assert!(k >= 1, "variable indices are 1-based");
        Expr::Var(k)
    }

    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn one() -> Expr {
        Expr::Const(1.0)
    }

    /// The constant value if this node is a constant.
    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn unary(op: UnaryOp, a: Expr) -> Expr {
        if let Some(c) = a.as_const() {
            let v = op.apply(c);
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        Expr::Unary(op, Arc::new(a))
    }

    fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            let folded = match op {
                BinaryOp::Add => Some(x + y),
                BinaryOp::Sub => Some(x - y),
                BinaryOp::Mul => Some(x * y),
                BinaryOp::Div => (y != 0.0).then(|| x / y),
                BinaryOp::Pow => Some(x.powf(y)),
            };
            if let Some(v) = folded {
                if v.is_finite() {
                    return Expr::constant(v);
                }
            }
        }
        match op {
            BinaryOp::Add => {
                if a.as_const() == Some(0.0) {
                    return b;
                }
                if b.as_const() == Some(0.0) {
                    return a;
                }
            }
            BinaryOp::Sub => {
                if b.as_const() == Some(0.0) {
                    return a;
                }
            }
            BinaryOp::Mul => {
                if a.as_const() == Some(0.0) || b.as_const() == Some(0.0) {
                    return Expr::zero();
                }
                if a.as_const() == Some(1.0) {
                    return b;
                }
                if b.as_const() == Some(1.0) {
                    return a;
                }
            }
            BinaryOp::Div => {
                if b.as_const() == Some(1.0) {
                    return a;
                }
            }
            BinaryOp::Pow => {
                if b.as_const() == Some(1.0) {
                    return a;
                }
            }
        }
        Expr::Binary(op, Arc::new(a), Arc::new(b))
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        Expr::binary(BinaryOp::Pow, self, exponent)
    }

    pub fn sin(self) -> Expr {
        Expr::unary(UnaryOp::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::unary(UnaryOp::Cos, self)
    }

    pub fn tan(self) -> Expr {
        Expr::unary(UnaryOp::Tan, self)
    }

    pub fn exp(self) -> Expr {
        Expr::unary(UnaryOp::Exp, self)
    }

    pub fn log(self) -> Expr {
        Expr::unary(UnaryOp::Log, self)
    }

    pub fn sqrt(self) -> Expr {
        Expr::unary(UnaryOp::Sqrt, self)
    }

    pub fn sinh(self) -> Expr {
        Expr::unary(UnaryOp::Sinh, self)
    }

    pub fn cosh(self) -> Expr {
        Expr::unary(UnaryOp::Cosh, self)
    }

    /// Largest variable index referenced, 0 for constant expressions.
    pub fn max_var(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(k) => *k,
            Expr::Unary(_, a) => a.max_var(),
            Expr::Binary(_, a, b) => a.max_var().max(b.max_var()),
        }
    }

    /// Evaluate at the point `p = (x1, …, xn)`.
    pub fn eval(&self, p: &[f64]) -> Result<f64, EvalError> {
        let fail = |kind: EvalErrorKind, node: &Expr| EvalError {
            kind,
            subexpr: node.to_string(),
        };
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(k) => *p.get(k - 1).ok_or_else(|| {
                fail(
                    EvalErrorKind::VarIndex {
                        index: *k,
                        len: p.len(),
                    },
                    self,
                )
            })?,
            Expr::Unary(op, a) => {
                let x = a.eval(p)?;
                match op {
                    UnaryOp::Log if x <= 0.0 => {
                        return Err(fail(EvalErrorKind::LogNonPositive(x), self))
                    }
                    UnaryOp::Sqrt if x < 0.0 => {
                        return Err(fail(EvalErrorKind::SqrtNegative(x), self))
                    }
                    _ => {}
                }
                op.apply(x)
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval(p)?;
                let y = b.eval(p)?;
                match op {
                    BinaryOp::Add => x + y,
                    BinaryOp::Sub => x - y,
                    BinaryOp::Mul => x * y,
                    BinaryOp::Div => {
                        if y == 0.0 {
                            return Err(fail(EvalErrorKind::DivisionByZero, self));
                        }
                        x / y
                    }
                    BinaryOp::Pow => {
                        let v = x.powf(y);
                        if v.is_nan() && !x.is_nan() && !y.is_nan() {
                            return Err(fail(
                                EvalErrorKind::PowDomain {
                                    base: x,
                                    exponent: y,
                                },
                                self,
                            ));
                        }
                        v
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(fail(EvalErrorKind::NonFinite, self))
        }
    }

    /// Exact partial derivative with respect to `xk` (1-based).
    ///
    /// `pow` with a non-constant exponent is differentiated through the
    /// `exp(b·log a)` rewrite and therefore requires a positive base wherever
    /// the derivative is evaluated.
    pub fn diff(&self, k: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(i) => {
                if *i == k {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Unary(op, a) => {
                let inner = Expr::clone(a);
                let da = a.diff(k);
                match op {
                    UnaryOp::Neg => -da,
                    UnaryOp::Sin => inner.cos() * da,
                    UnaryOp::Cos => -(inner.sin() * da),
                    UnaryOp::Tan => da / inner.cos().pow(Expr::constant(2.0)),
                    UnaryOp::Exp => inner.exp() * da,
                    UnaryOp::Log => da / inner,
                    UnaryOp::Sqrt => da / (Expr::constant(2.0) * inner.sqrt()),
                    UnaryOp::Sinh => inner.cosh() * da,
                    UnaryOp::Cosh => inner.sinh() * da,
                }
            }
            Expr::Binary(op, a, b) => {
                let (a, b) = (Expr::clone(a), Expr::clone(b));
                let da = a.diff(k);
                let db = b.diff(k);
                match op {
                    BinaryOp::Add => da + db,
                    BinaryOp::Sub => da - db,
                    BinaryOp::Mul => da * b + a * db,
                    BinaryOp::Div => (da * b.clone() - a * db) / b.clone().pow(Expr::constant(2.0)),
                    BinaryOp::Pow => {
                        if let Some(c) = b.as_const() {
                            Expr::constant(c) * a.clone().pow(Expr::constant(c - 1.0)) * da
                        } else {
                            a.clone().pow(b.clone()) * (db * a.clone().log() + b * da / a)
                        }
                    }
                }
            }
        }
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, self, rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Div, self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        if let Some(c) = self.as_const() {
            return Expr::constant(-c);
        }
        Expr::Unary(UnaryOp::Neg, Arc::new(self))
    }
}

// Printing binding levels: 1 add/sub, 2 mul/div, 3 pow, 4 unary minus,
// 5 atoms. Matches the grammar in docs/grammar.txt: the printed form parses
// back to the same tree.
fn level(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) if *c < 0.0 => 4,
        Expr::Const(_) | Expr::Var(_) => 5,
        Expr::Unary(UnaryOp::Neg, _) => 4,
        Expr::Unary(..) => 5,
        Expr::Binary(BinaryOp::Pow, ..) => 3,
        Expr::Binary(BinaryOp::Mul, ..) | Expr::Binary(BinaryOp::Div, ..) => 2,
        Expr::Binary(BinaryOp::Add, ..) | Expr::Binary(BinaryOp::Sub, ..) => 1,
    }
}

fn fmt_prec(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if level(e) < min {
        write!(f, "(")?;
        fmt_prec(e, 0, f)?;
        return write!(f, ")");
    }
    match e {
        Expr::Const(c) => write!(f, "{c}"),
        Expr::Var(k) => write!(f, "x{k}"),
        Expr::Unary(UnaryOp::Neg, a) => {
            write!(f, "-")?;
            fmt_prec(a, 4, f)
        }
        Expr::Unary(op, a) => {
            write!(f, "{}(", op.name())?;
            fmt_prec(a, 0, f)?;
            write!(f, ")")
        }
        Expr::Binary(op, a, b) => {
            let (sym, la, lb) = match op {
                BinaryOp::Add => (" + ", 1, 2),
                BinaryOp::Sub => (" - ", 1, 2),
                BinaryOp::Mul => (" * ", 2, 3),
                BinaryOp::Div => (" / ", 2, 3),
                BinaryOp::Pow => ("^", 4, 3),
            };
            fmt_prec(a, la, f)?;
            write!(f, "{sym}")?;
            fmt_prec(b, lb, f)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prec(self, 0, f)
    }
}
