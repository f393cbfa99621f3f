//! Built-in example transport laws used across the test suites and shipped
//! as scenario files with the CLI.
//!
//! - `identity`: `F = I`; every quantity vanishes.
//! - `diag-exp`: `F = diag(e^{x1}, e^{x2})`; torsion-free, holonomic
//!   coordinates `(e^{x1}-1, e^{x2}-1)`.
//! - `rotation`: `F = R(x1)`; flat but torsionful, rows not closed.
//! - `shear`: `F = [[1, x1], [0, 1]]`; flat, torsionful, row 1 not closed.
//! - `polar-jacobian`: the polar-to-Cartesian Jacobian on `[1,2]×[0.1,1.4]`;
//!   torsion-free with holonomic coordinates `x1(cos x2, sin x2) - const`.

use crate::chart::{Chart, MatrixField};
use crate::expr::parse_expr;
use crate::transport::TransportLaw;

fn law(name: &str, bounds: Vec<(f64, f64)>, rows: [[&str; 2]; 2]) -> TransportLaw {
    let chart = Chart::new(bounds).expect("catalog bounds are valid");
    let n = chart.n();
    let entries = rows
        .iter()
        .flatten()
        .map(|s| parse_expr(s, n).expect("catalog expressions parse"))
        .collect();
    let field = MatrixField::new(chart, entries).expect("catalog fields are square");
    TransportLaw::new(field, name).expect("catalog fields are invertible")
}

pub fn identity() -> TransportLaw {
    law("identity", vec![(-2.0, 2.0); 2], [["1", "0"], ["0", "1"]])
}

pub fn diag_exp() -> TransportLaw {
    law(
        "diag-exp",
        vec![(-0.5, 1.5); 2],
        [["exp(x1)", "0"], ["0", "exp(x2)"]],
    )
}

pub fn rotation() -> TransportLaw {
    law(
        "rotation",
        vec![(-2.0, 2.0); 2],
        [["cos(x1)", "-sin(x1)"], ["sin(x1)", "cos(x1)"]],
    )
}

pub fn shear() -> TransportLaw {
    law("shear", vec![(-2.0, 2.0); 2], [["1", "x1"], ["0", "1"]])
}

pub fn polar_jacobian() -> TransportLaw {
    law(
        "polar-jacobian",
        vec![(1.0, 2.0), (0.1, 1.4)],
        [["cos(x2)", "-x1 * sin(x2)"], ["sin(x2)", "x1 * cos(x2)"]],
    )
}

/// All catalog laws, in a fixed order.
pub fn all() -> Vec<TransportLaw> {
    vec![
        identity(),
        diag_exp(),
        rotation(),
        shear(),
        polar_jacobian(),
    ]
}

/// Look a catalog law up by name.
pub fn by_name(name: &str) -> Option<TransportLaw> {
    match name {
        "identity" => Some(identity()),
        "diag-exp" => Some(diag_exp()),
        "rotation" => Some(rotation()),
        "shear" => Some(shear()),
        "polar-jacobian" => Some(polar_jacobian()),
        _ => None,
    }
}

/// The non-flat negative control: `Γ^1_{22} = x1`, everything else zero, on
/// the symmetric 2-chart. Its curvature matrix `R_21` equals
/// `-[[0, 1], [0, 0]]` everywhere.
pub fn non_flat_control_gammas() -> Vec<MatrixField> {
    let chart = Chart::symmetric(2, 2.0);
    let zero = MatrixField::zero(chart.clone());
    let gamma2 = MatrixField::from_rows(
        chart,
        vec![
            vec![crate::expr::Expr::zero(), parse_expr("x1", 2).unwrap()],
            vec![crate::expr::Expr::zero(), crate::expr::Expr::zero()],
        ],
    )
    .unwrap();
    vec![zero, gamma2]
}
