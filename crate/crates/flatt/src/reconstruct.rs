//! Inverse problems: recover the frame field from a flat connection by
//! integrating `∂F/∂x^k = F·Γ_k`, test whether the rows of a frame field are
//! closed one-forms, and, when they are, integrate them into holonomic
//! coordinates whose differentials reproduce the rows.
//!
//! All integrations run along axis-parallel staircase paths in ascending
//! coordinate order; the reversed order is exposed separately so that tests
//! can confirm path independence.

use crate::chart::{MatrixField, DEFAULT_SEED, SAMPLE_COUNT};
use crate::connection::{derive_connection, transform_connection, Connection};
use crate::matrix::Matrix;
use crate::numeric;
use crate::transport::TransportLaw;
use crate::{Error, Result};
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Mutex;

/// Rows with a closedness defect below this are closed one-forms.
pub const CLOSEDNESS_TOL: f64 = 1e-8;

/// Curvature above this rejects reconstruction.
pub const CURVATURE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct RowClosedness {
    /// 1-based row index.
    pub row: usize,
    pub defect: f64,
    pub closed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosednessReport {
    pub tolerance: f64,
    pub rows: Vec<RowClosedness>,
    pub max_defect: f64,
    pub all_closed: bool,
}

/// Per-row exterior-derivative defect of the frame field: row `i` is closed
/// iff `∂_k F^i_j - ∂_j F^i_k` vanishes on the sample lattice.
pub fn check_closedness(f: &MatrixField) -> Result<ClosednessReport> {
    let n = f.n();
    let points = f.chart().sample_points(SAMPLE_COUNT, DEFAULT_SEED);
    // d[k][i][j] = ∂_k F^i_j, exact derivatives
    let partials: Vec<MatrixField> = (1..=n).map(|k| f.partial(k)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut max_defect = 0.0f64;
    for i in 0..n {
        let mut defect = 0.0f64;
        for p in &points {
            for j in 0..n {
                for k in j + 1..n {
                    let d = partials[k].entry(i, j).eval(p)? - partials[j].entry(i, k).eval(p)?;
                    defect = defect.max(d.abs());
                }
            }
        }
        max_defect = max_defect.max(defect);
        rows.push(RowClosedness {
            row: i + 1,
            defect,
            closed: defect < CLOSEDNESS_TOL,
        });
    }
    Ok(ClosednessReport {
        tolerance: CLOSEDNESS_TOL,
        all_closed: rows.iter().all(|r| r.closed),
        rows,
        max_defect,
    })
}

/// Frame field reconstructed from a flat connection by integrating the
/// matrix ODE `∂F/∂x^k = F Γ_k` with `F(base) = F0` along staircase paths.
/// Values are cached per exact query point.
#[derive(Debug)]
pub struct ReconstructedFrameField {
    conn: Connection,
    base: Vec<f64>,
    f0: Matrix,
    cache: Mutex<HashMap<Vec<u64>, Matrix>>,
}

/// Rejects connections whose curvature exceeds [`CURVATURE_TOL`] anywhere on
/// the sample lattice (the integrability condition for the ODE).
pub fn integrate_frame_field(
    conn: &Connection,
    base: &[f64],
    f0: &Matrix,
) -> Result<ReconstructedFrameField> {
    conn.chart().require_inside(base)?;
    let points = conn.chart().sample_points(SAMPLE_COUNT, DEFAULT_SEED);
    let (max_abs, worst) = conn.curvature_max(&points)?;
    if max_abs > CURVATURE_TOL {
        return Err(Error::NotFlat {
            point: worst,
            max_abs,
            tolerance: CURVATURE_TOL,
        });
    }
    Ok(ReconstructedFrameField {
        conn: conn.clone(),
        base: base.to_vec(),
        f0: f0.clone(),
        cache: Mutex::new(HashMap::new()),
    })
}

impl ReconstructedFrameField {
    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// `F(x)` along the ascending-axis staircase, cached per exact point.
    pub fn at(&self, x: &[f64]) -> Result<Matrix> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let order: Vec<usize> = (0..self.conn.n()).collect();
        let value = self.integrate(x, &order)?;
        self.cache.lock().unwrap().insert(key, value.clone());
        Ok(value)
    }

    /// Same integral along a caller-chosen axis order (uncached); used to
    /// verify path independence.
    pub fn at_with_axis_order(&self, x: &[f64], order: &[usize]) -> Result<Matrix> {
        self.integrate(x, order)
    }

    fn integrate(&self, x: &[f64], order: &[usize]) -> Result<Matrix> {
        let n = self.conn.n();
        self.conn.chart().require_inside(x)?;
        let mut current = self.base.clone();
        let mut state: Vec<f64> = (0..n * n).map(|i| self.f0.get(i / n, i % n)).collect();
        for &axis in order {
            let delta = x[axis] - current[axis];
            if delta == 0.0 {
                continue;
            }
            // step <= 1e-3 × segment length, i.e. 1000 RK4 steps per segment
            let steps = 1000;
            let start = current.clone();
            let rhs = |s: f64, f: &[f64]| -> Result<Vec<f64>> {
                let mut p = start.clone();
                p[axis] += s * delta;
                let gamma = self.conn.gamma_direction_at(&p, axis + 1)?;
                let mut d = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let mut sum = 0.0;
                        for m in 0..n {
                            sum += f[i * n + m] * gamma.get(m, j);
                        }
                        d[i * n + j] = delta * sum;
                    }
                }
                Ok(d)
            };
            state = numeric::rk4_integrate(rhs, &state, 0.0, 1.0, steps)?;
            current[axis] = x[axis];
        }
        Ok(Matrix::from_fn(n, |i, j| state[i * n + j]))
    }
}

/// Holonomic coordinates `x̃` with `dx̃^j = F^j_i dx^i`, normalized to
/// `x̃(base) = 0`. Exists exactly when every row of `F` is closed.
#[derive(Debug, Clone)]
pub struct CoordinateMap {
    f: MatrixField,
    base: Vec<f64>,
}

/// Integrates the rows of `F` into coordinate functions; rejects frame
/// fields with a non-closed row.
pub fn holonomic_coordinates(f: &MatrixField, base: &[f64]) -> Result<CoordinateMap> {
    f.chart().require_inside(base)?;
    let report = check_closedness(f)?;
    if let Some(row) = report.rows.iter().find(|r| !r.closed) {
        return Err(Error::NotClosed {
            row: row.row,
            defect: row.defect,
            tolerance: CLOSEDNESS_TOL,
        });
    }
    Ok(CoordinateMap {
        f: f.clone(),
        base: base.to_vec(),
    })
}

impl CoordinateMap {
    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// The frame field whose rows were integrated; it is the exact Jacobian
    /// of [`CoordinateMap::values`].
    pub fn jacobian_field(&self) -> &MatrixField {
        &self.f
    }

    /// `x̃(x)` along the ascending-axis staircase from the base point.
    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.values_with_axis_order(x, &(0..self.f.n()).collect::<Vec<_>>())
    }

    /// Same line integral along a caller-chosen axis order.
    pub fn values_with_axis_order(&self, x: &[f64], order: &[usize]) -> Result<Vec<f64>> {
        let n = self.f.n();
        self.f.chart().require_inside(x)?;
        let mut current = self.base.clone();
        let mut total = vec![0.0; n];
        for &axis in order {
            let delta = x[axis] - current[axis];
            if delta == 0.0 {
                continue;
            }
            let mut target = current.clone();
            target[axis] = x[axis];
            // >= 1000 Simpson subintervals per unit length, floor of 16
            let subintervals = ((delta.abs() * 1000.0).ceil() as usize)
                .max(16)
                .next_multiple_of(2);
            for (j, slot) in total.iter_mut().enumerate() {
                let form = |p: &[f64]| -> Result<Vec<f64>> {
                    (0..n).map(|i| Ok(self.f.entry(j, i).eval(p)?)).collect()
                };
                *slot += numeric::simpson_line_integral(form, &current, &target, subintervals)?;
            }
            current = target;
        }
        Ok(total)
    }

    /// Max deviation between the finite-difference Jacobian of the recovered
    /// coordinates and the frame field, over the given points.
    pub fn jacobian_defect(&self, points: &[Vec<f64>]) -> Result<f64> {
        let n = self.f.n();
        let scheme = numeric::FdScheme::central(1e-5);
        let mut worst = 0.0f64;
        for p in points {
            let expected = self.f.eval(p)?;
            for k in 1..=n {
                let column = numeric_jacobian_column(self, p, k, &scheme)?;
                for (j, value) in column.iter().enumerate() {
                    worst = worst.max((value - expected.get(j, k - 1)).abs());
                }
            }
        }
        Ok(worst)
    }
}

fn numeric_jacobian_column(
    map: &CoordinateMap,
    p: &[f64],
    k: usize,
    scheme: &numeric::FdScheme,
) -> Result<Vec<f64>> {
    let mut hi = p.to_vec();
    let mut lo = p.to_vec();
    hi[k - 1] += scheme.h;
    lo[k - 1] -= scheme.h;
    let vhi = map.values(&hi)?;
    let vlo = map.values(&lo)?;
    Ok(vhi
        .iter()
        .zip(&vlo)
        .map(|(a, b)| (a - b) / (2.0 * scheme.h))
        .collect())
}

/// Max component of the derived connection re-expressed in the adapted frame
/// `(F⁻¹)`; zero whenever the rows of `F` are closed (and also for merely
/// anholonomic adapted frames).
pub fn zero_component_defect(law: &TransportLaw, points: &[Vec<f64>]) -> Result<f64> {
    let conn = derive_connection(law)?;
    let frame = law.adapted_frame()?;
    let fc = transform_connection(&conn, &frame)?;
    let mut worst = 0.0f64;
    for p in points {
        for c in fc.components_at(p)? {
            worst = worst.max(c.abs());
        }
    }
    Ok(worst)
}

/// Combined verdict for a transport law: curvature of the derived connection
/// (always ≈ 0), its torsion, the closedness of `F`, and whether a holonomic
/// basis with constant transport components exists (iff the torsion
/// vanishes). Torsion and closedness must agree as indicators: both below
/// 1e-8 or both above 1e-6.
#[derive(Debug, Clone, Serialize)]
pub struct FlatnessReport {
    pub curvature_max: f64,
    pub torsion_max: f64,
    pub closedness_max_defect: f64,
    pub rows_closed: Vec<bool>,
    pub holonomic_constant_basis_exists: bool,
    pub torsion_closedness_consistent: bool,
}

pub fn flatness_report(law: &TransportLaw) -> Result<FlatnessReport> {
    let conn = derive_connection(law)?;
    let points = law
        .frame_field()
        .chart()
        .sample_points(SAMPLE_COUNT, DEFAULT_SEED);
    let (curvature_max, _) = conn.curvature_max(&points)?;
    let torsion_max = conn.torsion_max(&points)?;
    let closedness = check_closedness(law.frame_field())?;
    let torsion_zero = torsion_max < 1e-8;
    let consistent = (torsion_zero && closedness.max_defect < 1e-8)
        || (torsion_max > 1e-6 && closedness.max_defect > 1e-6);
    Ok(FlatnessReport {
        curvature_max,
        torsion_max,
        closedness_max_defect: closedness.max_defect,
        rows_closed: closedness.rows.iter().map(|r| r.closed).collect(),
        holonomic_constant_basis_exists: torsion_zero,
        torsion_closedness_consistent: consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::chart::Chart;
    use crate::transport::TensorTransport;
    use std::f64::consts::{FRAC_PI_2, LN_2};

    #[test]
    fn identity_rows_are_closed() {
        let report = check_closedness(catalog::identity().frame_field()).unwrap();
        assert!(report.all_closed);
        assert_eq!(report.max_defect, 0.0);
    }

    #[test]
    fn diag_exp_rows_are_closed() {
        let report = check_closedness(catalog::diag_exp().frame_field()).unwrap();
        assert!(report.all_closed);
        assert!(report.max_defect < 1e-12);
    }

    #[test]
    fn shear_first_row_is_not_closed() {
        let report = check_closedness(catalog::shear().frame_field()).unwrap();
        assert!(!report.all_closed);
        assert!((report.rows[0].defect - 1.0).abs() < 1e-12);
        assert!(report.rows[1].closed);
    }

    #[test]
    fn zero_connection_reconstructs_to_constant_frame() {
        let chart = Chart::symmetric(2, 2.0);
        let conn = Connection::zero(chart.clone());
        let rec = integrate_frame_field(&conn, &[0.0, 0.0], &Matrix::identity(2)).unwrap();
        for p in chart.sample_points(10, DEFAULT_SEED) {
            assert!(rec.at(&p).unwrap().max_abs_diff(&Matrix::identity(2)) < 1e-12);
        }
    }

    #[test]
    fn rotation_connection_reconstructs_the_rotation_field() {
        let law = catalog::rotation();
        let conn = derive_connection(&law).unwrap();
        let rec = integrate_frame_field(&conn, &[0.0, 0.0], &Matrix::identity(2)).unwrap();
        let got = rec.at(&[FRAC_PI_2, 0.0]).unwrap();
        let expected = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        assert!(got.max_abs_diff(&expected) < 1e-8);
    }

    #[test]
    fn reconstruction_is_path_independent() {
        let law = catalog::rotation();
        let conn = derive_connection(&law).unwrap();
        let rec = integrate_frame_field(&conn, &[0.0, 0.0], &Matrix::identity(2)).unwrap();
        for p in law.chart().sample_points(20, DEFAULT_SEED) {
            let ascending = rec.at(&p).unwrap();
            let descending = rec.at_with_axis_order(&p, &[1, 0]).unwrap();
            assert!(ascending.max_abs_diff(&descending) < 1e-7);
        }
    }

    #[test]
    fn reconstruction_rejects_non_flat_connections() {
        let conn = Connection::from_gammas(catalog::non_flat_control_gammas()).unwrap();
        match integrate_frame_field(&conn, &[0.0, 0.0], &Matrix::identity(2)) {
            Err(Error::NotFlat { max_abs, .. }) => assert!(max_abs > 0.5),
            other => panic!("expected a curvature rejection, got {other:?}"),
        }
    }

    #[test]
    fn identity_coordinates_are_the_coordinates() {
        let law = catalog::identity();
        let map = holonomic_coordinates(law.frame_field(), &[0.0, 0.0]).unwrap();
        let v = map.values(&[0.7, -0.3]).unwrap();
        assert!((v[0] - 0.7).abs() < 1e-12);
        assert!((v[1] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn diag_exp_coordinates_hit_the_closed_form() {
        let law = catalog::diag_exp();
        let map = holonomic_coordinates(law.frame_field(), &[0.0, 0.0]).unwrap();
        assert_eq!(map.values(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let v = map.values(&[LN_2, 3.0f64.ln()]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-9, "{v:?}");
        assert!((v[1] - 2.0).abs() < 1e-9, "{v:?}");
    }

    #[test]
    fn polar_jacobian_coordinates_hit_the_closed_form() {
        let law = catalog::polar_jacobian();
        let map = holonomic_coordinates(law.frame_field(), &[1.0, 0.1]).unwrap();
        let v = map.values(&[2.0, 0.1]).unwrap();
        assert!((v[0] - 0.1f64.cos()).abs() < 1e-7, "{v:?}");
        assert!((v[1] - 0.1f64.sin()).abs() < 1e-7, "{v:?}");
        // closed form everywhere: x̃ = x1 (cos x2, sin x2) - (cos 0.1, sin 0.1)
        for p in law.chart().sample_points(10, DEFAULT_SEED) {
            let v = map.values(&p).unwrap();
            assert!((v[0] - (p[0] * p[1].cos() - 0.1f64.cos())).abs() < 1e-7);
            assert!((v[1] - (p[0] * p[1].sin() - 0.1f64.sin())).abs() < 1e-7);
        }
    }

    #[test]
    fn holonomic_coordinates_reject_shear() {
        let law = catalog::shear();
        match holonomic_coordinates(law.frame_field(), &[0.0, 0.0]) {
            Err(Error::NotClosed { row: 1, defect, .. }) => {
                assert!((defect - 1.0).abs() < 1e-12)
            }
            other => panic!("expected closedness rejection, got {other:?}"),
        }
    }

    #[test]
    fn coordinate_jacobian_matches_frame_field() {
        let law = catalog::diag_exp();
        let map = holonomic_coordinates(law.frame_field(), &[0.0, 0.0]).unwrap();
        let points = law.chart().sample_points(5, DEFAULT_SEED);
        assert!(map.jacobian_defect(&points).unwrap() < 1e-5);
    }

    #[test]
    fn flatness_reports_match_the_catalog() {
        let diag = flatness_report(&catalog::diag_exp()).unwrap();
        assert!(diag.curvature_max < 1e-9);
        assert!(diag.torsion_max < 1e-12);
        assert!(diag.closedness_max_defect < 1e-12);
        assert!(diag.holonomic_constant_basis_exists);
        assert!(diag.torsion_closedness_consistent);

        let shear = flatness_report(&catalog::shear()).unwrap();
        assert!((shear.torsion_max - 1.0).abs() < 1e-12);
        assert!((shear.closedness_max_defect - 1.0).abs() < 1e-12);
        assert!(!shear.holonomic_constant_basis_exists);
        assert!(shear.torsion_closedness_consistent);

        let rotation = flatness_report(&catalog::rotation()).unwrap();
        assert!((rotation.torsion_max - 1.0).abs() < 1e-12);
        assert!(rotation.closedness_max_defect > 1e-6);
        assert!(!rotation.holonomic_constant_basis_exists);
        assert!(rotation.torsion_closedness_consistent);
    }

    #[test]
    fn zero_component_defect_vanishes_for_closed_rows() {
        let law = catalog::diag_exp();
        let points = law.chart().sample_points(20, DEFAULT_SEED);
        assert!(zero_component_defect(&law, &points).unwrap() < 1e-10);
    }
}
