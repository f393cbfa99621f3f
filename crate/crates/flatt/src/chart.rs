//! A single rectangular coordinate chart and the objects living on it:
//! matrix fields with expression entries, frames, structure coefficients,
//! and the transformation law for connection components under frame changes.

use crate::expr::Expr;
use crate::matrix::Matrix;
use crate::tensor::{Tensor, TensorType};
use crate::{Error, Result, COORD_FRAME};
use serde::{Deserialize, Serialize};

/// Determinants below this threshold count as singular.
pub const INVERTIBILITY_TOL: f64 = 1e-9;

/// Default seed of the deterministic sample lattice.
pub const DEFAULT_SEED: u64 = 42;

/// Number of lattice points used by "at all sample points" checks.
pub const SAMPLE_COUNT: usize = 100;

/// Fraction of each interval kept clear at both ends so that sampled points
/// are strictly interior and small finite-difference displacements stay
/// inside the chart.
const SAMPLE_MARGIN: f64 = 0.05;

/// A rectangular box in `n`-space; the single coordinate patch everything
/// else is defined over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    n: usize,
    bounds: Vec<(f64, f64)>,
}

impl Chart {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Chart> {
        if bounds.is_empty() {
            return Err(Error::InvalidArgument(
                "chart needs at least one axis".into(),
            ));
        }
        for (axis, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::BadBounds {
                    axis: axis + 1,
                    lo,
                    hi,
                });
            }
        }
        Ok(Chart {
            n: bounds.len(),
            bounds,
        })
    }

    /// Symmetric box `[-half, half]^n`.
    pub fn symmetric(n: usize, half: f64) -> Chart {
        Chart::new(vec![(-half, half); n]).unwrap()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.n
            && p.iter()
                .zip(&self.bounds)
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    pub fn require_inside(&self, p: &[f64]) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfBounds { point: p.to_vec() })
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Deterministic low-discrepancy lattice of `count` interior points.
    ///
    /// Uses the additive R_d recurrence (irrational steps derived from the
    /// generalized golden ratio) with a per-axis phase from `seed`, then maps
    /// the unit cube into the chart with a 5% margin on every axis. The same
    /// `(count, seed)` always yields the same points.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let n = self.n;
        // unique positive root of x^(n+1) = x + 1
        let mut phi = 2.0f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (n as f64 + 1.0));
        }
        let alphas: Vec<f64> = (1..=n)
            .map(|k| (1.0 / phi.powi(k as i32)).fract())
            .collect();
        let phases: Vec<f64> = (0..n)
            .map(|k| {
                splitmix64(seed.wrapping_add(0x9E3779B97F4A7C15u64.wrapping_mul(k as u64 + 1)))
                    as f64
                    / 2f64.powi(64)
            })
            .collect();
        (0..count)
            .map(|m| {
                (0..n)
                    .map(|k| {
                        let u = (phases[k] + (m as f64 + 1.0) * alphas[k]).fract();
                        let (lo, hi) = self.bounds[k];
                        lo + (SAMPLE_MARGIN + (1.0 - 2.0 * SAMPLE_MARGIN) * u) * (hi - lo)
                    })
                    .collect()
            })
            .collect()
    }

    /// Deterministic point pairs, for transport checks.
    pub fn sample_pairs(&self, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let points = self.sample_points(2 * count, seed);
        let (first, second) = points.split_at(count);
        first.iter().cloned().zip(second.iter().cloned()).collect()
    }

    /// Uniform grid of `per_axis^n` points with a 2% margin, for CLI sweeps.
    pub fn grid_points(&self, per_axis: usize) -> Vec<Vec<f64>> {
        assert!(per_axis >= 1);
        let coords: Vec<Vec<f64>> = self
            .bounds
            .iter()
            .map(|&(lo, hi)| {
                (0..per_axis)
                    .map(|i| {
                        let u = if per_axis == 1 {
                            0.5
                        } else {
                            i as f64 / (per_axis - 1) as f64
                        };
                        lo + (0.02 + 0.96 * u) * (hi - lo)
                    })
                    .collect()
            })
            .collect();
        let mut points = vec![Vec::new()];
        for axis in coords {
            let mut next = Vec::with_capacity(points.len() * axis.len());
            for p in &points {
                for &c in &axis {
                    let mut q = p.clone();
                    q.push(c);
                    next.push(q);
                }
            }
            points = next;
        }
        points
    }

    /// Uniform random interior point (same 5% margin as the lattice).
    pub fn random_point(&self, rng: &mut impl rand::Rng) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|&(lo, hi)| {
                let u: f64 = rng.gen();
                lo + (SAMPLE_MARGIN + (1.0 - 2.0 * SAMPLE_MARGIN) * u) * (hi - lo)
            })
            .collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// An `n×n` matrix of expressions over a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    chart: Chart,
    entries: Vec<Expr>, // row-major
}

impl MatrixField {
    pub fn new(chart: Chart, entries: Vec<Expr>) -> Result<MatrixField> {
        let n = chart.n();
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        for e in &entries {
            let max = e.max_var();
            if max > n {
                return Err(Error::AxisOutOfRange { index: max, n });
            }
        }
        Ok(MatrixField { chart, entries })
    }

    pub fn from_rows(chart: Chart, rows: Vec<Vec<Expr>>) -> Result<MatrixField> {
        MatrixField::new(chart, rows.into_iter().flatten().collect())
    }

    pub fn identity(chart: Chart) -> MatrixField {
        let n = chart.n();
        MatrixField::new(
            chart,
            (0..n * n)
                .map(|i| {
                    if i % (n + 1) == 0 {
                        Expr::one()
                    } else {
                        Expr::zero()
                    }
                })
                .collect(),
        )
        .unwrap()
    }

    pub fn zero(chart: Chart) -> MatrixField {
        let n = chart.n();
        MatrixField::new(chart, vec![Expr::zero(); n * n]).unwrap()
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn n(&self) -> usize {
        self.chart.n()
    }

    /// Entry `(i, j)`, 0-based.
    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.n() + j]
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    /// Entrywise evaluation at a point of the chart.
    pub fn eval(&self, p: &[f64]) -> Result<Matrix> {
        self.chart.require_inside(p)?;
        let n = self.n();
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, self.entry(i, j).eval(p)?);
            }
        }
        Ok(m)
    }

    pub fn det_at(&self, p: &[f64]) -> Result<f64> {
        Ok(self.eval(p)?.det())
    }

    /// Numerical inverse at a point (partial-pivot elimination); fails with a
    /// singularity diagnostic when `|det| <= 1e-9`.
    pub fn eval_inverse(&self, p: &[f64]) -> Result<Matrix> {
        let m = self.eval(p)?;
        let det = m.det();
        if det.abs() <= INVERTIBILITY_TOL {
            return Err(Error::Singular {
                point: p.to_vec(),
                det,
            });
        }
        m.inverse().ok_or(Error::Singular {
            point: p.to_vec(),
            det,
        })
    }

    /// Entrywise symbolic partial derivative along `xk` (1-based).
    pub fn partial(&self, k: usize) -> MatrixField {
        MatrixField {
            chart: self.chart.clone(),
            entries: self.entries.iter().map(|e| e.diff(k)).collect(),
        }
    }

    /// Symbolic matrix product `self · rhs`.
    pub fn mul_symbolic(&self, rhs: &MatrixField) -> MatrixField {
        let n = self.n();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut sum = Expr::zero();
                for k in 0..n {
                    sum = sum + self.entry(i, k).clone() * rhs.entry(k, j).clone();
                }
                entries.push(sum);
            }
        }
        MatrixField {
            chart: self.chart.clone(),
            entries,
        }
    }

    /// Left-multiply by a constant matrix.
    pub fn mul_constant_left(&self, d: &Matrix) -> MatrixField {
        let n = self.n();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut sum = Expr::zero();
                for k in 0..n {
                    sum = sum + Expr::constant(d.get(i, k)) * self.entry(k, j).clone();
                }
                entries.push(sum);
            }
        }
        MatrixField {
            chart: self.chart.clone(),
            entries,
        }
    }

    /// Symbolic determinant by cofactor expansion.
    pub fn symbolic_det(&self) -> Expr {
        det_exprs(&self.entries, self.n())
    }

    /// Symbolic inverse through adjugate over determinant. Entry growth is
    /// factorial in `n`, so this is limited to `n <= 4`.
    pub fn symbolic_inverse(&self) -> Result<MatrixField> {
        let n = self.n();
        if n > 4 {
            return Err(Error::SymbolicInversionUnsupported { n });
        }
        let det = self.symbolic_det();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                // adjugate: cofactor of (j, i)
                let minor = minor_exprs(&self.entries, n, j, i);
                let mut cof = det_exprs(&minor, n - 1);
                if (i + j) % 2 == 1 {
                    cof = -cof;
                }
                entries.push(cof / det.clone());
            }
        }
        MatrixField::new(self.chart.clone(), entries)
    }
}

fn minor_exprs(entries: &[Expr], n: usize, drop_row: usize, drop_col: usize) -> Vec<Expr> {
    let mut out = Vec::with_capacity((n - 1) * (n - 1));
    for i in 0..n {
        if i == drop_row {
            continue;
        }
        for j in 0..n {
            if j == drop_col {
                continue;
            }
            out.push(entries[i * n + j].clone());
        }
    }
    out
}

fn det_exprs(entries: &[Expr], n: usize) -> Expr {
    match n {
        0 => Expr::one(),
        1 => entries[0].clone(),
        _ => {
            let mut sum = Expr::zero();
            for j in 0..n {
                let minor = minor_exprs(entries, n, 0, j);
                let mut term = entries[j].clone() * det_exprs(&minor, n - 1);
                if j % 2 == 1 {
                    term = -term;
                }
                sum = sum + term;
            }
            sum
        }
    }
}

/// A frame field: `E_{i'} = E^i_{i'}(x) ∂/∂x^i`, stored as the matrix field
/// `[E^i_{i'}]` with the coordinate component `i` as row index and the frame
/// label `i'` as column index.
#[derive(Debug, Clone)]
pub struct Frame {
    matrix: MatrixField,
    tag: String,
}

impl Frame {
    /// Validates pointwise invertibility on the default sample lattice.
    pub fn new(matrix: MatrixField, tag: impl Into<String>) -> Result<Frame> {
        for p in matrix.chart().sample_points(SAMPLE_COUNT, DEFAULT_SEED) {
            let det = matrix.det_at(&p)?;
            if det.abs() <= INVERTIBILITY_TOL {
                return Err(Error::Singular { point: p, det });
            }
        }
        Ok(Frame {
            matrix,
            tag: tag.into(),
        })
    }

    pub fn coordinate(chart: Chart) -> Frame {
        Frame {
            matrix: MatrixField::identity(chart),
            tag: COORD_FRAME.to_string(),
        }
    }

    pub fn matrix(&self) -> &MatrixField {
        &self.matrix
    }

    pub fn chart(&self) -> &Chart {
        self.matrix.chart()
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    /// Structure coefficients `C^k_{ij}` of the frame at `p`, from the
    /// commutators `[E_i, E_j] = C^k_{ij} E_k`. Antisymmetric in `(i, j)`.
    /// Returned as a `(1,2)`-tensor with index order `(k; i, j)`.
    pub fn structure_coefficients(&self, p: &[f64]) -> Result<Tensor> {
        let n = self.matrix.n();
        let e = self.matrix.eval(p)?;
        let e_inv = self.matrix.eval_inverse(p)?;
        let partials: Vec<Matrix> = (1..=n)
            .map(|a| self.matrix.partial(a).eval(p))
            .collect::<Result<_>>()?;

        // [E_i, E_j]^m = E^a_i ∂_a E^m_j - E^a_j ∂_a E^m_i
        let mut bracket = vec![0.0; n * n * n]; // (m, i, j)
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut sum = 0.0;
                    for (a, de) in partials.iter().enumerate() {
                        sum += e.get(a, i) * de.get(m, j) - e.get(a, j) * de.get(m, i);
                    }
                    bracket[(m * n + i) * n + j] = sum;
                }
            }
        }

        let mut components = vec![0.0; n * n * n]; // (k, i, j)
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut sum = 0.0;
                    for m in 0..n {
                        sum += e_inv.get(k, m) * bracket[(m * n + i) * n + j];
                    }
                    components[(k * n + i) * n + j] = sum;
                }
            }
        }
        Ok(Tensor::new(
            TensorType::new(1, 2),
            n,
            p.to_vec(),
            self.tag.clone(),
            components,
        )?)
    }
}

/// Connection components re-expressed in a frame; produced by
/// [`transform_components`] (or `connection::transform_connection`).
///
/// `gammas[k]` holds `Γ^{i'}_{j'k'}` for `k' = k+1` with the superscript as
/// row index, all entries symbolic expressions in the chart coordinates.
#[derive(Debug, Clone)]
pub struct FrameConnection {
    gammas: Vec<MatrixField>,
    frame: Frame,
}

impl FrameConnection {
    pub fn gammas(&self) -> &[MatrixField] {
        &self.gammas
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    /// All `n³` components at `p`, flat row-major `(i', j', k')`.
    pub fn components_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        let n = self.frame.chart().n();
        let mats = self.matrices_at(p)?;
        let mut out = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for (k, mat) in mats.iter().enumerate() {
                    out[(i * n + j) * n + k] = mat.get(i, j);
                }
            }
        }
        Ok(out)
    }

    /// The matrices `Γ_{k'}(p)`, one per frame direction.
    pub fn matrices_at(&self, p: &[f64]) -> Result<Vec<Matrix>> {
        self.gammas.iter().map(|g| g.eval(p)).collect()
    }

    /// Re-express in a further frame, `change` being the relative matrix of
    /// the new frame with respect to the current one.
    pub fn transform(&self, change: &MatrixField) -> Result<FrameConnection> {
        let cumulative = self.frame.matrix().mul_symbolic(change);
        let gammas = transformed_gammas(&self.gammas, self.frame.matrix(), change)?;
        Ok(FrameConnection {
            gammas,
            frame: Frame::new(cumulative, format!("{}+", self.frame.tag()))?,
        })
    }
}

/// Transform connection components from the coordinate frame into `frame`:
///
/// `Γ^{i'}_{j'k'} = E^{i'}_i E^j_{j'} E^k_{k'} Γ^i_{jk} + E^{i'}_i E_{k'}(E^i_{j'})`
///
/// with `E^{i'}_i` the inverse frame matrix and `E_{k'} = E^a_{k'} ∂_a`.
/// `gammas[k]` are the coordinate components with the superscript as row.
pub fn transform_components(gammas: &[MatrixField], frame: &Frame) -> Result<FrameConnection> {
    let identity = Frame::coordinate(frame.chart().clone());
    let transformed = transformed_gammas(gammas, identity.matrix(), frame.matrix())?;
    Ok(FrameConnection {
        gammas: transformed,
        frame: frame.clone(),
    })
}

/// Core of the transformation law, valid with components given in an
/// intermediate frame `current` (cumulative matrix from the coordinate
/// frame) and a relative change matrix `change`:
///
/// `Γ''_{k''} = Σ_{k'} change^{k'}_{k''} [ change⁻¹ · Γ'_{k'} · change
///            + change⁻¹ · (Σ_c current^c_{k'} ∂_c change) ]`
fn transformed_gammas(
    gammas: &[MatrixField],
    current: &MatrixField,
    change: &MatrixField,
) -> Result<Vec<MatrixField>> {
    let n = change.n();
    let chart = change.chart().clone();
    let change_inv = change.symbolic_inverse()?;
    let change_partials: Vec<MatrixField> = (1..=n).map(|c| change.partial(c)).collect();

    // per current-frame direction k': change⁻¹ Γ'_{k'} change + change⁻¹ D_{k'}
    let mut per_direction = Vec::with_capacity(n);
    for (kp, gamma) in gammas.iter().enumerate() {
        let first = change_inv.mul_symbolic(gamma).mul_symbolic(change);
        let mut deriv = MatrixField::zero(chart.clone());
        for (c, dchange) in change_partials.iter().enumerate() {
            let scale = current.entry(c, kp).clone();
            let scaled_entries: Vec<Expr> = dchange
                .entries()
                .iter()
                .map(|e| scale.clone() * e.clone())
                .collect();
            deriv = add_fields(&deriv, &MatrixField::new(chart.clone(), scaled_entries)?);
        }
        per_direction.push(add_fields(&first, &change_inv.mul_symbolic(&deriv)));
    }

    // contract the direction index with the change matrix
    let mut out = Vec::with_capacity(n);
    for kpp in 0..n {
        let mut total = MatrixField::zero(chart.clone());
        for (kp, dir) in per_direction.iter().enumerate() {
            let scale = change.entry(kp, kpp).clone();
            let scaled: Vec<Expr> = dir
                .entries()
                .iter()
                .map(|e| scale.clone() * e.clone())
                .collect();
            total = add_fields(&total, &MatrixField::new(chart.clone(), scaled)?);
        }
        out.push(total);
    }
    Ok(out)
}

fn add_fields(a: &MatrixField, b: &MatrixField) -> MatrixField {
    let entries = a
        .entries()
        .iter()
        .zip(b.entries())
        .map(|(x, y)| x.clone() + y.clone())
        .collect();
    MatrixField::new(a.chart().clone(), entries).unwrap()
}
