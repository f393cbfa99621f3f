//! One function per subcommand: compute, assemble the report body, and
//! return the rows for the optional CSV sidecar.

use crate::error::CliError;
use crate::reports::*;
use crate::scenario::{parse_point, Scenario};
use flatt::chart::{DEFAULT_SEED, SAMPLE_COUNT};
use flatt::expr::parse_expr_named;
use flatt::matrix::Matrix;
use flatt::reconstruct;
use flatt::tensor::Tensor;
use flatt::transport::{check_axioms, TensorTransport};
use std::path::Path;

const AXIOM_TOL: f64 = 1e-9;
const CURVATURE_TOL: f64 = 1e-9;
const TORSION_ZERO_TOL: f64 = 1e-8;
const INDICATOR_NONZERO_FLOOR: f64 = 1e-6;

fn meta(sc: &Scenario) -> ScenarioMeta {
    ScenarioMeta {
        name: sc.name.clone(),
        hash: sc.hash.clone(),
        n: sc.chart.n(),
        seed: sc.seed,
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn point_header(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("x{k}")).collect()
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.rows()
}

/// `check`: axiom suite, flatness, torsion, closedness, and the
/// torsion/closedness biconditional. Exit 0 iff every asserted tolerance
/// holds. Scenarios without `F` only get their curvature and torsion
/// reported; nothing is asserted for them.
pub fn cmd_check(sc: &Scenario, trials: usize, out: Option<&Path>) -> Result<bool, CliError> {
    let points = sc.chart.sample_points(SAMPLE_COUNT, DEFAULT_SEED);
    let (curvature_max, _) = sc
        .connection
        .curvature_max(&points)
        .map_err(CliError::from_flatt)?;
    let torsion_max = sc
        .connection
        .torsion_max(&points)
        .map_err(CliError::from_flatt)?;

    let mut body = CheckBody {
        trials,
        axioms: None,
        curvature_max,
        torsion_max,
        closedness: None,
        holonomic_constant_basis_exists: None,
        assertions: Vec::new(),
        pass: true,
    };

    if let Some(law) = &sc.law {
        let axioms = check_axioms(law, trials, sc.seed).map_err(CliError::from_flatt)?;
        let closedness =
            reconstruct::check_closedness(law.frame_field()).map_err(CliError::from_flatt)?;
        let torsion_zero = torsion_max < TORSION_ZERO_TOL;
        let closed = closedness.max_defect < TORSION_ZERO_TOL;
        let consistent = (torsion_zero && closed)
            || (torsion_max > INDICATOR_NONZERO_FLOOR
                && closedness.max_defect > INDICATOR_NONZERO_FLOOR);

        body.assertions = vec![
            Assertion {
                name: "axioms.max_violation",
                value: Some(axioms.max_violation()),
                tolerance: Some(AXIOM_TOL),
                pass: axioms.passes(AXIOM_TOL),
            },
            Assertion {
                name: "curvature.max",
                value: Some(curvature_max),
                tolerance: Some(CURVATURE_TOL),
                pass: curvature_max < CURVATURE_TOL,
            },
            Assertion {
                name: "torsion_closedness.biconditional",
                value: None,
                tolerance: None,
                pass: consistent,
            },
        ];
        body.pass = body.assertions.iter().all(|a| a.pass);
        body.holonomic_constant_basis_exists = Some(torsion_zero);
        body.axioms = Some(axioms);
        body.closedness = Some(closedness);
    }

    if let Some(path) = out {
        let mut rows = vec![
            vec!["curvature.max".to_string(), fmt(body.curvature_max)],
            vec!["torsion.max".to_string(), fmt(body.torsion_max)],
        ];
        if let Some(axioms) = &body.axioms {
            rows.push(vec!["axioms.linearity".into(), fmt(axioms.linearity)]);
            rows.push(vec![
                "axioms.multiplicativity".into(),
                fmt(axioms.multiplicativity),
            ]);
            rows.push(vec!["axioms.contraction".into(), fmt(axioms.contraction)]);
            rows.push(vec!["axioms.composition".into(), fmt(axioms.composition)]);
            rows.push(vec!["axioms.identity".into(), fmt(axioms.identity)]);
            rows.push(vec!["axioms.inverse".into(), fmt(axioms.inverse)]);
            rows.push(vec![
                "axioms.scalar_invariance".into(),
                fmt(axioms.scalar_invariance),
            ]);
            rows.push(vec![
                "axioms.matrix_inverse".into(),
                fmt(axioms.matrix_inverse),
            ]);
        }
        if let Some(closedness) = &body.closedness {
            for row in &closedness.rows {
                rows.push(vec![format!("closedness.row{}", row.row), fmt(row.defect)]);
            }
        }
        write_csv(path, &["quantity".to_string(), "value".to_string()], &rows)?;
    }

    let pass = body.pass;
    Envelope::new("check", meta(sc), body).emit()?;
    Ok(pass)
}

/// `transport`: the matrix `H(to, from)`, its inverse, and optionally a
/// transported tensor read from a JSON file.
pub fn cmd_transport(
    sc: &Scenario,
    from: &str,
    to: &str,
    tensor: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let law = sc.require_law("transport")?;
    let from = parse_point(from, &sc.chart)?;
    let to = parse_point(to, &sc.chart)?;
    let h = law
        .transport_matrix(&from, &to)
        .map_err(CliError::from_flatt)?;
    let k = law
        .covariant_matrix(&from, &to)
        .map_err(CliError::from_flatt)?;

    let tensor_in = tensor.map(|path| read_tensor(path, sc)).transpose()?;
    let tensor_out = tensor_in
        .as_ref()
        .map(|t| {
            if t.at() != from.as_slice() {
                return Err(CliError::validation(format!(
                    "tensor is attached at {:?}, but --from is {from:?}",
                    t.at()
                )));
            }
            law.transport_tensor(&from, &to, t)
                .map_err(CliError::from_flatt)
        })
        .transpose()?;

    if let Some(path) = out {
        let n = sc.chart.n();
        let mut header = vec!["i".to_string(), "j".to_string()];
        header.push("H".into());
        header.push("H_inv".into());
        let mut rows = Vec::new();
        for i in 0..n {
            for j in 0..n {
                rows.push(vec![
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    fmt(h.get(i, j)),
                    fmt(k.get(i, j)),
                ]);
            }
        }
        write_csv(path, &header, &rows)?;
    }

    Envelope::new(
        "transport",
        meta(sc),
        TransportBody {
            from,
            to,
            matrix: matrix_rows(&h),
            covariant_matrix: matrix_rows(&k),
            tensor_in,
            tensor_out,
        },
    )
    .emit()
}

/// `connection`: the matrices `Γ_k` at a point, plus their symbolic entries
/// when the representation has them.
pub fn cmd_connection(sc: &Scenario, at: &str, out: Option<&Path>) -> Result<(), CliError> {
    let at = parse_point(at, &sc.chart)?;
    let gammas = sc.connection.gamma_at(&at).map_err(CliError::from_flatt)?;
    let gamma_exprs = sc.connection.gamma_exprs().map(|fields| {
        fields
            .iter()
            .map(|f| {
                (0..f.n())
                    .map(|i| (0..f.n()).map(|j| f.entry(i, j).to_string()).collect())
                    .collect()
            })
            .collect()
    });

    if let Some(path) = out {
        let mut rows = Vec::new();
        for (k, g) in gammas.iter().enumerate() {
            for i in 0..g.n() {
                for j in 0..g.n() {
                    rows.push(vec![
                        (k + 1).to_string(),
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        fmt(g.get(i, j)),
                    ]);
                }
            }
        }
        write_csv(
            path,
            &[
                "k".to_string(),
                "i".to_string(),
                "j".to_string(),
                "gamma".to_string(),
            ],
            &rows,
        )?;
    }

    Envelope::new(
        "connection",
        meta(sc),
        ConnectionBody {
            at,
            gammas: gammas.iter().map(matrix_rows).collect(),
            gamma_exprs,
        },
    )
    .emit()
}

/// `curvature`: max |R| over a uniform grid, with a per-point CSV sweep.
pub fn cmd_curvature(sc: &Scenario, grid: usize, out: Option<&Path>) -> Result<(), CliError> {
    let n = sc.chart.n();
    let points = sc.chart.grid_points(grid);
    let mut max_abs = 0.0f64;
    let mut worst = sc.chart.center();
    let mut rows = Vec::new();
    for p in &points {
        let r = sc
            .connection
            .curvature_tensor(p)
            .map_err(CliError::from_flatt)?;
        if r.max_abs() > max_abs {
            max_abs = r.max_abs();
            worst = p.clone();
        }
        if out.is_some() {
            let mut row: Vec<String> = p.iter().map(|c| fmt(*c)).collect();
            row.extend(r.components().iter().map(|c| fmt(*c)));
            rows.push(row);
        }
    }
    if let Some(path) = out {
        let mut header = point_header(n);
        for i in 1..=n {
            for j in 1..=n {
                for k in 1..=n {
                    for l in 1..=n {
                        header.push(format!("R_{i}_{j}_{k}_{l}"));
                    }
                }
            }
        }
        write_csv(path, &header, &rows)?;
    }
    Envelope::new(
        "curvature",
        meta(sc),
        CurvatureBody {
            grid,
            points: points.len(),
            max_abs,
            worst_point: worst,
        },
    )
    .emit()
}

/// `torsion`: max |T| and a per-component table over a uniform grid.
pub fn cmd_torsion(sc: &Scenario, grid: usize, out: Option<&Path>) -> Result<(), CliError> {
    let n = sc.chart.n();
    let points = sc.chart.grid_points(grid);
    let mut max_abs = 0.0f64;
    let mut per_component = vec![0.0f64; n * n * n];
    let mut rows = Vec::new();
    for p in &points {
        let t = sc
            .connection
            .torsion_tensor(None, p)
            .map_err(CliError::from_flatt)?;
        max_abs = max_abs.max(t.max_abs());
        for (slot, c) in per_component.iter_mut().zip(t.components()) {
            *slot = slot.max(c.abs());
        }
        if out.is_some() {
            let mut row: Vec<String> = p.iter().map(|c| fmt(*c)).collect();
            row.extend(t.components().iter().map(|c| fmt(*c)));
            rows.push(row);
        }
    }
    if let Some(path) = out {
        let mut header = point_header(n);
        for i in 1..=n {
            for j in 1..=n {
                for k in 1..=n {
                    header.push(format!("T_{i}_{j}_{k}"));
                }
            }
        }
        write_csv(path, &header, &rows)?;
    }
    let components = (0..n * n * n)
        .map(|flat| TorsionComponent {
            i: flat / (n * n) + 1,
            j: (flat / n) % n + 1,
            k: flat % n + 1,
            max_abs: per_component[flat],
        })
        .collect();
    Envelope::new(
        "torsion",
        meta(sc),
        TorsionBody {
            grid,
            points: points.len(),
            max_abs,
            components,
        },
    )
    .emit()
}

/// `parallel`: RK4 parallel transport along a path in the parameter `t`,
/// compared against the closed-form transport when `F` is available.
#[allow(clippy::too_many_arguments)]
pub fn cmd_parallel(
    sc: &Scenario,
    path_text: &str,
    t0: f64,
    t1: f64,
    steps: usize,
    tensor: &Path,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let n = sc.chart.n();
    let path_sources: Vec<String> = path_text.split(',').map(|s| s.trim().to_string()).collect();
    if path_sources.len() != n {
        return Err(CliError::validation(format!(
            "--path needs {n} comma-separated expressions in t, got {}",
            path_sources.len()
        )));
    }
    let path: Vec<_> = path_sources
        .iter()
        .map(|s| {
            parse_expr_named(s, &["t"])
                .map_err(|e| CliError::validation(format!("path component `{s}`: {e}")))
        })
        .collect::<Result<_, _>>()?;

    let b0 = read_tensor(tensor, sc)?;
    let ode_result = sc
        .connection
        .parallel_transport_path(&path, t0, t1, &b0, steps)
        .map_err(CliError::from_flatt)?;

    let eval_path = |t: f64| -> Result<Vec<f64>, CliError> {
        path.iter()
            .map(|e| {
                e.eval(&[t])
                    .map_err(|err| CliError::numerical(err.to_string()))
            })
            .collect()
    };
    let start = eval_path(t0)?;
    let end = eval_path(t1)?;

    let closed_form = sc
        .law
        .as_ref()
        .map(|law| {
            law.transport_tensor(&start, &end, &b0)
                .map_err(CliError::from_flatt)
        })
        .transpose()?;
    let difference_max = closed_form.as_ref().map(|c| c.max_abs_diff(&ode_result));

    if let Some(out_path) = out {
        let header = vec![
            "component".to_string(),
            "ode".to_string(),
            "closed_form".to_string(),
            "difference".to_string(),
        ];
        let rows = ode_result
            .components()
            .iter()
            .enumerate()
            .map(|(idx, v)| {
                let closed = closed_form.as_ref().map(|c| c.components()[idx]);
                vec![
                    idx.to_string(),
                    fmt(*v),
                    closed.map(fmt).unwrap_or_default(),
                    closed.map(|c| fmt((c - v).abs())).unwrap_or_default(),
                ]
            })
            .collect::<Vec<_>>();
        write_csv(out_path, &header, &rows)?;
    }

    Envelope::new(
        "parallel",
        meta(sc),
        ParallelBody {
            path: path_sources,
            t0,
            t1,
            steps,
            start,
            end,
            ode_result,
            closed_form,
            difference_max,
        },
    )
    .emit()
}

/// `reconstruct`: integrate `∂F/∂x^k = F Γ_k` from the base point with
/// `F0 = I`, report the gauge constant and the round-trip residuals.
pub fn cmd_reconstruct(
    sc: &Scenario,
    base: Option<&str>,
    grid: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let n = sc.chart.n();
    let base = match base {
        Some(text) => parse_point(text, &sc.chart)?,
        None => sc.base.clone(),
    };
    let lattice = sc.chart.sample_points(SAMPLE_COUNT, DEFAULT_SEED);
    let (curvature_max, _) = sc
        .connection
        .curvature_max(&lattice)
        .map_err(CliError::from_flatt)?;
    let rec = reconstruct::integrate_frame_field(&sc.connection, &base, &Matrix::identity(n))
        .map_err(CliError::from_flatt)?;

    let points = sc.chart.grid_points(grid);
    let mut rows = Vec::new();
    let mut values = Vec::with_capacity(points.len());
    for p in &points {
        let f = rec.at(p).map_err(CliError::from_flatt)?;
        if out.is_some() {
            let mut row: Vec<String> = p.iter().map(|c| fmt(*c)).collect();
            for i in 0..n {
                for j in 0..n {
                    row.push(fmt(f.get(i, j)));
                }
            }
            rows.push(row);
        }
        values.push(f);
    }

    // residual of the round trip Γ(F_rec) ≈ Γ, with finite-difference
    // derivatives of the reconstructed field
    let h = 1e-4;
    let mut connection_residual = 0.0f64;
    for p in &points {
        let f_inv = values[points.iter().position(|q| q == p).unwrap()]
            .inverse()
            .ok_or_else(|| CliError::numerical("reconstructed frame is singular"))?;
        let gammas = sc.connection.gamma_at(p).map_err(CliError::from_flatt)?;
        for k in 0..n {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[k] += h;
            lo[k] -= h;
            let df = rec
                .at(&hi)
                .map_err(CliError::from_flatt)?
                .sub(&rec.at(&lo).map_err(CliError::from_flatt)?)
                .scale(1.0 / (2.0 * h));
            let gamma_rec = f_inv.mul(&df);
            connection_residual = connection_residual.max(gamma_rec.max_abs_diff(&gammas[k]));
        }
    }

    let (gauge_constant, gauge_spread, transport_residual) = match &sc.law {
        Some(law) => {
            let d = rec.at(&base).map_err(CliError::from_flatt)?.mul(
                &law.frame_field()
                    .eval_inverse(&base)
                    .map_err(CliError::from_flatt)?,
            );
            let mut spread = 0.0f64;
            for (p, f_rec) in points.iter().zip(&values) {
                let ratio = f_rec.mul(
                    &law.frame_field()
                        .eval_inverse(p)
                        .map_err(CliError::from_flatt)?,
                );
                spread = spread.max(ratio.max_abs_diff(&d));
            }
            let mut residual = 0.0f64;
            for (x, y) in sc.chart.sample_pairs(10, DEFAULT_SEED) {
                let original = law.transport_matrix(&x, &y).map_err(CliError::from_flatt)?;
                let rebuilt = rec
                    .at(&y)
                    .map_err(CliError::from_flatt)?
                    .inverse()
                    .ok_or_else(|| CliError::numerical("reconstructed frame is singular"))?
                    .mul(&rec.at(&x).map_err(CliError::from_flatt)?);
                residual = residual.max(original.max_abs_diff(&rebuilt));
            }
            (Some(matrix_rows(&d)), Some(spread), Some(residual))
        }
        None => (None, None, None),
    };

    if let Some(path) = out {
        let mut header = point_header(n);
        for i in 1..=n {
            for j in 1..=n {
                header.push(format!("F_{i}_{j}"));
            }
        }
        write_csv(path, &header, &rows)?;
    }

    Envelope::new(
        "reconstruct",
        meta(sc),
        ReconstructBody {
            base,
            grid,
            curvature_max,
            gauge_constant,
            gauge_spread,
            transport_residual,
            connection_residual,
        },
    )
    .emit()
}

/// `holonomize`: closedness verdict and, when every row is closed, sampled
/// recovered coordinates with Jacobian and zero-component residuals.
pub fn cmd_holonomize(
    sc: &Scenario,
    base: Option<&str>,
    grid: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let law = sc.require_law("holonomize")?;
    let n = sc.chart.n();
    let base = match base {
        Some(text) => parse_point(text, &sc.chart)?,
        None => sc.base.clone(),
    };
    let closedness =
        reconstruct::check_closedness(law.frame_field()).map_err(CliError::from_flatt)?;

    let mut samples = None;
    let mut jacobian_residual = None;
    let mut zero_component_residual = None;
    let mut rows = Vec::new();
    if closedness.all_closed {
        let map = reconstruct::holonomic_coordinates(law.frame_field(), &base)
            .map_err(CliError::from_flatt)?;
        let points = sc.chart.grid_points(grid);
        let mut collected = Vec::with_capacity(points.len());
        for p in &points {
            let values = map.values(p).map_err(CliError::from_flatt)?;
            if out.is_some() {
                let mut row: Vec<String> = p.iter().map(|c| fmt(*c)).collect();
                row.extend(values.iter().map(|v| fmt(*v)));
                rows.push(row);
            }
            collected.push(CoordinateSample {
                point: p.clone(),
                values,
            });
        }
        jacobian_residual = Some(map.jacobian_defect(&points).map_err(CliError::from_flatt)?);
        let lattice = sc.chart.sample_points(50, DEFAULT_SEED);
        zero_component_residual =
            Some(reconstruct::zero_component_defect(law, &lattice).map_err(CliError::from_flatt)?);
        samples = Some(collected);
    }

    if let Some(path) = out {
        let mut header = point_header(n);
        for j in 1..=n {
            header.push(format!("coord_{j}"));
        }
        write_csv(path, &header, &rows)?;
    }

    Envelope::new(
        "holonomize",
        meta(sc),
        HolonomizeBody {
            base,
            grid,
            closedness,
            samples,
            jacobian_residual,
            zero_component_residual,
        },
    )
    .emit()
}

/// `adapted-frame`: the frame in which transport components are Kronecker
/// deltas, with the residual of that property over sampled point pairs.
pub fn cmd_adapted_frame(sc: &Scenario, out: Option<&Path>) -> Result<(), CliError> {
    let law = sc.require_law("adapted-frame")?;
    let n = sc.chart.n();

    let (frame_exprs, warning) = match law.adapted_frame() {
        Ok(frame) => {
            let exprs = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| frame.matrix().entry(i, j).to_string())
                        .collect()
                })
                .collect();
            (Some(exprs), None)
        }
        Err(flatt::Error::SymbolicInversionUnsupported { n }) => (
            None,
            Some(format!(
                "symbolic frame inversion is unavailable for n = {n}; the frame was verified pointwise"
            )),
        ),
        Err(other) => return Err(CliError::from_flatt(other)),
    };

    let pairs = sc.chart.sample_pairs(50, DEFAULT_SEED);
    let mut delta_residual = 0.0f64;
    let mut rows = Vec::new();
    for (x, y) in &pairs {
        let e_x = law.adapted_frame_at(x).map_err(CliError::from_flatt)?;
        let e_y_inv = law.frame_field().eval(y).map_err(CliError::from_flatt)?;
        let h = law.transport_matrix(x, y).map_err(CliError::from_flatt)?;
        let components = e_y_inv.mul(&h).mul(&e_x);
        let residual = components.max_abs_diff(&Matrix::identity(n));
        delta_residual = delta_residual.max(residual);
        if out.is_some() {
            let mut row: Vec<String> = x.iter().map(|c| fmt(*c)).collect();
            row.extend(y.iter().map(|c| fmt(*c)));
            row.push(fmt(residual));
            rows.push(row);
        }
    }

    if let Some(path) = out {
        let mut header: Vec<String> = (1..=n).map(|k| format!("from_x{k}")).collect();
        header.extend((1..=n).map(|k| format!("to_x{k}")));
        header.push("delta_residual".to_string());
        write_csv(path, &header, &rows)?;
    }

    Envelope::new(
        "adapted-frame",
        meta(sc),
        AdaptedFrameBody {
            frame_exprs,
            pairs: pairs.len(),
            delta_residual,
            warning,
        },
    )
    .emit()
}

fn read_tensor(path: &Path, sc: &Scenario) -> Result<Tensor, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    let tensor = Tensor::from_json(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    if tensor.n() != sc.chart.n() {
        return Err(CliError::validation(format!(
            "tensor dimension {} does not match the chart dimension {}",
            tensor.n(),
            sc.chart.n()
        )));
    }
    Ok(tensor)
}
