//! Report envelopes and CSV output. Every report embeds the tool version and
//! the scenario hash; serialization order is fixed by the struct layouts, so
//! identical runs produce byte-identical JSON.

use crate::error::CliError;
use flatt::reconstruct::ClosednessReport;
use flatt::tensor::Tensor;
use flatt::transport::AxiomReport;
use serde::Serialize;
use std::path::Path;

pub const TOOL: &str = "flatt";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
pub struct ScenarioMeta {
    pub name: String,
    pub hash: String,
    pub n: usize,
    pub seed: u64,
}

#[derive(Serialize)]
pub struct Envelope<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub scenario: ScenarioMeta,
    #[serde(flatten)]
    pub body: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(command: &'static str, meta: ScenarioMeta, body: T) -> Self {
        Envelope {
            tool: TOOL,
            version: VERSION,
            command,
            scenario: meta,
            body,
        }
    }

    /// Print the report as pretty JSON on stdout.
    pub fn emit(&self) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::io(format!("report serialization failed: {e}")))?;
        println!("{text}");
        Ok(())
    }
}

#[derive(Serialize)]
pub struct Assertion {
    pub name: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct CheckBody {
    pub trials: usize,
    pub axioms: Option<AxiomReport>,
    pub curvature_max: f64,
    pub torsion_max: f64,
    pub closedness: Option<ClosednessReport>,
    pub holonomic_constant_basis_exists: Option<bool>,
    pub assertions: Vec<Assertion>,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct TransportBody {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    /// `H(to, from)`, row major.
    pub matrix: Vec<Vec<f64>>,
    /// Its inverse, the matrix acting on covector components.
    pub covariant_matrix: Vec<Vec<f64>>,
    pub tensor_in: Option<Tensor>,
    pub tensor_out: Option<Tensor>,
}

#[derive(Serialize)]
pub struct ConnectionBody {
    pub at: Vec<f64>,
    /// `gammas[k-1][i][j] = Γ^i_{jk}(at)`.
    pub gammas: Vec<Vec<Vec<f64>>>,
    /// Symbolic entries when available.
    pub gamma_exprs: Option<Vec<Vec<Vec<String>>>>,
}

#[derive(Serialize)]
pub struct CurvatureBody {
    pub grid: usize,
    pub points: usize,
    pub max_abs: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Serialize)]
pub struct TorsionComponent {
    /// 1-based indices of `T^i_{jk}`.
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub max_abs: f64,
}

#[derive(Serialize)]
pub struct TorsionBody {
    pub grid: usize,
    pub points: usize,
    pub max_abs: f64,
    pub components: Vec<TorsionComponent>,
}

#[derive(Serialize)]
pub struct ParallelBody {
    pub path: Vec<String>,
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub ode_result: Tensor,
    pub closed_form: Option<Tensor>,
    pub difference_max: Option<f64>,
}

#[derive(Serialize)]
pub struct ReconstructBody {
    pub base: Vec<f64>,
    pub grid: usize,
    pub curvature_max: f64,
    /// `F_rec(base) · F(base)⁻¹` when the scenario carries `F`.
    pub gauge_constant: Option<Vec<Vec<f64>>>,
    /// Spread of `F_rec(x) · F(x)⁻¹` around the gauge constant.
    pub gauge_spread: Option<f64>,
    /// Worst mismatch of rebuilt transport matrices against the original.
    pub transport_residual: Option<f64>,
    /// Worst mismatch between the connection of the reconstructed field
    /// (finite-difference derivatives) and the input connection.
    pub connection_residual: f64,
}

#[derive(Serialize)]
pub struct CoordinateSample {
    pub point: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Serialize)]
pub struct HolonomizeBody {
    pub base: Vec<f64>,
    pub grid: usize,
    pub closedness: ClosednessReport,
    pub samples: Option<Vec<CoordinateSample>>,
    pub jacobian_residual: Option<f64>,
    pub zero_component_residual: Option<f64>,
}

#[derive(Serialize)]
pub struct AdaptedFrameBody {
    pub frame_exprs: Option<Vec<Vec<String>>>,
    pub pairs: usize,
    pub delta_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Write a CSV file with a header row.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    writer
        .write_record(header)
        .and_then(|()| rows.iter().try_for_each(|row| writer.write_record(row)))
        .and_then(|()| writer.flush().map_err(Into::into))
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}
