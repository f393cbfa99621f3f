//! Scenario files: a chart, an optional frame field `F`, an optional set of
//! connection matrices, a seed and a base point, in the TOML layout
//! documented in docs/scenario-format.md.

use crate::error::CliError;
use flatt::chart::{Chart, MatrixField, DEFAULT_SEED};
use flatt::connection::{derive_connection, Connection};
use flatt::expr::parse_expr;
use flatt::transport::TransportLaw;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

/// Agreement required between supplied gammas and the connection derived
/// from `F` when a scenario carries both.
const CONSISTENCY_TOL: f64 = 1e-8;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    n: usize,
    bounds: Vec<[f64; 2]>,
    seed: Option<u64>,
    base: Option<Vec<f64>>,
    #[serde(rename = "F")]
    f: Option<FrameFieldTable>,
    gamma: Option<BTreeMap<String, Vec<Vec<String>>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameFieldTable {
    rows: Vec<Vec<String>>,
}

/// A validated scenario.
#[derive(Debug)]
pub struct Scenario {
    pub name: String,
    pub chart: Chart,
    /// Effective seed (file value, `FLATT_SAMPLE_SEED` override, or 42).
    pub seed: u64,
    pub base: Vec<f64>,
    pub law: Option<TransportLaw>,
    pub connection: Connection,
    /// SHA-256 of the scenario file bytes, hex encoded.
    pub hash: String,
}

impl Scenario {
    /// The transport law, or a validation error for gamma-only scenarios.
    pub fn require_law(&self, command: &str) -> Result<&TransportLaw, CliError> {
        self.law.as_ref().ok_or_else(|| {
            CliError::validation(format!(
                "`{command}` needs a frame field: scenario '{}' defines only connection components",
                self.name
            ))
        })
    }
}

pub fn load_scenario(path: &Path, seed_override: Option<u64>) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    let hash = hex::encode(Sha256::digest(text.as_bytes()));

    let file: ScenarioFile = toml::from_str(&text).map_err(|e| {
        let line = e
            .span()
            .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1);
        match line {
            Some(line) => CliError::validation(format!(
                "{}:{line}: scenario parse error: {}",
                path.display(),
                e.message()
            )),
            None => CliError::validation(format!(
                "{}: scenario parse error: {}",
                path.display(),
                e.message()
            )),
        }
    })?;

    let n = file.n;
    if n == 0 {
        return Err(CliError::validation("scenario dimension n must be >= 1"));
    }
    if file.bounds.len() != n {
        return Err(CliError::validation(format!(
            "scenario declares n = {n} but {} bounds",
            file.bounds.len()
        )));
    }
    let chart = Chart::new(file.bounds.iter().map(|b| (b[0], b[1])).collect())
        .map_err(CliError::from_validation)?;

    let base = match file.base {
        Some(base) => {
            if base.len() != n {
                return Err(CliError::validation(format!(
                    "base point has {} coordinates, chart has {n}",
                    base.len()
                )));
            }
            if !chart.contains(&base) {
                return Err(CliError::validation(format!(
                    "base point {base:?} is outside the chart bounds"
                )));
            }
            base
        }
        None => chart.center(),
    };

    let law = match &file.f {
        Some(table) => Some(parse_law(&chart, table, &file.name)?),
        None => None,
    };
    let user_gammas = match &file.gamma {
        Some(table) => Some(parse_gammas(&chart, table)?),
        None => None,
    };
    if law.is_none() && user_gammas.is_none() {
        return Err(CliError::validation(
            "scenario must define [F] rows, [gamma] matrices, or both",
        ));
    }

    let connection = match (&law, user_gammas) {
        (Some(law), Some(gammas)) => {
            let derived = derive_connection(law).map_err(CliError::from_flatt)?;
            let supplied = Connection::from_gammas(gammas).map_err(CliError::from_flatt)?;
            check_consistency(&chart, &derived, &supplied)?;
            derived
        }
        (Some(law), None) => derive_connection(law).map_err(CliError::from_flatt)?,
        (None, Some(gammas)) => Connection::from_gammas(gammas).map_err(CliError::from_flatt)?,
        (None, None) => unreachable!("checked above"),
    };

    Ok(Scenario {
        name: file.name,
        chart,
        seed: seed_override.or(file.seed).unwrap_or(DEFAULT_SEED),
        base,
        law,
        connection,
        hash,
    })
}

fn parse_law(chart: &Chart, table: &FrameFieldTable, name: &str) -> Result<TransportLaw, CliError> {
    let field = parse_matrix(chart, &table.rows, "F")?;
    // invertibility is pre-checked across the sample lattice here
    TransportLaw::new(field, name).map_err(CliError::from_flatt)
}

fn parse_gammas(
    chart: &Chart,
    table: &BTreeMap<String, Vec<Vec<String>>>,
) -> Result<Vec<MatrixField>, CliError> {
    let n = chart.n();
    let mut gammas = Vec::with_capacity(n);
    for k in 1..=n {
        let key = format!("k{k}");
        let rows = table.get(&key).ok_or_else(|| {
            CliError::validation(format!("[gamma] is missing the matrix '{key}'"))
        })?;
        gammas.push(parse_matrix(chart, rows, &format!("gamma.{key}"))?);
    }
    if table.len() != n {
        let extra: Vec<&str> = table
            .keys()
            .filter(|k| !(1..=n).any(|i| k.as_str() == format!("k{i}")))
            .map(|k| k.as_str())
            .collect();
        return Err(CliError::validation(format!(
            "[gamma] has unexpected keys: {extra:?} (expected k1..k{n})"
        )));
    }
    Ok(gammas)
}

fn parse_matrix(chart: &Chart, rows: &[Vec<String>], what: &str) -> Result<MatrixField, CliError> {
    let n = chart.n();
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::validation(format!(
            "{what} must be an {n}×{n} table of expression strings"
        )));
    }
    let mut entries = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        for (j, text) in row.iter().enumerate() {
            let expr = parse_expr(text, n).map_err(|e| {
                CliError::validation(format!("{what}[{}][{}] = `{text}`: {e}", i + 1, j + 1))
            })?;
            entries.push(expr);
        }
    }
    MatrixField::new(chart.clone(), entries).map_err(CliError::from_flatt)
}

fn check_consistency(
    chart: &Chart,
    derived: &Connection,
    supplied: &Connection,
) -> Result<(), CliError> {
    for p in chart.sample_points(20, DEFAULT_SEED) {
        let a = derived.gamma_at(&p).map_err(CliError::from_flatt)?;
        let b = supplied.gamma_at(&p).map_err(CliError::from_flatt)?;
        for k in 0..chart.n() {
            let diff = a[k].max_abs_diff(&b[k]);
            if diff > CONSISTENCY_TOL {
                return Err(CliError::validation(format!(
                    "scenario F and gamma disagree: |Γ_{}(F) - gamma.k{}| = {diff:e} at {p:?}",
                    k + 1,
                    k + 1
                )));
            }
        }
    }
    Ok(())
}

/// Parse a comma-separated point like `"0.1, -2"` against the chart.
pub fn parse_point(text: &str, chart: &Chart) -> Result<Vec<f64>, CliError> {
    let coords: Result<Vec<f64>, _> = text.split(',').map(|c| c.trim().parse::<f64>()).collect();
    let coords = coords.map_err(|e| CliError::validation(format!("bad point '{text}': {e}")))?;
    if coords.len() != chart.n() {
        return Err(CliError::validation(format!(
            "point '{text}' has {} coordinates, chart has {}",
            coords.len(),
            chart.n()
        )));
    }
    if !chart.contains(&coords) {
        return Err(CliError::validation(format!(
            "point {coords:?} is outside the chart bounds"
        )));
    }
    Ok(coords)
}
