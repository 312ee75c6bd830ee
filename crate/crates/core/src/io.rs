//! JSON interchange and number formatting.
//!
//! Matrix JSON is `{"re": rows, "im": rows}` with `im` optional; rows are
//! nested arrays or a flat row-major array. A state adds `"d1"` and `"d2"`,
//! a map is `{"d", "choi", "name"}` and an ensemble is
//! `{"weights", "members": [state, ...]}` with the barycenter computed from
//! the members. Parse errors carry the JSON path of the offending field.

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::bipartite::{BipartiteSpace, BipartiteState};
use crate::correlation::{CorrelationResult, SeparabilityReport};
use crate::error::{Error, Result};
use crate::gns::VerificationReport;
use crate::linalg::{ComplexMatrix, C64};
use crate::measures::Ensemble;
use crate::posmaps::PositiveMapSpec;

#[derive(Deserialize)]
#[serde(untagged)]
enum Rows {
    Nested(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixJson {
    re: Rows,
    #[serde(default)]
    im: Option<Rows>,
}

#[derive(Deserialize)]
struct StateJson {
    d1: usize,
    d2: usize,
    re: Rows,
    #[serde(default)]
    im: Option<Rows>,
}

#[derive(Deserialize)]
struct MapJson {
    d: usize,
    choi: MatrixJson,
    #[serde(default)]
    name: Option<String>,
}

#[derive(Deserialize)]
struct EnsembleJson {
    weights: Vec<f64>,
    members: Vec<StateJson>,
}

fn parse_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { path: path.into(), message: message.into() }
}

fn from_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        parse_err(path, e.into_inner().to_string())
    })
}

/// Flattens `rows` to a row-major vector of an `n × n` matrix, inferring
/// `n` when `expected` is `None`.
fn flatten(rows: Rows, expected: Option<usize>, path: &str) -> Result<(usize, Vec<f64>)> {
    let (n, data) = match rows {
        Rows::Nested(r) => {
            let n = r.len();
            if let Some((i, row)) = r.iter().enumerate().find(|(_, row)| row.len() != n) {
                return Err(parse_err(format!("{path}[{i}]"), format!("row has {} entries, expected {n}", row.len())));
            }
            (n, r.into_iter().flatten().collect())
        }
        Rows::Flat(v) => {
            let n = (v.len() as f64).sqrt().round() as usize;
            if n * n != v.len() {
                return Err(parse_err(path, format!("{} entries do not form a square matrix", v.len())));
            }
            (n, v)
        }
    };
    if let Some(e) = expected {
        if e != n {
            return Err(parse_err(path, format!("matrix is {n}x{n}, expected {e}x{e}")));
        }
    }
    if n == 0 {
        return Err(parse_err(path, "empty matrix"));
    }
    Ok((n, data))
}

fn assemble(re: Rows, im: Option<Rows>, expected: Option<usize>, prefix: &str) -> Result<ComplexMatrix> {
    let (n, re) = flatten(re, expected, &format!("{prefix}re"))?;
    let im = match im {
        Some(im) => flatten(im, Some(n), &format!("{prefix}im"))?.1,
        None => vec![0.0; n * n],
    };
    let data = re.iter().zip(&im).map(|(a, b)| C64::new(*a, *b)).collect();
    ComplexMatrix::new(n, n, data).map_err(|e| parse_err(format!("{prefix}re"), e.to_string()))
}

pub fn parse_matrix(text: &str) -> Result<ComplexMatrix> {
    let m: MatrixJson = from_str(text)?;
    assemble(m.re, m.im, None, "")
}

fn state_from_json(s: StateJson, prefix: &str) -> Result<BipartiteState> {
    let space = BipartiteSpace::new(s.d1, s.d2).map_err(|e| parse_err(format!("{prefix}d1"), e.to_string()))?;
    let rho = assemble(s.re, s.im, Some(space.dim()), prefix)?;
    BipartiteState::new(space, rho)
}

pub fn parse_state(text: &str) -> Result<BipartiteState> {
    state_from_json(from_str(text)?, "")
}

pub fn parse_map(text: &str) -> Result<PositiveMapSpec> {
    let m: MapJson = from_str(text)?;
    if m.d == 0 {
        return Err(parse_err("d", "dimension must be positive"));
    }
    let choi = assemble(m.choi.re, m.choi.im, Some(m.d * m.d), "choi.")?;
    PositiveMapSpec::new(m.d, choi, m.name)
}

pub fn parse_ensemble(text: &str) -> Result<Ensemble> {
    let e: EnsembleJson = from_str(text)?;
    if e.members.is_empty() {
        return Err(parse_err("members", "no members"));
    }
    let mut space = None;
    let mut members = Vec::with_capacity(e.members.len());
    for (i, m) in e.members.into_iter().enumerate() {
        let s = state_from_json(m, &format!("members[{i}]."))?;
        match space {
            None => space = Some(s.space()),
            Some(sp) if sp != s.space() => {
                return Err(parse_err(format!("members[{i}].d1"), "member dimensions differ from members[0]"));
            }
            _ => {}
        }
        members.push(s.into_rho());
    }
    Ensemble::new(space.expect("nonempty"), e.weights, members)
}

fn rows_json(m: &ComplexMatrix, f: impl Fn(C64) -> f64) -> Value {
    Value::Array((0..m.rows()).map(|i| Value::Array((0..m.cols()).map(|j| json!(f(m[(i, j)]))).collect())).collect())
}

pub fn matrix_to_json(m: &ComplexMatrix) -> Value {
    json!({ "re": rows_json(m, |z| z.re), "im": rows_json(m, |z| z.im) })
}

pub fn state_to_json(s: &BipartiteState) -> Value {
    let sp = s.space();
    json!({ "d1": sp.d1, "d2": sp.d2, "re": rows_json(s.rho(), |z| z.re), "im": rows_json(s.rho(), |z| z.im) })
}

pub fn ensemble_to_json(e: &Ensemble) -> Value {
    let sp = e.space();
    let members: Vec<Value> = e
        .members()
        .iter()
        .map(|m| json!({ "d1": sp.d1, "d2": sp.d2, "re": rows_json(m, |z| z.re), "im": rows_json(m, |z| z.im) }))
        .collect();
    json!({ "weights": e.weights(), "members": members })
}

pub fn map_to_json(m: &PositiveMapSpec) -> Value {
    json!({ "d": m.d, "choi": matrix_to_json(&m.choi), "name": m.name })
}

pub fn result_to_json(r: &CorrelationResult) -> Value {
    json!({
        "value": r.value,
        "converged": r.converged,
        "starts_used": r.starts_used,
        "ensemble": ensemble_to_json(&r.ensemble),
    })
}

pub fn verdict_to_json(r: &SeparabilityReport) -> Value {
    let probes: Vec<Value> = r
        .probes
        .iter()
        .map(|p| json!({ "label": p.label, "value": p.value, "converged": p.converged, "starts_used": p.starts_used }))
        .collect();
    json!({
        "verdict": r.verdict.as_str(),
        "max_d0": r.max_d0,
        "ppt_min_eig": r.ppt_min_eigenvalue,
        "ppt_exact": r.ppt_exact,
        "witness": matrix_to_json(&r.witness),
        "probes": probes,
    })
}

pub fn report_to_json(r: &VerificationReport) -> Value {
    json!({
        "residual_max": r.residual_max,
        "v_norm": r.v_norm,
        "dim_gns": r.dim_gns,
        "bound": r.bound,
        "omega_residual": r.omega_residual,
        "status": if r.passed { "PASS" } else { "FAIL" },
    })
}

/// `printf("%.12g")`: 12 significant digits, trailing zeros removed,
/// exponent form outside `[1e-4, 1e12)`.
pub fn fmt_g(x: f64) -> String {
    fmt_sig(x, 12)
}

fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
