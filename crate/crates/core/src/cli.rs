//! Command dispatch and report rendering for the `graphfold` binary.
//!
//! Every command yields a [`RunReport`]. Reports render either as JSON with
//! sorted keys and floats in C `%.12e` form, or as plain aligned tables.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde_json::{Map, Number, Value};

use crate::chain::{
    chain_combined_secular_residual, chain_effective_matrix, chain_restricted_eigenvector, chain_root_potentials,
    chain_secular_residual, ChainPartitionParams,
};
use crate::error::Error;
use crate::format::parse_graph_file;
use crate::graph::{GraphSpec, HamiltonianMatrix, Partition, C64};
use crate::numerics::{eig_general, eig_hermitian, Spectrum};
use crate::partition::{ConsistencyStatus, Projection, DEFAULT_RESIDUAL_TOL};
use crate::ring::{ring_check, RingParams};

/// Environment variable overriding the residual tolerance.
pub const TOL_ENV: &str = "GRAPHFOLD_TOL";
/// Tolerance for the ring spectrum and eigenvector comparisons.
pub const RING_TOL: f64 = 1e-9;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Verify { file: PathBuf },
    Spectrum { file: PathBuf },
    Effective { file: PathBuf, energy: f64 },
    ChainDemo { n_a: usize, n_c: usize, n_b: usize, mode: usize },
    RingDemo { n: usize, k: f64 },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Verify { .. } => "verify",
            Command::Spectrum { .. } => "spectrum",
            Command::Effective { .. } => "effective",
            Command::ChainDemo { .. } => "chain-demo",
            Command::RingDemo { .. } => "ring-demo",
        }
    }

    fn inputs(&self, tol: f64) -> Map<String, Value> {
        let mut m = Map::new();
        match self {
            Command::Verify { file } => {
                m.insert("file".into(), file.display().to_string().into());
                m.insert("tolerance".into(), float(tol));
            }
            Command::Spectrum { file } => {
                m.insert("file".into(), file.display().to_string().into());
            }
            Command::Effective { file, energy } => {
                m.insert("file".into(), file.display().to_string().into());
                m.insert("energy".into(), float(*energy));
            }
            Command::ChainDemo { n_a, n_c, n_b, mode } => {
                m.insert("Na".into(), (*n_a).into());
                m.insert("Nc".into(), (*n_c).into());
                m.insert("Nb".into(), (*n_b).into());
                m.insert("n".into(), (*mode).into());
                m.insert("tolerance".into(), float(tol));
            }
            Command::RingDemo { n, k } => {
                m.insert("N".into(), (*n).into());
                m.insert("k".into(), float(*k));
                m.insert("tolerance".into(), float(RING_TOL));
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub command: String,
    pub inputs: Map<String, Value>,
    pub results: Map<String, Value>,
    pub exit_code: i32,
}

impl RunReport {
    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("command".into(), self.command.clone().into());
        m.insert("inputs".into(), Value::Object(self.inputs.clone()));
        m.insert("results".into(), Value::Object(self.results.clone()));
        m.insert("exit_code".into(), self.exit_code.into());
        Value::Object(m)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("report values are serializable");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "graphfold {} (exit {})", self.command, self.exit_code);
        out.push_str("inputs\n");
        render_map(&mut out, &self.inputs);
        out.push_str("results\n");
        render_map(&mut out, &self.results);
        out
    }

    /// The `error` message of a failed run.
    pub fn error(&self) -> Option<&str> {
        self.results.get("error").and_then(Value::as_str)
    }
}

/// C `%.12e`: twelve fraction digits and an exponent of at least two digits.
pub fn format_float(x: f64) -> String {
    let s = format!("{x:.12e}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let (sign, digits) = match exp.strip_prefix('-') {
                Some(d) => ('-', d),
                None => ('+', exp),
            };
            format!("{mantissa}e{sign}{digits:0>2}")
        }
        None => s,
    }
}

/// JSON number carrying the `%.12e` text; non-finite values become `null`.
pub fn float(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    format_float(x).parse::<Number>().map(Value::Number).unwrap_or(Value::Null)
}

fn complex(z: C64) -> Value {
    let mut m = Map::new();
    m.insert("re".into(), float(z.re));
    m.insert("im".into(), float(z.im));
    Value::Object(m)
}

fn complex_list(values: &[C64]) -> Value {
    Value::Array(values.iter().map(|&z| complex(z)).collect())
}

fn float_list(values: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(values.into_iter().map(float).collect())
}

/// Residual tolerance from [`TOL_ENV`], or the default when unset.
pub fn tolerance_from_env() -> Result<f64, String> {
    match std::env::var(TOL_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_RESIDUAL_TOL),
        Err(e) => Err(format!("{TOL_ENV}: {e}")),
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(t) if t > 0.0 && t.is_finite() => Ok(t),
            _ => Err(format!("{TOL_ENV} must be a positive number, got {s:?}")),
        },
    }
}

pub fn run(command: &Command, tol: f64) -> RunReport {
    let outcome = match command {
        Command::Verify { file } => load(file).and_then(|(spec, p)| verify(&spec, p, tol)),
        Command::Spectrum { file } => load(file).and_then(|(spec, _)| spectrum(&spec)),
        Command::Effective { file, energy } => load(file).and_then(|(spec, p)| effective(&spec, p, *energy)),
        Command::ChainDemo { n_a, n_c, n_b, mode } => chain_demo(*n_a, *n_c, *n_b, *mode, tol),
        Command::RingDemo { n, k } => ring_demo(*n, *k),
    };
    let (results, exit_code) = match outcome {
        Ok(pair) => pair,
        Err(message) => {
            let mut m = Map::new();
            m.insert("error".into(), message.into());
            (m, EXIT_INPUT)
        }
    };
    RunReport { command: command.name().into(), inputs: command.inputs(tol), results, exit_code }
}

type Outcome = Result<(Map<String, Value>, i32), String>;

fn load(path: &PathBuf) -> Result<(GraphSpec, Option<Partition>), String> {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_graph_file(&bytes).map_err(|e| e.to_string())
}

fn require_partition(p: Option<Partition>) -> Result<Partition, String> {
    p.ok_or_else(|| "graph file has no partition".to_string())
}

fn verify(spec: &GraphSpec, p: Option<Partition>, tol: f64) -> Outcome {
    let p = require_partition(p)?;
    let report = Projection::new(spec, &p).and_then(|proj| proj.verify(tol)).map_err(|e| e.to_string())?;
    let entries = report
        .entries
        .iter()
        .map(|e| {
            let mut m = Map::new();
            m.insert("index".into(), (e.index + 1).into());
            m.insert("energy".into(), float(e.energy));
            m.insert("residual".into(), e.residual.map_or(Value::Null, float));
            m.insert("status".into(), e.status.as_str().into());
            Value::Object(m)
        })
        .collect();
    let inconsistent = report.count(ConsistencyStatus::Inconsistent);
    let skipped = report.entries.iter().filter(|e| e.status.is_skipped()).count();
    let mut m = Map::new();
    m.insert("entries".into(), Value::Array(entries));
    m.insert("consistent".into(), report.count(ConsistencyStatus::Consistent).into());
    m.insert("inconsistent".into(), inconsistent.into());
    m.insert("skipped".into(), skipped.into());
    m.insert("max_residual".into(), float(report.max_residual()));
    Ok((m, if inconsistent > 0 { EXIT_VIOLATION } else { EXIT_OK }))
}

fn eigen(h: &HamiltonianMatrix) -> Result<Spectrum, Error> {
    if h.is_hermitian() {
        eig_hermitian(h)
    } else {
        eig_general(h)
    }
}

fn spectrum(spec: &GraphSpec) -> Outcome {
    let h = crate::graph::build_hamiltonian(spec).map_err(|e| e.to_string())?;
    let s = eigen(&h).map_err(|e| e.to_string())?;
    let mut m = Map::new();
    m.insert("hermitian".into(), h.is_hermitian().into());
    m.insert("eigenvalues".into(), complex_list(&s.eigenvalues));
    Ok((m, EXIT_OK))
}

fn effective(spec: &GraphSpec, p: Option<Partition>, energy: f64) -> Outcome {
    let p = require_partition(p)?;
    let proj = Projection::new(spec, &p).map_err(|e| e.to_string())?;
    let e = C64::new(energy, 0.0);
    let self_energies = proj.self_energies(e).map_err(|e| e.to_string())?;
    let hbar = proj.effective_hamiltonian(e).map_err(|e| e.to_string())?;
    let s = eigen(&hbar).map_err(|e| e.to_string())?;
    let rows = self_energies
        .iter()
        .enumerate()
        .map(|(b, se)| {
            let mut m = Map::new();
            m.insert("branch".into(), (b + 1).into());
            m.insert("root".into(), (se.root + 1).into());
            m.insert("re".into(), float(se.value.re));
            m.insert("im".into(), float(se.value.im));
            Value::Object(m)
        })
        .collect();
    let mut m = Map::new();
    m.insert("self_energies".into(), Value::Array(rows));
    m.insert("eigenvalues".into(), complex_list(&s.eigenvalues));
    Ok((m, EXIT_OK))
}

fn chain_demo(n_a: usize, n_c: usize, n_b: usize, mode: usize, tol: f64) -> Outcome {
    let params = ChainPartitionParams::for_mode(n_a, n_c, n_b, mode).map_err(|e| e.to_string())?;
    let (v_a, v_b) = chain_root_potentials(&params).map_err(|e| e.to_string())?;
    let k = params.k;
    let energy = params.energy();
    let matrix = chain_effective_matrix(n_c, v_a, v_b);
    let s = eig_hermitian(&matrix).map_err(|e| e.to_string())?;
    let (amps, f) = chain_restricted_eigenvector(k, n_a, n_c).map_err(|e| e.to_string())?;
    let real = matrix.matrix().map(|z| z.re);
    let residual = (&real * &f - &f * energy).norm() / f.norm();
    let kappa = C64::new(k, 0.0);
    let secular = chain_secular_residual(kappa, n_c, v_a, v_b).norm();
    let combined = chain_combined_secular_residual(k, kappa, n_a, n_c).map_err(|e| e.to_string())?.norm();

    let mut m = Map::new();
    m.insert("k".into(), float(k));
    m.insert("energy".into(), float(energy));
    m.insert("V_A".into(), float(v_a));
    m.insert("V_B".into(), float(v_b));
    m.insert("effective_eigenvalues".into(), float_list(s.real_parts()));
    m.insert("restricted_eigenvector".into(), float_list(f.iter().copied()));
    m.insert("amplitude_ratio".into(), complex(amps.b / amps.a));
    m.insert("eigenvector_residual".into(), float(residual));
    m.insert("secular_residual".into(), float(secular));
    m.insert("combined_secular_residual".into(), float(combined));
    let ok = residual <= tol && secular <= tol && combined <= tol;
    Ok((m, if ok { EXIT_OK } else { EXIT_VIOLATION }))
}

fn ring_demo(n: usize, k: f64) -> Outcome {
    let params = RingParams::new(n, k).map_err(|e| e.to_string())?;
    let c = ring_check(params).map_err(|e| e.to_string())?;
    let mut m = Map::new();
    m.insert("V".into(), float(params.v()));
    m.insert("spectrum".into(), complex_list(&c.spectrum.eigenvalues));
    m.insert("analytic".into(), float_list(c.analytic.iter().copied()));
    m.insert("pairing_error".into(), c.pairing_error.map_or(Value::Null, float));
    m.insert("max_imag".into(), float(c.max_imag));
    m.insert("pt_check".into(), (c.pt_deviation < crate::ring::PT_TOL).into());
    m.insert("pt_deviation".into(), float(c.pt_deviation));
    m.insert("plus_vector_error".into(), float(c.plus_vector_error));
    m.insert("defective_clusters".into(), c.defective_clusters().into());
    Ok((m, if c.passes(RING_TOL) { EXIT_OK } else { EXIT_VIOLATION }))
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        Value::Object(m) if m.contains_key("re") && m.contains_key("im") && m.len() == 2 => {
            format!("{} {}i", scalar_text(&m["re"]), scalar_text(&m["im"]))
        }
        other => other.to_string(),
    }
}

fn render_map(out: &mut String, map: &Map<String, Value>) {
    let width = map.keys().map(String::len).max().unwrap_or(0);
    let is_block = |v: &Value| matches!(v, Value::Array(items) if items.iter().any(|i| matches!(i, Value::Object(o) if !is_complex(o))));
    for (key, value) in map.iter().filter(|(_, v)| !is_block(v)) {
        let text = match value {
            Value::Array(items) => items.iter().map(scalar_text).collect::<Vec<_>>().join(", "),
            other => scalar_text(other),
        };
        let _ = writeln!(out, "  {key:<width$}  {text}");
    }
    for (key, value) in map.iter().filter(|(_, v)| is_block(v)) {
        let _ = writeln!(out, "  {key}");
        if let Value::Array(items) = value {
            render_rows(out, items);
        }
    }
}

fn is_complex(o: &Map<String, Value>) -> bool {
    o.len() == 2 && o.contains_key("re") && o.contains_key("im")
}

fn render_rows(out: &mut String, rows: &[Value]) {
    let mut columns: Vec<&String> = Vec::new();
    for row in rows {
        if let Value::Object(o) = row {
            for k in o.keys() {
                if !columns.contains(&k) {
                    columns.push(k);
                }
            }
        }
    }
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|row| columns.iter().map(|c| row.get(c.as_str()).map_or_else(String::new, scalar_text)).collect())
        .collect();
    let widths: Vec<usize> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| cells.iter().map(|r| r[i].len()).chain([c.len()]).max().unwrap_or(0))
        .collect();
    let line = |fields: Vec<&str>| {
        let parts: Vec<String> = fields.iter().zip(&widths).map(|(f, w)| format!("{f:<w$}")).collect();
        format!("    {}\n", parts.join("  ").trim_end())
    };
    out.push_str(&line(columns.iter().map(|c| c.as_str()).collect()));
    for r in &cells {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_exponents() {
        assert_eq!(format_float(-std::f64::consts::SQRT_2 / 2.0), "-7.071067811865e-01");
        assert_eq!(format_float(-std::f64::consts::SQRT_2), "-1.414213562373e+00");
        assert_eq!(format_float(0.0), "0.000000000000e+00");
        assert_eq!(format_float(1.5e-300), "1.500000000000e-300");
        assert_eq!(format_float(2.5e17), "2.500000000000e+17");
    }

    #[test]
    fn floats_keep_their_text_in_json() {
        let v = float(1e-8);
        assert_eq!(serde_json::to_string(&v).unwrap(), "1.000000000000e-08");
        assert_eq!(float(f64::NAN), Value::Null);
    }

    #[test]
    fn keys_are_sorted() {
        let report = run(&Command::RingDemo { n: 2, k: std::f64::consts::FRAC_PI_3 }, 1e-8);
        let json = report.to_json();
        let pos = |s: &str| json.find(s).unwrap();
        assert!(pos("\"command\"") < pos("\"exit_code\""));
        assert!(pos("\"exit_code\"") < pos("\"inputs\""));
        assert!(pos("\"inputs\"") < pos("\"results\""));
    }

    #[test]
    fn chain_demo_numbers() {
        let report = run(&Command::ChainDemo { n_a: 5, n_c: 4, n_b: 6, mode: 4 }, 1e-8);
        assert_eq!(report.exit_code, EXIT_OK);
        let json = report.to_json();
        assert!(json.contains("\"V_A\": -7.071067811865e-01"));
        assert!(json.contains("\"V_B\": -1.414213562373e+00"));
    }

    #[test]
    fn bad_parameters_are_input_errors() {
        let report = run(&Command::ChainDemo { n_a: 3, n_c: 4, n_b: 4, mode: 3 }, 1e-8);
        assert_eq!(report.exit_code, EXIT_INPUT);
        assert!(report.error().unwrap().contains("V_A"));
        assert_eq!(run(&Command::RingDemo { n: 0, k: 1.0 }, 1e-8).exit_code, EXIT_INPUT);
        assert_eq!(run(&Command::Verify { file: "/nonexistent.json".into() }, 1e-8).exit_code, EXIT_INPUT);
    }

    #[test]
    fn table_lists_rows() {
        let report = run(&Command::RingDemo { n: 2, k: 1.0 }, 1e-8);
        let table = report.to_table();
        assert!(table.starts_with("graphfold ring-demo (exit 0)"));
        assert!(table.contains("pt_check"));
    }
}
