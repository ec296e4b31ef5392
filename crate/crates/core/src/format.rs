//! JSON graph files.
//!
//! ```json
//! {"n_nodes": 3,
//!  "hoppings": [{"i": 0, "j": 1, "re": -1.0, "im": 0.0}],
//!  "onsites": [{"i": 2, "re": 0.5}],
//!  "partition": {"center": [1], "branches": [
//!     {"sites": [0], "root": 1, "couplings": [{"site": 0, "re": -1.0}]}]}}
//! ```
//!
//! `im` defaults to zero. `partition` is optional, and so is `couplings`
//! inside a branch; when omitted the couplings are read off the graph.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;
use crate::graph::{validate_partition, Branch, GraphSpec, Partition, PartitionReport, C64};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FormatError {
    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("invalid graph: {0}")]
    Graph(Error),
    #[error("invalid partition: {0}")]
    Validation(PartitionReport),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n_nodes: usize,
    #[serde(default)]
    pub hoppings: Vec<HoppingEntry>,
    #[serde(default)]
    pub onsites: Vec<OnsiteEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HoppingEntry {
    pub i: usize,
    pub j: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OnsiteEntry {
    pub i: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PartitionEntry {
    pub center: Vec<usize>,
    #[serde(default)]
    pub branches: Vec<BranchEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BranchEntry {
    pub sites: Vec<usize>,
    pub root: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<CouplingEntry>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CouplingEntry {
    pub site: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl GraphFile {
    pub fn to_spec(&self) -> GraphSpec {
        let mut g = GraphSpec::new(self.n_nodes);
        for h in &self.hoppings {
            g.add_hopping(h.i, h.j, C64::new(h.re, h.im));
        }
        for o in &self.onsites {
            g.add_onsite(o.i, C64::new(o.re, o.im));
        }
        g
    }

    /// Partition with couplings as declared, or read from `spec` when absent.
    pub fn to_partition(&self, spec: &GraphSpec) -> Option<Partition> {
        let p = self.partition.as_ref()?;
        let branches = p
            .branches
            .iter()
            .map(|b| match &b.couplings {
                Some(cs) => Branch::new(b.sites.clone(), b.root, cs.iter().map(|c| (c.site, C64::new(c.re, c.im))).collect()),
                None => Branch::from_graph(spec, b.sites.clone(), b.root),
            })
            .collect();
        Some(Partition::new(p.center.clone(), branches))
    }
}

/// Parses and validates a graph file.
pub fn parse_graph_file(bytes: &[u8]) -> Result<(GraphSpec, Option<Partition>), FormatError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let file: GraphFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        FormatError::Parse { path, line: inner.line(), column: inner.column(), message: inner.to_string() }
    })?;
    let spec = file.to_spec();
    spec.validate().map_err(FormatError::Graph)?;
    let partition = file.to_partition(&spec);
    if let Some(p) = &partition {
        let report = validate_partition(&spec, p);
        if !report.is_valid() {
            return Err(FormatError::Validation(report));
        }
    }
    Ok((spec, partition))
}
