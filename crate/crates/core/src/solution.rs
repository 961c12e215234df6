//! Solution files.
//!
//! ```json
//! {"alpha": {"e1->e2": 1.0}, "beta": {"t": {"demand_1": {"e2": 1.0}}},
//!  "gamma_max": 0.0, "F": 0.0}
//! ```
//!
//! Floats are written in shortest round-trip form; keys are sorted.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Network;
use crate::xfer::{gamma_profile, CodingSolution, XferError};

#[derive(Debug, Error)]
pub enum SolutionError {
    #[error("parse error at line {line}, column {column} ({path}): {message}")]
    Parse {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("bad key {key:?}: {message}")]
    Key { key: String, message: String },
    #[error(transparent)]
    Invalid(#[from] XferError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub alpha: BTreeMap<String, f64>,
    pub beta: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
    #[serde(default)]
    pub gamma_max: f64,
    #[serde(rename = "F", default)]
    pub objective: f64,
}

impl SolutionFile {
    pub fn from_solution(net: &Network, sol: &CodingSolution<f64>) -> Result<Self, SolutionError> {
        let profile = gamma_profile(net, sol)?;
        let alpha = sol
            .alpha_entries()
            .map(|(a, b, v)| (format!("{}->{}", net.edge(a).name, net.edge(b).name), *v))
            .collect();
        let mut beta: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>> = BTreeMap::new();
        for (t, pos, coeffs) in sol.beta_entries() {
            let edges = net
                .inc(t)
                .iter()
                .zip(coeffs)
                .map(|(e, v)| (net.edge(*e).name.clone(), *v))
                .collect();
            beta.entry(net.node(t).name.clone())
                .or_default()
                .insert(format!("demand_{}", pos + 1), edges);
        }
        Ok(SolutionFile {
            alpha,
            beta,
            gamma_max: profile.gamma_max,
            objective: profile.objective,
        })
    }

    pub fn parse(text: &str) -> Result<Self, SolutionError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            SolutionError::Parse {
                line: inner.line(),
                column: inner.column(),
                path,
                message: inner.to_string(),
            }
        })
    }

    pub fn into_solution(&self, net: &Network) -> Result<CodingSolution<f64>, SolutionError> {
        let mut sol = CodingSolution::new();
        for (key, &v) in &self.alpha {
            let (a, b) = key.split_once("->").ok_or_else(|| SolutionError::Key {
                key: key.clone(),
                message: "expected \"from->to\"".into(),
            })?;
            sol.set_alpha_named(net, a, b, v)?;
        }
        for (t, demands) in &self.beta {
            for (key, edges) in demands {
                let pos = key
                    .strip_prefix("demand_")
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| SolutionError::Key {
                        key: key.clone(),
                        message: "expected \"demand_<n>\" with n >= 1".into(),
                    })?;
                for (e, &v) in edges {
                    sol.set_beta_named(net, t, pos - 1, e, v)?;
                }
            }
        }
        sol.check(net)?;
        Ok(sol)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("solution serialization");
        s.push('\n');
        s
    }
}

pub fn solution_to_json(net: &Network, sol: &CodingSolution<f64>) -> Result<String, SolutionError> {
    Ok(SolutionFile::from_solution(net, sol)?.to_json())
}

pub fn solution_from_json(net: &Network, text: &str) -> Result<CodingSolution<f64>, SolutionError> {
    SolutionFile::parse(text)?.into_solution(net)
}

pub fn load_solution(net: &Network, path: impl AsRef<Path>) -> Result<CodingSolution<f64>, SolutionError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SolutionError::Io {
        path: path.display().to_string(),
        source,
    })?;
    solution_from_json(net, &text)
}

pub fn save_solution(net: &Network, sol: &CodingSolution<f64>, path: impl AsRef<Path>) -> Result<(), SolutionError> {
    let path = path.as_ref();
    fs::write(path, solution_to_json(net, sol)?).map_err(|source| SolutionError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures;

    #[test]
    fn butterfly_roundtrip() {
        let net = fixtures::butterfly();
        let sol = fixtures::butterfly_solution::<f64>(&net);
        let text = solution_to_json(&net, &sol).unwrap();
        let back = solution_from_json(&net, &text).unwrap();
        assert_eq!(back, sol);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["alpha"]["c-d->d-t1"], 1.0);
        assert_eq!(v["beta"]["t1"]["demand_2"]["d-t1"], 1.0);
        assert_eq!(v["F"], 0.0);
    }

    #[test]
    fn floats_roundtrip_exactly() {
        let net = fixtures::g2();
        let sol = fixtures::g2_published_solution(&net);
        let mut sol2 = sol.clone();
        let (a, b, _) = sol.alpha_entries().next().unwrap();
        sol2.set_alpha(a, b, 0.1 + 0.2);
        let back = solution_from_json(&net, &solution_to_json(&net, &sol2).unwrap()).unwrap();
        assert_eq!(back, sol2);
    }

    #[test]
    fn bad_keys() {
        let net = fixtures::identity();
        let err = solution_from_json(&net, r#"{"alpha": {"e1": 1.0}, "beta": {}}"#).unwrap_err();
        assert!(matches!(err, SolutionError::Key { .. }));
        let err = solution_from_json(&net, r#"{"alpha": {}, "beta": {"t": {"demand_0": {"e1": 1}}}}"#).unwrap_err();
        assert!(matches!(err, SolutionError::Key { .. }));
        let err = solution_from_json(&net, r#"{"alpha": {}, "beta": {"t": {"demand_1": {"zz": 1}}}}"#).unwrap_err();
        assert!(matches!(err, SolutionError::Invalid(_)));
        let err = solution_from_json(&net, r#"{"alpha": {}, "beta": 3}"#).unwrap_err();
        assert!(matches!(err, SolutionError::Parse { ref path, .. } if path == "beta"));
    }
}
