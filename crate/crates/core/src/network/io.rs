use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use super::{Network, NetworkBuilder, NetworkError, Role};

fn default_base() -> u32 {
    2
}

/// On-disk JSON shape of a network.
#[derive(Debug, Clone, Serialize)]
pub struct NetworkFile {
    pub name: String,
    #[serde(default = "default_base")]
    pub base: u32,
    pub nodes: Vec<NodeEntry>,
    pub edges: Vec<EdgeEntry>,
    pub source_edge_order: Vec<String>,
    #[serde(serialize_with = "ordered_demands")]
    pub demands: Vec<(String, Vec<usize>)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: String,
    pub role: Role,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub id: String,
    pub from: String,
    pub to: String,
}

fn ordered_demands<S: Serializer>(d: &[(String, Vec<usize>)], s: S) -> Result<S::Ok, S::Error> {
    let mut map = s.serialize_map(Some(d.len()))?;
    for (k, v) in d {
        map.serialize_entry(k, v)?;
    }
    map.end()
}

impl<'de> Deserialize<'de> for DemandsShim {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        BTreeMap::<String, Vec<usize>>::deserialize(d).map(|m| DemandsShim(m.into_iter().collect()))
    }
}

struct DemandsShim(Vec<(String, Vec<usize>)>);

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetworkFile {
    name: String,
    #[serde(default = "default_base")]
    base: u32,
    nodes: Vec<NodeEntry>,
    edges: Vec<EdgeEntry>,
    source_edge_order: Vec<String>,
    demands: DemandsShim,
}

impl NetworkFile {
    pub fn from_network(net: &Network) -> Self {
        NetworkFile {
            name: net.name().to_string(),
            base: net.base(),
            nodes: net
                .nodes()
                .iter()
                .map(|n| NodeEntry {
                    id: n.name.clone(),
                    role: n.role,
                })
                .collect(),
            edges: net
                .edges()
                .iter()
                .map(|e| EdgeEntry {
                    id: e.name.clone(),
                    from: net.node(e.from).name.clone(),
                    to: net.node(e.to).name.clone(),
                })
                .collect(),
            source_edge_order: net
                .source_edges()
                .iter()
                .map(|&e| net.edge(e).name.clone())
                .collect(),
            demands: net
                .demand_map()
                .iter()
                .map(|(&t, m)| (net.node(t).name.clone(), m.iter().map(|i| i + 1).collect()))
                .collect(),
        }
    }

    pub fn into_network(self) -> Result<Network, NetworkError> {
        if self.base < 2 {
            return Err(NetworkError::schema("base", format!("base {} is below 2", self.base)));
        }
        let mut b = NetworkBuilder::new(self.name).base(self.base);
        for n in self.nodes {
            b = b.node(n.id, n.role);
        }
        for e in self.edges {
            b = b.edge(e.id, e.from, e.to);
        }
        b = b.source_order(self.source_edge_order);
        for (t, m) in self.demands {
            b = b.demand(t, m);
        }
        b.build()
    }

    pub fn parse(text: &str) -> Result<Self, NetworkError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawNetworkFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            NetworkError::Parse {
                line: inner.line(),
                column: inner.column(),
                path,
                message: inner.to_string(),
            }
        })?;
        Ok(NetworkFile {
            name: raw.name,
            base: raw.base,
            nodes: raw.nodes,
            edges: raw.edges,
            source_edge_order: raw.source_edge_order,
            demands: raw.demands.0,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("network serialization");
        s.push('\n');
        s
    }
}

impl Network {
    pub fn from_json(text: &str) -> Result<Network, NetworkError> {
        NetworkFile::parse(text)?.into_network()
    }

    pub fn to_json(&self) -> String {
        NetworkFile::from_network(self).to_json()
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<Network, NetworkError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| NetworkError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Network::from_json(&text)
}

pub fn save(net: &Network, path: impl AsRef<Path>) -> Result<(), NetworkError> {
    let path = path.as_ref();
    fs::write(path, net.to_json()).map_err(|source| NetworkError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures;

    const IDENTITY: &str = r#"{
      "name": "identity",
      "base": 2,
      "nodes": [{"id": "s", "role": "source"}, {"id": "t", "role": "terminal"}],
      "edges": [{"id": "e1", "from": "s", "to": "t"}],
      "source_edge_order": ["e1"],
      "demands": {"t": [1]}
    }"#;

    #[test]
    fn parses_identity() {
        let net = Network::from_json(IDENTITY).unwrap();
        assert_eq!(net, fixtures::identity());
    }

    #[test]
    fn butterfly_roundtrip_keeps_order() {
        let net = fixtures::butterfly();
        let back = Network::from_json(&net.to_json()).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_json(), net.to_json());
    }

    #[test]
    fn demand_out_of_range() {
        let text = IDENTITY.replace("[1]", "[2]");
        let err = Network::from_json(&text).unwrap_err();
        assert!(matches!(err, NetworkError::Schema { .. }));
        assert!(err.to_string().contains("demand out of range"));
    }

    #[test]
    fn parse_errors_carry_position_and_field() {
        let text = IDENTITY.replace("\"base\": 2", "\"base\": \"two\"");
        match Network::from_json(&text).unwrap_err() {
            NetworkError::Parse { line, path, .. } => {
                assert_eq!(line, 3);
                assert_eq!(path, "base");
            }
            other => panic!("unexpected {other}"),
        }
        let err = Network::from_json("{\"name\": ").unwrap_err();
        assert!(matches!(err, NetworkError::Parse { .. }));
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = IDENTITY.replace("\"base\": 2,", "\"base\": 2, \"extra\": 1,");
        assert!(Network::from_json(&text).is_err());
    }

    #[test]
    fn base_defaults_to_two() {
        let text = IDENTITY.replace("\"base\": 2,", "");
        assert_eq!(Network::from_json(&text).unwrap().base(), 2);
    }

    #[test]
    fn save_and_load_file() {
        let dir = std::env::temp_dir().join(format!("qlnc-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("g2.json");
        let net = fixtures::g2();
        save(&net, &path).unwrap();
        assert_eq!(load(&path).unwrap(), net);
        let _ = fs::remove_dir_all(dir);
    }
}
