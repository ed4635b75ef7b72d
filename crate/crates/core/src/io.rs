//! JSON formats for networks, priors, policies, statistics and session logs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelKind, PriorSpec};
use crate::network::{EdgeStats, Network};
use crate::policy::PolicyConfig;
use crate::session::AuditRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeJson {
    pub u: String,
    pub v: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkJson {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeJson>,
}

impl NetworkJson {
    pub fn build(&self) -> Result<Network> {
        let pairs: Vec<(&str, &str)> = self.edges.iter().map(|e| (e.u.as_str(), e.v.as_str())).collect();
        Network::from_labels(&self.nodes, &pairs)
    }
}

impl From<&Network> for NetworkJson {
    fn from(net: &Network) -> Self {
        Self {
            nodes: net.labels().to_vec(),
            edges: net
                .edges()
                .iter()
                .map(|&(u, v)| EdgeJson { u: net.label(u).to_string(), v: net.label(v).to_string() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeStatJson {
    pub u: String,
    pub v: String,
    pub n: u64,
    pub y: u64,
}

pub fn export_stats(net: &Network, stats: &EdgeStats) -> Vec<EdgeStatJson> {
    net.edge_ids()
        .map(|e| {
            let (u, v) = net.edge(e);
            let c = stats.get(e);
            EdgeStatJson { u: net.label(u).to_string(), v: net.label(v).to_string(), n: c.n, y: c.y }
        })
        .collect()
}

pub fn parse_network(text: &str) -> Result<Network> {
    serde_json::from_str::<NetworkJson>(text)?.build()
}

pub fn parse_prior(text: &str) -> Result<PriorSpec> {
    let spec: PriorSpec = serde_json::from_str(text)?;
    spec.validate()?;
    Ok(spec)
}

pub fn parse_policy(text: &str) -> Result<PolicyConfig> {
    let cfg: PolicyConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Inputs that create a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    pub network: NetworkJson,
    pub prior: PriorSpec,
    pub model: ModelKind,
    pub policy: PolicyConfig,
}

/// One line of a session's persisted log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogEntry {
    Create(SessionSpec),
    Classification(AuditRecord),
}

/// Parses a JSON-lines session log: one `create` entry followed by
/// classifications numbered `1, 2, ...`. Blank lines are ignored.
pub fn parse_session_log(text: &str) -> Result<(SessionSpec, Vec<AuditRecord>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let spec = match lines.next() {
        Some((i, line)) => match serde_json::from_str(line) {
            Ok(LogEntry::Create(spec)) => spec,
            Ok(_) => return Err(Error::Parse(format!("line {}: log must start with a create entry", i + 1))),
            Err(e) => return Err(Error::Parse(format!("line {}: {e}", i + 1))),
        },
        None => return Err(Error::Parse("empty session log".into())),
    };
    let mut records = Vec::new();
    for (i, line) in lines {
        match serde_json::from_str(line) {
            Ok(LogEntry::Classification(rec)) => {
                if rec.step != records.len() as u64 + 1 {
                    return Err(Error::Parse(format!("line {}: unexpected step {}", i + 1, rec.step)));
                }
                records.push(rec);
            }
            Ok(LogEntry::Create(_)) => return Err(Error::Parse(format!("line {}: repeated create entry", i + 1))),
            Err(e) => return Err(Error::Parse(format!("line {}: {e}", i + 1))),
        }
    }
    Ok((spec, records))
}
