//! Packet replication engine: two-level multicast tree walk plus the
//! unicast copy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::pipeline::TmMeta;

pub type Port = u16;

pub const MAX_PORT: Port = (1 << 9) - 1;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct L1Node {
    #[serde(default)]
    pub dev_port_list: Vec<Port>,
    #[serde(default)]
    pub lag_list: Vec<u16>,
    #[serde(default)]
    pub l1_xid_valid: bool,
    #[serde(default)]
    pub l1_xid: u16,
    #[serde(default)]
    pub rid: u16,
}

/// Control-plane multicast configuration.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    #[serde(default)]
    pub groups: BTreeMap<u16, Vec<L1Node>>,
    #[serde(default)]
    pub lags: BTreeMap<u16, Vec<Port>>,
    #[serde(default)]
    pub l2_exclusion: BTreeMap<u16, BTreeSet<Port>>,
    #[serde(default)]
    pub cpu_port: Port,
}

impl McConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let port_ok = |p: &Port| *p <= MAX_PORT;
        let bad = |what: String| Err(EngineError::InvalidConfig(what));
        if !port_ok(&self.cpu_port) {
            return bad(format!("cpu_port {} exceeds 9 bits", self.cpu_port));
        }
        for (g, nodes) in &self.groups {
            for n in nodes {
                if let Some(p) = n.dev_port_list.iter().find(|p| !port_ok(p)) {
                    return bad(format!("group {g}: port {p} exceeds 9 bits"));
                }
            }
        }
        for (l, members) in &self.lags {
            if members.is_empty() {
                return bad(format!("lag {l} has no members"));
            }
            if let Some(p) = members.iter().find(|p| !port_ok(p)) {
                return bad(format!("lag {l}: port {p} exceeds 9 bits"));
            }
        }
        for (x, ports) in &self.l2_exclusion {
            if *x > MAX_PORT {
                return bad(format!("level-2 exclusion id {x} exceeds 9 bits"));
            }
            if let Some(p) = ports.iter().find(|p| !port_ok(p)) {
                return bad(format!("exclusion {x}: port {p} exceeds 9 bits"));
            }
        }
        Ok(())
    }

    /// Upper bound on the copies the replication engine can emit for `m`.
    pub fn max_copies(&self, m: &TmMeta) -> usize {
        let mut n = 0;
        for g in [m.mcast_grp_a, m.mcast_grp_b] {
            if g != 0 {
                if let Some(nodes) = self.groups.get(&g) {
                    n += nodes
                        .iter()
                        .map(|x| x.dev_port_list.len() + x.lag_list.len())
                        .sum::<usize>();
                }
            }
        }
        n + 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopySource {
    Unicast,
    MulticastA,
    MulticastB,
    CpuCopy,
}

impl CopySource {
    pub fn code(self) -> u64 {
        match self {
            CopySource::Unicast => 0,
            CopySource::MulticastA => 1,
            CopySource::MulticastB => 2,
            CopySource::CpuCopy => 3,
        }
    }
}

/// Per-copy metadata handed from the replication engine to admission.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EgressMeta {
    pub egress_port: Port,
    pub rid: u16,
    pub source: CopySource,
}

pub fn resolve_lag(c: &McConfig, lag: u16, m: &TmMeta) -> Result<Port, EngineError> {
    let members = c.lags.get(&lag).ok_or(EngineError::UnknownLag(lag))?;
    if members.is_empty() {
        return Err(EngineError::UnknownLag(lag));
    }
    let key = m.level1_exclusion_id as usize + m.rid as usize + lag as usize;
    Ok(members[key % members.len()])
}

/// Copies for `mcast_grp_a`, then `mcast_grp_b`, then the CPU copy.
pub fn multicast_engine(c: &McConfig, m: &TmMeta) -> Result<Vec<EgressMeta>, EngineError> {
    let mut out = Vec::new();
    if m.drop {
        return Ok(out);
    }
    let excluded = c.l2_exclusion.get(&m.level2_exclusion_id);
    for (g, source) in [
        (m.mcast_grp_a, CopySource::MulticastA),
        (m.mcast_grp_b, CopySource::MulticastB),
    ] {
        if g == 0 {
            continue;
        }
        let nodes = c.groups.get(&g).ok_or(EngineError::UnknownGroup(g))?;
        for n in nodes {
            if n.l1_xid_valid && n.l1_xid == m.level1_exclusion_id {
                continue;
            }
            let lag_ports = n
                .lag_list
                .iter()
                .map(|l| resolve_lag(c, *l, m))
                .collect::<Result<Vec<_>, _>>()?;
            for port in n.dev_port_list.iter().copied().chain(lag_ports) {
                if excluded.is_some_and(|x| x.contains(&port)) {
                    continue;
                }
                out.push(EgressMeta {
                    egress_port: port,
                    rid: n.rid,
                    source,
                });
            }
        }
    }
    if m.copy_to_cpu {
        out.push(EgressMeta {
            egress_port: c.cpu_port,
            rid: 0,
            source: CopySource::CpuCopy,
        });
    }
    Ok(out)
}

pub fn unicast_engine(m: &TmMeta) -> Option<EgressMeta> {
    match m.ucast_egress_port {
        Some(port) if !m.drop => Some(EgressMeta {
            egress_port: port,
            rid: m.rid,
            source: CopySource::Unicast,
        }),
        _ => None,
    }
}

/// Multicast copies followed by the unicast copy.
pub fn replication_engine(c: &McConfig, m: &TmMeta) -> Result<Vec<EgressMeta>, EngineError> {
    let mut out = multicast_engine(c, m)?;
    out.extend(unicast_engine(m));
    Ok(out)
}
