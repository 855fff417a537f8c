//! Input ports, mirror machinery, queue admission, the scheduler and the
//! output ports. Each function resolves its relational choice through an
//! explicit decision argument and updates the queue it owns in place.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::engines::multicast::{EgressMeta, Port};
use crate::error::EngineError;
use crate::pipeline::{EgressIndication, MirrorId, TmMeta};

/// Port number carried by recirculated packets.
pub const RECIRC_PORT: Port = 68;

/// A packet offered to the input ports.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Arrival {
    pub port: Port,
    #[serde(rename = "hex")]
    pub frame: BitString,
}

/// A packet the output ports transmitted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transmitted {
    pub port: Port,
    #[serde(rename = "hex")]
    pub frame: BitString,
}

pub type EgressEntry = (EgressMeta, BitString);

/// Forwards the generator's packet if there is one, otherwise removes the
/// element at the chosen index of `q_input`. `choose` is only consulted
/// when the queue is non-empty.
pub fn input_ports(
    p_g: Option<Arrival>,
    q_input: &mut Vec<Arrival>,
    choose: impl FnOnce(usize) -> usize,
) -> Result<Option<Arrival>, EngineError> {
    if let Some(p) = p_g {
        return Ok(Some(p));
    }
    if q_input.is_empty() {
        return Ok(None);
    }
    let len = q_input.len();
    let index = choose(len);
    if index >= len {
        return Err(EngineError::OracleOutOfRange { index, len });
    }
    Ok(Some(q_input.remove(index)))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MirrorConfig {
    #[default]
    Empty,
    /// Session id to destination port. Accepted by the loader but not by
    /// the engines.
    Sessions(std::collections::BTreeMap<u16, Port>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MirrorMeta {
    pub session: u16,
    pub egress_port: Port,
}

pub fn mirror_session_lookup(c: &MirrorConfig, _id: MirrorId) -> Result<Option<MirrorMeta>, EngineError> {
    match c {
        MirrorConfig::Empty => Ok(None),
        MirrorConfig::Sessions(_) => Err(EngineError::UnsupportedConfig("non-empty mirror session table".into())),
    }
}

/// Identity on the normal metadata while the mirror buffer is empty and
/// nothing was mirrored.
pub fn mirror_buffer_merge(
    m_normal: TmMeta,
    m_mirror: Option<&MirrorMeta>,
    q_mirror: &[EgressEntry],
) -> Result<TmMeta, EngineError> {
    if m_mirror.is_some() {
        return Err(EngineError::UnsupportedConfig("mirrored packet".into()));
    }
    if !q_mirror.is_empty() {
        return Err(EngineError::UnsupportedConfig("non-empty mirror buffer".into()));
    }
    Ok(m_normal)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadyPorts {
    All,
    Ports(BTreeSet<Port>),
}

impl ReadyPorts {
    pub fn contains(&self, p: Port) -> bool {
        match self {
            ReadyPorts::All => true,
            ReadyPorts::Ports(s) => s.contains(&p),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QacPolicy {
    /// Any subsequence of the copies may be admitted.
    #[default]
    Minimal,
    /// Copies for ready ports must be admitted.
    AlwaysReady { ready_ports: ReadyPorts },
}

impl QacPolicy {
    pub fn mandatory(&self, ms: &[EgressMeta]) -> Vec<bool> {
        match self {
            QacPolicy::Minimal => vec![false; ms.len()],
            QacPolicy::AlwaysReady { ready_ports } => ms.iter().map(|m| ready_ports.contains(m.egress_port)).collect(),
        }
    }
}

/// Appends the admitted copies, each paired with `p`, to the tail of
/// `q_egress`.
pub fn queue_admission(
    ms: &[EgressMeta],
    p: &BitString,
    q_egress: &mut Vec<EgressEntry>,
    policy: &QacPolicy,
    admitted: &[bool],
) -> Result<(), EngineError> {
    if admitted.len() != ms.len() {
        return Err(EngineError::MaskLength {
            mask: admitted.len(),
            copies: ms.len(),
        });
    }
    for (m, (keep, must)) in ms.iter().zip(admitted.iter().zip(policy.mandatory(ms))) {
        if must && !keep {
            return Err(EngineError::PolicyViolation(m.egress_port));
        }
    }
    q_egress.extend(
        ms.iter()
            .zip(admitted)
            .filter(|(_, keep)| **keep)
            .map(|(m, _)| (*m, p.clone())),
    );
    Ok(())
}

/// Removes the element at `index`; `None` on an empty queue.
pub fn packet_scheduler(q_egress: &mut Vec<EgressEntry>, index: usize) -> Result<Option<EgressEntry>, EngineError> {
    if q_egress.is_empty() {
        return Ok(None);
    }
    if index >= q_egress.len() {
        return Err(EngineError::OracleOutOfRange {
            index,
            len: q_egress.len(),
        });
    }
    Ok(Some(q_egress.remove(index)))
}

pub fn output_ports(
    q_output: &mut Vec<Transmitted>,
    port: Port,
    m_e: EgressIndication,
    p_e: BitString,
    p_recirc: &mut Option<BitString>,
) -> Result<(), EngineError> {
    if m_e.recirculate {
        if p_recirc.is_some() {
            return Err(EngineError::RecircBusy);
        }
        *p_recirc = Some(p_e);
    } else {
        q_output.push(Transmitted { port, frame: p_e });
    }
    Ok(())
}
