//! Programmable pipeline plumbing.
//!
//! Each of the six programmable components is a deterministic function
//! from (input, state) to (output, state). [`IngressPipeline`] and
//! [`EgressPipeline`] chain parser, control and deparser; the payload left
//! unparsed by the parser bypasses control and deparser and is appended
//! unchanged to the deparsed headers.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::apps::firewall::FirewallState;
use crate::bits::BitString;
use crate::engines::{EgressMeta, Port, Tick};
use crate::error::EngineError;
use crate::format::{encode_into, TypedValue};

/// Traffic-manager metadata written by the ingress control.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TmMeta {
    pub ucast_egress_port: Option<Port>,
    pub copy_to_cpu: bool,
    pub mcast_grp_a: u16,
    pub mcast_grp_b: u16,
    pub level1_exclusion_id: u16,
    pub level2_exclusion_id: u16,
    pub rid: u16,
    pub bypass_egress: bool,
    pub drop: bool,
}

/// Mirror session requested by the ingress control; 0 means none.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MirrorId(pub u16);

impl MirrorId {
    pub const NONE: MirrorId = MirrorId(0);

    pub fn new(session: u16) -> Option<Self> {
        (session < 1024).then_some(MirrorId(session))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EgressIndication {
    pub recirculate: bool,
}

/// Metadata produced by a deparser alongside the emitted headers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeparserMeta {
    pub indication: EgressIndication,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ext: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HeaderSlot {
    Valid(TypedValue),
    Invalid,
}

/// Parsed headers (in deparse order) plus user metadata.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ParsedData {
    headers: Vec<(String, HeaderSlot)>,
    pub meta: BTreeMap<String, u64>,
}

impl ParsedData {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn header(&self, name: &str) -> Option<&TypedValue> {
        self.headers.iter().find_map(|(n, s)| match s {
            HeaderSlot::Valid(v) if n == name => Some(v),
            _ => None,
        })
    }

    pub fn is_valid(&self, name: &str) -> bool {
        self.header(name).is_some()
    }

    pub fn slots(&self) -> &[(String, HeaderSlot)] {
        &self.headers
    }

    /// Replaces the slot named `name`, appending it if absent.
    pub fn set_slot(&mut self, name: &str, slot: HeaderSlot) {
        match self.headers.iter_mut().find(|(n, _)| n == name) {
            Some((_, s)) => *s = slot,
            None => self.headers.push((name.to_string(), slot)),
        }
    }

    pub fn set_valid(&mut self, name: &str, v: TypedValue) {
        self.set_slot(name, HeaderSlot::Valid(v));
    }

    pub fn invalidate(&mut self, name: &str) {
        self.set_slot(name, HeaderSlot::Invalid);
    }

    /// Inserts a valid header in front of all others.
    pub fn push_front(&mut self, name: &str, v: TypedValue) {
        self.headers.retain(|(n, _)| n != name);
        self.headers.insert(0, (name.to_string(), HeaderSlot::Valid(v)));
    }

    pub fn meta(&self, key: &str) -> u64 {
        self.meta.get(key).copied().unwrap_or(0)
    }

    /// Valid headers in order, encoded back to back.
    pub fn emit(&self) -> BitString {
        let mut out = BitString::new();
        for (_, s) in &self.headers {
            if let HeaderSlot::Valid(v) = s {
                encode_into(v, &mut out);
            }
        }
        out
    }
}

/// Persistent state of one programmable component.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentState {
    #[default]
    Stateless,
    Counter(u64),
    Firewall(FirewallState),
}

impl ComponentState {
    pub fn counter(&self) -> Option<u64> {
        match self {
            ComponentState::Counter(c) => Some(*c),
            _ => None,
        }
    }
}

/// (parser, control, deparser) state.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateTriple {
    pub parser: ComponentState,
    pub control: ComponentState,
    pub deparser: ComponentState,
}

pub type ParseResult = Option<(ParsedData, BitString)>;

pub trait IngressParser: Send + Sync {
    fn parse(&self, p: &BitString, s: &ComponentState) -> (ParseResult, ComponentState);
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngressDecision {
    pub tm: TmMeta,
    pub mirror: MirrorId,
    pub data: ParsedData,
}

pub trait IngressControl: Send + Sync {
    fn apply(&self, t: Tick, port: Port, d: ParsedData, s: &ComponentState) -> (IngressDecision, ComponentState);
}

pub trait Deparser: Send + Sync {
    fn deparse(&self, d: ParsedData, s: &ComponentState) -> ((DeparserMeta, BitString), ComponentState);
}

pub trait EgressParser: Send + Sync {
    fn parse(&self, m: &EgressMeta, p: &BitString, s: &ComponentState) -> (ParseResult, ComponentState);
}

pub trait EgressControl: Send + Sync {
    fn apply(&self, d: ParsedData, s: &ComponentState) -> (ParsedData, ComponentState);
}

/// What the ingress pipeline hands to the traffic manager.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IngressOutput {
    pub tm: TmMeta,
    pub mirror: MirrorId,
    pub m3: DeparserMeta,
    pub packet: BitString,
}

/// What the ingress pipeline does after a parser reject.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RejectMode {
    #[default]
    Drop,
    /// Runs control and deparser on empty parsed data with the whole
    /// packet as payload. Violates reject isolation; only useful as a
    /// mutant for testing the checker.
    RunControl,
}

#[derive(Clone)]
pub struct IngressPipeline {
    pub parser: Arc<dyn IngressParser>,
    pub control: Arc<dyn IngressControl>,
    pub deparser: Arc<dyn Deparser>,
    pub on_reject: RejectMode,
}

impl fmt::Debug for IngressPipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("IngressPipeline")
    }
}

impl IngressPipeline {
    pub fn new(parser: Arc<dyn IngressParser>, control: Arc<dyn IngressControl>, deparser: Arc<dyn Deparser>) -> Self {
        IngressPipeline {
            parser,
            control,
            deparser,
            on_reject: RejectMode::Drop,
        }
    }

    /// On parser reject the output is `None` and only the parser state may
    /// change.
    pub fn run(&self, t: Tick, port: Port, p: &BitString, s: &StateTriple) -> (Option<IngressOutput>, StateTriple) {
        let (parsed, s_ip) = self.parser.parse(p, &s.parser);
        let parsed = match (parsed, self.on_reject) {
            (None, RejectMode::RunControl) => Some((ParsedData::new(), p.clone())),
            (parsed, _) => parsed,
        };
        let Some((d1, payload)) = parsed else {
            return (
                None,
                StateTriple {
                    parser: s_ip,
                    control: s.control.clone(),
                    deparser: s.deparser.clone(),
                },
            );
        };
        let (decision, s_ic) = self.control.apply(t, port, d1, &s.control);
        let ((m3, mut h3), s_id) = self.deparser.deparse(decision.data, &s.deparser);
        h3.append(&payload);
        (
            Some(IngressOutput {
                tm: decision.tm,
                mirror: decision.mirror,
                m3,
                packet: h3,
            }),
            StateTriple {
                parser: s_ip,
                control: s_ic,
                deparser: s_id,
            },
        )
    }
}

#[derive(Clone)]
pub struct EgressPipeline {
    pub parser: Arc<dyn EgressParser>,
    pub control: Arc<dyn EgressControl>,
    pub deparser: Arc<dyn Deparser>,
}

impl fmt::Debug for EgressPipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("EgressPipeline")
    }
}

impl EgressPipeline {
    pub fn run(
        &self,
        m_e: &EgressMeta,
        p_e: &BitString,
        s: &StateTriple,
    ) -> Result<((EgressIndication, BitString), StateTriple), EngineError> {
        let (parsed, s_ep) = self.parser.parse(m_e, p_e, &s.parser);
        let (d1, payload) = parsed.ok_or(EngineError::EgressParseFailure)?;
        let (d2, s_ec) = self.control.apply(d1, &s.control);
        let ((m3, mut h3), s_ed) = self.deparser.deparse(d2, &s.deparser);
        h3.append(&payload);
        Ok((
            (m3.indication, h3),
            StateTriple {
                parser: s_ep,
                control: s_ec,
                deparser: s_ed,
            },
        ))
    }
}
