//! Trace records and their JSON-lines encoding.
//!
//! A trace file starts with a header line holding the initial world,
//! followed by one line per step. Each step carries the decisions taken,
//! every intermediate value, and the edit that turns the pre-world into
//! the post-world, so steps can be replayed and checked one at a time.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::engines::{Arrival, EgressEntry, EgressMeta, MirrorMeta, PktGenState, Tick, Transmitted};
use crate::pipeline::{EgressIndication, IngressOutput, StateTriple, TmMeta};
use crate::switch::World;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    #[default]
    Ingress,
    Egress,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Decisions {
    pub requested: StepKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admitted: Option<Vec<bool>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sched_index: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngressResult {
    Rejected,
    Accepted(IngressOutput),
}

impl From<Option<IngressOutput>> for IngressResult {
    fn from(o: Option<IngressOutput>) -> Self {
        o.map_or(IngressResult::Rejected, IngressResult::Accepted)
    }
}

impl IngressResult {
    pub fn output(&self) -> Option<&IngressOutput> {
        match self {
            IngressResult::Accepted(o) => Some(o),
            IngressResult::Rejected => None,
        }
    }
}

/// Intermediate values of one step.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_g: Option<Arrival>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_i: Option<Arrival>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ingress: Option<IngressResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_mirror: Option<MirrorMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_merge: Option<TmMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_repl: Option<Vec<EgressMeta>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheduled: Option<EgressEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub egress: Option<(EgressIndication, BitString)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum QueueEdit<T> {
    Remove { index: usize },
    Append { items: Vec<T> },
    Replace { items: Vec<T> },
}

impl<T: Clone> QueueEdit<T> {
    pub fn apply(&self, q: &mut Vec<T>) -> Result<(), String> {
        match self {
            QueueEdit::Remove { index } => {
                if *index >= q.len() {
                    return Err(format!("remove index {index} on queue of length {}", q.len()));
                }
                q.remove(*index);
            }
            QueueEdit::Append { items } => q.extend(items.iter().cloned()),
            QueueEdit::Replace { items } => *q = items.clone(),
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecircEdit {
    Set(BitString),
    Clear,
}

impl From<Option<BitString>> for RecircEdit {
    fn from(p: Option<BitString>) -> Self {
        p.map_or(RecircEdit::Clear, RecircEdit::Set)
    }
}

/// Components a step changed; absent fields are unchanged.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Delta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<Tick>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_g: Option<PktGenState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_i: Option<StateTriple>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_e: Option<StateTriple>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_input: Option<QueueEdit<Arrival>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_recirc: Option<RecircEdit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_mirror: Option<QueueEdit<EgressEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_egress: Option<QueueEdit<EgressEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_output: Option<QueueEdit<Transmitted>>,
}

impl Delta {
    pub fn is_empty(&self) -> bool {
        *self == Delta::default()
    }

    pub fn apply(&self, w: &mut World) -> Result<(), String> {
        if let Some(t) = self.t {
            w.state.t = t;
        }
        if let Some(s) = &self.s_g {
            w.state.s_g = s.clone();
        }
        if let Some(s) = &self.s_i {
            w.state.s_i = s.clone();
        }
        if let Some(s) = &self.s_e {
            w.state.s_e = s.clone();
        }
        if let Some(e) = &self.q_input {
            e.apply(&mut w.queues.q_input).map_err(|m| format!("q_input: {m}"))?;
        }
        if let Some(r) = &self.p_recirc {
            w.queues.p_recirc = match r {
                RecircEdit::Set(p) => Some(p.clone()),
                RecircEdit::Clear => None,
            };
        }
        if let Some(e) = &self.q_mirror {
            e.apply(&mut w.queues.q_mirror).map_err(|m| format!("q_mirror: {m}"))?;
        }
        if let Some(e) = &self.q_egress {
            e.apply(&mut w.queues.q_egress).map_err(|m| format!("q_egress: {m}"))?;
        }
        if let Some(e) = &self.q_output {
            e.apply(&mut w.queues.q_output).map_err(|m| format!("q_output: {m}"))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: u64,
    pub kind: StepKind,
    pub decisions: Decisions,
    pub witness: Witness,
    pub delta: Delta,
    pub pre: String,
    pub post: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub initial: World,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<TraceStep>,
    /// World after the last step.
    pub last: World,
}

#[derive(Serialize)]
struct DigestView<'a> {
    t: Tick,
    s_g: &'a PktGenState,
    s_i: &'a StateTriple,
    s_e: &'a StateTriple,
    p_recirc: &'a Option<BitString>,
    lens: [usize; 4],
}

/// SHA-256 over the switch state, the recirculation register and the queue
/// lengths.
pub fn digest(w: &World) -> String {
    let q = &w.queues;
    let view = DigestView {
        t: w.state.t,
        s_g: &w.state.s_g,
        s_i: &w.state.s_i,
        s_e: &w.state.s_e,
        p_recirc: &q.p_recirc,
        lens: [q.q_input.len(), q.q_mirror.len(), q.q_egress.len(), q.q_output.len()],
    };
    let bytes = serde_json::to_vec(&view).expect("world serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// SHA-256 of any serializable value.
pub fn digest_of<T: Serialize>(v: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(v).expect("value serializes")))
}

#[derive(Debug, thiserror::Error)]
pub enum TraceReadError {
    #[error("trace is empty")]
    Empty,
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Trace {
    pub fn write_jsonl(&self, out: &mut impl Write) -> io::Result<()> {
        write_jsonl(&self.header, &self.steps, out)
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn faulted(&self) -> Option<&TraceStep> {
        self.steps.iter().find(|s| s.fault.is_some())
    }

    /// Frames removed from `q_input`, in the order the ingress consumed them.
    pub fn consumed_inputs(&self) -> Vec<Arrival> {
        consumed_inputs(&self.steps)
    }
}

pub fn consumed_inputs(steps: &[TraceStep]) -> Vec<Arrival> {
    steps
        .iter()
        .filter(|s| s.kind == StepKind::Ingress && s.fault.is_none() && s.delta.q_input.is_some())
        .filter_map(|s| s.witness.p_i.clone())
        .collect()
}

pub fn write_jsonl(header: &TraceHeader, steps: &[TraceStep], out: &mut impl Write) -> io::Result<()> {
    serde_json::to_writer(&mut *out, header)?;
    out.write_all(b"\n")?;
    for s in steps {
        serde_json::to_writer(&mut *out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(input: impl BufRead) -> Result<(TraceHeader, Vec<TraceStep>), TraceReadError> {
    let mut header = None;
    let mut steps = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let json = |e| TraceReadError::Json { line: i + 1, source: e };
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(json)?);
        } else {
            steps.push(serde_json::from_str(&line).map_err(json)?);
        }
    }
    Ok((header.ok_or(TraceReadError::Empty)?, steps))
}
