//! Single-stream periodic packet generator.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::engines::multicast::Port;
use crate::engines::traffic::{Arrival, RECIRC_PORT};
use crate::error::EngineError;

pub type Tick = u64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PktGenConfig {
    pub enabled: bool,
    /// Ticks between trigger points; a batch run starts on a multiple of
    /// `period` when the generator is idle.
    pub period: Tick,
    pub batch_count: u32,
    pub pkts_per_batch: u32,
    /// Ticks from the last packet of a batch to the first of the next.
    pub inter_batch_gap: Tick,
    pub inter_pkt_gap: Tick,
    #[serde(default)]
    pub template: BitString,
    #[serde(default)]
    pub source_port: Port,
}

impl Default for PktGenConfig {
    fn default() -> Self {
        PktGenConfig::disabled()
    }
}

impl PktGenConfig {
    pub fn disabled() -> Self {
        PktGenConfig {
            enabled: false,
            period: 1,
            batch_count: 1,
            pkts_per_batch: 1,
            inter_batch_gap: 1,
            inter_pkt_gap: 1,
            template: BitString::new(),
            source_port: 0,
        }
    }

    /// One packet every `period` ticks.
    pub fn periodic(period: Tick, template: BitString, source_port: Port) -> Self {
        PktGenConfig {
            enabled: true,
            period,
            batch_count: 1,
            pkts_per_batch: 1,
            inter_batch_gap: 1,
            inter_pkt_gap: 1,
            template,
            source_port,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.period == 0 || self.inter_batch_gap == 0 || self.inter_pkt_gap == 0 {
            return Err(EngineError::InvalidConfig(
                "pktgen periods and gaps must be >= 1".into(),
            ));
        }
        if self.batch_count == 0 || self.pkts_per_batch == 0 {
            return Err(EngineError::InvalidConfig("pktgen counts must be >= 1".into()));
        }
        Ok(())
    }

    /// Warnings for timing parameters that are valid but suspiciously small.
    pub fn lint(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.enabled {
            return out;
        }
        for (name, v) in [
            ("period", self.period),
            ("inter_batch_gap", self.inter_batch_gap),
            ("inter_pkt_gap", self.inter_pkt_gap),
        ] {
            if v <= 1 {
                out.push(format!("pktgen {name} = {v}; hardware timers are usually much coarser"));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PktGenPhase {
    #[default]
    Idle,
    Emitting,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PktGenState {
    pub phase: PktGenPhase,
    pub next_fire: Tick,
    pub batch_idx: u32,
    pub pkt_idx: u32,
}

// State after emitting a packet at `t`; `batch_idx`/`pkt_idx` describe the
// packet just emitted.
fn after_emit(c: &PktGenConfig, t: Tick, batch_idx: u32, pkt_idx: u32) -> PktGenState {
    let emitted_in_batch = pkt_idx + 1;
    if emitted_in_batch < c.pkts_per_batch {
        PktGenState {
            phase: PktGenPhase::Emitting,
            next_fire: t + c.inter_pkt_gap,
            batch_idx,
            pkt_idx: emitted_in_batch,
        }
    } else if batch_idx + 1 < c.batch_count {
        PktGenState {
            phase: PktGenPhase::Emitting,
            next_fire: t + c.inter_batch_gap,
            batch_idx: batch_idx + 1,
            pkt_idx: 0,
        }
    } else {
        PktGenState::default()
    }
}

/// One tick of the generator. A due emission that was not observed on its
/// exact tick (the generator is skipped while a recirculated packet has
/// priority) fires on the next tick that reaches the generator.
pub fn pktgen_tick(c: &PktGenConfig, t: Tick, s: &PktGenState) -> (Option<BitString>, PktGenState) {
    if !c.enabled {
        return (None, s.clone());
    }
    match s.phase {
        PktGenPhase::Idle if t.is_multiple_of(c.period) => (Some(c.template.clone()), after_emit(c, t, 0, 0)),
        PktGenPhase::Emitting if t >= s.next_fire => {
            (Some(c.template.clone()), after_emit(c, t, s.batch_idx, s.pkt_idx))
        }
        _ => (None, s.clone()),
    }
}

/// Either drains the recirculation register or runs one generator tick.
pub fn packet_generator(
    c: &PktGenConfig,
    t: Tick,
    s: &PktGenState,
    recirc: Option<BitString>,
) -> (Option<Arrival>, Option<BitString>, PktGenState) {
    match recirc {
        Some(frame) => (
            Some(Arrival {
                port: RECIRC_PORT,
                frame,
            }),
            None,
            s.clone(),
        ),
        None => {
            let (frame, s2) = pktgen_tick(c, t, s);
            let p_g = frame.map(|frame| Arrival {
                port: c.source_port,
                frame,
            });
            (p_g, None, s2)
        }
    }
}
