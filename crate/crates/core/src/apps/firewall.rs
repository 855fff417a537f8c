//! Stateful firewall: outgoing requests are remembered in a two-pane
//! Bloom filter, incoming packets pass only if their source was requested.
//!
//! Panes rotate at every window boundary. The active pane takes inserts
//! and is never cleaned during its window; the inactive pane still answers
//! lookups while it is cleared a slice at a time, once per pipeline
//! invocation. A dense packet stream (the keepalive generator) guarantees
//! enough invocations per window to finish the clearing before the pane
//! becomes active again.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::apps::common::{EmitDeparser, FormatParser, PassEgressControl, RawEgressParser};
use crate::apps::AppBundle;
use crate::engines::{McConfig, PktGenConfig, Port, QacPolicy, Tick};
use crate::error::EngineError;
use crate::format::{Condition, Format};
use crate::headers::{
    ethernet_h, intrinsic_meta_h, ipv4_h, l4_format, port_meta_h, EthernetHeader, Ipv4Header, ETHERTYPE_IPV4,
    KEEPALIVE_ETHERTYPE,
};
use crate::packets::keepalive_frame;
use crate::pipeline::{
    ComponentState, EgressPipeline, IngressControl, IngressDecision, IngressPipeline, MirrorId, ParsedData,
    StateTriple, TmMeta,
};

/// Odd multipliers and offsets of the multiply-shift hash family.
const HASH_MUL: [u64; 8] = [
    0x9E37_79B9_7F4A_7C15,
    0xC2B2_AE3D_27D4_EB4F,
    0x1656_67B1_9E37_79F9,
    0xD6E8_FEB8_6659_FD93,
    0xFF51_AFD7_ED55_8CCD,
    0xC4CE_B9FE_1A85_EC53,
    0x8CB9_2BA7_2F3D_8DD7,
    0xA076_1D64_78BD_642F,
];
const HASH_ADD: [u64; 8] = [
    0x2545_F491_4F6C_DD1D,
    0x6A09_E667_F3BC_C909,
    0xBB67_AE85_84CA_A73B,
    0x3C6E_F372_FE94_F82B,
    0xA54F_F53A_5F1D_36F1,
    0x510E_527F_ADE6_82D1,
    0x9B05_688C_2B3E_6C1F,
    0x1F83_D9AB_FB41_BD6B,
];

pub const MAX_HASHES: u32 = HASH_MUL.len() as u32;

/// Bit index of `addr` under hash `i` in a pane of `m` bits.
pub fn bloom_index(i: usize, addr: u32, m: usize) -> usize {
    let h = HASH_MUL[i].wrapping_mul(addr as u64).wrapping_add(HASH_ADD[i]);
    ((h >> 32) % m as u64) as usize
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FirewallState {
    /// Two panes of `m` bits, stored in 64-bit words.
    pub panes: [Vec<u64>; 2],
    pub m: usize,
    pub k: u32,
    pub active_pane: usize,
    pub last_clean_tick: Tick,
    /// Next bit of the inactive pane to clear; meaningful while
    /// `cleaning` is set.
    pub clean_cursor: usize,
    pub cleaning: bool,
    pub window: Tick,
    /// Bits cleared per invocation.
    pub slice: usize,
}

impl FirewallState {
    pub fn new(m: usize, k: u32, window: Tick, slice: usize) -> Self {
        let words = m.div_ceil(64);
        FirewallState {
            panes: [vec![0; words], vec![0; words]],
            m,
            k,
            active_pane: 0,
            last_clean_tick: 0,
            clean_cursor: 0,
            cleaning: false,
            window,
            slice,
        }
    }

    fn get(&self, pane: usize, bit: usize) -> bool {
        self.panes[pane][bit / 64] >> (bit % 64) & 1 == 1
    }

    fn set(&mut self, pane: usize, bit: usize) {
        self.panes[pane][bit / 64] |= 1 << (bit % 64);
    }

    fn clear(&mut self, pane: usize, bit: usize) {
        self.panes[pane][bit / 64] &= !(1 << (bit % 64));
    }

    pub fn insert(&mut self, addr: u32) {
        for i in 0..self.k as usize {
            let b = bloom_index(i, addr, self.m);
            self.set(self.active_pane, b);
        }
    }

    pub fn pane_contains(&self, pane: usize, addr: u32) -> bool {
        (0..self.k as usize).all(|i| self.get(pane, bloom_index(i, addr, self.m)))
    }

    pub fn contains(&self, addr: u32) -> bool {
        self.pane_contains(0, addr) || self.pane_contains(1, addr)
    }

    pub fn inactive_pane(&self) -> usize {
        1 - self.active_pane
    }

    pub fn pane_is_clear(&self, pane: usize) -> bool {
        self.panes[pane].iter().all(|w| *w == 0)
    }

    /// Rotation at window boundaries, then one cleaning slice.
    pub fn maintain(&mut self, t: Tick) {
        if t / self.window > self.last_clean_tick / self.window {
            self.active_pane = self.inactive_pane();
            self.clean_cursor = 0;
            self.cleaning = true;
        }
        self.last_clean_tick = self.last_clean_tick.max(t);
        if self.cleaning {
            let pane = self.inactive_pane();
            let end = (self.clean_cursor + self.slice).min(self.m);
            for b in self.clean_cursor..end {
                self.clear(pane, b);
            }
            if end >= self.m {
                self.clean_cursor = 0;
                self.cleaning = false;
            } else {
                self.clean_cursor = end;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirewallConfig {
    pub internal_ports: Vec<Port>,
    pub external_ports: Vec<Port>,
    /// Bits per pane.
    pub m: usize,
    pub k: u32,
    pub window_ticks: Tick,
    pub keepalive: PktGenConfig,
}

impl FirewallConfig {
    /// Defaults with a keepalive every `window_ticks`.
    pub fn with_window(window_ticks: Tick) -> Self {
        FirewallConfig {
            internal_ports: vec![1],
            external_ports: vec![2],
            m: 1024,
            k: 3,
            window_ticks,
            keepalive: PktGenConfig::periodic(window_ticks, keepalive_frame(), 0),
        }
    }

    /// Window length in ticks for a wall-clock window and tick duration.
    pub fn window_ticks_for(window_ms: f64, tick_ns: u64) -> Tick {
        ((window_ms * 1e6) / tick_ns as f64).round().max(1.0) as Tick
    }

    /// Slice size that clears a full pane in the fewest invocations a
    /// dense stream can deliver within one window.
    pub fn clean_slice(&self) -> usize {
        let per_window = (self.window_ticks / self.keepalive.period.max(1)).max(1) as usize;
        self.m.div_ceil(per_window)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        if self.internal_ports.is_empty() || self.external_ports.is_empty() {
            return bad("firewall needs internal and external ports".into());
        }
        if self.m == 0 || self.k == 0 || self.k > MAX_HASHES {
            return bad(format!("firewall needs m >= 1 and 1 <= k <= {MAX_HASHES}"));
        }
        if self.window_ticks == 0 {
            return bad("firewall window must be >= 1 tick".into());
        }
        self.keepalive.validate()?;
        if !self.keepalive.enabled || self.keepalive.period > self.window_ticks {
            return bad("keepalive generator must fire at least once per window".into());
        }
        Ok(())
    }
}

pub struct FirewallIngress {
    cfg: FirewallConfig,
}

impl IngressControl for FirewallIngress {
    fn apply(&self, t: Tick, port: Port, d: ParsedData, s: &ComponentState) -> (IngressDecision, ComponentState) {
        let mut st = match s {
            ComponentState::Firewall(f) => f.clone(),
            _ => initial_state(&self.cfg),
        };
        st.maintain(t);
        let drop = TmMeta {
            drop: true,
            ..Default::default()
        };
        let eth = d.header("ethernet").and_then(EthernetHeader::from_value);
        let ip = d.header("ipv4").and_then(Ipv4Header::from_value);
        let tm = match (eth, ip) {
            (Some(e), _) if e.ethertype == KEEPALIVE_ETHERTYPE => drop,
            (_, Some(ip)) if self.cfg.internal_ports.contains(&port) => {
                st.insert(ip.dst as u32);
                TmMeta {
                    ucast_egress_port: Some(self.cfg.external_ports[0]),
                    ..Default::default()
                }
            }
            (_, Some(ip)) if self.cfg.external_ports.contains(&port) && st.contains(ip.src as u32) => TmMeta {
                ucast_egress_port: Some(self.cfg.internal_ports[0]),
                ..Default::default()
            },
            _ => drop,
        };
        (
            IngressDecision {
                tm,
                mirror: MirrorId::NONE,
                data: d,
            },
            ComponentState::Firewall(st),
        )
    }
}

pub fn initial_state(cfg: &FirewallConfig) -> FirewallState {
    FirewallState::new(cfg.m, cfg.k, cfg.window_ticks, cfg.clean_slice())
}

/// meta · ⟨64⟩ · ethernet · {ethertype = IPv4 ? ipv4 · L4 | ε} · payload
pub fn firewall_format() -> Format {
    Format::seq(vec![
        Format::value("meta", &intrinsic_meta_h()),
        Format::value("port_meta", &port_meta_h()),
        Format::value("ethernet", &ethernet_h()),
        Format::branch(
            Condition::field_eq("ethernet", "ethertype", ETHERTYPE_IPV4),
            Format::seq(vec![
                Format::value("ipv4", &ipv4_h()),
                l4_format(),
                Format::plain("payload"),
            ]),
            Format::plain("payload"),
        ),
    ])
}

pub fn firewall_app(cfg: &FirewallConfig) -> Result<AppBundle, EngineError> {
    cfg.validate()?;
    Ok(AppBundle {
        name: "firewall".into(),
        ingress: IngressPipeline::new(
            Arc::new(FormatParser::new(
                firewall_format(),
                &["ethernet", "ipv4", "tcp", "udp"],
            )),
            Arc::new(FirewallIngress { cfg: cfg.clone() }),
            Arc::new(EmitDeparser),
        ),
        egress: EgressPipeline {
            parser: Arc::new(RawEgressParser),
            control: Arc::new(PassEgressControl),
            deparser: Arc::new(EmitDeparser),
        },
        mc_config: McConfig::default(),
        pktgen_config: cfg.keepalive.clone(),
        qac_policy: QacPolicy::Minimal,
        init_ingress: StateTriple {
            parser: ComponentState::Counter(0),
            control: ComponentState::Firewall(initial_state(cfg)),
            deparser: ComponentState::Stateless,
        },
        init_egress: StateTriple::default(),
    })
}
