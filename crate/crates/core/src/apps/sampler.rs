//! Packet sampler: every `modulus`-th parsed packet is duplicated through
//! the multicast engine, and one copy is reduced to a sample header.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::apps::common::{stash_egress_meta, EmitDeparser, FormatParser};
use crate::apps::AppBundle;
use crate::bits::BitString;
use crate::engines::{CopySource, EgressMeta, L1Node, McConfig, PktGenConfig, Port, QacPolicy, Tick};
use crate::error::EngineError;
use crate::format::{match_packet, Format, MatchOutcome};
use crate::headers::{frame_format, sample_h, standard_packet_format, Ipv4Header, SampleHeader, SAMPLE_ETHERTYPE};
use crate::pipeline::{
    ComponentState, EgressControl, EgressParser, EgressPipeline, IngressControl, IngressDecision, IngressPipeline,
    ParseResult, ParsedData, StateTriple, TmMeta,
};

pub const DEFAULT_MODULUS: u32 = 1024;

const FRAME_HEADERS: [&str; 4] = ["ethernet", "ipv4", "tcp", "udp"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub sample_group_id: u16,
    pub forward_port: Port,
    pub monitor_port: Port,
    pub forward_rid: u16,
    pub monitor_rid: u16,
    #[serde(default = "default_modulus")]
    pub modulus: u32,
    #[serde(default)]
    pub initial_counter: u32,
}

fn default_modulus() -> u32 {
    DEFAULT_MODULUS
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            sample_group_id: 1,
            forward_port: 1,
            monitor_port: 2,
            forward_rid: 1,
            monitor_rid: 2,
            modulus: DEFAULT_MODULUS,
            initial_counter: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidConfig(m.into()));
        if self.forward_rid == self.monitor_rid {
            return bad("sampler forward_rid and monitor_rid must differ");
        }
        if self.sample_group_id == 0 {
            return bad("sampler group id 0 means 'no group'");
        }
        if self.modulus == 0 {
            return bad("sampler modulus must be >= 1");
        }
        Ok(())
    }

    pub fn mc_config(&self) -> McConfig {
        let mut c = McConfig::default();
        c.groups.insert(
            self.sample_group_id,
            vec![
                L1Node {
                    dev_port_list: vec![self.forward_port],
                    rid: self.forward_rid,
                    ..Default::default()
                },
                L1Node {
                    dev_port_list: vec![self.monitor_port],
                    rid: self.monitor_rid,
                    ..Default::default()
                },
            ],
        );
        c
    }

    /// Whether the `index`-th packet (1-based) after a counter value of `n`
    /// is sampled.
    pub fn is_sampled(&self, n: u32, index: u64) -> bool {
        (n as u64 + index).is_multiple_of(self.modulus as u64)
    }
}

/// The sample header the sampler builds for `frame` at counter value `count`.
/// `None` when the frame does not parse.
pub fn sample_of(frame: &BitString, count: u32) -> Option<SampleHeader> {
    let MatchOutcome::Matched(env) = match_packet(frame, &frame_format()).ok()? else {
        return None;
    };
    let ip = Ipv4Header::from_value(env.value("ipv4")?)?;
    let l4 = env.value("tcp").or_else(|| env.value("udp"));
    let port = |f: &str| l4.and_then(|v| v.get(f)).unwrap_or(0);
    Some(SampleHeader {
        marker_ethertype: SAMPLE_ETHERTYPE,
        src_addr: ip.src,
        dst_addr: ip.dst,
        src_port: port("src_port"),
        dst_port: port("dst_port"),
        sample_count: count as u64,
    })
}

/// The frame's payload: everything after the L4 header.
pub fn payload_of(frame: &BitString) -> Option<BitString> {
    match match_packet(frame, &frame_format()).ok()? {
        MatchOutcome::Matched(env) => env.plain("payload").cloned(),
        _ => None,
    }
}

/// Monitor-port output expected for `frame` sampled at `count`.
pub fn special_packet(frame: &BitString, count: u32) -> Option<BitString> {
    let mut out = sample_of(frame, count)?.encode();
    out.append(&payload_of(frame)?);
    Some(out)
}

pub struct SamplerIngress {
    cfg: SamplerConfig,
}

impl IngressControl for SamplerIngress {
    fn apply(&self, _t: Tick, _port: Port, mut d: ParsedData, s: &ComponentState) -> (IngressDecision, ComponentState) {
        let c = (s.counter().unwrap_or(0) as u32).wrapping_add(1);
        // Every field the traffic manager reads is written explicitly.
        let mut tm = TmMeta {
            ucast_egress_port: None,
            copy_to_cpu: false,
            mcast_grp_a: 0,
            mcast_grp_b: 0,
            level1_exclusion_id: 0,
            level2_exclusion_id: 0,
            rid: 0,
            bypass_egress: false,
            drop: false,
        };
        if c.is_multiple_of(self.cfg.modulus) {
            let ip = d.header("ipv4").and_then(Ipv4Header::from_value).unwrap_or_default();
            let l4 = d.header("tcp").or_else(|| d.header("udp"));
            let port = |f: &str| l4.and_then(|v| v.get(f)).unwrap_or(0);
            let sample = SampleHeader {
                marker_ethertype: SAMPLE_ETHERTYPE,
                src_addr: ip.src,
                dst_addr: ip.dst,
                src_port: port("src_port"),
                dst_port: port("dst_port"),
                sample_count: c as u64,
            };
            d.push_front("sample", sample.to_value());
            tm.mcast_grp_a = self.cfg.sample_group_id;
        } else {
            tm.ucast_egress_port = Some(self.cfg.forward_port);
        }
        (
            IngressDecision {
                tm,
                mirror: crate::pipeline::MirrorId::NONE,
                data: d,
            },
            ComponentState::Counter(c as u64),
        )
    }
}

/// Multicast copies carry a leading sample header; unicast copies are
/// plain frames.
pub struct SamplerEgressParser {
    plain: FormatParser,
    sampled: FormatParser,
}

impl SamplerEgressParser {
    fn new() -> Self {
        let mut headers = vec!["sample"];
        headers.extend(FRAME_HEADERS);
        SamplerEgressParser {
            plain: FormatParser::new(frame_format(), &FRAME_HEADERS),
            sampled: FormatParser {
                format: Format::concat(Format::value("sample", &sample_h()), frame_format()),
                headers,
            },
        }
    }
}

impl EgressParser for SamplerEgressParser {
    fn parse(&self, m: &EgressMeta, p: &BitString, s: &ComponentState) -> (ParseResult, ComponentState) {
        let multicast = matches!(m.source, CopySource::MulticastA | CopySource::MulticastB);
        let parsed = if multicast {
            self.sampled
                .parse_stream(p)
                .filter(|(d, _)| d.header("sample").and_then(|v| v.get("marker_ethertype")) == Some(SAMPLE_ETHERTYPE))
        } else {
            self.plain.parse_stream(p)
        };
        let parsed = parsed.map(|(mut d, l)| {
            stash_egress_meta(&mut d, m);
            (d, l)
        });
        (parsed, s.clone())
    }
}

pub struct SamplerEgress {
    cfg: SamplerConfig,
}

impl EgressControl for SamplerEgress {
    fn apply(&self, mut d: ParsedData, s: &ComponentState) -> (ParsedData, ComponentState) {
        let multicast = d.meta("source") != CopySource::Unicast.code();
        let rid = d.meta("rid");
        if multicast && rid == self.cfg.forward_rid as u64 {
            d.invalidate("sample");
        } else if multicast && rid == self.cfg.monitor_rid as u64 {
            for h in FRAME_HEADERS {
                d.invalidate(h);
            }
        }
        d.meta.insert("recirculate".into(), 0);
        (d, s.clone())
    }
}

pub fn sampler_app(cfg: &SamplerConfig) -> Result<AppBundle, EngineError> {
    cfg.validate()?;
    Ok(AppBundle {
        name: "sampler".into(),
        ingress: IngressPipeline::new(
            Arc::new(FormatParser::new(standard_packet_format(), &FRAME_HEADERS)),
            Arc::new(SamplerIngress { cfg: cfg.clone() }),
            Arc::new(EmitDeparser),
        ),
        egress: EgressPipeline {
            parser: Arc::new(SamplerEgressParser::new()),
            control: Arc::new(SamplerEgress { cfg: cfg.clone() }),
            deparser: Arc::new(EmitDeparser),
        },
        mc_config: cfg.mc_config(),
        pktgen_config: PktGenConfig::disabled(),
        qac_policy: QacPolicy::Minimal,
        init_ingress: StateTriple {
            parser: ComponentState::Counter(0),
            control: ComponentState::Counter(cfg.initial_counter as u64),
            deparser: ComponentState::Stateless,
        },
        init_egress: StateTriple::default(),
    })
}
