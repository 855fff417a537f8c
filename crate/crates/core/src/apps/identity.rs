//! Reflector used to exercise the traffic manager: the ingress control
//! applies a fixed TM metadata template, the egress optionally asks for
//! recirculation of one multicast replica.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::apps::common::{EmitDeparser, FormatParser, RawEgressParser};
use crate::apps::AppBundle;
use crate::engines::{CopySource, McConfig, PktGenConfig, Port, QacPolicy, Tick, RECIRC_PORT};
use crate::error::EngineError;
use crate::format::Format;
use crate::headers::{intrinsic_meta_h, port_meta_h};
use crate::pipeline::{
    ComponentState, EgressControl, EgressPipeline, IngressControl, IngressDecision, IngressPipeline, MirrorId,
    ParsedData, StateTriple, TmMeta,
};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentityConfig {
    /// Metadata applied to every packet from a front-panel port.
    pub tm: TmMeta,
    /// Send unicast copies back out of the arrival port when the template
    /// has no unicast port.
    pub reflect: bool,
    /// Multicast replicas with this rid (nonzero) are recirculated.
    pub recirc_rid: u16,
    /// Unicast port for recirculated packets; defaults to the reflect rule.
    pub recirc_out: Option<Port>,
    pub mc: McConfig,
    pub pktgen: Option<PktGenConfig>,
    pub qac_policy: QacPolicy,
}

impl IdentityConfig {
    pub fn reflector() -> Self {
        IdentityConfig {
            reflect: true,
            ..Default::default()
        }
    }
}

pub struct IdentityIngress {
    cfg: IdentityConfig,
}

impl IngressControl for IdentityIngress {
    fn apply(&self, _t: Tick, port: Port, d: ParsedData, s: &ComponentState) -> (IngressDecision, ComponentState) {
        let tm = if port == RECIRC_PORT {
            TmMeta {
                ucast_egress_port: self.cfg.recirc_out.or(Some(port)),
                ..Default::default()
            }
        } else {
            let mut tm = self.cfg.tm.clone();
            if tm.ucast_egress_port.is_none() && self.cfg.reflect {
                tm.ucast_egress_port = Some(port);
            }
            tm
        };
        (
            IngressDecision {
                tm,
                mirror: MirrorId::NONE,
                data: d,
            },
            s.clone(),
        )
    }
}

pub struct IdentityEgress {
    recirc_rid: u16,
}

impl EgressControl for IdentityEgress {
    fn apply(&self, mut d: ParsedData, s: &ComponentState) -> (ParsedData, ComponentState) {
        let multicast =
            d.meta("source") == CopySource::MulticastA.code() || d.meta("source") == CopySource::MulticastB.code();
        let hit = self.recirc_rid != 0 && multicast && d.meta("rid") == self.recirc_rid as u64;
        d.meta.insert("recirculate".into(), hit as u64);
        (d, s.clone())
    }
}

pub fn identity_format() -> Format {
    Format::seq(vec![
        Format::value("meta", &intrinsic_meta_h()),
        Format::value("port_meta", &port_meta_h()),
        Format::plain("payload"),
    ])
}

pub fn identity_app(cfg: &IdentityConfig) -> Result<AppBundle, EngineError> {
    cfg.mc.validate()?;
    if let Some(g) = &cfg.pktgen {
        g.validate()?;
    }
    Ok(AppBundle {
        name: "identity".into(),
        ingress: IngressPipeline::new(
            Arc::new(FormatParser::new(identity_format(), &[])),
            Arc::new(IdentityIngress { cfg: cfg.clone() }),
            Arc::new(EmitDeparser),
        ),
        egress: EgressPipeline {
            parser: Arc::new(RawEgressParser),
            control: Arc::new(IdentityEgress {
                recirc_rid: cfg.recirc_rid,
            }),
            deparser: Arc::new(EmitDeparser),
        },
        mc_config: cfg.mc.clone(),
        pktgen_config: cfg.pktgen.clone().unwrap_or_else(PktGenConfig::disabled),
        qac_policy: cfg.qac_policy.clone(),
        init_ingress: StateTriple {
            parser: ComponentState::Counter(0),
            ..Default::default()
        },
        init_egress: StateTriple::default(),
    })
}
