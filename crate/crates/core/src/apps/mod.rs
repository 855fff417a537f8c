//! Data-plane programs.

pub mod common;
pub mod firewall;
pub mod identity;
pub mod sampler;

use crate::engines::{McConfig, PktGenConfig, QacPolicy};
use crate::pipeline::{EgressPipeline, IngressPipeline, StateTriple};

/// A program together with the control-plane configuration it needs.
#[derive(Clone, Debug)]
pub struct AppBundle {
    pub name: String,
    pub ingress: IngressPipeline,
    pub egress: EgressPipeline,
    pub mc_config: McConfig,
    pub pktgen_config: PktGenConfig,
    pub qac_policy: QacPolicy,
    pub init_ingress: StateTriple,
    pub init_egress: StateTriple,
}

pub use firewall::{firewall_app, FirewallConfig, FirewallState};
pub use identity::{identity_app, IdentityConfig};
pub use sampler::{sampler_app, SamplerConfig};
