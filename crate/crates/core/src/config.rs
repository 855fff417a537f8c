//! Switch configuration files.
//!
//! ```json
//! {"mirror": "empty", "app": "sampler",
//!  "sampler": {"sample_group_id": 1, "forward_port": 1, "monitor_port": 2,
//!              "forward_rid": 1, "monitor_rid": 2},
//!  "qac_policy": {"kind": "always_ready", "ready_ports": "all"}}
//! ```
//!
//! `mc`, `pktgen` and `qac_policy` override what the app asks for.

use serde::Deserialize;

use crate::apps::{firewall_app, identity_app, sampler_app, FirewallConfig, IdentityConfig, SamplerConfig};
use crate::engines::{Arrival, McConfig, MirrorConfig, PktGenConfig, Port, QacPolicy, Tick};
use crate::error::EngineError;
use crate::packets::keepalive_frame;
use crate::switch::SwitchConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppKind {
    Sampler,
    Firewall,
    Identity,
}

/// Firewall parameters as written in a file. The window is given either in
/// ticks or in milliseconds together with the tick length.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirewallFile {
    #[serde(default = "one")]
    pub internal_ports: Vec<Port>,
    #[serde(default = "two")]
    pub external_ports: Vec<Port>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_k")]
    pub k: u32,
    pub window_ticks: Option<Tick>,
    #[serde(default = "default_window_ms")]
    pub window_ms: f64,
    #[serde(default = "default_tick_ns")]
    pub tick_ns: u64,
    /// Defaults to one keepalive per window from port 0.
    pub keepalive: Option<PktGenConfig>,
}

fn one() -> Vec<Port> {
    vec![1]
}
fn two() -> Vec<Port> {
    vec![2]
}
fn default_m() -> usize {
    1024
}
fn default_k() -> u32 {
    3
}
fn default_window_ms() -> f64 {
    10.0
}
fn default_tick_ns() -> u64 {
    10_000
}

impl Default for FirewallFile {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl FirewallFile {
    pub fn resolve(&self) -> FirewallConfig {
        let window = self
            .window_ticks
            .unwrap_or_else(|| FirewallConfig::window_ticks_for(self.window_ms, self.tick_ns));
        FirewallConfig {
            internal_ports: self.internal_ports.clone(),
            external_ports: self.external_ports.clone(),
            m: self.m,
            k: self.k,
            window_ticks: window,
            keepalive: self
                .keepalive
                .clone()
                .unwrap_or_else(|| PktGenConfig::periodic(window, keepalive_frame(), 0)),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchConfigFile {
    #[serde(default)]
    pub mirror: MirrorConfig,
    pub app: AppKind,
    pub sampler: Option<SamplerConfig>,
    pub firewall: Option<FirewallFile>,
    pub identity: Option<IdentityConfig>,
    pub mc: Option<McConfig>,
    pub pktgen: Option<PktGenConfig>,
    pub qac_policy: Option<QacPolicy>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config is not valid JSON for this schema: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] EngineError),
}

impl SwitchConfigFile {
    pub fn build(&self) -> Result<SwitchConfig, ConfigError> {
        let app = match self.app {
            AppKind::Sampler => sampler_app(&self.sampler.clone().unwrap_or_default())?,
            AppKind::Firewall => firewall_app(&self.firewall.clone().unwrap_or_default().resolve())?,
            AppKind::Identity => identity_app(&self.identity.clone().unwrap_or_else(IdentityConfig::reflector))?,
        };
        let mut cfg = SwitchConfig::from_app(app);
        cfg.mirror = self.mirror.clone();
        if let Some(mc) = &self.mc {
            mc.validate()?;
            cfg.mc = mc.clone();
        }
        if let Some(g) = &self.pktgen {
            g.validate()?;
            cfg.pktgen = g.clone();
        }
        if let Some(q) = &self.qac_policy {
            cfg.qac = q.clone();
        }
        Ok(cfg)
    }

    /// Sampler parameters in effect, if the app is the sampler.
    pub fn sampler(&self) -> Option<SamplerConfig> {
        (self.app == AppKind::Sampler).then(|| self.sampler.clone().unwrap_or_default())
    }
}

pub fn parse_switch_config(text: &str) -> Result<SwitchConfigFile, ConfigError> {
    Ok(serde_json::from_str(text)?)
}

pub fn load_switch_config(text: &str) -> Result<SwitchConfig, ConfigError> {
    parse_switch_config(text)?.build()
}

/// Input stream file: a JSON array of `{"port": .., "hex": ..}`.
pub fn parse_input_stream(text: &str) -> Result<Vec<Arrival>, serde_json::Error> {
    serde_json::from_str(text)
}
