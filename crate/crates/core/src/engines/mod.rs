//! Configurable (non-programmable) switch engines.

pub mod multicast;
pub mod pktgen;
pub mod traffic;

pub use multicast::{
    multicast_engine, replication_engine, resolve_lag, unicast_engine, CopySource, EgressMeta, L1Node, McConfig, Port,
};
pub use pktgen::{packet_generator, pktgen_tick, PktGenConfig, PktGenPhase, PktGenState, Tick};
pub use traffic::{
    input_ports, mirror_buffer_merge, mirror_session_lookup, output_ports, packet_scheduler, queue_admission, Arrival,
    EgressEntry, MirrorConfig, MirrorMeta, QacPolicy, ReadyPorts, Transmitted, RECIRC_PORT,
};
