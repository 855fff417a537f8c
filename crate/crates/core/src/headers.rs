//! Concrete header and metadata layouts, and the standard
//! meta/ethernet/IPv4/L4 packet format.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::format::{encode, extract_at, Condition, Format, HeaderType, TypedValue};

pub const ETHERTYPE_IPV4: u64 = 0x0800;
/// Marks a sample header (and the start of a sampled monitor packet).
pub const SAMPLE_ETHERTYPE: u64 = 0x9999;
/// Ethertype of generator keepalive frames.
pub const KEEPALIVE_ETHERTYPE: u64 = 0x88B5;
pub const IPPROTO_TCP: u64 = 6;
pub const IPPROTO_UDP: u64 = 17;

macro_rules! header {
    ($(#[$doc:meta])* $ty:ident, $fn:ident, $name:literal, { $($field:ident : $w:literal),* $(,)? }) => {
        $(#[$doc])*
        #[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub struct $ty {
            $(pub $field: u64,)*
        }

        pub fn $fn() -> Arc<HeaderType> {
            static T: OnceLock<Arc<HeaderType>> = OnceLock::new();
            T.get_or_init(|| {
                Arc::new(HeaderType::new($name, &[$((stringify!($field), $w)),*]).expect("static layout"))
            })
            .clone()
        }

        impl $ty {
            pub const WIDTH_BITS: usize = 0 $(+ $w)*;

            pub fn htype() -> Arc<HeaderType> {
                $fn()
            }

            pub fn to_value(&self) -> TypedValue {
                TypedValue::new($fn(), &[$((stringify!($field), self.$field)),*])
                    .expect("field out of range for its width")
            }

            pub fn from_value(v: &TypedValue) -> Option<Self> {
                Some($ty { $($field: v.get(stringify!($field))?,)* })
            }

            pub fn encode(&self) -> BitString {
                encode(&self.to_value())
            }

            pub fn decode_at(p: &BitString, offset: usize) -> Option<Self> {
                Self::from_value(&extract_at(&$fn(), p, offset).ok()?)
            }
        }
    };
}

header!(EthernetHeader, ethernet_h, "ethernet_h", { dst: 48, src: 48, ethertype: 16 });

header!(Ipv4Header, ipv4_h, "ipv4_h", {
    version: 4, ihl: 4, dscp_ecn: 8, total_len: 16, id: 16, flags_frag: 16,
    ttl: 8, protocol: 8, checksum: 16, src: 32, dst: 32,
});

header!(TcpHeader, tcp_h, "tcp_h", {
    src_port: 16, dst_port: 16, seq: 32, ack: 32, offset_flags: 16,
    window: 16, checksum: 16, urgent: 16,
});

header!(UdpHeader, udp_h, "udp_h", { src_port: 16, dst_port: 16, length: 16, checksum: 16 });

header!(
    /// Prepended by the input ports; only the port number is meaningful.
    IntrinsicMeta, intrinsic_meta_h, "intrinsic_meta_h", { ingress_port: 16, reserved: 48 }
);

header!(
    /// Opaque 64-bit block following the intrinsic metadata.
    PortMeta, port_meta_h, "port_meta_h", { opaque: 64 }
);

header!(SampleHeader, sample_h, "sample_h", {
    marker_ethertype: 16, src_addr: 32, dst_addr: 32, src_port: 16, dst_port: 16, sample_count: 32,
});

impl Ipv4Header {
    pub fn is_tcp(&self) -> bool {
        self.protocol == IPPROTO_TCP
    }

    pub fn is_udp(&self) -> bool {
        self.protocol == IPPROTO_UDP
    }
}

pub fn builtin_types() -> Vec<Arc<HeaderType>> {
    vec![
        ethernet_h(),
        ipv4_h(),
        tcp_h(),
        udp_h(),
        intrinsic_meta_h(),
        port_meta_h(),
        sample_h(),
    ]
}

/// Metadata prefix the input ports put in front of every frame.
pub fn metadata_prefix(port: u16) -> BitString {
    let mut out = IntrinsicMeta {
        ingress_port: port as u64,
        reserved: 0,
    }
    .encode();
    out.append(&PortMeta::default().encode());
    out
}

/// The ingress-parser view of a frame arriving on `port`.
pub fn ingress_stream(port: u16, frame: &BitString) -> BitString {
    let mut out = metadata_prefix(port);
    out.append(frame);
    out
}

pub fn is_tcp_condition(ipv4: &str) -> Condition {
    Condition::field_eq(ipv4, "protocol", IPPROTO_TCP)
}

pub fn is_udp_condition(ipv4: &str) -> Condition {
    Condition::field_eq(ipv4, "protocol", IPPROTO_UDP)
}

/// `{is_tcp ? tcp | {is_udp ? udp | ε}}`
pub fn l4_format() -> Format {
    Format::branch(
        is_tcp_condition("ipv4"),
        Format::value("tcp", &tcp_h()),
        Format::branch(is_udp_condition("ipv4"), Format::value("udp", &udp_h()), Format::Empty),
    )
}

/// meta · ⟨64⟩ · ethernet · ipv4 · {tcp | udp | ε} · payload
pub fn standard_packet_format() -> Format {
    Format::seq(vec![
        Format::value("meta", &intrinsic_meta_h()),
        Format::value("port_meta", &port_meta_h()),
        Format::value("ethernet", &ethernet_h()),
        Format::value("ipv4", &ipv4_h()),
        l4_format(),
        Format::plain("payload"),
    ])
}

/// The frame without the metadata prefix: ethernet · ipv4 · L4 · payload.
pub fn frame_format() -> Format {
    Format::seq(vec![
        Format::value("ethernet", &ethernet_h()),
        Format::value("ipv4", &ipv4_h()),
        l4_format(),
        Format::plain("payload"),
    ])
}
