//! Frame construction helpers.

use crate::bits::BitString;
use crate::headers::{
    EthernetHeader, Ipv4Header, TcpHeader, UdpHeader, ETHERTYPE_IPV4, IPPROTO_TCP, IPPROTO_UDP, KEEPALIVE_ETHERTYPE,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum L4 {
    Tcp(TcpHeader),
    Udp(UdpHeader),
    /// Another IP protocol; its header (if any) is part of the payload.
    Other(u8),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameSpec {
    pub eth: EthernetHeader,
    pub ip: Ipv4Header,
    pub l4: L4,
    pub payload: Vec<u8>,
}

impl FrameSpec {
    pub fn new(src: u32, dst: u32, l4: L4, payload: &[u8]) -> Self {
        let (protocol, l4_len) = match &l4 {
            L4::Tcp(_) => (IPPROTO_TCP, 20),
            L4::Udp(_) => (IPPROTO_UDP, 8),
            L4::Other(p) => (*p as u64, 0),
        };
        FrameSpec {
            eth: EthernetHeader {
                dst: 0x0200_0000_0002,
                src: 0x0200_0000_0001,
                ethertype: ETHERTYPE_IPV4,
            },
            ip: Ipv4Header {
                version: 4,
                ihl: 5,
                total_len: (20 + l4_len + payload.len() as u64) & 0xFFFF,
                ttl: 64,
                protocol,
                src: src as u64,
                dst: dst as u64,
                ..Default::default()
            },
            l4,
            payload: payload.to_vec(),
        }
    }

    pub fn encode(&self) -> BitString {
        let mut out = self.eth.encode();
        out.append(&self.ip.encode());
        match &self.l4 {
            L4::Tcp(t) => out.append(&t.encode()),
            L4::Udp(u) => out.append(&u.encode()),
            L4::Other(_) => {}
        }
        out.append(&BitString::from_bytes(&self.payload));
        out
    }
}

pub fn tcp_frame(src: u32, dst: u32, sport: u16, dport: u16, payload: &[u8]) -> BitString {
    let tcp = TcpHeader {
        src_port: sport as u64,
        dst_port: dport as u64,
        offset_flags: 0x5000,
        window: 0xFFFF,
        ..Default::default()
    };
    FrameSpec::new(src, dst, L4::Tcp(tcp), payload).encode()
}

pub fn udp_frame(src: u32, dst: u32, sport: u16, dport: u16, payload: &[u8]) -> BitString {
    let udp = UdpHeader {
        src_port: sport as u64,
        dst_port: dport as u64,
        length: 8 + payload.len() as u64,
        checksum: 0,
    };
    FrameSpec::new(src, dst, L4::Udp(udp), payload).encode()
}

/// Minimal frame the firewall's generator emits to drive table cleaning.
pub fn keepalive_frame() -> BitString {
    let mut out = EthernetHeader {
        dst: 0xFFFF_FFFF_FFFF,
        src: 0,
        ethertype: KEEPALIVE_ETHERTYPE,
    }
    .encode();
    out.append(&BitString::from_bytes(&[0; 46]));
    out
}
