//! Reproducible random workloads.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::BitString;
use crate::engines::{Arrival, Port};
use crate::packets::{tcp_frame, udp_frame};

/// Shortest frame the standard format can accept, in bytes.
const MIN_STANDARD_FRAME: usize = 34;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    Tcp,
    Udp,
    /// Alternates TCP and UDP.
    Mixed,
    /// Mixed traffic where each packet is, with the given probability,
    /// truncated below the shortest acceptable frame.
    Malformed(f64),
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tcp" => Ok(Profile::Tcp),
            "udp" => Ok(Profile::Udp),
            "mixed" => Ok(Profile::Mixed),
            _ => {
                let rate = s
                    .strip_prefix("malformed:")
                    .or_else(|| s.strip_prefix("malformed-rate="))
                    .ok_or_else(|| format!("unknown profile `{s}` (tcp, udp, mixed, malformed:<rate>)"))?;
                let rate: f64 = rate.parse().map_err(|_| format!("bad malformed rate `{rate}`"))?;
                if !(0.0..=1.0).contains(&rate) {
                    return Err(format!("malformed rate {rate} outside [0, 1]"));
                }
                Ok(Profile::Malformed(rate))
            }
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Tcp => f.write_str("tcp"),
            Profile::Udp => f.write_str("udp"),
            Profile::Mixed => f.write_str("mixed"),
            Profile::Malformed(r) => write!(f, "malformed:{r}"),
        }
    }
}

/// One random well-formed frame.
pub fn random_frame(rng: &mut impl Rng, tcp: bool, max_payload: usize) -> BitString {
    let payload: Vec<u8> = (0..rng.gen_range(0..=max_payload)).map(|_| rng.gen()).collect();
    let (src, dst, sport, dport) = (rng.gen(), rng.gen(), rng.gen(), rng.gen());
    if tcp {
        tcp_frame(src, dst, sport, dport, &payload)
    } else {
        udp_frame(src, dst, sport, dport, &payload)
    }
}

pub fn generate(count: usize, seed: u64, profile: Profile, ports: &[Port]) -> Vec<Arrival> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ports = if ports.is_empty() { &[1][..] } else { ports };
    (0..count)
        .map(|i| {
            let tcp = match profile {
                Profile::Tcp => true,
                Profile::Udp => false,
                Profile::Mixed | Profile::Malformed(_) => i % 2 == 0,
            };
            let mut frame = random_frame(&mut rng, tcp, 32);
            if let Profile::Malformed(rate) = profile {
                if rng.gen_bool(rate) {
                    let keep = rng.gen_range(0..MIN_STANDARD_FRAME * 8);
                    frame = frame.slice(0, keep).expect("prefix of a longer frame");
                }
            }
            Arrival {
                port: ports[rng.gen_range(0..ports.len())],
                frame,
            }
        })
        .collect()
}
