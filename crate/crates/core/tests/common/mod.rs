#![allow(dead_code)]

pub mod forgeries;
pub mod formats;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swmodel::apps::{firewall_app, identity_app, sampler_app, FirewallConfig, IdentityConfig, SamplerConfig};
use swmodel::engines::{
    pktgen_tick, Arrival, EgressEntry, EgressMeta, L1Node, McConfig, PktGenConfig, PktGenState, Port, QacPolicy,
    ReadyPorts, Tick, RECIRC_PORT,
};
use swmodel::gen::random_frame;
use swmodel::packets::tcp_frame;
use swmodel::pipeline::TmMeta;
use swmodel::switch::{
    AdversarialDrop, FifoDrain, IngressResult, Oracle, RandomOracle, StepKind, SwitchConfig, Trace, World,
};
use swmodel::BitString;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mc(r: &mut impl Rng) -> McConfig {
    let mut c = McConfig {
        cpu_port: r.gen_range(0..16),
        ..Default::default()
    };
    for lag in 1..=r.gen_range(0..3u16) {
        let members = (0..r.gen_range(1..4)).map(|_| r.gen_range(0..16)).collect();
        c.lags.insert(lag, members);
    }
    let lag_ids: Vec<u16> = c.lags.keys().copied().collect();
    for g in 1..=r.gen_range(1..4u16) {
        let nodes = (0..r.gen_range(0..4))
            .map(|_| L1Node {
                dev_port_list: (0..r.gen_range(0..4)).map(|_| r.gen_range(0..16)).collect(),
                lag_list: if lag_ids.is_empty() || r.gen_bool(0.5) {
                    vec![]
                } else {
                    vec![*lag_ids.choose(r).unwrap()]
                },
                l1_xid_valid: r.gen_bool(0.3),
                l1_xid: r.gen_range(0..3),
                rid: r.gen_range(0..4),
            })
            .collect();
        c.groups.insert(g, nodes);
    }
    for x in 0..r.gen_range(0..3u16) {
        let ports: BTreeSet<Port> = (0..r.gen_range(1..4)).map(|_| r.gen_range(0..16)).collect();
        c.l2_exclusion.insert(x, ports);
    }
    c
}

fn random_group(r: &mut impl Rng, mc: &McConfig) -> u16 {
    if r.gen_bool(0.4) {
        0
    } else {
        *mc.groups.keys().collect::<Vec<_>>().choose(r).copied().unwrap_or(&0)
    }
}

pub fn random_qac(r: &mut impl Rng) -> QacPolicy {
    match r.gen_range(0..3) {
        0 => QacPolicy::Minimal,
        1 => QacPolicy::AlwaysReady {
            ready_ports: ReadyPorts::All,
        },
        _ => QacPolicy::AlwaysReady {
            ready_ports: ReadyPorts::Ports((0..r.gen_range(0..5)).map(|_| r.gen_range(0..16)).collect()),
        },
    }
}

pub fn random_pktgen(r: &mut impl Rng, template: BitString, port: Port) -> PktGenConfig {
    if r.gen_bool(0.5) {
        return PktGenConfig::disabled();
    }
    PktGenConfig {
        enabled: true,
        period: r.gen_range(1..30),
        batch_count: r.gen_range(1..4),
        pkts_per_batch: r.gen_range(1..4),
        inter_batch_gap: r.gen_range(1..6),
        inter_pkt_gap: r.gen_range(1..4),
        template,
        source_port: port,
    }
}

pub fn random_identity(r: &mut impl Rng) -> SwitchConfig {
    let mc = random_mc(r);
    let tm = TmMeta {
        ucast_egress_port: r.gen_bool(0.5).then(|| r.gen_range(0..16)),
        copy_to_cpu: r.gen_bool(0.2),
        mcast_grp_a: random_group(r, &mc),
        mcast_grp_b: random_group(r, &mc),
        level1_exclusion_id: r.gen_range(0..3),
        level2_exclusion_id: r.gen_range(0..3),
        rid: r.gen_range(0..4),
        bypass_egress: false,
        drop: r.gen_bool(0.1),
    };
    let template = BitString::from_bytes(&[0xEE; 20]);
    let cfg = IdentityConfig {
        tm,
        reflect: r.gen_bool(0.5),
        recirc_rid: r.gen_range(0..4),
        recirc_out: r.gen_bool(0.5).then(|| r.gen_range(0..16)),
        pktgen: Some({
            let port = r.gen_range(0..16);
            random_pktgen(r, template, port)
        }),
        qac_policy: random_qac(r),
        mc,
    };
    SwitchConfig::from_app(identity_app(&cfg).unwrap())
}

pub fn random_sampler_cfg(r: &mut impl Rng) -> SamplerConfig {
    SamplerConfig {
        sample_group_id: r.gen_range(1..5),
        forward_port: r.gen_range(0..8),
        monitor_port: r.gen_range(8..16),
        forward_rid: 1,
        monitor_rid: 2,
        modulus: *[1, 2, 3, 8, 1024].choose(r).unwrap(),
        initial_counter: r.gen(),
    }
}

pub fn random_sampler(r: &mut impl Rng) -> SwitchConfig {
    let mut cfg = SwitchConfig::from_app(sampler_app(&random_sampler_cfg(r)).unwrap());
    cfg.qac = random_qac(r);
    cfg
}

pub fn random_firewall(r: &mut impl Rng) -> SwitchConfig {
    let mut cfg = FirewallConfig::with_window(r.gen_range(5..40));
    cfg.m = r.gen_range(16..256);
    cfg.k = r.gen_range(1..5);
    cfg.keepalive.period = r.gen_range(1..=cfg.window_ticks);
    let mut sc = SwitchConfig::from_app(firewall_app(&cfg).unwrap());
    sc.qac = random_qac(r);
    sc
}

/// Mixed stream: well-formed frames, truncated frames and short garbage.
pub fn random_stream(r: &mut impl Rng, len: usize, ports: &[Port]) -> Vec<Arrival> {
    (0..len)
        .map(|_| {
            let tcp = r.gen_bool(0.5);
            let mut frame = random_frame(r, tcp, 24);
            match r.gen_range(0..10) {
                0 => frame = frame.slice(0, r.gen_range(0..frame.len())).unwrap(),
                1 => frame = BitString::from_bytes(&(0..r.gen_range(0..12)).map(|_| r.gen()).collect::<Vec<u8>>()),
                _ => {}
            }
            Arrival {
                port: *ports.choose(r).unwrap(),
                frame,
            }
        })
        .collect()
}

/// Request/response traffic over a small address pool so that responses
/// often match earlier requests.
pub fn firewall_stream(r: &mut impl Rng, len: usize, internal: Port, external: Port) -> Vec<Arrival> {
    (0..len)
        .map(|_| {
            let peer = r.gen_range(0..12u32) + 0x0A00_0000;
            let me = 0xC0A8_0001;
            if r.gen_bool(0.5) {
                Arrival {
                    port: internal,
                    frame: tcp_frame(me, peer, 4000, 80, b"req"),
                }
            } else {
                Arrival {
                    port: external,
                    frame: tcp_frame(peer, me, 80, 4000, b"resp"),
                }
            }
        })
        .collect()
}

/// Random step kinds and admissions, FIFO input and scheduling.
pub struct FifoOrder {
    inner: RandomOracle,
    drop_optional: bool,
}

impl FifoOrder {
    pub fn new(seed: u64, drop_optional: bool) -> Self {
        FifoOrder {
            inner: RandomOracle::new(seed),
            drop_optional,
        }
    }
}

impl Oracle for FifoOrder {
    fn step_kind(&mut self, w: &World) -> StepKind {
        self.inner.step_kind(w)
    }
    fn input_index(&mut self, _len: usize) -> usize {
        0
    }
    fn admitted(&mut self, ms: &[EgressMeta], mandatory: &[bool]) -> Vec<bool> {
        if self.drop_optional {
            mandatory.to_vec()
        } else {
            self.inner.admitted(ms, mandatory)
        }
    }
    fn sched_index(&mut self, _q: &[EgressEntry]) -> usize {
        0
    }
}

pub fn random_oracle(r: &mut impl Rng) -> Box<dyn Oracle> {
    let seed = r.gen();
    match r.gen_range(0..4) {
        0 => Box::new(FifoDrain),
        1 => {
            let mut o = RandomOracle::new(seed);
            o.egress_bias = r.gen_range(0.05..0.95);
            o.keep = r.gen_range(0.0..1.0);
            Box::new(o)
        }
        2 => Box::new(AdversarialDrop::new(seed)),
        _ => Box::new(FifoOrder::new(seed, r.gen_bool(0.5))),
    }
}

/// Any of the three apps with a matching random input stream.
pub fn random_scenario(r: &mut impl Rng) -> (SwitchConfig, World) {
    let app = r.gen_range(0..3);
    scenario_for(r, app)
}

/// App 0 is identity, 1 the sampler, 2 the firewall.
pub fn scenario_for(r: &mut impl Rng, app: usize) -> (SwitchConfig, World) {
    let (cfg, input) = match app {
        0 => {
            let c = random_identity(r);
            let n = r.gen_range(0..40);
            let s = random_stream(r, n, &[0, 1, 2, 3, RECIRC_PORT]);
            (c, s)
        }
        1 => {
            let c = random_sampler(r);
            let n = r.gen_range(0..60);
            (c, random_stream(r, n, &[0, 1, 2, 3]))
        }
        _ => {
            let c = random_firewall(r);
            let n = r.gen_range(0..60);
            let mut s = firewall_stream(r, n, 1, 2);
            s.extend(random_stream(r, n / 4, &[1, 2, 3]));
            s.shuffle(r);
            (c, s)
        }
    };
    let w = World::initial(&cfg, input);
    (cfg, w)
}

const SRC_AT: usize = (14 + 12) * 8;
const DST_AT: usize = (14 + 16) * 8;

/// Checks that every response from an address requested earlier in the
/// same window was forwarded; returns how many responses were judged.
pub fn firewall_one_sided(t: &Trace, window: u64, internal: Port, external: Port) -> Result<usize, String> {
    let mut requested: HashMap<u64, u64> = HashMap::new();
    let mut judged = 0;
    for s in &t.steps {
        if s.kind != StepKind::Ingress || s.witness.p_g.is_some() {
            continue;
        }
        let (Some(a), Some(next)) = (&s.witness.p_i, s.delta.t) else {
            continue;
        };
        let Some(IngressResult::Accepted(out)) = &s.witness.ingress else {
            continue;
        };
        let now = next - 1;
        let epoch = now / window;
        if a.port == internal {
            if let Some(dst) = a.frame.read_uint(DST_AT, 32) {
                requested.insert(dst, epoch);
            }
        } else if a.port == external {
            let Some(src) = a.frame.read_uint(SRC_AT, 32) else {
                continue;
            };
            if requested.get(&src) == Some(&epoch) {
                judged += 1;
                if out.tm.drop || out.tm.ucast_egress_port != Some(internal) {
                    return Err(format!("response from {src:#x} dropped at t = {now}"));
                }
            }
        }
    }
    Ok(judged)
}

/// Generator emission ticks below `horizon`, from the configuration alone.
pub fn pktgen_closed_form(c: &PktGenConfig, horizon: Tick) -> Vec<Tick> {
    let (bc, ppb) = (c.batch_count as u64, c.pkts_per_batch as u64);
    let stride = (ppb - 1) * c.inter_pkt_gap + c.inter_batch_gap;
    let span = (bc - 1) * stride + (ppb - 1) * c.inter_pkt_gap;
    let mut out = Vec::new();
    let mut start = 0;
    while start < horizon {
        for b in 0..bc {
            for k in 0..ppb {
                let t = start + b * stride + k * c.inter_pkt_gap;
                if t < horizon {
                    out.push(t);
                }
            }
        }
        start = ((start + span) / c.period + 1) * c.period;
    }
    out
}

/// Emission ticks from stepping the generator.
pub fn pktgen_simulated(c: &PktGenConfig, horizon: Tick) -> Vec<Tick> {
    let mut s = PktGenState::default();
    let mut out = Vec::new();
    for t in 0..horizon {
        let (p, s2) = pktgen_tick(c, t, &s);
        if p.is_some() {
            out.push(t);
        }
        s = s2;
    }
    out
}

pub fn random_pktgen_config(r: &mut impl Rng) -> PktGenConfig {
    PktGenConfig {
        enabled: true,
        period: r.gen_range(1..200),
        batch_count: r.gen_range(1..6),
        pkts_per_batch: r.gen_range(1..6),
        inter_batch_gap: r.gen_range(1..20),
        inter_pkt_gap: r.gen_range(1..10),
        template: BitString::from_bytes(&[0x5A; 16]),
        source_port: r.gen_range(0..16),
    }
}

pub fn mc_groups(mc: &McConfig) -> BTreeMap<u16, usize> {
    mc.groups.iter().map(|(g, n)| (*g, n.len())).collect()
}
