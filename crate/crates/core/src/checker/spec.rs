//! End-to-end properties: the sampler specification, LangSec, parser
//! obliviousness, dense flow and packet lineage.

use std::collections::HashMap;

use serde::Serialize;
use serde_json::json;

use crate::apps::SamplerConfig;
use crate::bits::BitString;
use crate::checker::{CheckError, Clause, Verdict};
use crate::engines::{pktgen_tick, Arrival, EgressEntry, EgressMeta, Transmitted};
use crate::headers::ingress_stream;
use crate::pipeline::{ComponentState, IngressParser};
use crate::switch::trace::{digest_of, QueueEdit, RecircEdit};
use crate::switch::{ingress_step, Decisions, Oracle, StepKind, SwitchConfig, TraceHeader, TraceStep, Witness, World};

const ETH_BITS: usize = 14 * 8;
const IPV4_BITS: usize = 20 * 8;

/// Addresses, ports and payload offset of a frame the standard format
/// accepts, read at fixed offsets.
struct FrameFields {
    src: u64,
    dst: u64,
    sport: u64,
    dport: u64,
    payload_at: usize,
}

fn frame_fields(frame: &BitString) -> Option<FrameFields> {
    let l3 = ETH_BITS + IPV4_BITS;
    if frame.len() < l3 {
        return None;
    }
    let proto = frame.read_uint(ETH_BITS + 9 * 8, 8)?;
    let l4 = match proto {
        6 => 20 * 8,
        17 => 8 * 8,
        _ => 0,
    };
    if frame.len() < l3 + l4 {
        return None;
    }
    let port = |off| if l4 > 0 { frame.read_uint(l3 + off, 16) } else { Some(0) };
    Some(FrameFields {
        src: frame.read_uint(ETH_BITS + 12 * 8, 32)?,
        dst: frame.read_uint(ETH_BITS + 16 * 8, 32)?,
        sport: port(0)?,
        dport: port(16)?,
        payload_at: l3 + l4,
    })
}

/// Whether the sampler's parser accepts `frame` (judged independently of
/// the parser implementation).
pub fn sampler_accepts(frame: &BitString) -> bool {
    frame_fields(frame).is_some()
}

fn special_frame(p_in: &BitString, count: u32) -> Option<BitString> {
    let f = frame_fields(p_in)?;
    let mut out = BitString::new();
    out.push_uint(0x9999, 16);
    out.push_uint(f.src, 32);
    out.push_uint(f.dst, 32);
    out.push_uint(f.sport, 16);
    out.push_uint(f.dport, 16);
    out.push_uint(count as u64, 32);
    out.append(&p_in.suffix(f.payload_at)?);
    Some(out)
}

/// The output for an unsampled packet: the frame itself at the forward port.
pub fn normal_packet_relation(cfg: &SamplerConfig, p_in: &BitString, p_out: &Transmitted) -> bool {
    p_out.port == cfg.forward_port && p_out.frame == *p_in
}

/// The monitor copy of the packet sampled at counter value `count`: the
/// sample header (copied addresses and ports, the count) then the payload.
pub fn special_packet_relation(cfg: &SamplerConfig, count: u32, p_in: &BitString, p_out: &Transmitted) -> bool {
    p_out.port == cfg.monitor_port && special_frame(p_in, count).as_ref() == Some(&p_out.frame)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Expected {
    /// Position in the input sequence.
    pub input: usize,
    /// Counter value after this input, for special outputs.
    pub count: Option<u32>,
    pub packet: Transmitted,
}

/// Every output the sampler may produce for `q_input` (in processing
/// order) starting from counter `n`: per accepted input its normal output,
/// followed by the special one when the counter reaches a multiple of the
/// modulus. Rejected inputs produce nothing and do not count.
pub fn sampler_expected(cfg: &SamplerConfig, n: u32, q_input: &[BitString]) -> Vec<Expected> {
    let mut out = Vec::new();
    let mut c = n;
    for (k, p) in q_input.iter().enumerate() {
        if !sampler_accepts(p) {
            continue;
        }
        c = c.wrapping_add(1);
        out.push(Expected {
            input: k,
            count: None,
            packet: Transmitted {
                port: cfg.forward_port,
                frame: p.clone(),
            },
        });
        if c.is_multiple_of(cfg.modulus) {
            out.push(Expected {
                input: k,
                count: Some(c),
                packet: Transmitted {
                    port: cfg.monitor_port,
                    frame: special_frame(p, c).expect("accepted frame has fields"),
                },
            });
        }
    }
    out
}

fn related(cfg: &SamplerConfig, q_input: &[BitString], e: &Expected, o: &Transmitted) -> bool {
    let p_in = &q_input[e.input];
    match e.count {
        None => normal_packet_relation(cfg, p_in, o),
        Some(c) => special_packet_relation(cfg, c, p_in, o),
    }
}

/// How outputs must sit inside the expected sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Containment {
    /// In order.
    Subsequence,
    /// In any order, each expected packet used at most once.
    Submultiset,
}

/// Greedy order-preserving match; returns the first output that cannot be
/// placed. Taking the earliest related position is never worse than any
/// later one, so the greedy answer is exact.
pub fn greedy_subsequence<A, B>(full: &[A], sub: &[B], rel: impl Fn(&A, &B) -> bool) -> Result<(), usize> {
    let mut j = 0;
    for (k, b) in sub.iter().enumerate() {
        while j < full.len() && !rel(&full[j], b) {
            j += 1;
        }
        if j == full.len() {
            return Err(k);
        }
        j += 1;
    }
    Ok(())
}

/// Dynamic-programming subsequence test, for cross-checking the greedy one.
pub fn dp_subsequence<A, B>(full: &[A], sub: &[B], rel: impl Fn(&A, &B) -> bool) -> bool {
    let m = sub.len();
    // ok[j]: sub[..j] embeds into the prefix of `full` scanned so far
    let mut ok = vec![false; m + 1];
    ok[0] = true;
    for a in full {
        for j in (0..m).rev() {
            if ok[j] && rel(a, &sub[j]) {
                ok[j + 1] = true;
            }
        }
    }
    ok[m]
}

/// Checks the sampler's outputs against its inputs.
pub fn sampler_spec_check(
    cfg: &SamplerConfig,
    n: u32,
    q_input: &[BitString],
    q_output: &[Transmitted],
    mode: Containment,
) -> Verdict {
    let expected = sampler_expected(cfg, n, q_input);
    match mode {
        Containment::Subsequence => match greedy_subsequence(&expected, q_output, |e, o| related(cfg, q_input, e, o)) {
            Ok(()) => Verdict::pass(),
            Err(k) => Verdict::fail(
                Clause::SamplerOutput,
                json!({"mode": "subsequence", "output_index": k, "output": q_output[k]}),
            ),
        },
        Containment::Submultiset => {
            let mut budget: HashMap<&Transmitted, usize> = HashMap::new();
            for e in &expected {
                *budget.entry(&e.packet).or_default() += 1;
            }
            for (k, o) in q_output.iter().enumerate() {
                match budget.get_mut(o) {
                    Some(c) if *c > 0 => *c -= 1,
                    _ => {
                        return Verdict::fail(
                            Clause::SamplerOutput,
                            json!({"mode": "submultiset", "output_index": k, "output": o}),
                        )
                    }
                }
            }
            Verdict::pass()
        }
    }
}

/// How many of the 32-bit counter values `n+1, ..., n+k` (wrapping) are
/// multiples of `m`.
fn wrapped_multiples(n: u32, k: u64, m: u32) -> u64 {
    const CYCLE: u64 = 1 << 32;
    let m = m as u64;
    let per_cycle = (CYCLE - 1) / m + 1;
    // values in [0, x] of the unwrapped line whose residue is a multiple
    let upto = |x: u64| (x / CYCLE) * per_cycle + (x % CYCLE) / m + 1;
    upto(n as u64 + k) - upto(n as u64)
}

/// With nothing dropped, every accepted input yields its normal output and
/// every counter multiple a special one.
pub fn sampler_liveness_check(cfg: &SamplerConfig, n: u32, q_input: &[BitString], q_output: &[Transmitted]) -> Verdict {
    let accepted = q_input.iter().filter(|p| sampler_accepts(p)).count() as u64;
    let want = accepted + wrapped_multiples(n, accepted, cfg.modulus);
    if q_output.len() as u64 != want {
        return Verdict::fail(
            Clause::SamplerLiveness,
            json!({"accepted_inputs": accepted, "expected_outputs": want, "outputs": q_output.len()}),
        );
    }
    let v = sampler_spec_check(cfg, n, q_input, q_output, Containment::Submultiset);
    if v.pass {
        v
    } else {
        Verdict::fail(Clause::SamplerLiveness, v.witness)
    }
}

/// Ingress input 0, admit everything.
struct Forced;

impl Oracle for Forced {
    fn step_kind(&mut self, _w: &World) -> StepKind {
        StepKind::Ingress
    }
    fn input_index(&mut self, _len: usize) -> usize {
        0
    }
    fn admitted(&mut self, ms: &[EgressMeta], _mandatory: &[bool]) -> Vec<bool> {
        vec![true; ms.len()]
    }
    fn sched_index(&mut self, _q: &[EgressEntry]) -> usize {
        0
    }
}

/// Feeds `p_bad` (arriving on `port`) to the ingress of `w` and checks
/// that nothing but `q_input` and the parser state changed.
pub fn langsec_check(cfg: &SwitchConfig, w: &World, port: u16, p_bad: &BitString) -> Result<Verdict, CheckError> {
    if w.queues.p_recirc.is_some() {
        return Err(CheckError::PreconditionUnmet(
            "recirculation register is occupied".into(),
        ));
    }
    if pktgen_tick(&cfg.pktgen, w.state.t, &w.state.s_g).0.is_some() {
        return Err(CheckError::PreconditionUnmet("the generator fires on this tick".into()));
    }
    let stream = ingress_stream(port, p_bad);
    if cfg.app.ingress.parser.parse(&stream, &w.state.s_i.parser).0.is_some() {
        return Err(CheckError::PreconditionUnmet(
            "the ingress parser accepts the packet".into(),
        ));
    }
    let mut pre = w.clone();
    pre.queues.q_input.insert(
        0,
        Arrival {
            port,
            frame: p_bad.clone(),
        },
    );
    let mut post = pre.clone();
    let _ = ingress_step(
        cfg,
        &mut post,
        &mut Forced,
        &mut Decisions::default(),
        &mut Witness::default(),
    );

    let (a, b) = (&pre.queues, &post.queues);
    if a.p_recirc != b.p_recirc || a.q_mirror != b.q_mirror || a.q_egress != b.q_egress || a.q_output != b.q_output {
        return Ok(Verdict::fail(
            Clause::LangSecQueues,
            json!({
                "q_egress": [a.q_egress.len(), b.q_egress.len()],
                "q_output": [a.q_output.len(), b.q_output.len()],
                "q_mirror": [a.q_mirror.len(), b.q_mirror.len()],
            }),
        ));
    }
    let (s, s2) = (&pre.state, &post.state);
    let parts = |s: &crate::switch::SwitchState| {
        [
            digest_of(&s.s_g),
            digest_of(&s.s_i.control),
            digest_of(&s.s_i.deparser),
            digest_of(&s.s_e),
        ]
    };
    let (d1, d2) = (parts(s), parts(s2));
    if d1 != d2 {
        let names = ["s_g", "s_ic", "s_id", "s_e"];
        let changed: Vec<_> = names
            .iter()
            .zip(d1.iter().zip(&d2))
            .filter(|(_, (x, y))| x != y)
            .map(|(n, _)| *n)
            .collect();
        return Ok(Verdict::fail(Clause::LangSecState, json!({"changed": changed})));
    }
    Ok(Verdict::pass())
}

/// Runs `parser` on `p` from two states and compares what it emits.
pub fn parser_oblivious_check(
    parser: &dyn IngressParser,
    p: &BitString,
    s1: &ComponentState,
    s2: &ComponentState,
) -> Verdict {
    let (r1, _) = parser.parse(p, s1);
    let (r2, _) = parser.parse(p, s2);
    if r1 == r2 {
        Verdict::pass()
    } else {
        let show = |r: &Option<(crate::pipeline::ParsedData, BitString)>| {
            r.as_ref().map(|(d, l)| json!({"data": d, "payload": l}))
        };
        Verdict::fail(
            Clause::ParserOblivious,
            json!({"s1": s1, "s2": s2, "out1": show(&r1), "out2": show(&r2)}),
        )
    }
}

/// Consecutive ingress steps that carried a packet are at most
/// `gap_limit` ticks apart.
pub fn dense_flow_check(steps: &[TraceStep], gap_limit: u64) -> Result<Verdict, CheckError> {
    let mut last: Option<u64> = None;
    for s in steps {
        if s.kind != StepKind::Ingress || s.fault.is_some() || s.witness.p_i.is_none() {
            continue;
        }
        let t = s
            .delta
            .t
            .and_then(|t| t.checked_sub(1))
            .ok_or_else(|| CheckError::MalformedTrace {
                step: s.step,
                reason: "ingress step without a time update".into(),
            })?;
        if let Some(prev) = last {
            if t - prev > gap_limit {
                return Ok(Verdict::fail(
                    Clause::DenseFlow,
                    json!({"previous_t": prev, "t": t, "gap": t - prev, "gap_limit": gap_limit}),
                )
                .at_step(s.step));
            }
        }
        last = Some(t);
    }
    Ok(Verdict::pass())
}

/// Where a transmitted packet came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// Index into the initial `q_input`.
    Input(usize),
    /// Step at which the generator emitted it.
    Generated(u64),
}

/// Traces every packet appended to `q_output` back to its origin.
pub fn lineage_check(header: &TraceHeader, steps: &[TraceStep]) -> Result<Vec<Origin>, Verdict> {
    let fail = |s: &TraceStep, why: &str| Verdict::fail(Clause::Lineage, json!({"reason": why})).at_step(s.step);
    let mut inputs: Vec<usize> = (0..header.initial.queues.q_input.len()).collect();
    let mut egress: Vec<Origin> = Vec::new();
    if !header.initial.queues.q_egress.is_empty() || header.initial.queues.p_recirc.is_some() {
        return Err(Verdict::fail(
            Clause::Lineage,
            json!({"reason": "packets in flight at the start"}),
        ));
    }
    let mut recirc: Option<Origin> = None;
    let mut outputs = Vec::new();
    for s in steps.iter().filter(|s| s.fault.is_none()) {
        let d = &s.delta;
        match s.kind {
            StepKind::Ingress => {
                let origin = match (&s.witness.p_g, &d.q_input) {
                    (Some(_), None) => Some(recirc.take().unwrap_or(Origin::Generated(s.step))),
                    (None, Some(QueueEdit::Remove { index })) if *index < inputs.len() => {
                        Some(Origin::Input(inputs.remove(*index)))
                    }
                    (None, None) => None,
                    _ => return Err(fail(s, "unattributable q_input edit")),
                };
                match (&d.q_egress, origin) {
                    (None, _) => {}
                    (Some(QueueEdit::Append { items }), Some(o)) => egress.extend(std::iter::repeat_n(o, items.len())),
                    _ => return Err(fail(s, "unattributable q_egress edit")),
                }
            }
            StepKind::Egress => {
                let Some(QueueEdit::Remove { index }) = &d.q_egress else {
                    return Err(fail(s, "egress step without a removal"));
                };
                if *index >= egress.len() {
                    return Err(fail(s, "removal beyond q_egress"));
                }
                let o = egress.remove(*index);
                match (&d.q_output, &d.p_recirc) {
                    (Some(QueueEdit::Append { items }), None) if items.len() == 1 => outputs.push(o),
                    (None, Some(RecircEdit::Set(_))) => recirc = Some(o),
                    _ => return Err(fail(s, "unattributable output")),
                }
            }
        }
    }
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::sampler::special_packet;
    use crate::format::match_packet;
    use crate::headers::frame_format;
    use crate::packets::{tcp_frame, udp_frame, FrameSpec, L4};
    use proptest::prelude::*;

    fn cfg() -> SamplerConfig {
        SamplerConfig::default()
    }

    proptest! {
        #[test]
        fn wrapped_multiples_counts_directly(n in any::<u32>(), k in 0u64..300, m in 1u32..1100) {
            let near_wrap = n | 0xFFFF_FF00;
            for n in [n, near_wrap] {
                let direct = (1..=k).filter(|i| n.wrapping_add(*i as u32) % m == 0).count() as u64;
                prop_assert_eq!(wrapped_multiples(n, k, m), direct);
            }
        }
    }

    #[test]
    fn empty_streams_pass() {
        assert!(sampler_spec_check(&cfg(), 5, &[], &[], Containment::Subsequence).pass);
    }

    #[test]
    fn sampled_packet_expects_normal_then_special() {
        let p = tcp_frame(1, 2, 3, 4, b"data");
        let e = sampler_expected(&cfg(), 1023, std::slice::from_ref(&p));
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].count, None);
        assert_eq!(e[1].count, Some(1024));
        let outs: Vec<_> = e.iter().map(|e| e.packet.clone()).collect();
        assert!(sampler_spec_check(&cfg(), 1023, std::slice::from_ref(&p), &outs, Containment::Subsequence).pass);
        let rev: Vec<_> = outs.iter().rev().cloned().collect();
        assert!(!sampler_spec_check(&cfg(), 1023, std::slice::from_ref(&p), &rev, Containment::Subsequence).pass);
        assert!(sampler_spec_check(&cfg(), 1023, &[p], &rev, Containment::Submultiset).pass);
    }

    #[test]
    fn special_at_wrong_position_fails() {
        let ps: Vec<_> = (0..3).map(|i| udp_frame(i, 9, 1, 2, b"x")).collect();
        // n = 1022: the second input is the sampled one
        let bogus = Transmitted {
            port: 2,
            frame: special_frame(&ps[0], 1023).unwrap(),
        };
        let v = sampler_spec_check(&cfg(), 1022, &ps, &[bogus], Containment::Subsequence);
        assert_eq!(v.violated_clause, Some(Clause::SamplerOutput));
        let good = Transmitted {
            port: 2,
            frame: special_frame(&ps[1], 1024).unwrap(),
        };
        assert!(sampler_spec_check(&cfg(), 1022, &ps, &[good], Containment::Subsequence).pass);
    }

    #[test]
    fn normal_relation() {
        let p = tcp_frame(1, 2, 3, 4, b"abcd");
        assert!(normal_packet_relation(
            &cfg(),
            &p,
            &Transmitted {
                port: 1,
                frame: p.clone()
            }
        ));
        let mut q = p.clone();
        q.flip_bit(p.len() - 1);
        assert!(!normal_packet_relation(&cfg(), &p, &Transmitted { port: 1, frame: q }));
        assert!(!normal_packet_relation(
            &cfg(),
            &p,
            &Transmitted {
                port: 2,
                frame: p.clone()
            }
        ));
    }

    #[test]
    fn special_relation_agrees_with_app() {
        for p in [
            tcp_frame(0xA, 0xB, 80, 443, b"zz"),
            udp_frame(7, 8, 53, 5353, b""),
            FrameSpec::new(1, 2, L4::Other(50), b"esp").encode(),
        ] {
            let out = Transmitted {
                port: 2,
                frame: special_packet(&p, 2048).unwrap(),
            };
            assert!(special_packet_relation(&cfg(), 2048, &p, &out));
            assert!(!special_packet_relation(&cfg(), 1024, &p, &out));
        }
    }

    #[test]
    fn wrapping_counter() {
        let p = tcp_frame(1, 2, 3, 4, b"");
        let e = sampler_expected(&cfg(), u32::MAX, &[p]);
        assert_eq!(e[1].count, Some(0));
    }

    #[test]
    fn liveness_counts() {
        let ps: Vec<_> = (0..5).map(|i| tcp_frame(i, 0, 0, 0, b"")).collect();
        let outs: Vec<_> = sampler_expected(&cfg(), 1022, &ps)
            .into_iter()
            .map(|e| e.packet)
            .collect();
        assert_eq!(outs.len(), 6);
        assert!(sampler_liveness_check(&cfg(), 1022, &ps, &outs).pass);
        let v = sampler_liveness_check(&cfg(), 1022, &ps, &outs[1..]);
        assert_eq!(v.violated_clause, Some(Clause::SamplerLiveness));
    }

    #[test]
    fn dense_flow_gaps() {
        let mk = |step, t: u64, packet: bool| TraceStep {
            step,
            kind: StepKind::Ingress,
            decisions: Decisions::default(),
            witness: Witness {
                p_i: packet.then(|| Arrival {
                    port: 0,
                    frame: BitString::new(),
                }),
                ..Default::default()
            },
            delta: crate::switch::Delta {
                t: Some(t + 1),
                ..Default::default()
            },
            pre: String::new(),
            post: String::new(),
            fault: None,
        };
        let steps = vec![mk(0, 0, true), mk(1, 5, false), mk(2, 10, true), mk(3, 21, true)];
        assert!(dense_flow_check(&steps[..3], 10).unwrap().pass);
        let v = dense_flow_check(&steps, 10).unwrap();
        assert_eq!((v.violated_clause, v.step), (Some(Clause::DenseFlow), Some(3)));
    }

    proptest! {
        #[test]
        fn fixed_offset_decoder_matches_format(bytes in proptest::collection::vec(any::<u8>(), 0..80), proto in prop_oneof![Just(6u8), Just(17u8), any::<u8>()]) {
            let mut bytes = bytes;
            if bytes.len() > 23 {
                bytes[23] = proto;
            }
            let p = BitString::from_bytes(&bytes);
            let by_format = match_packet(&p, &frame_format()).unwrap().is_match();
            prop_assert_eq!(sampler_accepts(&p), by_format);
        }

        #[test]
        fn greedy_agrees_with_dp(full in proptest::collection::vec(0u8..4, 0..12), sub in proptest::collection::vec(0u8..4, 0..6)) {
            let rel = |a: &u8, b: &u8| a % 2 == b % 2 && a <= b;
            prop_assert_eq!(greedy_subsequence(&full, &sub, rel).is_ok(), dp_subsequence(&full, &sub, rel));
        }
    }
}
