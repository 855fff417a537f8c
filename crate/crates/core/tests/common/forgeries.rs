//! Hand-forged steps, each breaking exactly one clause.

use super::{firewall_stream, random_stream, rng};

use swmodel::apps::{identity_app, sampler_app, IdentityConfig, SamplerConfig};
use swmodel::checker::{check_step, reseal, Clause};
use swmodel::engines::{
    Arrival, CopySource, EgressMeta, L1Node, MirrorMeta, PktGenConfig, PktGenState, QacPolicy, ReadyPorts, Transmitted,
};
use swmodel::packets::tcp_frame;
use swmodel::pipeline::{ComponentState, StateTriple, TmMeta};
use swmodel::switch::{
    process_packet, IngressResult, QueueEdit, RandomOracle, RecircEdit, StepKind, SwitchConfig, TraceStep, World,
};
use swmodel::BitString;

fn sampler() -> (SwitchConfig, World) {
    let sc = SamplerConfig {
        sample_group_id: 3,
        forward_port: 1,
        monitor_port: 9,
        forward_rid: 1,
        monitor_rid: 2,
        modulus: 2,
        initial_counter: 0,
    };
    let mut cfg = SwitchConfig::from_app(sampler_app(&sc).unwrap());
    cfg.qac = QacPolicy::AlwaysReady {
        ready_ports: ReadyPorts::All,
    };
    cfg.pktgen = PktGenConfig::periodic(7, tcp_frame(1, 2, 3, 4, b"gen"), 2);
    let mut r = rng(1);
    let mut input = random_stream(&mut r, 60, &[0, 1, 2]);
    input.extend(firewall_stream(&mut r, 40, 0, 1));
    let w = World::initial(&cfg, input);
    (cfg, w)
}

fn recirculating() -> (SwitchConfig, World) {
    let mut mc = swmodel::engines::McConfig::default();
    mc.groups.insert(
        1,
        vec![
            L1Node {
                dev_port_list: vec![3],
                rid: 1,
                ..Default::default()
            },
            L1Node {
                dev_port_list: vec![4],
                ..Default::default()
            },
        ],
    );
    let ic = IdentityConfig {
        tm: TmMeta {
            mcast_grp_a: 1,
            ..Default::default()
        },
        recirc_rid: 1,
        recirc_out: Some(5),
        mc,
        ..Default::default()
    };
    let cfg = SwitchConfig::from_app(identity_app(&ic).unwrap());
    let input = (0..20u8)
        .map(|i| Arrival {
            port: 0,
            frame: BitString::from_bytes(&[i; 8]),
        })
        .collect();
    let w = World::initial(&cfg, input);
    (cfg, w)
}

/// First genuine step (under a seeded random oracle) whose pre-world and
/// record satisfy `pred`.
fn find(
    setup: fn() -> (SwitchConfig, World),
    pred: impl Fn(&World, &TraceStep) -> bool,
) -> (SwitchConfig, World, TraceStep) {
    let (cfg, mut w) = setup();
    let mut o = RandomOracle::new(5);
    for i in 0..5000 {
        let pre = w.clone();
        let s = process_packet(&cfg, &mut w, &mut o, i);
        assert!(s.fault.is_none());
        assert!(check_step(&cfg, &pre, &s).pass);
        if pred(&pre, &s) {
            return (cfg, pre, s);
        }
    }
    panic!("no matching step");
}

fn forge(found: (SwitchConfig, World, TraceStep), edit: impl FnOnce(&World, &mut TraceStep)) -> Option<Clause> {
    let (cfg, pre, mut s) = found;
    edit(&pre, &mut s);
    reseal(&pre, &mut s).unwrap();
    let v = check_step(&cfg, &pre, &s);
    assert!(!v.pass);
    assert_eq!(v.step, Some(s.step));
    v.violated_clause
}

fn is_ingress(s: &TraceStep) -> bool {
    s.kind == StepKind::Ingress
}

fn accepted(s: &TraceStep) -> bool {
    matches!(s.witness.ingress, Some(IngressResult::Accepted(_)))
        && s.witness.m_repl.as_ref().is_some_and(|m| !m.is_empty())
}

fn consumed(s: &TraceStep) -> bool {
    is_ingress(s) && s.witness.p_g.is_none() && s.witness.p_i.is_some()
}

fn rejected(s: &TraceStep) -> bool {
    matches!(s.witness.ingress, Some(IngressResult::Rejected))
}

fn idle(s: &TraceStep) -> bool {
    is_ingress(s) && s.witness.p_i.is_none()
}

fn transmit(s: &TraceStep) -> bool {
    s.kind == StepKind::Egress && s.delta.q_output.is_some()
}

fn other_control() -> StateTriple {
    StateTriple {
        control: ComponentState::Counter(u64::MAX),
        ..Default::default()
    }
}

fn stray_entry() -> (EgressMeta, BitString) {
    (
        EgressMeta {
            egress_port: 500,
            rid: 0,
            source: CopySource::Unicast,
        },
        BitString::from_bytes(&[1]),
    )
}

fn stray_arrival() -> Arrival {
    Arrival {
        port: 7,
        frame: BitString::from_bytes(&[0xAB]),
    }
}

fn fault_with_nonempty_delta() -> Option<Clause> {
    forge(find(sampler, |_, s| is_ingress(s)), |_, s| {
        s.fault = Some("made up".into())
    })
}

fn ingress_skips_a_tick() -> Option<Clause> {
    forge(find(sampler, |_, s| is_ingress(s)), |w, s| {
        s.delta.t = Some(w.state.t + 2)
    })
}

fn ingress_touches_egress_state() -> Option<Clause> {
    forge(find(sampler, |_, s| is_ingress(s)), |_, s| {
        s.delta.s_e = Some(other_control())
    })
}

fn ingress_transmits() -> Option<Clause> {
    forge(find(sampler, |_, s| is_ingress(s)), |_, s| {
        s.delta.q_output = Some(QueueEdit::Append {
            items: vec![Transmitted {
                port: 1,
                frame: BitString::from_bytes(&[1]),
            }],
        })
    })
}

fn recirculated_packet_replaced() -> Option<Clause> {
    forge(
        find(recirculating, |w, s| is_ingress(s) && w.queues.p_recirc.is_some()),
        |_, s| {
            s.witness.p_g = Some(stray_arrival());
            s.witness.p_i = Some(stray_arrival());
        },
    )
}

fn recirculation_register_not_drained() -> Option<Clause> {
    forge(
        find(recirculating, |w, s| is_ingress(s) && w.queues.p_recirc.is_some()),
        |_, s| s.delta.p_recirc = None,
    )
}

fn generator_packet_invented() -> Option<Clause> {
    forge(find(sampler, |_, s| consumed(s)), |_, s| {
        s.witness.p_g = Some(stray_arrival());
    })
}

fn generator_state_skewed() -> Option<Clause> {
    forge(find(sampler, |_, s| is_ingress(s)), |_, s| {
        s.delta.s_g = Some(PktGenState {
            next_fire: 123_456,
            ..Default::default()
        })
    })
}

fn generated_packet_also_consumes_input() -> Option<Clause> {
    let found = find(sampler, |w, s| {
        is_ingress(s) && s.witness.p_g.is_some() && !w.queues.q_input.is_empty()
    });
    forge(found, |_, s| s.delta.q_input = Some(QueueEdit::Remove { index: 0 }))
}

fn input_not_removed() -> Option<Clause> {
    forge(find(sampler, |_, s| consumed(s)), |_, s| s.delta.q_input = None)
}

fn input_removed_from_the_wrong_place() -> Option<Clause> {
    let found = find(sampler, |w, s| {
        consumed(s) && w.queues.q_input.len() > 1 && w.queues.q_input.last() != s.witness.p_i.as_ref()
    });
    forge(found, |w, s| {
        s.delta.q_input = Some(QueueEdit::Remove {
            index: w.queues.q_input.len() - 1,
        })
    })
}

fn packet_from_nowhere() -> Option<Clause> {
    forge(find(sampler, |_, s| idle(s)), |_, s| {
        s.delta.q_input = Some(QueueEdit::Append {
            items: vec![stray_arrival()],
        })
    })
}

fn reject_changes_control_state() -> Option<Clause> {
    forge(find(sampler, |_, s| rejected(s)), |_, s| {
        s.delta.s_i = Some(other_control())
    })
}

fn reject_enqueues() -> Option<Clause> {
    forge(find(sampler, |_, s| rejected(s)), |_, s| {
        s.delta.q_egress = Some(QueueEdit::Append {
            items: vec![stray_entry()],
        })
    })
}

fn reject_runs_replication() -> Option<Clause> {
    forge(find(sampler, |_, s| rejected(s)), |_, s| {
        s.witness.m_repl = Some(vec![])
    })
}

fn idle_step_runs_pipeline() -> Option<Clause> {
    forge(find(sampler, |_, s| idle(s)), |_, s| {
        s.witness.ingress = Some(IngressResult::Rejected)
    })
}

fn pipeline_output_altered() -> Option<Clause> {
    forge(find(sampler, |_, s| accepted(s)), |_, s| {
        if let Some(IngressResult::Accepted(out)) = &mut s.witness.ingress {
            out.packet.flip_bit(0);
        }
    })
}

fn pipeline_state_altered() -> Option<Clause> {
    forge(find(sampler, |_, s| accepted(s)), |_, s| {
        s.delta.s_i = Some(other_control())
    })
}

fn accepted_packet_recorded_as_reject() -> Option<Clause> {
    forge(find(sampler, |_, s| accepted(s)), |_, s| {
        s.witness.ingress = Some(IngressResult::Rejected);
        s.witness.m_merge = None;
        s.witness.m_repl = None;
        s.delta.q_egress = None;
        s.delta.s_i = None;
    })
}

fn mirror_session_invented() -> Option<Clause> {
    forge(find(sampler, |_, s| accepted(s)), |_, s| {
        s.witness.m_mirror = Some(MirrorMeta {
            session: 1,
            egress_port: 3,
        })
    })
}

fn merge_rewrites_metadata() -> Option<Clause> {
    forge(find(sampler, |_, s| accepted(s)), |_, s| {
        if let Some(m) = &mut s.witness.m_merge {
            m.drop = !m.drop;
        }
    })
}

fn extra_replica() -> Option<Clause> {
    forge(find(sampler, |_, s| accepted(s)), |_, s| {
        s.witness.m_repl.as_mut().unwrap().push(stray_entry().0);
    })
}

fn existing_queue_rewritten() -> Option<Clause> {
    let found = find(sampler, |w, s| accepted(s) && !w.queues.q_egress.is_empty());
    forge(found, |w, s| {
        let mut items = w.queues.q_egress[1..].to_vec();
        if let Some(QueueEdit::Append { items: fresh }) = &s.delta.q_egress {
            items.extend(fresh.iter().cloned());
        }
        s.delta.q_egress = Some(QueueEdit::Replace { items });
    })
}

fn copy_not_replicated() -> Option<Clause> {
    forge(find(sampler, |_, s| accepted(s)), |_, s| {
        s.delta.q_egress = Some(QueueEdit::Append {
            items: vec![stray_entry()],
        })
    })
}

fn copies_reordered() -> Option<Clause> {
    let found = find(sampler, |_, s| {
        accepted(s) && s.witness.m_repl.as_ref().unwrap().len() > 1
    });
    forge(found, |_, s| {
        if let Some(QueueEdit::Append { items }) = &mut s.delta.q_egress {
            items.reverse();
        }
    })
}

fn ready_port_copy_dropped() -> Option<Clause> {
    forge(find(sampler, |_, s| accepted(s)), |_, s| s.delta.q_egress = None)
}

fn egress_advances_time() -> Option<Clause> {
    forge(find(sampler, |_, s| transmit(s)), |w, s| {
        s.delta.t = Some(w.state.t + 1)
    })
}

fn egress_touches_generator() -> Option<Clause> {
    forge(find(sampler, |_, s| transmit(s)), |_, s| {
        s.delta.s_g = Some(PktGenState {
            next_fire: 99,
            ..Default::default()
        })
    })
}

fn egress_touches_ingress_state() -> Option<Clause> {
    forge(find(sampler, |_, s| transmit(s)), |_, s| {
        s.delta.s_i = Some(other_control())
    })
}

fn egress_consumes_input() -> Option<Clause> {
    forge(
        find(sampler, |w, s| transmit(s) && !w.queues.q_input.is_empty()),
        |_, s| s.delta.q_input = Some(QueueEdit::Remove { index: 0 }),
    )
}

fn egress_while_register_full() -> Option<Clause> {
    let (cfg, mut pre, mut s) = find(sampler, |_, s| transmit(s));
    pre.queues.p_recirc = Some(BitString::from_bytes(&[5]));
    reseal(&pre, &mut s).unwrap();
    check_step(&cfg, &pre, &s).violated_clause
}

fn egress_touches_mirror_buffer() -> Option<Clause> {
    forge(find(sampler, |_, s| transmit(s)), |_, s| {
        s.delta.q_mirror = Some(QueueEdit::Append {
            items: vec![stray_entry()],
        })
    })
}

fn scheduled_entry_not_removed() -> Option<Clause> {
    forge(find(sampler, |_, s| transmit(s)), |_, s| s.delta.q_egress = None)
}

fn scheduled_entry_invented() -> Option<Clause> {
    forge(find(sampler, |_, s| transmit(s)), |_, s| {
        s.witness.scheduled = Some(stray_entry())
    })
}

fn egress_output_altered() -> Option<Clause> {
    forge(find(sampler, |_, s| transmit(s)), |_, s| {
        if let Some((_, p)) = &mut s.witness.egress {
            p.flip_bit(3);
        }
    })
}

fn egress_state_altered() -> Option<Clause> {
    forge(find(sampler, |_, s| transmit(s)), |_, s| {
        s.delta.s_e = Some(other_control())
    })
}

fn transmitted_on_wrong_port() -> Option<Clause> {
    forge(find(sampler, |_, s| transmit(s)), |_, s| {
        if let Some(QueueEdit::Append { items }) = &mut s.delta.q_output {
            items[0].port += 1;
        }
    })
}

fn transmitted_twice() -> Option<Clause> {
    forge(find(sampler, |_, s| transmit(s)), |_, s| {
        if let Some(QueueEdit::Append { items }) = &mut s.delta.q_output {
            items.push(items[0].clone());
        }
    })
}

fn transmit_also_recirculates() -> Option<Clause> {
    forge(find(sampler, |_, s| transmit(s)), |_, s| {
        s.delta.p_recirc = Some(RecircEdit::Set(BitString::from_bytes(&[1])))
    })
}

fn recirculated_packet_lost() -> Option<Clause> {
    let found = find(recirculating, |_, s| {
        s.kind == StepKind::Egress && s.delta.p_recirc.is_some()
    });
    forge(found, |_, s| s.delta.p_recirc = None)
}

fn recirculated_packet_also_transmitted() -> Option<Clause> {
    let found = find(recirculating, |_, s| {
        s.kind == StepKind::Egress && s.delta.p_recirc.is_some()
    });
    forge(found, |_, s| {
        let (_, p) = s.witness.egress.clone().unwrap();
        s.delta.q_output = Some(QueueEdit::Append {
            items: vec![Transmitted { port: 3, frame: p }],
        })
    })
}

pub type Case = (&'static str, Clause, fn() -> Option<Clause>);

pub const CASES: &[Case] = &[
    (
        "fault_with_nonempty_delta",
        Clause::FaultFrame,
        fault_with_nonempty_delta,
    ),
    ("ingress_skips_a_tick", Clause::IngressTime, ingress_skips_a_tick),
    (
        "ingress_touches_egress_state",
        Clause::IngressEgressStateFrame,
        ingress_touches_egress_state,
    ),
    ("ingress_transmits", Clause::IngressOutputFrame, ingress_transmits),
    (
        "recirculated_packet_replaced",
        Clause::PktGenRecirc,
        recirculated_packet_replaced,
    ),
    (
        "recirculation_register_not_drained",
        Clause::PktGenRecirc,
        recirculation_register_not_drained,
    ),
    (
        "generator_packet_invented",
        Clause::PktGenGenerate,
        generator_packet_invented,
    ),
    ("generator_state_skewed", Clause::PktGenGenerate, generator_state_skewed),
    (
        "generated_packet_also_consumes_input",
        Clause::InputGenerator,
        generated_packet_also_consumes_input,
    ),
    ("input_not_removed", Clause::InputSplit, input_not_removed),
    (
        "input_removed_from_the_wrong_place",
        Clause::InputSplit,
        input_removed_from_the_wrong_place,
    ),
    ("packet_from_nowhere", Clause::InputEmpty, packet_from_nowhere),
    (
        "reject_changes_control_state",
        Clause::RejectIsolation,
        reject_changes_control_state,
    ),
    ("reject_enqueues", Clause::NoOutputFrame, reject_enqueues),
    (
        "reject_runs_replication",
        Clause::NoOutputFrame,
        reject_runs_replication,
    ),
    ("idle_step_runs_pipeline", Clause::IdleFrame, idle_step_runs_pipeline),
    (
        "pipeline_output_altered",
        Clause::IngressPipeline,
        pipeline_output_altered,
    ),
    (
        "pipeline_state_altered",
        Clause::IngressPipeline,
        pipeline_state_altered,
    ),
    (
        "accepted_packet_recorded_as_reject",
        Clause::IngressPipeline,
        accepted_packet_recorded_as_reject,
    ),
    (
        "mirror_session_invented",
        Clause::EmptyMirrorTable,
        mirror_session_invented,
    ),
    (
        "merge_rewrites_metadata",
        Clause::EmptyMirrorMerge,
        merge_rewrites_metadata,
    ),
    ("extra_replica", Clause::Replication, extra_replica),
    ("existing_queue_rewritten", Clause::QacPrefix, existing_queue_rewritten),
    ("copy_not_replicated", Clause::QacSubsequence, copy_not_replicated),
    ("copies_reordered", Clause::QacSubsequence, copies_reordered),
    (
        "ready_port_copy_dropped",
        Clause::QacAlwaysReady,
        ready_port_copy_dropped,
    ),
    ("egress_advances_time", Clause::EgressTimeFrame, egress_advances_time),
    (
        "egress_touches_generator",
        Clause::EgressGenFrame,
        egress_touches_generator,
    ),
    (
        "egress_touches_ingress_state",
        Clause::EgressIngressStateFrame,
        egress_touches_ingress_state,
    ),
    ("egress_consumes_input", Clause::EgressInputFrame, egress_consumes_input),
    (
        "egress_while_register_full",
        Clause::EgressRecircInvalid,
        egress_while_register_full,
    ),
    (
        "egress_touches_mirror_buffer",
        Clause::EgressMirrorFrame,
        egress_touches_mirror_buffer,
    ),
    (
        "scheduled_entry_not_removed",
        Clause::SchedulerSplit,
        scheduled_entry_not_removed,
    ),
    (
        "scheduled_entry_invented",
        Clause::SchedulerSplit,
        scheduled_entry_invented,
    ),
    ("egress_output_altered", Clause::EgressPipeline, egress_output_altered),
    ("egress_state_altered", Clause::EgressPipeline, egress_state_altered),
    (
        "transmitted_on_wrong_port",
        Clause::OutputTransmit,
        transmitted_on_wrong_port,
    ),
    ("transmitted_twice", Clause::OutputTransmit, transmitted_twice),
    (
        "transmit_also_recirculates",
        Clause::OutputTransmit,
        transmit_also_recirculates,
    ),
    (
        "recirculated_packet_lost",
        Clause::OutputRecirculate,
        recirculated_packet_lost,
    ),
    (
        "recirculated_packet_also_transmitted",
        Clause::OutputRecirculate,
        recirculated_packet_also_transmitted,
    ),
];
