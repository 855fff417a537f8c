//! The whole switch: ingress and egress steps over explicit state and
//! queues, with every nondeterministic choice delegated to an [`Oracle`].

pub mod oracle;
pub mod trace;

use serde::{Deserialize, Serialize};

use crate::apps::AppBundle;
use crate::bits::BitString;
use crate::engines::{
    input_ports, mirror_buffer_merge, mirror_session_lookup, output_ports, packet_generator, packet_scheduler,
    queue_admission, replication_engine, Arrival, EgressEntry, McConfig, MirrorConfig, PktGenConfig, PktGenState,
    QacPolicy, Tick, Transmitted,
};
use crate::error::{EngineError, StepError};
use crate::headers::ingress_stream;
use crate::pipeline::StateTriple;

pub use oracle::{AdversarialDrop, FifoDrain, Oracle, RandomOracle, ReplayOracle};
pub use trace::{
    digest, Decisions, Delta, IngressResult, QueueEdit, RecircEdit, StepKind, Trace, TraceHeader, TraceStep, Witness,
};

/// Program plus control-plane configuration of every engine.
#[derive(Clone, Debug)]
pub struct SwitchConfig {
    pub app: AppBundle,
    pub mirror: MirrorConfig,
    pub mc: McConfig,
    pub pktgen: PktGenConfig,
    pub qac: QacPolicy,
}

impl SwitchConfig {
    pub fn from_app(app: AppBundle) -> Self {
        SwitchConfig {
            mirror: MirrorConfig::Empty,
            mc: app.mc_config.clone(),
            pktgen: app.pktgen_config.clone(),
            qac: app.qac_policy.clone(),
            app,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwitchState {
    pub t: Tick,
    pub s_g: PktGenState,
    pub s_i: StateTriple,
    pub s_e: StateTriple,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwitchQueues {
    pub q_input: Vec<Arrival>,
    pub p_recirc: Option<BitString>,
    pub q_mirror: Vec<EgressEntry>,
    pub q_egress: Vec<EgressEntry>,
    pub q_output: Vec<Transmitted>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct World {
    pub state: SwitchState,
    pub queues: SwitchQueues,
}

impl World {
    /// Fresh switch with `input` waiting at the input ports.
    pub fn initial(cfg: &SwitchConfig, input: Vec<Arrival>) -> Self {
        World {
            state: SwitchState {
                t: 0,
                s_g: PktGenState::default(),
                s_i: cfg.app.init_ingress.clone(),
                s_e: cfg.app.init_egress.clone(),
            },
            queues: SwitchQueues {
                q_input: input,
                ..Default::default()
            },
        }
    }

    pub fn egress_enabled(&self) -> bool {
        !self.queues.q_egress.is_empty() && self.queues.p_recirc.is_none()
    }

    /// Nothing left to process and nothing in flight.
    pub fn drained(&self) -> bool {
        self.queues.q_input.is_empty() && self.queues.q_egress.is_empty() && self.queues.p_recirc.is_none()
    }
}

/// One ingress step. On an engine error the world is left as it was and
/// the error is returned together with the decisions made so far.
pub fn ingress_step(
    cfg: &SwitchConfig,
    w: &mut World,
    o: &mut dyn Oracle,
    d: &mut Decisions,
    x: &mut Witness,
) -> Result<Delta, EngineError> {
    let st = w.state.clone();
    let (p_g, p_recirc2, s_g2) = packet_generator(&cfg.pktgen, st.t, &st.s_g, w.queues.p_recirc.clone());
    x.p_g = p_g.clone();

    let mut chosen = None;
    let p_i = input_ports(p_g, &mut w.queues.q_input, |len| {
        let i = o.input_index(len);
        chosen = Some(i);
        i
    });
    d.input_index = chosen;
    let p_i = p_i?;
    let consumed = if x.p_g.is_none() { chosen } else { None };
    x.p_i = p_i.clone();

    let restore = |w: &mut World, p_i: &Option<Arrival>| {
        if let (Some(i), Some(a)) = (consumed, p_i) {
            w.queues.q_input.insert(i, a.clone());
        }
    };

    let mut delta = Delta {
        t: Some(st.t + 1),
        ..Default::default()
    };
    if s_g2 != st.s_g {
        delta.s_g = Some(s_g2.clone());
    }
    if p_recirc2 != w.queues.p_recirc {
        delta.p_recirc = Some(RecircEdit::from(p_recirc2.clone()));
    }
    if let Some(i) = consumed {
        delta.q_input = Some(QueueEdit::Remove { index: i });
    }

    let mut s_i2 = st.s_i.clone();
    let mut admitted_items = Vec::new();
    if let Some(a) = &p_i {
        let (out, s) = cfg
            .app
            .ingress
            .run(st.t, a.port, &ingress_stream(a.port, &a.frame), &st.s_i);
        s_i2 = s;
        x.ingress = Some(out.clone().into());
        if let Some(out) = out {
            let staged = (|| {
                let m_mirror = mirror_session_lookup(&cfg.mirror, out.mirror)?;
                let m_merge = mirror_buffer_merge(out.tm.clone(), m_mirror.as_ref(), &w.queues.q_mirror)?;
                x.m_merge = Some(m_merge.clone());
                let ms = replication_engine(&cfg.mc, &m_merge)?;
                x.m_repl = Some(ms.clone());
                let mandatory = cfg.qac.mandatory(&ms);
                let mask = o.admitted(&ms, &mandatory);
                d.admitted = Some(mask.clone());
                let mut fresh = Vec::new();
                queue_admission(&ms, &out.packet, &mut fresh, &cfg.qac, &mask)?;
                Ok(fresh)
            })();
            match staged {
                Ok(fresh) => admitted_items = fresh,
                Err(e) => {
                    restore(w, &p_i);
                    return Err(e);
                }
            }
        }
    }
    if s_i2 != st.s_i {
        delta.s_i = Some(s_i2.clone());
    }
    if !admitted_items.is_empty() {
        delta.q_egress = Some(QueueEdit::Append {
            items: admitted_items.clone(),
        });
    }

    w.state.t += 1;
    w.state.s_g = s_g2;
    w.state.s_i = s_i2;
    w.queues.p_recirc = p_recirc2;
    w.queues.q_egress.extend(admitted_items);
    Ok(delta)
}

/// One egress step; requires [`World::egress_enabled`].
pub fn egress_step(
    cfg: &SwitchConfig,
    w: &mut World,
    o: &mut dyn Oracle,
    d: &mut Decisions,
    x: &mut Witness,
) -> Result<Delta, EngineError> {
    let index = o.sched_index(&w.queues.q_egress);
    d.sched_index = Some(index);
    let Some((m, p)) = packet_scheduler(&mut w.queues.q_egress, index)? else {
        return Err(EngineError::OracleOutOfRange { index, len: 0 });
    };
    x.scheduled = Some((m, p.clone()));
    let ((ind, p_e), s_e2) = match cfg.app.egress.run(&m, &p, &w.state.s_e) {
        Ok(r) => r,
        Err(e) => {
            w.queues.q_egress.insert(index, (m, p));
            return Err(e);
        }
    };
    x.egress = Some((ind, p_e.clone()));
    let mut delta = Delta {
        q_egress: Some(QueueEdit::Remove { index }),
        ..Default::default()
    };
    if s_e2 != w.state.s_e {
        delta.s_e = Some(s_e2.clone());
    }
    let mut recirc = w.queues.p_recirc.clone();
    let before = w.queues.q_output.len();
    if let Err(e) = output_ports(&mut w.queues.q_output, m.egress_port, ind, p_e, &mut recirc) {
        w.queues.q_egress.insert(index, (m, p));
        return Err(e);
    }
    if w.queues.q_output.len() > before {
        delta.q_output = Some(QueueEdit::Append {
            items: w.queues.q_output[before..].to_vec(),
        });
    }
    if recirc != w.queues.p_recirc {
        delta.p_recirc = Some(RecircEdit::from(recirc.clone()));
    }
    w.queues.p_recirc = recirc;
    w.state.s_e = s_e2;
    Ok(delta)
}

/// Performs the step kind the oracle asks for if it is enabled, otherwise
/// an ingress step (which is always enabled).
pub fn process_packet(cfg: &SwitchConfig, w: &mut World, o: &mut dyn Oracle, step: u64) -> TraceStep {
    let pre = digest(w);
    let requested = o.step_kind(w);
    let kind = match requested {
        StepKind::Egress if w.egress_enabled() => StepKind::Egress,
        _ => StepKind::Ingress,
    };
    let mut decisions = Decisions {
        requested,
        ..Default::default()
    };
    let mut witness = Witness::default();
    let result = match kind {
        StepKind::Ingress => ingress_step(cfg, w, o, &mut decisions, &mut witness),
        StepKind::Egress => egress_step(cfg, w, o, &mut decisions, &mut witness),
    };
    let (delta, fault) = match result {
        Ok(delta) => (delta, None),
        Err(e) => (Delta::default(), Some(e.to_string())),
    };
    TraceStep {
        step,
        kind,
        decisions,
        witness,
        delta,
        pre,
        post: digest(w),
        fault,
    }
}

/// Checked egress entry point for callers that pick the step kind
/// themselves.
pub fn try_egress(cfg: &SwitchConfig, w: &mut World, o: &mut dyn Oracle, step: u64) -> Result<TraceStep, StepError> {
    if w.queues.q_egress.is_empty() {
        return Err(StepError::StepNotEnabled("q_egress is empty"));
    }
    if w.queues.p_recirc.is_some() {
        return Err(StepError::StepNotEnabled("recirculation register is occupied"));
    }
    let pre = digest(w);
    let mut decisions = Decisions {
        requested: StepKind::Egress,
        ..Default::default()
    };
    let mut witness = Witness::default();
    let delta = egress_step(cfg, w, o, &mut decisions, &mut witness)?;
    Ok(TraceStep {
        step,
        kind: StepKind::Egress,
        decisions,
        witness,
        delta,
        pre,
        post: digest(w),
        fault: None,
    })
}

/// Runs `n_steps` steps, stopping early after the first fault.
pub fn run(cfg: &SwitchConfig, init: World, n_steps: u64, o: &mut dyn Oracle) -> Trace {
    run_until(cfg, init, n_steps, o, |_| false)
}

/// Runs until the world is drained (or `max_steps` is reached).
pub fn run_to_drain(cfg: &SwitchConfig, init: World, max_steps: u64, o: &mut dyn Oracle) -> Trace {
    run_until(cfg, init, max_steps, o, World::drained)
}

pub fn run_until(
    cfg: &SwitchConfig,
    init: World,
    max_steps: u64,
    o: &mut dyn Oracle,
    stop: impl Fn(&World) -> bool,
) -> Trace {
    let mut w = init.clone();
    let mut steps = Vec::new();
    for i in 0..max_steps {
        if stop(&w) {
            break;
        }
        let s = process_packet(cfg, &mut w, o, i);
        let fault = s.fault.is_some();
        steps.push(s);
        if fault {
            break;
        }
    }
    Trace {
        header: TraceHeader { initial: init },
        steps,
        last: w,
    }
}
