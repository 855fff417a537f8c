//! Relational checking of traces.
//!
//! [`check_step`] judges one recorded step against the ingress or egress
//! step relation. It never re-runs the switch: nondeterministic choices are
//! accepted whenever some decomposition of the recorded queues justifies
//! them, and only the deterministic parts (pipelines, generator,
//! replication) are recomputed.

pub mod clause;
pub mod spec;

use serde::Serialize;
use serde_json::{json, Value};

use crate::engines::{pktgen_tick, replication_engine, Arrival, EgressMeta, RECIRC_PORT};
use crate::headers::ingress_stream;
use crate::switch::trace::{IngressResult, QueueEdit, RecircEdit};
use crate::switch::{digest, StepKind, SwitchConfig, TraceHeader, TraceStep, World};

pub use clause::Clause;
pub use spec::{
    dense_flow_check, langsec_check, lineage_check, normal_packet_relation, parser_oblivious_check, sampler_expected,
    sampler_liveness_check, sampler_spec_check, special_packet_relation, Containment, Origin,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violated_clause: Option<Clause>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<u64>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub witness: Value,
}

impl Verdict {
    pub fn pass() -> Self {
        Verdict {
            pass: true,
            violated_clause: None,
            step: None,
            witness: Value::Null,
        }
    }

    pub fn fail(clause: Clause, witness: Value) -> Self {
        Verdict {
            pass: false,
            violated_clause: Some(clause),
            step: None,
            witness,
        }
    }

    pub fn at_step(mut self, step: u64) -> Self {
        if !self.pass {
            self.step = Some(step);
        }
        self
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CheckError {
    #[error("malformed trace at step {step}: {reason}")]
    MalformedTrace { step: u64, reason: String },
    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),
}

type Check = Result<(), Verdict>;

fn require(ok: bool, clause: Clause, witness: impl FnOnce() -> Value) -> Check {
    if ok {
        Ok(())
    } else {
        Err(Verdict::fail(clause, witness()))
    }
}

/// Whether applying `edit` leaves `q` as it was.
fn unchanged<T: PartialEq>(q: &[T], edit: Option<&QueueEdit<T>>) -> bool {
    match edit {
        None => true,
        Some(QueueEdit::Append { items }) => items.is_empty(),
        Some(QueueEdit::Replace { items }) => items.as_slice() == q,
        Some(QueueEdit::Remove { .. }) => false,
    }
}

/// Whether `edit` turns `q = q_l · x · q_r` into `q_l · q_r` for some split.
fn removes<T: PartialEq>(q: &[T], edit: Option<&QueueEdit<T>>, x: &T) -> bool {
    match edit {
        Some(QueueEdit::Remove { index }) => q.get(*index) == Some(x),
        Some(QueueEdit::Replace { items }) => {
            if items.len() + 1 != q.len() {
                return false;
            }
            let k = q.iter().zip(items).take_while(|(a, b)| a == b).count();
            q[k] == *x && q[k + 1..] == items[k..]
        }
        Some(QueueEdit::Append { .. }) | None => false,
    }
}

/// The entries `edit` appends to `q`, or `None` if `q` is not a prefix of
/// the result.
fn appended<'a, T: PartialEq>(q: &[T], edit: Option<&'a QueueEdit<T>>) -> Option<&'a [T]> {
    match edit {
        None => Some(&[]),
        Some(QueueEdit::Append { items }) => Some(items),
        Some(QueueEdit::Replace { items }) => items.starts_with(q).then(|| &items[q.len()..]),
        Some(QueueEdit::Remove { .. }) => None,
    }
}

/// Whether `sub` embeds into `full` in order, using every position where
/// `mandatory` is set.
fn embeds_covering(full: &[EgressMeta], mandatory: &[bool], sub: &[EgressMeta]) -> bool {
    let (n, m) = (full.len(), sub.len());
    // ok[i][j]: sub[j..] embeds into full[i..] covering mandatory[i..]
    let mut ok = vec![vec![false; m + 1]; n + 1];
    ok[n][m] = true;
    for i in (0..n).rev() {
        for j in (0..=m).rev() {
            let skip = !mandatory[i] && ok[i + 1][j];
            let take = j < m && full[i] == sub[j] && ok[i + 1][j + 1];
            ok[i][j] = skip || take;
        }
    }
    ok[0][0]
}

fn post_value<'a, T>(pre: &'a T, delta: &'a Option<T>) -> &'a T {
    delta.as_ref().unwrap_or(pre)
}

fn post_recirc<'a>(
    pre: &'a Option<crate::bits::BitString>,
    edit: &'a Option<RecircEdit>,
) -> Option<&'a crate::bits::BitString> {
    match edit {
        None => pre.as_ref(),
        Some(RecircEdit::Set(p)) => Some(p),
        Some(RecircEdit::Clear) => None,
    }
}

fn check_ingress(cfg: &SwitchConfig, pre: &World, step: &TraceStep) -> Check {
    let (st, q, d, x) = (&pre.state, &pre.queues, &step.delta, &step.witness);

    require(
        d.t == Some(st.t + 1),
        Clause::IngressTime,
        || json!({"t": st.t, "t_post": d.t}),
    )?;
    require(
        d.s_e.as_ref().is_none_or(|s| *s == st.s_e),
        Clause::IngressEgressStateFrame,
        || json!({"s_e_post": d.s_e}),
    )?;
    require(
        unchanged(&q.q_output, d.q_output.as_ref()),
        Clause::IngressOutputFrame,
        || json!({"q_output_edit": d.q_output}),
    )?;

    let s_g_post = post_value(&st.s_g, &d.s_g);
    let recirc_post = post_recirc(&q.p_recirc, &d.p_recirc);
    match &q.p_recirc {
        Some(p) => {
            let expect = Arrival {
                port: RECIRC_PORT,
                frame: p.clone(),
            };
            require(
                x.p_g.as_ref() == Some(&expect) && recirc_post.is_none() && *s_g_post == st.s_g,
                Clause::PktGenRecirc,
                || json!({"p_recirc": p, "p_g": x.p_g, "p_recirc_post": recirc_post, "s_g_post": s_g_post}),
            )?;
        }
        None => {
            let (frame, s_g2) = pktgen_tick(&cfg.pktgen, st.t, &st.s_g);
            let expect = frame.map(|frame| Arrival {
                port: cfg.pktgen.source_port,
                frame,
            });
            require(
                x.p_g == expect && *s_g_post == s_g2 && recirc_post.is_none(),
                Clause::PktGenGenerate,
                || json!({"expected_p_g": expect, "p_g": x.p_g, "expected_s_g": s_g2, "s_g_post": s_g_post}),
            )?;
        }
    }

    match (&x.p_g, &x.p_i) {
        (Some(g), _) => require(
            x.p_i.as_ref() == Some(g) && unchanged(&q.q_input, d.q_input.as_ref()),
            Clause::InputGenerator,
            || json!({"p_g": g, "p_i": x.p_i, "q_input_edit": d.q_input}),
        )?,
        (None, Some(p)) => require(
            removes(&q.q_input, d.q_input.as_ref(), p),
            Clause::InputSplit,
            || json!({"p_i": p, "q_input_len": q.q_input.len(), "q_input_edit": d.q_input}),
        )?,
        (None, None) => require(
            q.q_input.is_empty() && unchanged(&q.q_input, d.q_input.as_ref()),
            Clause::InputEmpty,
            || json!({"q_input_len": q.q_input.len(), "q_input_edit": d.q_input}),
        )?,
    }

    let s_i_post = post_value(&st.s_i, &d.s_i);
    let output = x.ingress.as_ref().and_then(IngressResult::output);
    if matches!(x.ingress, Some(IngressResult::Rejected)) {
        require(
            s_i_post.control == st.s_i.control && s_i_post.deparser == st.s_i.deparser,
            Clause::RejectIsolation,
            || json!({"s_i": st.s_i, "s_i_post": s_i_post}),
        )?;
    }
    if x.p_i.is_none() {
        require(
            x.ingress.is_none() && *s_i_post == st.s_i,
            Clause::IdleFrame,
            || json!({"ingress": x.ingress, "s_i_post": s_i_post}),
        )?;
    }
    if output.is_none() {
        require(
            unchanged(&q.q_egress, d.q_egress.as_ref())
                && unchanged(&q.q_mirror, d.q_mirror.as_ref())
                && x.m_mirror.is_none()
                && x.m_merge.is_none()
                && x.m_repl.is_none(),
            Clause::NoOutputFrame,
            || json!({"q_egress_edit": d.q_egress, "q_mirror_edit": d.q_mirror, "m_repl": x.m_repl}),
        )?;
        if x.p_i.is_none() {
            return Ok(());
        }
    }

    let p_i = x.p_i.as_ref().expect("output implies an ingress packet");
    let (out, s_i2) = cfg
        .app
        .ingress
        .run(st.t, p_i.port, &ingress_stream(p_i.port, &p_i.frame), &st.s_i);
    let recomputed = IngressResult::from(out);
    require(
        x.ingress.as_ref() == Some(&recomputed) && *s_i_post == s_i2,
        Clause::IngressPipeline,
        || json!({"expected": recomputed, "recorded": x.ingress, "expected_s_i": s_i2, "s_i_post": s_i_post}),
    )?;
    let Some(out) = output else {
        return Ok(());
    };

    require(
        x.m_mirror.is_none(),
        Clause::EmptyMirrorTable,
        || json!({"m_mirror": x.m_mirror}),
    )?;
    require(
        x.m_merge.as_ref() == Some(&out.tm) && q.q_mirror.is_empty() && unchanged(&q.q_mirror, d.q_mirror.as_ref()),
        Clause::EmptyMirrorMerge,
        || json!({"m_normal": out.tm, "m_merge": x.m_merge, "q_mirror_edit": d.q_mirror}),
    )?;
    let expect = replication_engine(&cfg.mc, &out.tm);
    require(
        matches!((&expect, &x.m_repl), (Ok(e), Some(r)) if e == r),
        Clause::Replication,
        || json!({"expected": expect.as_ref().map_err(|e| e.to_string()), "m_repl": x.m_repl}),
    )?;
    let ms = x.m_repl.as_deref().unwrap_or_default();

    let suffix = appended(&q.q_egress, d.q_egress.as_ref());
    let Some(suffix) = suffix else {
        return Err(Verdict::fail(
            Clause::QacPrefix,
            json!({"q_egress_len": q.q_egress.len(), "q_egress_edit": d.q_egress}),
        ));
    };
    let metas: Vec<EgressMeta> = suffix.iter().map(|(m, _)| *m).collect();
    let all_false = vec![false; ms.len()];
    require(
        suffix.iter().all(|(_, p)| *p == out.packet) && embeds_covering(ms, &all_false, &metas),
        Clause::QacSubsequence,
        || json!({"m_repl": ms, "appended": suffix}),
    )?;
    let mandatory = cfg.qac.mandatory(ms);
    require(
        embeds_covering(ms, &mandatory, &metas),
        Clause::QacAlwaysReady,
        || json!({"m_repl": ms, "mandatory": mandatory, "admitted": metas}),
    )
}

fn check_egress(cfg: &SwitchConfig, pre: &World, step: &TraceStep) -> Check {
    let (st, q, d, x) = (&pre.state, &pre.queues, &step.delta, &step.witness);
    require(
        d.t.is_none_or(|t| t == st.t),
        Clause::EgressTimeFrame,
        || json!({"t": st.t, "t_post": d.t}),
    )?;
    require(
        d.s_g.as_ref().is_none_or(|s| *s == st.s_g),
        Clause::EgressGenFrame,
        || json!({"s_g_post": d.s_g}),
    )?;
    require(
        d.s_i.as_ref().is_none_or(|s| *s == st.s_i),
        Clause::EgressIngressStateFrame,
        || json!({"s_i_post": d.s_i}),
    )?;
    require(
        unchanged(&q.q_input, d.q_input.as_ref()),
        Clause::EgressInputFrame,
        || json!({"q_input_edit": d.q_input}),
    )?;
    require(
        q.p_recirc.is_none(),
        Clause::EgressRecircInvalid,
        || json!({"p_recirc": q.p_recirc}),
    )?;
    require(
        unchanged(&q.q_mirror, d.q_mirror.as_ref()),
        Clause::EgressMirrorFrame,
        || json!({"q_mirror_edit": d.q_mirror}),
    )?;

    let Some(entry) = &x.scheduled else {
        return Err(Verdict::fail(Clause::SchedulerSplit, json!({"scheduled": null})));
    };
    require(
        removes(&q.q_egress, d.q_egress.as_ref(), entry),
        Clause::SchedulerSplit,
        || json!({"scheduled": entry, "q_egress_len": q.q_egress.len(), "q_egress_edit": d.q_egress}),
    )?;

    let s_e_post = post_value(&st.s_e, &d.s_e);
    let expect = cfg.app.egress.run(&entry.0, &entry.1, &st.s_e);
    let (ind, p_e) = match (&expect, &x.egress) {
        (Ok((out, s_e2)), Some(rec)) if out == rec && s_e2 == s_e_post => out.clone(),
        _ => {
            return Err(Verdict::fail(
                Clause::EgressPipeline,
                json!({
                    "expected": expect.as_ref().map(|r| &r.0).map_err(|e| e.to_string()),
                    "recorded": x.egress,
                    "s_e_post": s_e_post,
                }),
            ))
        }
    };

    let recirc_post = post_recirc(&q.p_recirc, &d.p_recirc);
    let out_suffix = appended(&q.q_output, d.q_output.as_ref());
    if ind.recirculate {
        require(
            recirc_post == Some(&p_e) && unchanged(&q.q_output, d.q_output.as_ref()),
            Clause::OutputRecirculate,
            || json!({"p_e": p_e, "p_recirc_post": recirc_post, "q_output_edit": d.q_output}),
        )
    } else {
        let ok = matches!(out_suffix, Some([t]) if t.port == entry.0.egress_port && t.frame == p_e);
        require(
            ok && recirc_post.is_none(),
            Clause::OutputTransmit,
            || json!({"port": entry.0.egress_port, "p_e": p_e, "q_output_edit": d.q_output, "p_recirc_post": recirc_post}),
        )
    }
}

/// Judges one step taken from `pre`.
pub fn check_step(cfg: &SwitchConfig, pre: &World, step: &TraceStep) -> Verdict {
    let result = if step.fault.is_some() {
        require(
            step.delta.is_empty(),
            Clause::FaultFrame,
            || json!({"delta": step.delta}),
        )
    } else {
        match step.kind {
            StepKind::Ingress => check_ingress(cfg, pre, step),
            StepKind::Egress => check_egress(cfg, pre, step),
        }
    };
    match result {
        Ok(()) => Verdict::pass(),
        Err(v) => v.at_step(step.step),
    }
}

/// Verifies the digests around `step` and advances `w` past it.
pub fn advance(w: &mut World, step: &TraceStep) -> Result<(), CheckError> {
    let malformed = |reason: String| CheckError::MalformedTrace {
        step: step.step,
        reason,
    };
    if digest(w) != step.pre {
        return Err(malformed("pre-state digest does not match the replayed world".into()));
    }
    step.delta.apply(w).map_err(malformed)?;
    if digest(w) != step.post {
        return Err(malformed("post-state digest does not match the edited world".into()));
    }
    Ok(())
}

/// Checks every step in order; stops at the first failing step.
pub fn check_trace(cfg: &SwitchConfig, header: &TraceHeader, steps: &[TraceStep]) -> Result<Verdict, CheckError> {
    let mut w = header.initial.clone();
    for s in steps {
        let v = check_step(cfg, &w, s);
        if !v.pass {
            return Ok(v);
        }
        advance(&mut w, s)?;
    }
    Ok(Verdict::pass())
}

/// Recomputes the post digest of a hand-edited step so that the edit is
/// judged by the relational clauses rather than rejected as malformed.
pub fn reseal(pre: &World, step: &mut TraceStep) -> Result<(), String> {
    let mut w = pre.clone();
    step.pre = digest(&w);
    step.delta.apply(&mut w)?;
    step.post = digest(&w);
    Ok(())
}
