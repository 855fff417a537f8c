use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use swmodel::config::{parse_input_stream, parse_switch_config};
use swmodel::switch::oracle::by_name;
use swmodel::switch::{run_until, IngressResult, StepKind, Trace, World};

use crate::{emit, fail, read_file, CmdResult, OrExit, FAULT, USAGE};

#[derive(Args)]
pub struct SimArgs {
    /// Switch configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Input stream JSON (`[{"port": .., "hex": ..}]`); empty if absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub steps: u64,
    /// Oracle seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// fifo-drain, random or adversarial-drop.
    #[arg(long, default_value = "fifo-drain")]
    pub policy: String,
    /// Where to write the trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Stop early once every queue is empty.
    #[arg(long)]
    pub until_drained: bool,
}

pub fn run(a: SimArgs) -> CmdResult {
    let file = parse_switch_config(&read_file(&a.config)?).or_exit(USAGE)?;
    let cfg = file.build().or_exit(USAGE)?;
    let input = match &a.input {
        Some(p) => parse_input_stream(&read_file(p)?).or_exit(USAGE)?,
        None => Vec::new(),
    };
    let mut oracle = by_name(&a.policy, a.seed).ok_or_else(|| {
        fail(
            USAGE,
            format!("unknown policy `{}` (fifo-drain, random, adversarial-drop)", a.policy),
        )
    })?;
    let drain = a.until_drained;
    let trace = run_until(&cfg, World::initial(&cfg, input), a.steps, oracle.as_mut(), |w| {
        drain && w.drained()
    });
    if let Some(p) = &a.trace {
        let f = File::create(p).map_err(|e| fail(USAGE, format!("cannot write {}: {e}", p.display())))?;
        trace.write_jsonl(&mut BufWriter::new(f)).or_exit(USAGE)?;
    }
    let monitor = file.sampler().map(|s| s.monitor_port);
    emit(&format!(
        "{}\n",
        serde_json::to_string_pretty(&summary(&trace, monitor)).or_exit(USAGE)?
    ));
    match trace.faulted() {
        Some(s) => Err(fail(
            FAULT,
            format!("fault at step {}: {}", s.step, s.fault.as_deref().unwrap_or("")),
        )),
        None => Ok(()),
    }
}

fn summary(t: &Trace, monitor: Option<u16>) -> serde_json::Value {
    let (mut ingress, mut egress, mut rejected, mut generated, mut dropped) = (0, 0, 0, 0, 0);
    for s in &t.steps {
        match s.kind {
            StepKind::Ingress => ingress += 1,
            StepKind::Egress => egress += 1,
        }
        if matches!(s.witness.ingress, Some(IngressResult::Rejected)) {
            rejected += 1;
        }
        if s.witness.p_g.is_some() {
            generated += 1;
        }
        if let Some(a) = &s.decisions.admitted {
            dropped += a.iter().filter(|k| !**k).count();
        }
    }
    let out = &t.last.queues.q_output;
    let mut by_port: BTreeMap<u16, usize> = BTreeMap::new();
    for o in out {
        *by_port.entry(o.port).or_default() += 1;
    }
    let mut v = json!({
        "steps": t.steps.len(),
        "ingress_steps": ingress,
        "egress_steps": egress,
        "packets_in": t.consumed_inputs().len(),
        "generated": generated,
        "rejected": rejected,
        "qac_dropped": dropped,
        "packets_out": out.len(),
        "out_by_port": by_port,
        "pending_input": t.last.queues.q_input.len(),
        "pending_egress": t.last.queues.q_egress.len(),
        "faults": t.steps.iter().filter(|s| s.fault.is_some()).count(),
        "final_t": t.last.state.t,
    });
    if let Some(m) = monitor {
        v["special_copies"] = json!(by_port.get(&m).copied().unwrap_or(0));
    }
    v
}
