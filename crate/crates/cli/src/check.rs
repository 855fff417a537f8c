use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use serde_json::json;

use swmodel::checker::{
    advance, check_trace, dense_flow_check, langsec_check, sampler_liveness_check, sampler_spec_check, CheckError,
    Containment, Verdict,
};
use swmodel::config::parse_switch_config;
use swmodel::engines::{QacPolicy, ReadyPorts};
use swmodel::switch::trace::{consumed_inputs, read_jsonl};
use swmodel::switch::{IngressResult, StepKind, TraceStep, World};

use crate::{emit, fail, read_file, CmdResult, OrExit, PROPERTY, USAGE};

#[derive(Clone, Debug)]
pub enum Spec {
    Axioms,
    /// Sampler property with the given initial counter.
    Sampler(u32),
    Langsec,
    DenseFlow(u64),
}

impl FromStr for Spec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |v: &str| v.parse::<u64>().map_err(|_| format!("bad number `{v}` in `{s}`"));
        match s.split_once(':') {
            None if s == "axioms" => Ok(Spec::Axioms),
            None if s == "langsec" => Ok(Spec::Langsec),
            Some(("sampler", n)) => Ok(Spec::Sampler(
                num(n)?.try_into().map_err(|_| format!("`{n}` exceeds u32"))?,
            )),
            Some(("denseflow", g)) => Ok(Spec::DenseFlow(num(g)?)),
            _ => Err(format!(
                "unknown spec `{s}` (axioms, sampler:<n>, langsec, denseflow:<gap>)"
            )),
        }
    }
}

#[derive(Args)]
pub struct CheckArgs {
    /// Trace written by `swmodel sim`.
    #[arg(long)]
    pub trace: PathBuf,
    /// The switch configuration the trace was produced with.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "axioms")]
    pub spec: Spec,
}

fn malformed(e: CheckError) -> crate::Fail {
    fail(USAGE, e)
}

/// Oldest-first input and scheduling on every step.
fn fifo_decisions(steps: &[TraceStep]) -> bool {
    steps
        .iter()
        .all(|s| s.decisions.input_index.unwrap_or(0) == 0 && s.decisions.sched_index.unwrap_or(0) == 0)
}

pub fn run(a: CheckArgs) -> CmdResult {
    let file = parse_switch_config(&read_file(&a.config)?).or_exit(USAGE)?;
    let cfg = file.build().or_exit(USAGE)?;
    let f = File::open(&a.trace).map_err(|e| fail(USAGE, format!("cannot read {}: {e}", a.trace.display())))?;
    let (header, steps) = read_jsonl(BufReader::new(f)).or_exit(USAGE)?;

    let mut report = json!({ "spec": format!("{:?}", a.spec), "steps": steps.len() });
    let verdict = match a.spec {
        Spec::Axioms => check_trace(&cfg, &header, &steps).map_err(malformed)?,
        Spec::DenseFlow(gap) => dense_flow_check(&steps, gap).map_err(malformed)?,
        Spec::Sampler(n) => {
            let sc = file
                .sampler()
                .ok_or_else(|| fail(USAGE, "sampler:<n> needs a sampler configuration"))?;
            let mut w = header.initial.clone();
            for s in &steps {
                advance(&mut w, s).map_err(malformed)?;
            }
            let inputs: Vec<_> = consumed_inputs(&steps).into_iter().map(|a| a.frame).collect();
            let out = &w.queues.q_output;
            let mode = if fifo_decisions(&steps) {
                Containment::Subsequence
            } else {
                Containment::Submultiset
            };
            report["containment"] = json!(format!("{mode:?}"));
            let v = sampler_spec_check(&sc, n, &inputs, out, mode);
            let all_ready = matches!(
                cfg.qac,
                QacPolicy::AlwaysReady {
                    ready_ports: ReadyPorts::All
                }
            );
            if v.pass && all_ready && w.drained() {
                report["liveness"] = json!(true);
                sampler_liveness_check(&sc, n, &inputs, out)
            } else {
                v
            }
        }
        Spec::Langsec => {
            let mut w: World = header.initial.clone();
            let mut judged = 0;
            let mut verdict = Verdict::pass();
            for s in &steps {
                let rejected = matches!(s.witness.ingress, Some(IngressResult::Rejected));
                if let (StepKind::Ingress, true, Some(p)) = (s.kind, rejected, &s.witness.p_i) {
                    match langsec_check(&cfg, &w, p.port, &p.frame) {
                        Ok(v) if !v.pass => {
                            verdict = v.at_step(s.step);
                            break;
                        }
                        Ok(_) => judged += 1,
                        Err(CheckError::PreconditionUnmet(_)) => {}
                        Err(e) => return Err(malformed(e)),
                    }
                }
                advance(&mut w, s).map_err(malformed)?;
            }
            report["judged"] = json!(judged);
            verdict
        }
    };
    report["verdict"] = serde_json::to_value(&verdict).or_exit(USAGE)?;
    emit(&format!("{}\n", serde_json::to_string_pretty(&report).or_exit(USAGE)?));
    if verdict.pass {
        Ok(())
    } else {
        let clause = verdict.violated_clause.map(|c| c.id()).unwrap_or("?");
        let at = verdict.step.map(|s| format!(" at step {s}")).unwrap_or_default();
        Err(fail(PROPERTY, format!("violated {clause}{at}")))
    }
}
