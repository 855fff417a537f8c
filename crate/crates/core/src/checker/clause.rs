//! Stable identifiers for every condition the checker can report.

use std::fmt;

use serde::{Serialize, Serializer};

macro_rules! clauses {
    ($($variant:ident => $id:literal, $desc:literal;)*) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Clause {
            $($variant,)*
        }

        impl Clause {
            pub const ALL: &'static [Clause] = &[$(Clause::$variant,)*];

            pub fn id(self) -> &'static str {
                match self {
                    $(Clause::$variant => $id,)*
                }
            }

            pub fn description(self) -> &'static str {
                match self {
                    $(Clause::$variant => $desc,)*
                }
            }

            pub fn from_id(id: &str) -> Option<Clause> {
                match id {
                    $($id => Some(Clause::$variant),)*
                    _ => None,
                }
            }
        }
    };
}

clauses! {
    FaultFrame => "trace.fault_frame", "a faulted step changes nothing";
    IngressTime => "ingress.time", "an ingress step advances t by exactly one";
    IngressEgressStateFrame => "ingress.s_e_frame", "an ingress step leaves the egress pipeline state unchanged";
    IngressOutputFrame => "ingress.q_output_frame", "an ingress step leaves q_output unchanged";
    PktGenRecirc => "pktgen.recirc", "a valid recirculation register is forwarded as p_g and drained, generator state unchanged";
    PktGenGenerate => "pktgen.generate", "with no recirculated packet, p_g and the new generator state are one generator tick";
    InputGenerator => "input_ports.generator", "a generated packet is forwarded and q_input is unchanged";
    InputSplit => "input_ports.split", "otherwise p_i is removed from some position of q_input";
    InputEmpty => "input_ports.empty", "with no generated packet and an empty q_input nothing is forwarded";
    RejectIsolation => "ingress.reject_isolation", "after a parser reject only the parser state may change";
    NoOutputFrame => "ingress.no_output_frame", "without pipeline output q_mirror and q_egress are unchanged and no engine runs";
    IdleFrame => "ingress.idle_frame", "without an ingress packet the pipeline does not run and its state is unchanged";
    IngressPipeline => "ingress.pipeline", "pipeline output and state are those of the ingress pipeline on p_i";
    EmptyMirrorTable => "mirror.empty_table", "the empty session table yields no mirror metadata";
    EmptyMirrorMerge => "mirror.empty_merge", "merge is the identity on the normal metadata and q_mirror stays empty";
    Replication => "replication.function", "the copies are those of the replication engine on the merged metadata";
    QacPrefix => "qac.prefix", "q_egress is a prefix of the new q_egress";
    QacSubsequence => "qac.subsequence", "the appended entries pair a subsequence of the copies with the pipeline packet";
    QacAlwaysReady => "qac.always_ready", "no copy for an always-ready port is dropped";
    EgressTimeFrame => "egress.t_frame", "an egress step leaves t unchanged";
    EgressGenFrame => "egress.s_g_frame", "an egress step leaves the generator state unchanged";
    EgressIngressStateFrame => "egress.s_i_frame", "an egress step leaves the ingress pipeline state unchanged";
    EgressInputFrame => "egress.q_input_frame", "an egress step leaves q_input unchanged";
    EgressRecircInvalid => "egress.recirc_invalid", "an egress step starts with an empty recirculation register";
    EgressMirrorFrame => "egress.mirror_frame", "an egress step leaves q_mirror unchanged";
    SchedulerSplit => "scheduler.split", "the scheduled entry is removed from some position of q_egress";
    EgressPipeline => "egress.pipeline", "egress output and state are those of the egress pipeline on the scheduled entry";
    OutputTransmit => "output_ports.transmit", "a non-recirculated packet is appended to q_output, register stays empty";
    OutputRecirculate => "output_ports.recirculate", "a recirculated packet loads the register, q_output unchanged";
    SamplerOutput => "sampler.output", "every output is an expected normal or special packet, in containment order";
    SamplerLiveness => "sampler.liveness", "with every port always ready, no sampler output is lost";
    LangSecQueues => "langsec.queues", "a rejected packet leaves every queue except q_input unchanged";
    LangSecState => "langsec.state", "a rejected packet leaves s_g, control, deparser and egress state unchanged";
    ParserOblivious => "parser.oblivious", "parser output does not depend on parser state";
    DenseFlow => "dense_flow.gap", "consecutive packet-carrying ingress steps are at most gap_limit ticks apart";
    Lineage => "lineage.untraceable", "every output traces back to an input or a generated packet";
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl Serialize for Clause {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

/// The registry as a markdown table.
pub fn registry_markdown() -> String {
    let mut out = String::from("| id | condition |\n|---|---|\n");
    for c in Clause::ALL {
        out.push_str(&format!("| `{}` | {} |\n", c.id(), c.description()));
    }
    out
}

/// The full registry document, as kept in `docs/clauses.md`.
pub fn registry_doc() -> String {
    format!(
        "# Checker clause registry\n\nEvery failing verdict names one of these identifiers in `violated_clause`. \
         Identifiers are stable; new clauses are only ever appended.\n\n{}",
        registry_markdown()
    )
}
