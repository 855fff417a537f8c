//! Reusable component implementations.

use crate::bits::BitString;
use crate::engines::EgressMeta;
use crate::format::{match_packet, Format, MatchOutcome};
use crate::pipeline::{
    ComponentState, Deparser, DeparserMeta, EgressControl, EgressIndication, EgressParser, HeaderSlot, IngressParser,
    ParseResult, ParsedData,
};

/// Parser driven by a [`Format`]. Bindings listed in `headers` become
/// header slots in that order; `meta` supplies `ingress_port`; the plain
/// binding `payload` becomes the payload.
///
/// The state counts parsed packets. It never influences the result.
pub struct FormatParser {
    pub format: Format,
    pub headers: Vec<&'static str>,
}

impl FormatParser {
    pub fn new(format: Format, headers: &[&'static str]) -> Self {
        FormatParser {
            format,
            headers: headers.to_vec(),
        }
    }

    pub fn parse_stream(&self, p: &BitString) -> ParseResult {
        let env = match match_packet(p, &self.format) {
            Ok(MatchOutcome::Matched(env)) => env,
            _ => return None,
        };
        let mut d = ParsedData::new();
        if let Some(meta) = env.value("meta") {
            d.meta
                .insert("ingress_port".into(), meta.get("ingress_port").unwrap_or(0));
        }
        for h in &self.headers {
            match env.value(h) {
                Some(v) => d.set_valid(h, v.clone()),
                None => d.set_slot(h, HeaderSlot::Invalid),
            }
        }
        let payload = env.plain("payload").cloned().unwrap_or_default();
        Some((d, payload))
    }
}

pub(crate) fn bump(s: &ComponentState) -> ComponentState {
    ComponentState::Counter(s.counter().unwrap_or(0).wrapping_add(1))
}

impl IngressParser for FormatParser {
    fn parse(&self, p: &BitString, s: &ComponentState) -> (ParseResult, ComponentState) {
        (self.parse_stream(p), bump(s))
    }
}

/// Emits the valid headers in order; `meta["recirculate"]` becomes the
/// egress indication.
pub struct EmitDeparser;

impl Deparser for EmitDeparser {
    fn deparse(&self, d: ParsedData, s: &ComponentState) -> ((DeparserMeta, BitString), ComponentState) {
        let m3 = DeparserMeta {
            indication: EgressIndication {
                recirculate: d.meta("recirculate") == 1,
            },
            ext: Default::default(),
        };
        ((m3, d.emit()), s.clone())
    }
}

pub(crate) fn stash_egress_meta(d: &mut ParsedData, m: &EgressMeta) {
    d.meta.insert("egress_port".into(), m.egress_port as u64);
    d.meta.insert("rid".into(), m.rid as u64);
    d.meta.insert("source".into(), m.source.code());
}

/// Egress parser that treats the whole packet as payload.
pub struct RawEgressParser;

impl EgressParser for RawEgressParser {
    fn parse(&self, m: &EgressMeta, p: &BitString, s: &ComponentState) -> (ParseResult, ComponentState) {
        let mut d = ParsedData::new();
        stash_egress_meta(&mut d, m);
        (Some((d, p.clone())), s.clone())
    }
}

pub struct PassEgressControl;

impl EgressControl for PassEgressControl {
    fn apply(&self, d: ParsedData, s: &ComponentState) -> (ParsedData, ComponentState) {
        (d, s.clone())
    }
}
