//! JSON descriptions of header types and formats.
//!
//! ```json
//! {
//!   "types": [{"name": "vlan_h", "fields": [{"name": "tci", "width_bits": 16}]}],
//!   "format": {"seq": [
//!     {"value": {"bind": "eth", "header": "ethernet_h"}},
//!     {"branch": {"when": {"field_eq": {"binding": "eth", "field": "ethertype", "value": 2048}},
//!                 "then": {"value": {"bind": "ipv4", "header": "ipv4_h"}},
//!                 "otherwise": "empty"}},
//!     {"plain": {"bind": "payload"}}
//!   ]}
//! }
//! ```
//!
//! The built-in header types of [`crate::headers`] are always in scope.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::FormatError;
use crate::format::{Condition, Format, HeaderType};
use crate::headers;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatSpec {
    Empty,
    Value {
        bind: String,
        header: String,
    },
    Plain {
        bind: String,
    },
    Seq(Vec<FormatSpec>),
    Branch {
        when: CondSpec,
        then: Box<FormatSpec>,
        otherwise: Box<FormatSpec>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CondSpec {
    FieldEq { binding: String, field: String, value: u64 },
    Not(Box<CondSpec>),
    All(Vec<CondSpec>),
    Any(Vec<CondSpec>),
}

impl CondSpec {
    fn reads(&self, out: &mut Vec<String>) {
        match self {
            CondSpec::FieldEq { binding, .. } => {
                if !out.contains(binding) {
                    out.push(binding.clone())
                }
            }
            CondSpec::Not(c) => c.reads(out),
            CondSpec::All(cs) | CondSpec::Any(cs) => cs.iter().for_each(|c| c.reads(out)),
        }
    }

    fn eval(&self, env: &crate::format::Environment) -> Result<bool, FormatError> {
        Ok(match self {
            CondSpec::FieldEq { binding, field, value } => env.field(binding, field)? == *value,
            CondSpec::Not(c) => !c.eval(env)?,
            CondSpec::All(cs) => {
                for c in cs {
                    if !c.eval(env)? {
                        return Ok(false);
                    }
                }
                true
            }
            CondSpec::Any(cs) => {
                for c in cs {
                    if c.eval(env)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    fn compile(&self) -> Condition {
        let mut reads = Vec::new();
        self.reads(&mut reads);
        let reads: Vec<&str> = reads.iter().map(String::as_str).collect();
        let spec = self.clone();
        Condition::new(&format!("{self:?}"), &reads, move |env| spec.eval(env))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FormatDoc {
    #[serde(default)]
    pub types: Vec<HeaderType>,
    pub format: FormatSpec,
}

/// Header types by name: the built-ins plus any extra definitions.
pub fn type_registry(extra: &[HeaderType]) -> BTreeMap<String, Arc<HeaderType>> {
    let mut reg: BTreeMap<String, Arc<HeaderType>> = headers::builtin_types()
        .into_iter()
        .map(|t| (t.name.clone(), t))
        .collect();
    for t in extra {
        reg.insert(t.name.clone(), Arc::new(t.clone()));
    }
    reg
}

impl FormatSpec {
    pub fn compile(&self, types: &BTreeMap<String, Arc<HeaderType>>) -> Result<Format, FormatError> {
        Ok(match self {
            FormatSpec::Empty => Format::Empty,
            FormatSpec::Value { bind, header } => {
                let t = types
                    .get(header)
                    .ok_or_else(|| FormatError::UnknownHeader(header.clone()))?;
                Format::value(bind, t)
            }
            FormatSpec::Plain { bind } => Format::plain(bind),
            FormatSpec::Seq(parts) => {
                Format::seq(parts.iter().map(|p| p.compile(types)).collect::<Result<Vec<_>, _>>()?)
            }
            FormatSpec::Branch { when, then, otherwise } => {
                Format::branch(when.compile(), then.compile(types)?, otherwise.compile(types)?)
            }
        })
    }
}

impl FormatDoc {
    pub fn compile(&self) -> Result<Format, FormatError> {
        let f = self.format.compile(&type_registry(&self.types))?;
        f.validate()?;
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitString;
    use crate::format::{encode, matches, TypedValue};

    #[test]
    fn compile_and_match_doc() {
        let js = r#"{
          "format": {"seq": [
            {"value": {"bind": "eth", "header": "ethernet_h"}},
            {"branch": {"when": {"field_eq": {"binding": "eth", "field": "ethertype", "value": 2048}},
                        "then": {"value": {"bind": "ipv4", "header": "ipv4_h"}},
                        "otherwise": "empty"}},
            {"plain": {"bind": "payload"}}
          ]}
        }"#;
        let doc: FormatDoc = serde_json::from_str(js).unwrap();
        let f = doc.compile().unwrap();
        let eth = TypedValue::new(headers::ethernet_h(), &[("dst", 1), ("src", 2), ("ethertype", 0x86dd)]).unwrap();
        let p = encode(&eth).concat(&BitString::from_bytes(&[9, 9]));
        let (ok, env) = matches(&p, &f).unwrap();
        assert!(ok);
        assert!(!env.contains("ipv4"));
        assert_eq!(env.plain("payload").unwrap().len(), 16);
    }

    #[test]
    fn unknown_header_is_reported() {
        let doc: FormatDoc = serde_json::from_str(r#"{"format": {"value": {"bind": "x", "header": "nope"}}}"#).unwrap();
        assert_eq!(doc.compile().unwrap_err(), FormatError::UnknownHeader("nope".into()));
    }
}
