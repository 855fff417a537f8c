use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use swmodel::format::{encode_into, extract_at, match_packet, Binding, Format, HeaderType, MatchOutcome, TypedValue};
use swmodel::headers::standard_packet_format;
use swmodel::schema::{type_registry, FormatSpec};
use swmodel::BitString;

use crate::{emit, fail, read_file, CmdResult, FmtOp, OrExit, PROPERTY, USAGE};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    #[serde(default)]
    types: Vec<HeaderType>,
    format: Option<FormatSpec>,
}

struct Schema {
    types: BTreeMap<String, Arc<HeaderType>>,
    format: Option<Format>,
}

fn load_schema(arg: &str) -> Result<Schema, crate::Fail> {
    if arg == "std" {
        return Ok(Schema {
            types: type_registry(&[]),
            format: Some(standard_packet_format()),
        });
    }
    let file: SchemaFile = serde_json::from_str(&read_file(&PathBuf::from(arg))?).or_exit(USAGE)?;
    let types = type_registry(&file.types);
    let format = match &file.format {
        Some(spec) => {
            let f = spec.compile(&types).or_exit(USAGE)?;
            f.validate().or_exit(USAGE)?;
            Some(f)
        }
        None => None,
    };
    Ok(Schema { types, format })
}

/// One header value as it appears in encode input and decode output.
#[derive(Serialize, Deserialize)]
struct Header {
    header: String,
    values: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
struct Headers {
    headers: Vec<Header>,
    #[serde(default, skip_serializing_if = "BitString::is_empty")]
    rest: BitString,
}

fn htype<'a>(s: &'a Schema, name: &str) -> Result<&'a Arc<HeaderType>, crate::Fail> {
    s.types
        .get(name)
        .ok_or_else(|| fail(USAGE, format!("unknown header type `{name}`")))
}

/// A packet given as bare hex or as a JSON bit string.
fn read_packet(path: &PathBuf) -> Result<BitString, crate::Fail> {
    let text = read_file(path)?;
    match serde_json::from_str::<BitString>(&text) {
        Ok(p) => Ok(p),
        Err(_) => BitString::from_hex(&text).map_err(|e| fail(USAGE, format!("{} is not hex: {e}", path.display()))),
    }
}

fn bindings_json(env: swmodel::format::Environment) -> Value {
    let map: serde_json::Map<String, Value> = env
        .into_bindings()
        .into_iter()
        .map(|(name, b)| {
            let v = match b {
                Binding::Value(v) => json!({ "header": v.htype().name, "values": v }),
                Binding::Plain(p) => json!({ "plain": p, "len_bits": p.len() }),
            };
            (name, v)
        })
        .collect();
    Value::Object(map)
}

pub fn run(op: FmtOp, schema: &str, data: &PathBuf, names: &[String]) -> CmdResult {
    let s = load_schema(schema)?;
    match op {
        FmtOp::Encode => {
            let doc: Headers = serde_json::from_str(&read_file(data)?).or_exit(USAGE)?;
            let mut out = BitString::new();
            for h in &doc.headers {
                let v = TypedValue::from_map(htype(&s, &h.header)?.clone(), &h.values).or_exit(USAGE)?;
                encode_into(&v, &mut out);
            }
            out.append(&doc.rest);
            emit(&format!("{}\n", serde_json::to_string(&out).or_exit(USAGE)?));
            Ok(())
        }
        FmtOp::Decode => {
            if names.is_empty() {
                return Err(fail(USAGE, "decode needs at least one --header"));
            }
            let p = read_packet(data)?;
            let mut offset = 0;
            let mut headers = Vec::new();
            for name in names {
                let t = htype(&s, name)?;
                let v = extract_at(t, &p, offset).map_err(|e| {
                    emit(&format!("{}\n", json!({ "ok": false, "header": name, "offset": offset, "needed": e.needed, "available": e.available })));
                    fail(PROPERTY, format!("{name} needs {} bits at offset {offset}, {} left", e.needed, e.available))
                })?;
                offset += t.total_width();
                headers.push(Header {
                    header: name.clone(),
                    values: v.to_map(),
                });
            }
            let rest = p.suffix(offset).expect("offset within packet");
            emit(&format!(
                "{}\n",
                serde_json::to_string_pretty(&Headers { headers, rest }).or_exit(USAGE)?
            ));
            Ok(())
        }
        FmtOp::Match => {
            let f = s
                .format
                .as_ref()
                .ok_or_else(|| fail(USAGE, "schema has no format to match against"))?;
            let p = read_packet(data)?;
            match match_packet(&p, f).or_exit(USAGE)? {
                MatchOutcome::Matched(env) => {
                    let out = json!({ "match": true, "bindings": bindings_json(env) });
                    emit(&format!("{}\n", serde_json::to_string_pretty(&out).or_exit(USAGE)?));
                    Ok(())
                }
                MatchOutcome::Mismatch { offset, partial } => {
                    let out = json!({ "match": false, "offset": offset, "partial": bindings_json(partial) });
                    emit(&format!("{}\n", serde_json::to_string_pretty(&out).or_exit(USAGE)?));
                    Err(fail(
                        PROPERTY,
                        format!("no match; first failing header at bit {offset}"),
                    ))
                }
            }
        }
    }
}
