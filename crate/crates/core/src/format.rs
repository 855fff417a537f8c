//! Header types, the encode/extract codecs and the format-matching
//! predicate over bit strings.
//!
//! A [`Format`] describes the exact shape of a packet: exact encodings of
//! typed header values, an opaque trailing payload, concatenation, and
//! branches whose conditions inspect values bound further left.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};

use crate::bits::BitString;
use crate::error::FormatError;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub width_bits: usize,
}

/// A fixed-layout header: ordered named fields of 1..=64 bits each.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct HeaderType {
    pub name: String,
    pub fields: Vec<FieldSpec>,
    #[serde(skip)]
    total_width: usize,
}

impl HeaderType {
    pub fn new(name: &str, fields: &[(&str, usize)]) -> Result<Self, FormatError> {
        Self::from_specs(
            name.to_string(),
            fields
                .iter()
                .map(|(n, w)| FieldSpec {
                    name: n.to_string(),
                    width_bits: *w,
                })
                .collect(),
        )
    }

    pub fn from_specs(name: String, fields: Vec<FieldSpec>) -> Result<Self, FormatError> {
        let mut seen = HashSet::new();
        for f in &fields {
            if !seen.insert(f.name.as_str()) {
                return Err(FormatError::DuplicateField {
                    header: name,
                    field: f.name.clone(),
                });
            }
            if f.width_bits == 0 || f.width_bits > 64 {
                return Err(FormatError::BadFieldWidth {
                    header: name,
                    field: f.name.clone(),
                    width: f.width_bits,
                });
            }
        }
        let total_width = fields.iter().map(|f| f.width_bits).sum();
        Ok(HeaderType {
            name,
            fields,
            total_width,
        })
    }

    /// The empty type: no fields, encodes to the empty string.
    pub fn empty(name: &str) -> Self {
        HeaderType {
            name: name.to_string(),
            fields: Vec::new(),
            total_width: 0,
        }
    }

    pub fn total_width(&self) -> usize {
        self.total_width
    }

    pub fn field_index(&self, field: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == field)
    }
}

impl<'de> Deserialize<'de> for HeaderType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            name: String,
            fields: Vec<FieldSpec>,
        }
        let raw = Raw::deserialize(d)?;
        HeaderType::from_specs(raw.name, raw.fields).map_err(serde::de::Error::custom)
    }
}

/// A value of a [`HeaderType`]: every field bound and in range.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TypedValue {
    htype: Arc<HeaderType>,
    values: Vec<u64>,
}

fn fits(value: u64, width: usize) -> bool {
    width >= 64 || value >> width == 0
}

impl TypedValue {
    pub fn new(htype: Arc<HeaderType>, values: &[(&str, u64)]) -> Result<Self, FormatError> {
        let map: BTreeMap<String, u64> = values.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Self::from_map(htype, &map)
    }

    /// All-zero value of `htype`.
    pub fn zeroed(htype: Arc<HeaderType>) -> Self {
        let values = vec![0; htype.fields.len()];
        TypedValue { htype, values }
    }

    pub fn from_map(htype: Arc<HeaderType>, map: &BTreeMap<String, u64>) -> Result<Self, FormatError> {
        for k in map.keys() {
            if htype.field_index(k).is_none() {
                return Err(FormatError::UnknownField {
                    header: htype.name.clone(),
                    field: k.clone(),
                });
            }
        }
        let mut values = Vec::with_capacity(htype.fields.len());
        for f in &htype.fields {
            let v = *map.get(&f.name).ok_or_else(|| FormatError::MissingField {
                header: htype.name.clone(),
                field: f.name.clone(),
            })?;
            if !fits(v, f.width_bits) {
                return Err(FormatError::ValueOutOfRange {
                    field: f.name.clone(),
                    value: v,
                    width: f.width_bits,
                });
            }
            values.push(v);
        }
        Ok(TypedValue { htype, values })
    }

    /// Parses a JSON object keyed by field name.
    pub fn from_json(htype: Arc<HeaderType>, json: &serde_json::Value) -> Result<Self, FormatError> {
        let map: BTreeMap<String, u64> =
            serde_json::from_value(json.clone()).map_err(|e| FormatError::Schema(e.to_string()))?;
        Self::from_map(htype, &map)
    }

    pub fn htype(&self) -> &Arc<HeaderType> {
        &self.htype
    }

    pub fn get(&self, field: &str) -> Option<u64> {
        self.htype.field_index(field).map(|i| self.values[i])
    }

    pub fn set(&mut self, field: &str, value: u64) -> Result<(), FormatError> {
        let i = self.htype.field_index(field).ok_or_else(|| FormatError::UnknownField {
            header: self.htype.name.clone(),
            field: field.to_string(),
        })?;
        let width = self.htype.fields[i].width_bits;
        if !fits(value, width) {
            return Err(FormatError::ValueOutOfRange {
                field: field.to_string(),
                value,
                width,
            });
        }
        self.values[i] = value;
        Ok(())
    }

    pub fn to_map(&self) -> BTreeMap<String, u64> {
        self.htype
            .fields
            .iter()
            .zip(&self.values)
            .map(|(f, v)| (f.name.clone(), *v))
            .collect()
    }
}

impl fmt::Debug for TypedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.htype.name)?;
        f.debug_map()
            .entries(self.htype.fields.iter().map(|x| &x.name).zip(&self.values))
            .finish()
    }
}

impl Serialize for TypedValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_map().serialize(s)
    }
}

/// Fields in declaration order, each big-endian within its width.
pub fn encode(v: &TypedValue) -> BitString {
    let mut out = BitString::new();
    encode_into(v, &mut out);
    out
}

pub fn encode_into(v: &TypedValue, out: &mut BitString) {
    for (f, val) in v.htype.fields.iter().zip(&v.values) {
        out.push_uint(*val, f.width_bits);
    }
}

/// The input was shorter than what had to be consumed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParseFailure {
    pub needed: usize,
    pub available: usize,
}

/// Decodes a value of `htype` starting at bit `offset`.
pub fn extract_at(htype: &Arc<HeaderType>, p: &BitString, offset: usize) -> Result<TypedValue, ParseFailure> {
    let needed = htype.total_width();
    let available = p.len().saturating_sub(offset);
    if available < needed {
        return Err(ParseFailure { needed, available });
    }
    let mut pos = offset;
    let mut values = Vec::with_capacity(htype.fields.len());
    for f in &htype.fields {
        values.push(p.read_uint(pos, f.width_bits).expect("bounds checked"));
        pos += f.width_bits;
    }
    Ok(TypedValue {
        htype: htype.clone(),
        values,
    })
}

/// Consumes the first `total_width` bits of `p`. On failure `p` is left
/// to the caller untouched.
pub fn extract(htype: &Arc<HeaderType>, p: &BitString) -> Result<(TypedValue, BitString), ParseFailure> {
    let v = extract_at(htype, p, 0)?;
    let rest = p.suffix(htype.total_width()).expect("length checked");
    Ok((v, rest))
}

pub fn advance(p: &BitString, n: usize) -> Result<BitString, ParseFailure> {
    p.suffix(n).ok_or(ParseFailure {
        needed: n,
        available: p.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Binding {
    Value(TypedValue),
    Plain(BitString),
}

/// Bindings produced while matching; a name is bound at most once.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Environment {
    bindings: BTreeMap<String, Binding>,
}

impl Environment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: &str, b: Binding) -> Result<(), FormatError> {
        if self.bindings.contains_key(name) {
            return Err(FormatError::DuplicateBinding(name.to_string()));
        }
        self.bindings.insert(name.to_string(), b);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Binding> {
        self.bindings.get(name)
    }

    pub fn value(&self, name: &str) -> Option<&TypedValue> {
        match self.bindings.get(name) {
            Some(Binding::Value(v)) => Some(v),
            _ => None,
        }
    }

    pub fn plain(&self, name: &str) -> Option<&BitString> {
        match self.bindings.get(name) {
            Some(Binding::Plain(p)) => Some(p),
            _ => None,
        }
    }

    /// Field lookup for branch conditions.
    pub fn field(&self, name: &str, field: &str) -> Result<u64, FormatError> {
        let v = self
            .value(name)
            .ok_or_else(|| FormatError::UnresolvedCondition(name.to_string()))?;
        v.get(field).ok_or_else(|| FormatError::UnknownField {
            header: v.htype.name.clone(),
            field: field.to_string(),
        })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.bindings.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bindings.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn into_bindings(self) -> BTreeMap<String, Binding> {
        self.bindings
    }
}

type Predicate = dyn Fn(&Environment) -> Result<bool, FormatError> + Send + Sync;

/// Host-level branch predicate. `reads` lists the bindings it inspects;
/// they must all be bound to the left of the branch.
#[derive(Clone)]
pub struct Condition {
    label: String,
    reads: Vec<String>,
    pred: Arc<Predicate>,
}

impl Condition {
    pub fn new<F>(label: &str, reads: &[&str], pred: F) -> Self
    where
        F: Fn(&Environment) -> Result<bool, FormatError> + Send + Sync + 'static,
    {
        Condition {
            label: label.to_string(),
            reads: reads.iter().map(|s| s.to_string()).collect(),
            pred: Arc::new(pred),
        }
    }

    /// `binding.field == value`
    pub fn field_eq(binding: &str, field: &str, value: u64) -> Self {
        let (b, f) = (binding.to_string(), field.to_string());
        Condition::new(&format!("{binding}.{field}=={value}"), &[binding], move |env| {
            Ok(env.field(&b, &f)? == value)
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn reads(&self) -> &[String] {
        &self.reads
    }

    pub fn eval(&self, env: &Environment) -> Result<bool, FormatError> {
        for r in &self.reads {
            if !env.contains(r) {
                return Err(FormatError::UnresolvedCondition(r.clone()));
            }
        }
        (self.pred)(env)
    }
}

impl fmt::Debug for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Condition({})", self.label)
    }
}

#[derive(Clone, Debug)]
pub enum Format {
    Empty,
    /// Exactly the encoding of some value of the header type.
    ExactValue(String, Arc<HeaderType>),
    /// Any remaining bits. Only valid as the rightmost leaf.
    ExactPlain(String),
    Concat(Box<Format>, Box<Format>),
    Branch {
        cond: Condition,
        then: Box<Format>,
        otherwise: Box<Format>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Width {
    Bits(usize),
    Unbounded,
}

impl Format {
    pub fn value(name: &str, htype: &Arc<HeaderType>) -> Format {
        Format::ExactValue(name.to_string(), htype.clone())
    }

    pub fn plain(name: &str) -> Format {
        Format::ExactPlain(name.to_string())
    }

    pub fn concat(a: Format, b: Format) -> Format {
        Format::Concat(Box::new(a), Box::new(b))
    }

    pub fn branch(cond: Condition, then: Format, otherwise: Format) -> Format {
        Format::Branch {
            cond,
            then: Box::new(then),
            otherwise: Box::new(otherwise),
        }
    }

    /// Right-nested concatenation of `parts`; `Empty` when none.
    pub fn seq(parts: Vec<Format>) -> Format {
        let mut it = parts.into_iter().rev();
        let Some(last) = it.next() else {
            return Format::Empty;
        };
        it.fold(last, |acc, f| Format::concat(f, acc))
    }

    /// Checks binding uniqueness along every path, that every branch reads
    /// only names bound to its left, and that `ExactPlain` is terminal.
    pub fn validate(&self) -> Result<(), FormatError> {
        let mut seen = HashSet::new();
        self.validate_inner(&mut seen, true)
    }

    fn validate_inner(&self, seen: &mut HashSet<String>, terminal: bool) -> Result<(), FormatError> {
        match self {
            Format::Empty => Ok(()),
            Format::ExactValue(n, _) => {
                if !seen.insert(n.clone()) {
                    return Err(FormatError::DuplicateBinding(n.clone()));
                }
                Ok(())
            }
            Format::ExactPlain(n) => {
                if !terminal {
                    return Err(FormatError::IllFormedFormat(format!(
                        "plain binding `{n}` is not in terminal position"
                    )));
                }
                if !seen.insert(n.clone()) {
                    return Err(FormatError::DuplicateBinding(n.clone()));
                }
                Ok(())
            }
            Format::Concat(a, b) => {
                a.validate_inner(seen, false)?;
                b.validate_inner(seen, terminal)
            }
            Format::Branch { cond, then, otherwise } => {
                for r in cond.reads() {
                    if !seen.contains(r) {
                        return Err(FormatError::DependencyOrder {
                            condition: cond.label().to_string(),
                            name: r.clone(),
                        });
                    }
                }
                let mut alt = seen.clone();
                then.validate_inner(seen, terminal)?;
                otherwise.validate_inner(&mut alt, terminal)?;
                seen.extend(alt);
                Ok(())
            }
        }
    }
}

pub fn format_width(f: &Format, env: &Environment) -> Result<Width, FormatError> {
    Ok(match f {
        Format::Empty => Width::Bits(0),
        Format::ExactValue(_, t) => Width::Bits(t.total_width()),
        Format::ExactPlain(_) => Width::Unbounded,
        Format::Concat(a, b) => match (format_width(a, env)?, format_width(b, env)?) {
            (Width::Bits(x), Width::Bits(y)) => Width::Bits(x + y),
            _ => Width::Unbounded,
        },
        Format::Branch { cond, then, otherwise } => {
            if cond.eval(env)? {
                format_width(then, env)?
            } else {
                format_width(otherwise, env)?
            }
        }
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MatchOutcome {
    Matched(Environment),
    /// The bit offset where the first failing leaf begins.
    Mismatch {
        offset: usize,
        partial: Environment,
    },
}

impl MatchOutcome {
    pub fn is_match(&self) -> bool {
        matches!(self, MatchOutcome::Matched(_))
    }
}

/// Decides `p ⊨ f`, returning all bindings on success.
pub fn matches(p: &BitString, f: &Format) -> Result<(bool, Environment), FormatError> {
    Ok(match match_packet(p, f)? {
        MatchOutcome::Matched(env) => (true, env),
        MatchOutcome::Mismatch { partial, .. } => (false, partial),
    })
}

pub fn match_packet(p: &BitString, f: &Format) -> Result<MatchOutcome, FormatError> {
    let mut env = Environment::new();
    Ok(match match_segment(f, p, 0, p.len(), &mut env)? {
        None => MatchOutcome::Matched(env),
        Some(offset) => MatchOutcome::Mismatch { offset, partial: env },
    })
}

// Matches bits [start, end) of `p` against the formats on `pending`, top
// first. Concatenations push both halves and branches push the chosen arm,
// so every split point is fixed by the header widths seen so far. Returns
// the failure offset, if any.
fn match_segment(
    f: &Format,
    p: &BitString,
    mut start: usize,
    end: usize,
    env: &mut Environment,
) -> Result<Option<usize>, FormatError> {
    let mut pending = vec![f];
    while let Some(f) = pending.pop() {
        match f {
            Format::Empty => {}
            Format::ExactValue(n, t) => {
                let w = t.total_width();
                let fits = if pending.is_empty() {
                    end - start == w
                } else {
                    end - start >= w
                };
                if !fits {
                    return Ok(Some(start));
                }
                let v = extract_at(t, p, start).expect("length checked");
                env.bind(n, Binding::Value(v))?;
                start += w;
            }
            Format::ExactPlain(n) => {
                if !pending.is_empty() {
                    return Err(FormatError::IllFormedFormat(format!(
                        "plain binding `{n}` is not in terminal position"
                    )));
                }
                let rest = p.slice(start, end - start).expect("in bounds");
                env.bind(n, Binding::Plain(rest))?;
                start = end;
            }
            Format::Concat(a, b) => {
                pending.push(b);
                pending.push(a);
            }
            Format::Branch { cond, then, otherwise } => {
                pending.push(if cond.eval(env)? { then } else { otherwise });
            }
        }
    }
    Ok((start != end).then_some(start))
}

/// Re-encodes the bindings of `env` in format order. Inverse of a
/// successful match.
pub fn reconstruct(f: &Format, env: &Environment) -> Result<BitString, FormatError> {
    let mut out = BitString::new();
    reconstruct_into(f, env, &mut out)?;
    Ok(out)
}

fn reconstruct_into(f: &Format, env: &Environment, out: &mut BitString) -> Result<(), FormatError> {
    match f {
        Format::Empty => Ok(()),
        Format::ExactValue(n, _) => {
            let v = env
                .value(n)
                .ok_or_else(|| FormatError::UnresolvedCondition(n.clone()))?;
            encode_into(v, out);
            Ok(())
        }
        Format::ExactPlain(n) => {
            let b = env
                .plain(n)
                .ok_or_else(|| FormatError::UnresolvedCondition(n.clone()))?;
            out.append(b);
            Ok(())
        }
        Format::Concat(a, b) => {
            reconstruct_into(a, env, out)?;
            reconstruct_into(b, env, out)
        }
        Format::Branch { cond, then, otherwise } => {
            if cond.eval(env)? {
                reconstruct_into(then, env, out)
            } else {
                reconstruct_into(otherwise, env, out)
            }
        }
    }
}
