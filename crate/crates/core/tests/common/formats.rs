//! Random well-formed formats, packets that satisfy them, and a
//! brute-force matcher that tries every split of every concatenation.

use std::sync::Arc;

use rand::Rng;

use swmodel::format::{encode, Binding, Condition, Environment, Format, HeaderType, TypedValue};
use swmodel::BitString;

pub fn random_bits(r: &mut impl Rng, len: usize) -> BitString {
    let mut b = BitString::new();
    for _ in 0..len {
        b.push_bit(r.gen());
    }
    b
}

fn random_htype(r: &mut impl Rng, id: usize) -> Arc<HeaderType> {
    let n = r.gen_range(1..=3);
    let fields: Vec<(String, usize)> = (0..n).map(|i| (format!("f{i}"), r.gen_range(1..=4))).collect();
    let refs: Vec<(&str, usize)> = fields.iter().map(|(n, w)| (n.as_str(), *w)).collect();
    Arc::new(HeaderType::new(&format!("h{id}"), &refs).unwrap())
}

struct Gen<'a, R> {
    r: &'a mut R,
    next: usize,
    leaves: usize,
}

impl<R: Rng> Gen<'_, R> {
    fn name(&mut self) -> String {
        self.next += 1;
        format!("b{}", self.next)
    }

    // `bound` holds value bindings available on every path to this point.
    fn format(&mut self, depth: u32, bound: &mut Vec<(String, Arc<HeaderType>)>, terminal: bool) -> Format {
        let budget = self.leaves < 4;
        let pick = if depth == 0 || !budget {
            self.r.gen_range(0..3)
        } else {
            self.r.gen_range(0..5)
        };
        match pick {
            0 => Format::Empty,
            1 if terminal && budget => {
                self.leaves += 1;
                Format::plain(&self.name())
            }
            1 | 2 if budget => {
                self.leaves += 1;
                let t = random_htype(self.r, self.next);
                let n = self.name();
                bound.push((n.clone(), t.clone()));
                Format::value(&n, &t)
            }
            1 | 2 => Format::Empty,
            3 => {
                let a = self.format(depth - 1, bound, false);
                let b = self.format(depth - 1, bound, terminal);
                Format::concat(a, b)
            }
            _ => {
                let Some((n, t)) = (!bound.is_empty()).then(|| bound[self.r.gen_range(0..bound.len())].clone()) else {
                    return self.format(depth - 1, bound, terminal);
                };
                let field = &t.fields[self.r.gen_range(0..t.fields.len())];
                let value = self.r.gen_range(0..(1u64 << field.width_bits.min(2)));
                let cond = Condition::field_eq(&n, &field.name, value);
                let mut b1 = bound.clone();
                let mut b2 = bound.clone();
                let then = self.format(depth - 1, &mut b1, terminal);
                let otherwise = self.format(depth - 1, &mut b2, terminal);
                Format::branch(cond, then, otherwise)
            }
        }
    }
}

/// A valid format of depth at most 4 with at most 4 leaf bindings.
pub fn random_format(r: &mut impl Rng) -> Format {
    let mut g = Gen { r, next: 0, leaves: 0 };
    let f = g.format(4, &mut Vec::new(), true);
    f.validate().expect("generator yields valid formats");
    f
}

/// A packet satisfying `f`, built leaf by leaf.
pub fn satisfying(r: &mut impl Rng, f: &Format) -> BitString {
    let mut env = Environment::new();
    let mut out = BitString::new();
    build(r, f, &mut env, &mut out);
    out
}

fn build(r: &mut impl Rng, f: &Format, env: &mut Environment, out: &mut BitString) {
    match f {
        Format::Empty => {}
        Format::ExactValue(n, t) => {
            let values: Vec<(String, u64)> = t
                .fields
                .iter()
                .map(|fs| (fs.name.clone(), r.gen_range(0..(1u64 << fs.width_bits))))
                .collect();
            let refs: Vec<(&str, u64)> = values.iter().map(|(n, v)| (n.as_str(), *v)).collect();
            let v = TypedValue::new(t.clone(), &refs).unwrap();
            out.append(&encode(&v));
            env.bind(n, Binding::Value(v)).unwrap();
        }
        Format::ExactPlain(n) => {
            let len = r.gen_range(0..12);
            let bits = random_bits(r, len);
            out.append(&bits);
            env.bind(n, Binding::Plain(bits)).unwrap();
        }
        Format::Concat(a, b) => {
            build(r, a, env, out);
            build(r, b, env, out);
        }
        Format::Branch { cond, then, otherwise } => {
            if cond.eval(env).unwrap() {
                build(r, then, env, out)
            } else {
                build(r, otherwise, env, out)
            }
        }
    }
}

/// Every environment under which `p` satisfies `f`, trying every split of
/// every concatenation.
pub fn brute_force(p: &BitString, f: &Format) -> Vec<Environment> {
    let mut out = Vec::new();
    brute(p, f, Environment::new(), &mut out);
    out
}

fn brute(p: &BitString, f: &Format, env: Environment, out: &mut Vec<Environment>) {
    match f {
        Format::Empty => {
            if p.is_empty() {
                out.push(env);
            }
        }
        Format::ExactValue(n, t) => {
            if p.len() != t.total_width() {
                return;
            }
            let mut offset = 0;
            let mut values = Vec::new();
            for fs in &t.fields {
                let mut v = 0u64;
                for i in 0..fs.width_bits {
                    v = (v << 1) | p.bit(offset + i) as u64;
                }
                offset += fs.width_bits;
                values.push((fs.name.as_str(), v));
            }
            let mut env = env;
            if env
                .bind(n, Binding::Value(TypedValue::new(t.clone(), &values).unwrap()))
                .is_ok()
            {
                out.push(env);
            }
        }
        Format::ExactPlain(n) => {
            let mut env = env;
            if env.bind(n, Binding::Plain(p.clone())).is_ok() {
                out.push(env);
            }
        }
        Format::Concat(a, b) => {
            for k in 0..=p.len() {
                let (l, rest) = p.split_at(k).unwrap();
                let mut left = Vec::new();
                brute(&l, a, env.clone(), &mut left);
                for e in left {
                    brute(&rest, b, e, out);
                }
            }
        }
        Format::Branch { cond, then, otherwise } => match cond.eval(&env) {
            Ok(true) => brute(p, then, env, out),
            Ok(false) => brute(p, otherwise, env, out),
            Err(_) => {}
        },
    }
}

/// A satisfying packet, or one damaged by a bit flip, truncation or
/// extension, or plain noise.
pub fn probe(r: &mut impl Rng, f: &Format) -> BitString {
    let mut p = satisfying(r, f);
    match r.gen_range(0..5) {
        0 if !p.is_empty() => p.flip_bit(r.gen_range(0..p.len())),
        1 if !p.is_empty() => p = p.slice(0, r.gen_range(0..p.len())).unwrap(),
        2 => {
            let n = r.gen_range(1..6);
            p.append(&random_bits(r, n));
        }
        3 => {
            let n = r.gen_range(0..40);
            p = random_bits(r, n)
        }
        _ => {}
    }
    if p.len() > 64 {
        p = p.slice(0, 64).unwrap();
    }
    p
}
