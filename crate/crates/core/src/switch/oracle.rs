//! Decision sources for the switch's nondeterministic choices.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engines::{EgressEntry, EgressMeta};
use crate::switch::trace::{Decisions, StepKind, TraceStep};
use crate::switch::World;

pub trait Oracle {
    fn step_kind(&mut self, w: &World) -> StepKind;
    fn input_index(&mut self, len: usize) -> usize;
    /// Admission mask for `ms`; `mandatory` marks copies the policy
    /// requires.
    fn admitted(&mut self, ms: &[EgressMeta], mandatory: &[bool]) -> Vec<bool>;
    fn sched_index(&mut self, q: &[EgressEntry]) -> usize;
}

/// Oldest-first everywhere, egress whenever possible, admits everything.
#[derive(Clone, Debug, Default)]
pub struct FifoDrain;

impl Oracle for FifoDrain {
    fn step_kind(&mut self, _w: &World) -> StepKind {
        StepKind::Egress
    }

    fn input_index(&mut self, _len: usize) -> usize {
        0
    }

    fn admitted(&mut self, ms: &[EgressMeta], _mandatory: &[bool]) -> Vec<bool> {
        vec![true; ms.len()]
    }

    fn sched_index(&mut self, _q: &[EgressEntry]) -> usize {
        0
    }
}

/// Uniform choices from a seeded generator. Optional copies are admitted
/// with probability `keep`.
#[derive(Clone, Debug)]
pub struct RandomOracle {
    rng: ChaCha8Rng,
    pub egress_bias: f64,
    pub keep: f64,
}

impl RandomOracle {
    pub fn new(seed: u64) -> Self {
        RandomOracle {
            rng: ChaCha8Rng::seed_from_u64(seed),
            egress_bias: 0.5,
            keep: 0.5,
        }
    }
}

impl Oracle for RandomOracle {
    fn step_kind(&mut self, _w: &World) -> StepKind {
        if self.rng.gen_bool(self.egress_bias) {
            StepKind::Egress
        } else {
            StepKind::Ingress
        }
    }

    fn input_index(&mut self, len: usize) -> usize {
        self.rng.gen_range(0..len)
    }

    fn admitted(&mut self, _ms: &[EgressMeta], mandatory: &[bool]) -> Vec<bool> {
        mandatory.iter().map(|&m| m || self.rng.gen_bool(self.keep)).collect()
    }

    fn sched_index(&mut self, q: &[EgressEntry]) -> usize {
        self.rng.gen_range(0..q.len())
    }
}

/// Random step and index choices; admits only what the policy forces.
#[derive(Clone, Debug)]
pub struct AdversarialDrop {
    inner: RandomOracle,
}

impl AdversarialDrop {
    pub fn new(seed: u64) -> Self {
        AdversarialDrop {
            inner: RandomOracle::new(seed),
        }
    }
}

impl Oracle for AdversarialDrop {
    fn step_kind(&mut self, w: &World) -> StepKind {
        self.inner.step_kind(w)
    }

    fn input_index(&mut self, len: usize) -> usize {
        self.inner.input_index(len)
    }

    fn admitted(&mut self, _ms: &[EgressMeta], mandatory: &[bool]) -> Vec<bool> {
        mandatory.to_vec()
    }

    fn sched_index(&mut self, q: &[EgressEntry]) -> usize {
        self.inner.sched_index(q)
    }
}

/// Replays the decisions recorded in a trace. Exhausted or missing
/// decisions fall back to the [`FifoDrain`] choice.
#[derive(Clone, Debug, Default)]
pub struct ReplayOracle {
    steps: VecDeque<Decisions>,
    current: Decisions,
}

impl ReplayOracle {
    pub fn new<'a>(steps: impl IntoIterator<Item = &'a TraceStep>) -> Self {
        ReplayOracle {
            steps: steps.into_iter().map(|s| s.decisions.clone()).collect(),
            current: Decisions::default(),
        }
    }
}

impl Oracle for ReplayOracle {
    fn step_kind(&mut self, _w: &World) -> StepKind {
        self.current = self.steps.pop_front().unwrap_or_default();
        self.current.requested
    }

    fn input_index(&mut self, _len: usize) -> usize {
        self.current.input_index.unwrap_or(0)
    }

    fn admitted(&mut self, ms: &[EgressMeta], _mandatory: &[bool]) -> Vec<bool> {
        self.current.admitted.clone().unwrap_or_else(|| vec![true; ms.len()])
    }

    fn sched_index(&mut self, _q: &[EgressEntry]) -> usize {
        self.current.sched_index.unwrap_or(0)
    }
}

/// Oracle named on the command line.
pub fn by_name(name: &str, seed: u64) -> Option<Box<dyn Oracle>> {
    Some(match name {
        "fifo-drain" => Box::new(FifoDrain),
        "random" => Box::new(RandomOracle::new(seed)),
        "adversarial-drop" => Box::new(AdversarialDrop::new(seed)),
        _ => return None,
    })
}
