//! The interface a plannable domain implements, and the seeded random
//! source every stochastic component draws from.

use std::collections::hash_map::DefaultHasher;
use std::fmt::Debug;
use std::hash::{Hash, Hasher};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::program::{ActionTerm, Atom, Query};
use crate::semantics::{self, Substitution, SubstitutionSet};

/// Seeded ChaCha8 stream. Identical seeds give identical draws on every
/// platform: all integer draws go through `u64`.
#[derive(Clone, Debug)]
pub struct RandomSource {
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn from_seed(seed: u64) -> RandomSource {
        RandomSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Seed of the `index`-th independent stream under `master` (SplitMix64 mix).
    pub fn derive_seed(master: u64, index: u64) -> u64 {
        let mut z = master
            .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn derive(master: u64, index: u64) -> RandomSource {
        RandomSource::from_seed(RandomSource::derive_seed(master, index))
    }

    /// Splits off an independent stream, advancing this one by one draw.
    pub fn fork(&mut self) -> RandomSource {
        RandomSource::from_seed(self.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        self.rng.random_range(0..n as u64) as usize
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> Option<&'a T> {
        if items.is_empty() {
            None
        } else {
            Some(&items[self.below(items.len())])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("illegal action `{0}`")]
    IllegalAction(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("unsafe query: {0}")]
    UnsafeQuery(String),
    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),
    #[error("{0}")]
    Other(String),
}

/// A generative model together with its reward and query vocabulary.
///
/// `simulate` receives its randomness explicitly; implementations keep no
/// hidden mutable state, so a domain can be shared read-only between
/// concurrent searches.
pub trait GenerativeDomain {
    type State: Clone + Eq + Hash + Debug;

    /// Samples one successor of `s` under ground action `a`.
    fn simulate(
        &self,
        s: &Self::State,
        a: &ActionTerm,
        rng: &mut RandomSource,
    ) -> Result<Self::State, DomainError>;

    fn reward(&self, s: &Self::State) -> f64;

    /// Every ground action applicable in `s`.
    fn ground_actions(&self, s: &Self::State) -> Vec<ActionTerm>;

    /// Substitutions for the variables of a single atom under which it holds
    /// in `s`. A ground atom that holds yields exactly the empty substitution.
    fn eval_atom(&self, atom: &Atom, s: &Self::State) -> Result<Vec<Substitution>, DomainError>;

    /// Predicates the domain answers, as sample atoms (used by conformance
    /// checks).
    fn query_vocabulary(&self) -> Vec<Atom> {
        Vec::new()
    }

    fn eval_query(&self, q: &Query, s: &Self::State) -> Result<SubstitutionSet, DomainError>
    where
        Self: Sized,
    {
        semantics::eval_query(self, q, s)
    }

    fn state_equal(&self, a: &Self::State, b: &Self::State) -> bool {
        a == b
    }

    fn state_digest(&self, s: &Self::State) -> u64 {
        let mut h = DefaultHasher::new();
        s.hash(&mut h);
        h.finish()
    }
}

/// Interface contract that a conformance run checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    SimulateDeterminism,
    RewardDeterminism,
    GroundQuery,
    QueryBindings,
    StateEquality,
    DigestConsistency,
}

impl std::fmt::Display for Clause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Clause::SimulateDeterminism => "simulate-determinism",
            Clause::RewardDeterminism => "reward-determinism",
            Clause::GroundQuery => "ground-query",
            Clause::QueryBindings => "query-bindings",
            Clause::StateEquality => "state-equality",
            Clause::DigestConsistency => "digest-consistency",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConformanceError {
    #[error("contract violation ({clause}): {detail}")]
    ContractViolation { clause: Clause, detail: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConformanceReport {
    pub trials: usize,
    pub transitions_checked: usize,
    pub queries_checked: usize,
    pub states_visited: usize,
}

fn violation(clause: Clause, detail: impl Into<String>) -> ConformanceError {
    ConformanceError::ContractViolation {
        clause,
        detail: detail.into(),
    }
}

/// Samples a random walk from `start` and checks the interface contracts
/// along it.
pub fn conformance_check<D: GenerativeDomain>(
    dom: &D,
    start: &D::State,
    trials: usize,
    rng: &mut RandomSource,
) -> Result<ConformanceReport, ConformanceError> {
    assert!(trials >= 1, "conformance_check needs at least one trial");
    let mut report = ConformanceReport {
        trials,
        ..Default::default()
    };
    let mut state = start.clone();
    let vocabulary = dom.query_vocabulary();

    for trial in 0..trials {
        report.states_visited += 1;
        let r1 = dom.reward(&state);
        let r2 = dom.reward(&state);
        if r1.to_bits() != r2.to_bits() || !r1.is_finite() {
            return Err(violation(
                Clause::RewardDeterminism,
                format!("trial {trial}: reward gave {r1} then {r2}"),
            ));
        }

        let truth = dom.eval_query(&Query::truth(), &state)?;
        if truth != SubstitutionSet::unit() {
            return Err(violation(
                Clause::GroundQuery,
                format!("`true` evaluated to {truth:?}"),
            ));
        }
        for atom in &vocabulary {
            let subs = dom.eval_atom(atom, &state)?;
            report.queries_checked += 1;
            let vars: Vec<_> = atom.variables().cloned().collect();
            for theta in &subs {
                if atom.is_ground() && !theta.is_empty() {
                    return Err(violation(
                        Clause::GroundQuery,
                        format!("ground atom `{atom}` produced a non-empty substitution"),
                    ));
                }
                if !vars.iter().all(|v| theta.get(v).is_some_and(|t| t.is_ground())) {
                    return Err(violation(
                        Clause::QueryBindings,
                        format!("`{atom}` produced {theta} which leaves a variable unbound"),
                    ));
                }
            }
        }

        let actions = dom.ground_actions(&state);
        let Some(action) = rng.choose(&actions).cloned() else {
            break;
        };
        let seed = rng.next_u64();
        let a = dom.simulate(&state, &action, &mut RandomSource::from_seed(seed))?;
        let b = dom.simulate(&state, &action, &mut RandomSource::from_seed(seed))?;
        report.transitions_checked += 1;
        if !dom.state_equal(&a, &b) {
            return Err(violation(
                Clause::SimulateDeterminism,
                format!("trial {trial}: `{action}` under seed {seed} diverged"),
            ));
        }
        if !dom.state_equal(&a, &a) || dom.state_equal(&a, &state) != dom.state_equal(&state, &a) {
            return Err(violation(
                Clause::StateEquality,
                format!("trial {trial}: state_equal is not reflexive/symmetric"),
            ));
        }
        if dom.state_digest(&a) != dom.state_digest(&b) {
            return Err(violation(
                Clause::DigestConsistency,
                format!("trial {trial}: equal states hashed differently"),
            ));
        }
        state = a;
    }
    Ok(report)
}
