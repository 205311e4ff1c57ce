//! Toy domains, program generators and independent oracles shared by the
//! integration test targets.
#![allow(dead_code)]


use std::sync::atomic::{AtomicU64, Ordering};

use mcap::domain::{DomainError, GenerativeDomain, RandomSource};
use mcap::program::{ActionTerm, Atom, Literal, Program, Query, Term};
use mcap::rescue::{apply_action, generate_initial, inject_unexpected_event, legal_actions, RescueConfig, RescueState};
use mcap::semantics::Substitution;

/// Deterministic counter; every state is worth `reward`.
pub struct Chain {
    pub reward: f64,
}

impl GenerativeDomain for Chain {
    type State = u32;
    fn simulate(&self, s: &u32, _: &ActionTerm, _: &mut RandomSource) -> Result<u32, DomainError> {
        Ok(s + 1)
    }
    fn reward(&self, _: &u32) -> f64 {
        self.reward
    }
    fn ground_actions(&self, _: &u32) -> Vec<ActionTerm> {
        vec![Atom::nullary("next")]
    }
    fn eval_atom(&self, a: &Atom, _: &u32) -> Result<Vec<Substitution>, DomainError> {
        Err(DomainError::UnknownPredicate(a.to_string()))
    }
}

/// Two states, low (`false`, reward 0) and high (`true`, reward 1).
/// `stay` keeps the state w.p. `p_stay`; `go` flips it w.p. `p_go`.
pub struct TwoState {
    pub p_stay: f64,
    pub p_go: f64,
    pub scale: f64,
}

impl TwoState {
    pub fn new() -> TwoState {
        TwoState {
            p_stay: 0.95,
            p_go: 0.95,
            scale: 1.0,
        }
    }

    /// Probability of reaching `high` from `s` under `a`.
    pub fn p_high(&self, s: bool, a: &str) -> f64 {
        match (a, s) {
            ("stay", true) => self.p_stay,
            ("stay", false) => 1.0 - self.p_stay,
            ("go", true) => 1.0 - self.p_go,
            ("go", false) => self.p_go,
            _ => unreachable!(),
        }
    }
}

impl GenerativeDomain for TwoState {
    type State = bool;
    fn simulate(&self, s: &bool, a: &ActionTerm, rng: &mut RandomSource) -> Result<bool, DomainError> {
        let p = self.p_high(*s, &a.name);
        Ok(rng.unit() < p)
    }
    fn reward(&self, s: &bool) -> f64 {
        if *s {
            self.scale
        } else {
            0.0
        }
    }
    fn ground_actions(&self, _: &bool) -> Vec<ActionTerm> {
        vec![Atom::nullary("go"), Atom::nullary("stay")]
    }
    fn eval_atom(&self, a: &Atom, s: &bool) -> Result<Vec<Substitution>, DomainError> {
        match &*a.name {
            "high" => Ok(if *s { vec![Substitution::empty()] } else { vec![] }),
            _ => Err(DomainError::UnknownPredicate(a.to_string())),
        }
    }
}

/// Counter domain with `k` actions; successor is random in `0..width`.
/// Rewards are in `[0, 1]`.
pub struct Grid {
    pub width: u32,
    pub actions: usize,
}

impl GenerativeDomain for Grid {
    type State = u32;
    fn simulate(&self, s: &u32, a: &ActionTerm, rng: &mut RandomSource) -> Result<u32, DomainError> {
        let shift = a.name.len() as u32;
        Ok((s + shift + rng.below(self.width as usize) as u32) % self.width)
    }
    fn reward(&self, s: &u32) -> f64 {
        *s as f64 / (self.width - 1).max(1) as f64
    }
    fn ground_actions(&self, _: &u32) -> Vec<ActionTerm> {
        (0..self.actions).map(|i| Atom::nullary(&"a".repeat(i + 1))).collect()
    }
    fn eval_atom(&self, a: &Atom, s: &u32) -> Result<Vec<Substitution>, DomainError> {
        match &*a.name {
            "even" => Ok(if s % 2 == 0 { vec![Substitution::empty()] } else { vec![] }),
            _ => Err(DomainError::UnknownPredicate(a.to_string())),
        }
    }
}

/// Any domain with its reward multiplied by `factor`.
pub struct Scaled<'a, D> {
    pub inner: &'a D,
    pub factor: f64,
}

impl<D: GenerativeDomain> GenerativeDomain for Scaled<'_, D> {
    type State = D::State;
    fn simulate(&self, s: &D::State, a: &ActionTerm, rng: &mut RandomSource) -> Result<D::State, DomainError> {
        self.inner.simulate(s, a, rng)
    }
    fn reward(&self, s: &D::State) -> f64 {
        self.factor * self.inner.reward(s)
    }
    fn ground_actions(&self, s: &D::State) -> Vec<ActionTerm> {
        self.inner.ground_actions(s)
    }
    fn eval_atom(&self, a: &Atom, s: &D::State) -> Result<Vec<Substitution>, DomainError> {
        self.inner.eval_atom(a, s)
    }
}

/// A deliberately broken domain whose reward changes on every call.
pub struct DriftingReward {
    pub calls: AtomicU64,
}

impl GenerativeDomain for DriftingReward {
    type State = u8;
    fn simulate(&self, s: &u8, _: &ActionTerm, _: &mut RandomSource) -> Result<u8, DomainError> {
        Ok(*s)
    }
    fn reward(&self, _: &u8) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed) as f64
    }
    fn ground_actions(&self, _: &u8) -> Vec<ActionTerm> {
        vec![Atom::nullary("wait")]
    }
    fn eval_atom(&self, a: &Atom, _: &u8) -> Result<Vec<Substitution>, DomainError> {
        Err(DomainError::UnknownPredicate(a.to_string()))
    }
}

pub const ALPHABET: [&str; 4] = ["a", "b", "c", "d"];

pub fn act(name: &str) -> Program {
    Program::act(Atom::nullary(name))
}

pub fn leaf_count(p: &Program) -> usize {
    match p {
        Program::Epsilon | Program::Act(_) | Program::AnyAction => 1,
        Program::Seq(a, b) | Program::Par(a, b) => leaf_count(a) + leaf_count(b),
        Program::Choice(items) => items.iter().map(leaf_count).sum(),
        Program::Cond(_, b) | Program::NegCond(_, b) | Program::Loop(_, b) => leaf_count(b),
    }
}

/// Every binary `; + ||` tree with exactly `n` leaves over the alphabet.
pub fn all_trees(n: usize) -> Vec<Program> {
    if n == 1 {
        return ALPHABET.iter().map(|a| act(a)).collect();
    }
    let mut out = Vec::new();
    for k in 1..n {
        let left = all_trees(k);
        let right = all_trees(n - k);
        for l in &left {
            for r in &right {
                out.push(Program::seq(l.clone(), r.clone()));
                out.push(Program::choice([l.clone(), r.clone()]));
                out.push(Program::par(l.clone(), r.clone()));
            }
        }
    }
    out
}

/// Random condition-free tree of depth at most `depth`, no `eps`.
pub fn random_tree(rng: &mut RandomSource, depth: usize) -> Program {
    if depth == 0 || rng.below(4) == 0 {
        return act(ALPHABET[rng.below(ALPHABET.len())]);
    }
    let l = random_tree(rng, depth - 1);
    let r = random_tree(rng, depth - 1);
    match rng.below(3) {
        0 => Program::seq(l, r),
        1 => Program::choice([l, r]),
        _ => Program::par(l, r),
    }
}

/// Rescue world after a random walk of `steps` legal actions.
pub fn random_rescue_state(cfg: &RescueConfig, rng: &mut RandomSource, steps: usize) -> RescueState {
    let mut s = generate_initial(cfg, rng).expect("valid config");
    for _ in 0..steps {
        let acts = legal_actions(&s, cfg);
        let a = acts[rng.below(acts.len())];
        s = apply_action(&s, a, cfg, rng).expect("legal action");
        if rng.below(10) == 0 {
            s = inject_unexpected_event(&s, rng);
        }
    }
    s
}

/// Walks that favour lifting, so victims end up carried.
pub fn loaded_rescue_state(cfg: &RescueConfig, rng: &mut RandomSource, steps: usize) -> RescueState {
    let mut s = generate_initial(cfg, rng).expect("valid config");
    for _ in 0..steps {
        let acts = legal_actions(&s, cfg);
        let lift = acts.iter().find(|a| matches!(a, mcap::rescue::RescueAction::Lift(_)));
        let a = match lift {
            Some(l) if rng.below(4) != 0 => *l,
            _ => acts[rng.below(acts.len())],
        };
        s = apply_action(&s, a, cfg, rng).expect("legal action");
    }
    s
}

fn pick<'a>(rng: &mut RandomSource, xs: &[&'a str]) -> &'a str {
    xs[rng.below(xs.len())]
}

fn victim_term(rng: &mut RandomSource, cfg: &RescueConfig, vars: &[&str]) -> Term {
    if !vars.is_empty() && rng.below(3) != 0 {
        Term::var(pick(rng, vars))
    } else {
        Term::constant(&format!("v{}", rng.below(cfg.victims.max(1))))
    }
}

/// Random conjunction over the rescue vocabulary. Negated literals come after
/// the positive ones and only use variables those bind.
pub fn random_rescue_query(rng: &mut RandomSource, cfg: &RescueConfig) -> Query {
    let mut lits = Vec::new();
    let mut bound: Vec<&str> = Vec::new();
    for _ in 0..1 + rng.below(2) {
        let atom = match rng.below(6) {
            0 => Atom::nullary("at_safe"),
            1 => Atom::nullary("burning_here"),
            2 => Atom::nullary("has_capacity"),
            3 => Atom::nullary("true"),
            k => {
                let v = pick(rng, &["V", "W"]);
                let t = victim_term(rng, cfg, &[v]);
                if matches!(t, Term::Var(_)) {
                    bound.push(v);
                }
                Atom::new(if k == 4 { "carrying" } else { "victim_here" }, [t])
            }
        };
        lits.push(Literal::pos(atom));
    }
    if rng.below(2) == 0 {
        let atom = match rng.below(4) {
            0 => Atom::nullary("at_safe"),
            1 => Atom::nullary("has_capacity"),
            2 => Atom::new("carrying", [victim_term(rng, cfg, &bound)]),
            _ => Atom::new("victim_here", [victim_term(rng, cfg, &bound)]),
        };
        lits.push(Literal::neg(atom));
    }
    Query::new(lits)
}

fn random_rescue_action(rng: &mut RandomSource, cfg: &RescueConfig) -> Program {
    let p = |rng: &mut RandomSource| Term::constant(&format!("p{}", rng.below(cfg.positions)));
    let a = match rng.below(6) {
        0 => Atom::new("move", [p(rng)]),
        1 => Atom::new("extinguish", [p(rng)]),
        2 => Atom::new("lift", [victim_term(rng, cfg, &["V"])]),
        3 => Atom::new("drop", [victim_term(rng, cfg, &["V", "W"])]),
        4 => Atom::nullary("noop"),
        _ => return Program::AnyAction,
    };
    Program::act(a)
}

/// Random program over the rescue vocabulary, with loops and both
/// conditionals, depth at most `depth`.
pub fn random_rescue_program(rng: &mut RandomSource, cfg: &RescueConfig, depth: usize) -> Program {
    if depth <= 1 || rng.below(5) == 0 {
        return if rng.below(12) == 0 {
            Program::Epsilon
        } else {
            random_rescue_action(rng, cfg)
        };
    }
    let sub = |rng: &mut RandomSource| random_rescue_program(rng, cfg, depth - 1);
    match rng.below(7) {
        0 => Program::seq(sub(rng), sub(rng)),
        1 => {
            let n = 2 + rng.below(2);
            Program::choice((0..n).map(|_| sub(rng)).collect::<Vec<_>>())
        }
        2 => Program::par(sub(rng), sub(rng)),
        3 => Program::cond(random_rescue_query(rng, cfg), sub(rng)),
        4 => Program::neg_cond(random_rescue_query(rng, cfg), sub(rng)),
        5 => Program::while_loop(random_rescue_query(rng, cfg), sub(rng)),
        _ => Program::seq(random_rescue_action(rng, cfg), sub(rng)),
    }
}

/// Small rescue world used where many states are needed.
pub fn small_rescue() -> RescueConfig {
    RescueConfig {
        positions: 8,
        safe_count: 2,
        victims: 4,
        fires: 3,
        capacity: 2,
        ..RescueConfig::default()
    }
}
