//! The rescue benchmark: a robot on a position graph carries victims to safe
//! positions while fires spread and die out.

use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{DomainError, GenerativeDomain, RandomSource};
use crate::parser::parse_program;
use crate::program::{ActionTerm, Atom, Program, Term};
use crate::semantics::Substitution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RescueConfig {
    pub positions: usize,
    pub connectivity: f64,
    pub safe_count: usize,
    pub victims: usize,
    pub fires: usize,
    pub capacity: usize,
    pub p_action_fail: f64,
    pub p_spontaneous_ignite: f64,
    pub p_spread_factor: f64,
    pub p_cease: f64,
    /// Lets `extinguish` target the robot's own position as well.
    pub extinguish_own_position: bool,
}

impl Default for RescueConfig {
    fn default() -> Self {
        RescueConfig {
            positions: 20,
            connectivity: 0.30,
            safe_count: 3,
            victims: 10,
            fires: 10,
            capacity: 2,
            p_action_fail: 0.05,
            p_spontaneous_ignite: 0.01,
            p_spread_factor: 0.30,
            p_cease: 0.05,
            extinguish_own_position: false,
        }
    }
}

impl RescueConfig {
    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |m: String| Err(DomainError::InfeasibleConfig(m));
        if self.positions == 0 {
            return bad("positions must be at least 1".into());
        }
        if self.safe_count >= self.positions {
            return bad(format!(
                "safe_count {} must be below positions {}",
                self.safe_count, self.positions
            ));
        }
        let unsafe_count = self.positions - self.safe_count;
        if self.fires > unsafe_count || self.victims > unsafe_count {
            return bad(format!(
                "{unsafe_count} unsafe positions cannot hold {} victims and {} fires",
                self.victims, self.fires
            ));
        }
        for (name, p) in [
            ("connectivity", self.connectivity),
            ("p_action_fail", self.p_action_fail),
            ("p_spontaneous_ignite", self.p_spontaneous_ignite),
            ("p_spread_factor", self.p_spread_factor),
            ("p_cease", self.p_cease),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        Ok(())
    }

    /// Upper bound of `reward_safe`.
    pub fn max_reward(&self) -> f64 {
        self.victims as f64 * 1.1
    }
}

/// Static part of a world: adjacency and safe flags.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RescueGraph {
    pub adjacency: Vec<Vec<usize>>,
    pub safe: Vec<bool>,
}

impl RescueGraph {
    pub fn new(positions: usize, edges: &[(usize, usize)], safe: &[usize]) -> RescueGraph {
        let mut adjacency = vec![Vec::new(); positions];
        for &(a, b) in edges {
            if a != b && !adjacency[a].contains(&b) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for n in &mut adjacency {
            n.sort_unstable();
        }
        let mut flags = vec![false; positions];
        for &s in safe {
            flags[s] = true;
        }
        RescueGraph {
            adjacency,
            safe: flags,
        }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, p: usize) -> &[usize] {
        &self.adjacency[p]
    }

    pub fn is_connected(&self) -> bool {
        component_labels(&self.adjacency).iter().all(|&c| c == 0)
    }
}

fn component_labels(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let mut label = vec![usize::MAX; adjacency.len()];
    let mut next = 0;
    for start in 0..adjacency.len() {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(u) = stack.pop() {
            for &v in &adjacency[u] {
                if label[v] == usize::MAX {
                    label[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    label
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VictimLocation {
    OnGround(usize),
    Carried,
}

/// A world snapshot. The graph is shared between all states of an episode
/// and is left out of the hash.
#[derive(Debug, Clone)]
pub struct RescueState {
    pub graph: Arc<RescueGraph>,
    pub burning: Vec<bool>,
    pub victims: Vec<VictimLocation>,
    pub robot: usize,
}

impl PartialEq for RescueState {
    fn eq(&self, other: &Self) -> bool {
        self.robot == other.robot
            && self.burning == other.burning
            && self.victims == other.victims
            && (Arc::ptr_eq(&self.graph, &other.graph) || self.graph == other.graph)
    }
}

impl Eq for RescueState {}

impl Hash for RescueState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.robot.hash(state);
        self.burning.hash(state);
        self.victims.hash(state);
    }
}

impl RescueState {
    pub fn carried(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.victims.len()).filter(|&v| self.victims[v] == VictimLocation::Carried)
    }

    pub fn carried_count(&self) -> usize {
        self.carried().count()
    }

    /// Where a victim is: its own position, or the robot's while carried.
    pub fn effective_position(&self, v: usize) -> usize {
        match self.victims[v] {
            VictimLocation::OnGround(p) => p,
            VictimLocation::Carried => self.robot,
        }
    }

    pub fn is_safe_victim(&self, v: usize) -> bool {
        matches!(self.victims[v], VictimLocation::OnGround(p) if self.graph.safe[p])
    }

    pub fn is_burning_victim(&self, v: usize) -> bool {
        self.burning[self.effective_position(v)]
    }

    pub fn safe_victims(&self) -> usize {
        (0..self.victims.len()).filter(|&v| self.is_safe_victim(v)).count()
    }

    pub fn burning_victims(&self) -> usize {
        (0..self.victims.len()).filter(|&v| self.is_burning_victim(v)).count()
    }

    pub fn burning_count(&self) -> usize {
        self.burning.iter().filter(|&&b| b).count()
    }

    pub fn safe_ratio(&self) -> f64 {
        ratio(self.safe_victims(), self.victims.len())
    }

    pub fn burning_ratio(&self) -> f64 {
        ratio(self.burning_victims(), self.victims.len())
    }
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Draws `k` distinct items of `pool` uniformly (partial Fisher-Yates).
fn sample_distinct(pool: &[usize], k: usize, rng: &mut RandomSource) -> Vec<usize> {
    let mut pool = pool.to_vec();
    for i in 0..k {
        let j = i + rng.below(pool.len() - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

pub fn generate_initial(cfg: &RescueConfig, rng: &mut RandomSource) -> Result<RescueState, DomainError> {
    cfg.validate()?;
    let n = cfg.positions;
    let mut adjacency = vec![Vec::new(); n];
    for a in 0..n {
        for b in a + 1..n {
            if rng.bernoulli(cfg.connectivity) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
    }
    // join components with one random bridge each
    let label = component_labels(&adjacency);
    let count = label.iter().max().map_or(0, |m| m + 1);
    for c in 1..count {
        let here: Vec<usize> = (0..n).filter(|&p| label[p] == c).collect();
        let before: Vec<usize> = (0..n).filter(|&p| label[p] < c).collect();
        let a = here[rng.below(here.len())];
        let b = before[rng.below(before.len())];
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    for nb in &mut adjacency {
        nb.sort_unstable();
    }

    let all: Vec<usize> = (0..n).collect();
    let safe_list = sample_distinct(&all, cfg.safe_count, rng);
    let mut safe = vec![false; n];
    for &s in &safe_list {
        safe[s] = true;
    }
    let unsafe_list: Vec<usize> = (0..n).filter(|&p| !safe[p]).collect();
    let victims = sample_distinct(&unsafe_list, cfg.victims, rng)
        .into_iter()
        .map(VictimLocation::OnGround)
        .collect();
    let mut burning = vec![false; n];
    for f in sample_distinct(&unsafe_list, cfg.fires, rng) {
        burning[f] = true;
    }
    let robot = if safe_list.is_empty() {
        rng.below(n)
    } else {
        safe_list[rng.below(safe_list.len())]
    };
    Ok(RescueState {
        graph: Arc::new(RescueGraph { adjacency, safe }),
        burning,
        victims,
        robot,
    })
}

/// A decoded rescue action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RescueAction {
    Move(usize),
    Extinguish(usize),
    Lift(usize),
    Drop(usize),
    Noop,
}

pub fn position_name(p: usize) -> String {
    format!("p{p}")
}

pub fn victim_name(v: usize) -> String {
    format!("v{v}")
}

fn parse_index(t: &Term, prefix: char) -> Option<usize> {
    match t {
        Term::Const(c) => c.strip_prefix(prefix)?.parse().ok(),
        _ => None,
    }
}

impl RescueAction {
    pub fn to_term(self) -> ActionTerm {
        match self {
            RescueAction::Move(p) => Atom::ground("move", &[&position_name(p)]),
            RescueAction::Extinguish(p) => Atom::ground("extinguish", &[&position_name(p)]),
            RescueAction::Lift(v) => Atom::ground("lift", &[&victim_name(v)]),
            RescueAction::Drop(v) => Atom::ground("drop", &[&victim_name(v)]),
            RescueAction::Noop => Atom::nullary("noop"),
        }
    }

    pub fn from_term(a: &ActionTerm) -> Option<RescueAction> {
        let arg = |prefix| match &*a.args {
            [t] => parse_index(t, prefix),
            _ => None,
        };
        Some(match &*a.name {
            "move" => RescueAction::Move(arg('p')?),
            "extinguish" => RescueAction::Extinguish(arg('p')?),
            "lift" => RescueAction::Lift(arg('v')?),
            "drop" => RescueAction::Drop(arg('v')?),
            "noop" if a.args.is_empty() => RescueAction::Noop,
            _ => return None,
        })
    }
}

pub fn legal_actions(s: &RescueState, cfg: &RescueConfig) -> Vec<RescueAction> {
    let mut out = Vec::new();
    for &p in s.graph.neighbors(s.robot) {
        if !s.burning[p] {
            out.push(RescueAction::Move(p));
        }
    }
    for &p in s.graph.neighbors(s.robot) {
        if s.burning[p] {
            out.push(RescueAction::Extinguish(p));
        }
    }
    if cfg.extinguish_own_position && s.burning[s.robot] {
        out.push(RescueAction::Extinguish(s.robot));
    }
    if s.carried_count() < cfg.capacity {
        for (v, loc) in s.victims.iter().enumerate() {
            if *loc == VictimLocation::OnGround(s.robot) {
                out.push(RescueAction::Lift(v));
            }
        }
    }
    out.extend(s.carried().map(RescueAction::Drop));
    out.push(RescueAction::Noop);
    out
}

/// Ignition probability of an unsafe, non-burning position.
pub fn ignition_probability(s: &RescueState, cfg: &RescueConfig, p: usize) -> f64 {
    let nb = s.graph.neighbors(p);
    let burning = nb.iter().filter(|&&q| s.burning[q]).count();
    (cfg.p_spontaneous_ignite + cfg.p_spread_factor * burning as f64 / nb.len().max(1) as f64).min(1.0)
}

/// Advances every unsafe fire flag once, synchronously in position order.
pub fn fire_step(s: &RescueState, cfg: &RescueConfig, rng: &mut RandomSource) -> RescueState {
    let mut next = s.burning.clone();
    for (p, flag) in next.iter_mut().enumerate() {
        if s.graph.safe[p] {
            *flag = false;
        } else if s.burning[p] {
            *flag = !rng.bernoulli(cfg.p_cease);
        } else {
            *flag = rng.bernoulli(ignition_probability(s, cfg, p));
        }
    }
    RescueState {
        burning: next,
        ..s.clone()
    }
}

pub fn apply_action(
    s: &RescueState,
    a: RescueAction,
    cfg: &RescueConfig,
    rng: &mut RandomSource,
) -> Result<RescueState, DomainError> {
    if !legal_actions(s, cfg).contains(&a) {
        return Err(DomainError::IllegalAction(a.to_term().to_string()));
    }
    let failed = rng.bernoulli(cfg.p_action_fail);
    let mut next = s.clone();
    if !failed {
        match a {
            RescueAction::Move(p) => next.robot = p,
            RescueAction::Extinguish(p) => next.burning[p] = false,
            RescueAction::Lift(v) => next.victims[v] = VictimLocation::Carried,
            RescueAction::Drop(v) => next.victims[v] = VictimLocation::OnGround(s.robot),
            RescueAction::Noop => {}
        }
    }
    Ok(fire_step(&next, cfg, rng))
}

pub fn reward_safe(s: &RescueState) -> f64 {
    s.safe_victims() as f64 + reward_avoid_burning(s)
}

pub fn reward_avoid_burning(s: &RescueState) -> f64 {
    (s.victims.len() - s.burning_victims()) as f64 * 0.1
}

/// Carried victims fall at the robot's position, then fires are lit on
/// random unsafe positions until at least ten burn.
pub fn inject_unexpected_event(s: &RescueState, rng: &mut RandomSource) -> RescueState {
    let mut next = s.clone();
    for v in 0..next.victims.len() {
        if next.victims[v] == VictimLocation::Carried {
            next.victims[v] = VictimLocation::OnGround(s.robot);
        }
    }
    let mut candidates: Vec<usize> = (0..next.burning.len())
        .filter(|&p| !next.graph.safe[p] && !next.burning[p])
        .collect();
    while next.burning_count() < 10 && !candidates.is_empty() {
        let p = candidates.swap_remove(rng.below(candidates.len()));
        next.burning[p] = true;
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    #[default]
    Safe,
    AvoidBurning,
}

impl RewardKind {
    pub fn eval(self, s: &RescueState) -> f64 {
        match self {
            RewardKind::Safe => reward_safe(s),
            RewardKind::AvoidBurning => reward_avoid_burning(s),
        }
    }
}

/// The rescue world as a generative planning domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RescueDomain {
    pub cfg: RescueConfig,
    pub reward: RewardKind,
}

impl RescueDomain {
    pub fn new(cfg: RescueConfig) -> RescueDomain {
        RescueDomain {
            cfg,
            reward: RewardKind::Safe,
        }
    }

    pub fn with_reward(mut self, reward: RewardKind) -> RescueDomain {
        self.reward = reward;
        self
    }
}

fn victims_matching(
    s: &RescueState,
    arg: &Term,
    pred: impl Fn(usize) -> bool,
) -> Vec<Substitution> {
    match arg {
        Term::Var(var) => (0..s.victims.len())
            .filter(|&v| pred(v))
            .map(|v| Substitution::single(var, Term::constant(&victim_name(v))))
            .collect(),
        t => match parse_index(t, 'v') {
            Some(v) if v < s.victims.len() && pred(v) => vec![Substitution::empty()],
            _ => Vec::new(),
        },
    }
}

fn holds(b: bool) -> Vec<Substitution> {
    if b {
        vec![Substitution::empty()]
    } else {
        Vec::new()
    }
}

impl GenerativeDomain for RescueDomain {
    type State = RescueState;

    fn simulate(&self, s: &RescueState, a: &ActionTerm, rng: &mut RandomSource) -> Result<RescueState, DomainError> {
        let action = RescueAction::from_term(a).ok_or_else(|| DomainError::IllegalAction(a.to_string()))?;
        apply_action(s, action, &self.cfg, rng)
    }

    fn reward(&self, s: &RescueState) -> f64 {
        self.reward.eval(s)
    }

    fn ground_actions(&self, s: &RescueState) -> Vec<ActionTerm> {
        legal_actions(s, &self.cfg).into_iter().map(RescueAction::to_term).collect()
    }

    fn eval_atom(&self, atom: &Atom, s: &RescueState) -> Result<Vec<Substitution>, DomainError> {
        let unknown = || DomainError::UnknownPredicate(atom.to_string());
        match (&*atom.name, &*atom.args) {
            ("true", []) => Ok(holds(true)),
            ("at_safe", []) => Ok(holds(s.graph.safe[s.robot])),
            ("burning_here", []) => Ok(holds(s.burning[s.robot])),
            ("has_capacity", []) => Ok(holds(s.carried_count() < self.cfg.capacity)),
            ("carrying", [v]) => Ok(victims_matching(s, v, |i| s.victims[i] == VictimLocation::Carried)),
            ("victim_here", [v]) => Ok(victims_matching(s, v, |i| {
                s.victims[i] == VictimLocation::OnGround(s.robot)
            })),
            _ => Err(unknown()),
        }
    }

    fn query_vocabulary(&self) -> Vec<Atom> {
        vec![
            Atom::nullary("at_safe"),
            Atom::nullary("burning_here"),
            Atom::nullary("has_capacity"),
            Atom::new("carrying", [Term::var("V")]),
            Atom::new("victim_here", [Term::var("V")]),
            Atom::ground("carrying", &["v0"]),
        ]
    }
}

pub const RESCUE_SOURCE: &str = "\
while (true) {
    ?(at_safe & carrying(V)) { drop(V) }
    + !?(at_safe & carrying(V)) {
        ?(!at_safe & has_capacity & victim_here(V)) { lift(V) }
        + !?(!at_safe & has_capacity & victim_here(V)) { any }
    }
}
";

pub const MCTS_SOURCE: &str = "while (true) { any }\n";

/// Drop when carrying at a safe position, otherwise lift a co-located victim
/// when possible, otherwise any action.
pub fn rescue_program() -> Program {
    parse_program(RESCUE_SOURCE).expect("built-in program parses")
}

/// The unconstrained baseline: every legal action at every step.
pub fn mcts_program() -> Program {
    parse_program(MCTS_SOURCE).expect("built-in program parses")
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Number of states for a single robot: carried subsets, distinct ground
/// placements of the rest, robot position, and fire flags on unsafe positions.
pub fn state_space_cardinality(cfg: &RescueConfig) -> u128 {
    let (p, v) = (cfg.positions as u64, cfg.victims as u64);
    let placements: u128 = (0..=cfg.capacity.min(cfg.victims) as u64)
        .map(|i| binomial(v, i) * binomial(p, v - i))
        .sum();
    placements * p as u128 * (1u128 << (cfg.positions - cfg.safe_count))
}
