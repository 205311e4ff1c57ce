//! Monte Carlo tree search driven by an action program.
//!
//! The tree alternates state nodes and action nodes. Every action node
//! carries the tail program that remains after its action, so expansion of
//! a successor state is constrained to what the program still allows.

use std::collections::HashMap;

use thiserror::Error;

use crate::domain::{DomainError, GenerativeDomain, RandomSource};
use crate::program::{ActionTerm, Program};
use crate::semantics::{pot_with, PotOptions, SemanticsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("node has no children")]
    NoChildren,
    #[error("action node has a zero visit count")]
    ZeroCount,
    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Visit count and value of a node. Fresh nodes start at `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metadata {
    pub count: u64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct StateNode<S> {
    pub state: S,
    pub meta: Metadata,
    pub children: Vec<ActionNode<S>>,
}

#[derive(Debug, Clone)]
pub struct ActionNode<S> {
    pub action: ActionTerm,
    pub tail: Program,
    pub meta: Metadata,
    children: Vec<StateNode<S>>,
    by_digest: HashMap<u64, Vec<usize>>,
}

impl<S> ActionNode<S> {
    pub fn new(action: ActionTerm, tail: Program) -> ActionNode<S> {
        ActionNode {
            action,
            tail,
            meta: Metadata::default(),
            children: Vec::new(),
            by_digest: HashMap::new(),
        }
    }

    pub fn children(&self) -> &[StateNode<S>] {
        &self.children
    }

    pub fn children_mut(&mut self) -> &mut [StateNode<S>] {
        &mut self.children
    }

    /// Index of the child whose state equals `s`.
    pub fn find_child<D>(&self, dom: &D, s: &S) -> Option<usize>
    where
        D: GenerativeDomain<State = S>,
    {
        self.by_digest
            .get(&dom.state_digest(s))?
            .iter()
            .copied()
            .find(|&i| dom.state_equal(&self.children[i].state, s))
    }

    /// Adds a successor node. Returns the index of the existing child
    /// instead if an equal state is already attached.
    pub fn attach<D>(&mut self, dom: &D, node: StateNode<S>) -> usize
    where
        D: GenerativeDomain<State = S>,
    {
        if let Some(i) = self.find_child(dom, &node.state) {
            return i;
        }
        let i = self.children.len();
        self.by_digest
            .entry(dom.state_digest(&node.state))
            .or_default()
            .push(i);
        self.children.push(node);
        i
    }

    /// Removes and returns child `i`, dropping its siblings.
    pub fn into_child(mut self, i: usize) -> StateNode<S> {
        self.children.swap_remove(i)
    }
}

impl<S> StateNode<S> {
    pub fn leaf(state: S) -> StateNode<S> {
        StateNode {
            state,
            meta: Metadata::default(),
            children: Vec::new(),
        }
    }

    /// Number of state and action nodes in this subtree, this node included.
    pub fn size(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|a| 1 + a.children.iter().map(StateNode::size).sum::<usize>())
            .sum::<usize>()
    }

    /// Longest chain of state nodes below this one.
    pub fn height(&self) -> usize {
        self.children
            .iter()
            .flat_map(|a| a.children.iter())
            .map(|s| 1 + s.height())
            .max()
            .unwrap_or(0)
    }
}

/// How an action value weighs its successors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackupWeights {
    /// `#(child) / #(action)`. The visit that created a child is not counted
    /// in the child, so the weights may sum to less than one.
    #[default]
    ActionCount,
    /// `#(child) / sum of child counts`.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub h_max: usize,
    pub gamma: f64,
    pub c: f64,
    pub budget: usize,
    pub weights: BackupWeights,
    pub pot: PotOptions,
}

impl SearchParams {
    pub fn new(h_max: usize, gamma: f64, c: f64, budget: usize) -> Result<SearchParams, SearchError> {
        let p = SearchParams {
            h_max,
            gamma,
            c,
            budget,
            weights: BackupWeights::default(),
            pot: PotOptions::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_weights(mut self, weights: BackupWeights) -> SearchParams {
        self.weights = weights;
        self
    }

    pub fn with_pot_options(mut self, pot: PotOptions) -> SearchParams {
        self.pot = pot;
        self
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidParams(m.to_string()));
        if self.h_max < 1 {
            return bad("h_max must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("c must be positive");
        }
        if self.budget < 1 {
            return bad("budget must be at least 1");
        }
        Ok(())
    }
}

/// UCB1 urgency of a visited child.
pub fn ucb1_score(q: f64, parent_count: u64, child_count: u64, c: f64) -> f64 {
    q + c * (2.0 * (parent_count as f64).ln() / child_count as f64).sqrt()
}

/// Index of the child maximizing UCB1. Unvisited children come first; ties
/// are broken uniformly at random.
pub fn ucb1_select<S>(vs: &StateNode<S>, c: f64, rng: &mut RandomSource) -> Result<usize, SearchError> {
    if vs.children.is_empty() {
        return Err(SearchError::NoChildren);
    }
    let fresh: Vec<usize> = (0..vs.children.len())
        .filter(|&i| vs.children[i].meta.count == 0)
        .collect();
    if !fresh.is_empty() {
        return Ok(fresh[rng.below(fresh.len())]);
    }
    let scores: Vec<f64> = vs
        .children
        .iter()
        .map(|a| ucb1_score(a.meta.value, vs.meta.count, a.meta.count, c))
        .collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
    Ok(tied[rng.below(tied.len())])
}

/// Recomputes `q(va)` as the weighted sum of its successors' values.
pub fn update_action<S>(va: &mut ActionNode<S>, weights: BackupWeights) -> Result<f64, SearchError> {
    if va.meta.count == 0 {
        return Err(SearchError::ZeroCount);
    }
    let denom = match weights {
        BackupWeights::ActionCount => va.meta.count as f64,
        BackupWeights::Normalized => {
            let total: u64 = va.children.iter().map(|c| c.meta.count).sum();
            if total == 0 {
                return Err(SearchError::ZeroCount);
            }
            total as f64
        }
    };
    let q = va
        .children
        .iter()
        .map(|c| c.meta.count as f64 / denom * c.meta.value)
        .sum();
    va.meta.value = q;
    Ok(q)
}

/// Recomputes `v(vs) = reward + gamma * max q(child)`.
pub fn update_state<S>(vs: &mut StateNode<S>, reward: f64, gamma: f64) -> Result<f64, SearchError> {
    let best = vs
        .children
        .iter()
        .map(|a| a.meta.value)
        .fold(None, |m: Option<f64>, q| Some(m.map_or(q, |m| m.max(q))))
        .ok_or(SearchError::NoChildren)?;
    let v = reward + gamma * best;
    vs.meta.value = v;
    Ok(v)
}

/// Index of the child with the highest value; ties go to the smallest
/// `(action, tail)`. `None` means the program has terminated here.
pub fn best_action<S>(root: &StateNode<S>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, a) in root.children.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(j) => {
                let b = &root.children[j];
                let better = a.meta.value > b.meta.value
                    || (a.meta.value == b.meta.value && (&a.action, &a.tail) < (&b.action, &b.tail));
                Some(if better { i } else { j })
            }
        };
    }
    best
}

/// Search engine bound to one domain and parameter set.
pub struct Mcap<'d, D: GenerativeDomain> {
    pub dom: &'d D,
    pub params: SearchParams,
}

impl<'d, D: GenerativeDomain> Mcap<'d, D> {
    pub fn new(dom: &'d D, params: SearchParams) -> Result<Mcap<'d, D>, SearchError> {
        params.validate()?;
        Ok(Mcap { dom, params })
    }

    /// A fresh state node whose children are the continuations of `p` in `s`.
    pub fn expand(&self, s: D::State, p: &Program) -> Result<StateNode<D::State>, SearchError> {
        let potential = pot_with(self.dom, &s, p, self.params.pot)?;
        let children = potential
            .into_entries()
            .into_iter()
            .map(|e| ActionNode::new(e.head, e.tail))
            .collect();
        Ok(StateNode {
            state: s,
            meta: Metadata::default(),
            children,
        })
    }

    /// Discounted reward of a random walk through the program's continuations,
    /// from depth `h` down to `h_max`.
    pub fn rollout(
        &self,
        s: &D::State,
        p: &Program,
        h: usize,
        rng: &mut RandomSource,
    ) -> Result<f64, SearchError> {
        let mut state = s.clone();
        let mut program = p.clone();
        let mut depth = h;
        let mut discount = 1.0;
        let mut total = 0.0;
        loop {
            total += discount * self.dom.reward(&state);
            if depth >= self.params.h_max {
                break;
            }
            let potential = pot_with(self.dom, &state, &program, self.params.pot)?;
            if potential.is_empty() {
                break;
            }
            let pick = potential.get(rng.below(potential.len())).unwrap();
            state = self.dom.simulate(&state, &pick.head, rng)?;
            program = pick.tail.clone();
            discount *= self.params.gamma;
            depth += 1;
        }
        Ok(total)
    }

    /// One pass of selection, simulation, expansion and backup from `vs` at
    /// depth `h`.
    pub fn iterate(
        &self,
        vs: &mut StateNode<D::State>,
        h: usize,
        rng: &mut RandomSource,
    ) -> Result<(), SearchError> {
        vs.meta.count += 1;
        if h >= self.params.h_max || vs.children.is_empty() {
            return Ok(());
        }
        let i = ucb1_select(vs, self.params.c, rng)?;
        let StateNode { state, children, .. } = vs;
        let va = &mut children[i];
        va.meta.count += 1;
        let next = self.dom.simulate(state, &va.action, rng)?;
        match va.find_child(self.dom, &next) {
            Some(j) => {
                self.iterate(&mut va.children[j], h + 1, rng)?;
                update_action(va, self.params.weights)?;
                let r = self.dom.reward(&vs.state);
                update_state(vs, r, self.params.gamma)?;
            }
            None => {
                let mut child = self.expand(next, &va.tail)?;
                // rollout starts from the parent's depth
                child.meta.value = self.rollout(&child.state, &va.tail, h, rng)?;
                va.attach(self.dom, child);
            }
        }
        Ok(())
    }

    /// Runs `budget` iterations from the root.
    pub fn run_search(&self, root: &mut StateNode<D::State>, rng: &mut RandomSource) -> Result<(), SearchError> {
        for _ in 0..self.params.budget {
            self.iterate(root, 0, rng)?;
        }
        Ok(())
    }
}
