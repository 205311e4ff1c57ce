//! Closed-loop planning: search, act in an environment, observe, re-root.

use std::fmt;

use thiserror::Error;

use crate::domain::{DomainError, GenerativeDomain, RandomSource};
use crate::program::{ActionTerm, Program};
use crate::rescue::{
    generate_initial, inject_unexpected_event, RescueAction, RescueDomain, RescueState, RewardKind,
};
use crate::search::{best_action, Mcap, SearchError, SearchParams, StateNode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// The world the agent acts in. It may differ from the planning model; the
/// planner only ever sees the states it returns.
pub trait Environment {
    type State;

    fn current(&self) -> &Self::State;

    /// Executes one agent action plus any exogenous dynamics and returns the
    /// observed state.
    fn step(&mut self, a: &ActionTerm, rng: &mut RandomSource) -> Result<Self::State, DomainError>;
}

/// Called after step `t` (1-based) with the state just reached.
pub type StepHook<S> = Box<dyn Fn(usize, &S, &mut RandomSource) -> S + Send + Sync>;

/// An environment that samples from a domain and then applies step hooks.
pub struct SimulatedEnvironment<D: GenerativeDomain> {
    dom: D,
    state: D::State,
    steps: usize,
    hooks: Vec<StepHook<D::State>>,
}

impl<D: GenerativeDomain> SimulatedEnvironment<D> {
    pub fn new(dom: D, start: D::State) -> Self {
        SimulatedEnvironment {
            dom,
            state: start,
            steps: 0,
            hooks: Vec::new(),
        }
    }

    pub fn with_hook(mut self, hook: StepHook<D::State>) -> Self {
        self.hooks.push(hook);
        self
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

impl<D: GenerativeDomain> Environment for SimulatedEnvironment<D> {
    type State = D::State;

    fn current(&self) -> &D::State {
        &self.state
    }

    fn step(&mut self, a: &ActionTerm, rng: &mut RandomSource) -> Result<D::State, DomainError> {
        let mut next = self.dom.simulate(&self.state, a, rng)?;
        self.steps += 1;
        for hook in &self.hooks {
            next = hook(self.steps, &next, rng);
        }
        self.state = next.clone();
        Ok(next)
    }
}

/// What one planning step did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// `None` when the program had no continuation left.
    pub action: Option<ActionTerm>,
    pub tail: Option<Program>,
    /// The observed state was already in the tree.
    pub reused: bool,
}

/// One iteration of the online loop.
///
/// Returns the root for the next step, or `None` once the program has
/// terminated at the current root.
pub fn online_mcap_step<D, E>(
    mut root: StateNode<D::State>,
    env: &mut E,
    engine: &Mcap<'_, D>,
    plan_rng: &mut RandomSource,
    env_rng: &mut RandomSource,
) -> Result<(Option<StateNode<D::State>>, StepOutcome), PlanError>
where
    D: GenerativeDomain,
    E: Environment<State = D::State>,
{
    engine.run_search(&mut root, plan_rng)?;
    let Some(i) = best_action(&root) else {
        let outcome = StepOutcome {
            action: None,
            tail: None,
            reused: false,
        };
        return Ok((None, outcome));
    };
    let chosen = root.children.swap_remove(i);
    let observed = env.step(&chosen.action, env_rng)?;
    let action = chosen.action.clone();
    let tail = chosen.tail.clone();
    let (next, reused) = match chosen.find_child(engine.dom, &observed) {
        Some(j) => (chosen.into_child(j), true),
        None => (engine.expand(observed, &tail)?, false),
    };
    let outcome = StepOutcome {
        action: Some(action),
        tail: Some(tail),
        reused,
    };
    Ok((Some(next), outcome))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Planning model and environment coincide.
    #[default]
    Base,
    /// The environment drops carried victims and lights fires at steps 20 and 40.
    Events,
    /// The planner optimizes avoid-burning until step 25 and safety after.
    GoalChange,
}

impl Variant {
    pub const EVENT_STEPS: [usize; 2] = [20, 40];
    pub const GOAL_SWITCH_STEP: usize = 25;

    /// Planner reward while deciding step `t` (1-based).
    pub fn planner_reward(self, t: usize) -> RewardKind {
        match self {
            Variant::GoalChange if t < Self::GOAL_SWITCH_STEP => RewardKind::AvoidBurning,
            _ => RewardKind::Safe,
        }
    }

    pub fn event_steps(self) -> &'static [usize] {
        match self {
            Variant::Events => &Self::EVENT_STEPS,
            _ => &[],
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Base => "base",
            Variant::Events => "events",
            Variant::GoalChange => "goal-change",
        })
    }
}

/// Everything one rescue episode needs.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec {
    pub rescue: crate::rescue::RescueConfig,
    pub search: SearchParams,
    pub program: Program,
    pub variant: Variant,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    /// `None` after the program terminated (the environment then idles).
    pub action: Option<ActionTerm>,
    pub state: RescueState,
    pub planner_reward: f64,
    pub safe_ratio: f64,
    pub burning_ratio: f64,
    pub reused: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub initial: RescueState,
    pub records: Vec<TraceRecord>,
}

impl EpisodeTrace {
    /// Safe ratio at steps `0..=len`.
    pub fn safe_series(&self) -> Vec<f64> {
        std::iter::once(self.initial.safe_ratio())
            .chain(self.records.iter().map(|r| r.safe_ratio))
            .collect()
    }

    pub fn burning_series(&self) -> Vec<f64> {
        std::iter::once(self.initial.burning_ratio())
            .chain(self.records.iter().map(|r| r.burning_ratio))
            .collect()
    }
}

/// Independent streams of one episode: initial state, environment, planner.
pub fn episode_streams(seed: u64) -> [RandomSource; 3] {
    [0, 1, 2].map(|i| RandomSource::derive(seed, i))
}

/// Runs one online episode of the rescue benchmark.
pub fn run_episode(spec: &EpisodeSpec, seed: u64) -> Result<EpisodeTrace, PlanError> {
    let [mut init_rng, mut env_rng, mut plan_rng] = episode_streams(seed);
    let start = generate_initial(&spec.rescue, &mut init_rng)?;
    let events = spec.variant.event_steps();
    let mut env = SimulatedEnvironment::new(RescueDomain::new(spec.rescue.clone()), start.clone());
    if !events.is_empty() {
        env = env.with_hook(Box::new(move |t, s, rng| {
            if events.contains(&t) {
                inject_unexpected_event(s, rng)
            } else {
                s.clone()
            }
        }));
    }

    let model = |t: usize| RescueDomain::new(spec.rescue.clone()).with_reward(spec.variant.planner_reward(t));
    let first = model(1);
    let mut root = Some(Mcap::new(&first, spec.search)?.expand(start.clone(), &spec.program)?);
    let mut records = Vec::with_capacity(spec.horizon);
    for t in 1..=spec.horizon {
        let dom = model(t);
        let engine = Mcap::new(&dom, spec.search)?;
        let (action, reused) = match root.take() {
            Some(r) => {
                let (next, outcome) = online_mcap_step(r, &mut env, &engine, &mut plan_rng, &mut env_rng)?;
                root = next;
                match outcome.action {
                    Some(a) => (Some(a), outcome.reused),
                    None => {
                        env.step(&RescueAction::Noop.to_term(), &mut env_rng)?;
                        (None, false)
                    }
                }
            }
            None => {
                env.step(&RescueAction::Noop.to_term(), &mut env_rng)?;
                (None, false)
            }
        };
        let state = env.current().clone();
        records.push(TraceRecord {
            step: t,
            action,
            planner_reward: dom.reward(&state),
            safe_ratio: state.safe_ratio(),
            burning_ratio: state.burning_ratio(),
            reused,
            state,
        });
    }
    Ok(EpisodeTrace {
        initial: start,
        records,
    })
}
