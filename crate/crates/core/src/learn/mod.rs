//! Neural-fitted Q-learning with an optional governor shield, behavioral
//! cloning of the governed policy, and rollout evaluation.

mod distill;
mod env;
mod eval;
mod mlp;
mod qlearn;

pub use distill::{distill, DistillConfig, DistillReport};
pub use env::{ConstantPolicy, Env, EnvStep, ExplicitPolicy, GreedyQPolicy, Policy};
pub use eval::{
    evaluate, rollout, rollout_rng, EvalConfig, EvalReport, EvalTiming, InitialStates,
    RolloutResult, TraceStep, trace_csv, trace_header,
};
pub use mlp::{fit_mlp, FitConfig, Gradient, Mlp, Momentum};
pub use qlearn::{
    greedy_index, history_csv, new_q_net, q_target, q_values, random_initial_state, select_action, train,
    uniform_grid, EpisodeStats, QLearnerConfig, ReplayBuffer, TrainOutcome, Transition,
};
