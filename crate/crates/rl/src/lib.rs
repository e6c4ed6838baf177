//! Masked reinforcement-learning agents over the assembly-line simulator:
//! a small dense-network core, DQN and PPO with exact action masking, and
//! the multi-agent coordinator with its sequential feasibility check.

pub mod adam;
pub mod dqn;
pub mod marl;
pub mod masking;
pub mod net;
pub mod ppo;
pub mod replay;
pub mod rollout;
pub mod train;
