from .qlearn import DQNAgent, EpsilonSchedule, Hyperparams, QPolicy, dqn_update, drqn_update
from .ppo import PPOAgent, clipped_objective, gae_advantages, ppo_update
from .replay import ReplayBuffer
from .networks import ActorCritic, FeedForwardQ, GcnEncoder, RecurrentQ, gcn_apply

__all__ = [
    "DQNAgent", "EpsilonSchedule", "Hyperparams", "QPolicy", "dqn_update", "drqn_update",
    "PPOAgent", "clipped_objective", "gae_advantages", "ppo_update",
    "ReplayBuffer",
    "ActorCritic", "FeedForwardQ", "GcnEncoder", "RecurrentQ", "gcn_apply",
]
