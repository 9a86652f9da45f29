"""
The package for the MADDPG agent.

Actors and critics are small numpy MLPs trained from a shared prioritized replay buffer.
"""
from .maddpg import AgentNets, Maddpg, TrainConfig, TrainingResult
