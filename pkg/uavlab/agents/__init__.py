"""A set of agents that steer the UAVs of an environment."""
from .agent import Agent, PolicyKind
from .baseline import KnnFixedAgent, RandomAgent, all_cells_on_eval
from .maddpg import Maddpg, TrainConfig
