"""The package that contains the scenario, its physical models and the coverage environment."""
from .channel import ChannelParams
from .coverage import RewardWeights, StepOutcome, UavCoverage
from .energy import EnergyLedger, EnergyParams
from .environment import Environment
from .registry import make
from .world import ScenarioConfig, TrafficConfig, World, build_world
