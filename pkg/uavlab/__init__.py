"""This package contains a sleeping-cell network simulator and agents that steer UAVs over it."""
from .environments import make

__version__ = '0.1.0'
