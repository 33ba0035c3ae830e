"""Safety shields over grid abstractions in transformed state spaces."""
from .grid import Box, Complement, Disc, GridSpec, HalfPlane, Intersection, Union
from .kernels import BACKEND
from .shield import DecisionTree, Strategy, to_tree
from .synthesis import SamplingConfig, synthesize

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Box",
    "Complement",
    "DecisionTree",
    "Disc",
    "GridSpec",
    "HalfPlane",
    "Intersection",
    "SamplingConfig",
    "Strategy",
    "Union",
    "synthesize",
    "to_tree",
]
