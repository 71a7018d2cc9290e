"""Strong-convergence laboratory for the polygonal Euler-Maruyama scheme
with time-singular, Dini-continuous drift."""

__version__ = "0.1.0"

from .backend import active_backend
from .modulus import ModulusSpec
from .models import example_a, example_b, lower_bound_problem, problem_by_name
from .harness import ExperimentConfig, run_experiment

__all__ = [
    "__version__",
    "active_backend",
    "ModulusSpec",
    "example_a",
    "example_b",
    "lower_bound_problem",
    "problem_by_name",
    "ExperimentConfig",
    "run_experiment",
]
