"""Two-stage constrained actor-critic for multi-response sequential recommendation.

Train one policy per auxiliary response, then learn the main policy under a
soft KL constraint toward those frozen policies; includes scalarized-reward
and multi-critic baselines, behavior cloning, a synthetic session simulator,
and offline evaluation (capped importance sampling, ranking DCG).
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .actors import LagrangeWeights, PolicyBank
from .approx import ActionValueFunction, MlpSpec, SoftmaxPolicy, ValueFunction
from .core import ReplayBuffer, ResponseSpec, Session, Transition
from .critics import CriticEnsemble
from .env import LatentUser, Simulator, SimulatorConfig

__version__ = "0.1.0"

__all__ = [
    "ActionValueFunction",
    "CriticEnsemble",
    "KERNEL_BACKEND",
    "LagrangeWeights",
    "LatentUser",
    "MlpSpec",
    "PolicyBank",
    "ReplayBuffer",
    "ResponseSpec",
    "Session",
    "Simulator",
    "SimulatorConfig",
    "SoftmaxPolicy",
    "Transition",
    "ValueFunction",
    "__version__",
]
