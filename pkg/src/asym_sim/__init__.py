"""Opinion dynamics under platform personalization with competing influencers."""

from ._jit import backend_name
from .config import ConfigError, ModelConfig, PhaseSchedule, apply_overrides, from_dict, load_config
from .engine import EnsembleResult, SimState, Trajectory, ensemble, initial_state, opinion_histogram, run, step
from .model import (
    ContractError,
    InfluencerSpec,
    KernelSpec,
    OpinionSpace,
    UpdateWeights,
    feedback_prob,
    update_opinion,
    update_opinion_stubbornness,
    visibility,
)

__version__ = "0.1.0"
