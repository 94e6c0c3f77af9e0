from .base import DynamicalSystem, load_param_overrides
from .circadian import CircadianParams, build_circadian, circadian_start_state
from .hodgkin_huxley import HHParams, build_hh, hh_rest_guess
from .toy import ToyParams, build_toy

__all__ = [
    "DynamicalSystem",
    "load_param_overrides",
    "ToyParams",
    "build_toy",
    "HHParams",
    "build_hh",
    "hh_rest_guess",
    "CircadianParams",
    "build_circadian",
    "circadian_start_state",
]
