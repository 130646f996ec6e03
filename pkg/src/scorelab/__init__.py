"""Desk-scale laboratory for the memorization/quality trade-off of
diffusion models trained on noisy data.

Subpackages cover the noise schedule, closed-form optimal scores, the
deterministic reverse sampler, the hybrid noisy-data training loop, the
memorization/quality metrics, information-leakage formulas, the
subpopulation-frequency error decomposition and cluster merging under
noise.  ``scorelab.cli`` exposes the experiment commands.
"""

from ._backend import backend_name
from .schedule import NoiseSchedule, linear_schedule, tabulated_schedule
from .samples import SampleSet, noise_sample_set

__all__ = [
    "backend_name",
    "NoiseSchedule",
    "linear_schedule",
    "tabulated_schedule",
    "SampleSet",
    "noise_sample_set",
]

__version__ = "0.1.0"
