"""Feature purification for nonnegative matrix factorization.

Given samples ``y = A_star x* + nu`` with nonnegative weights and a warm
start close to ``A_star``, purification alternates a thresholded decode with
the minimum-infinity-norm left inverse and a pairwise-difference update that
removes the contamination between columns.  Equilibration optionally
balances feature weights first.
"""

from .analysis import decompose, col_error, coupled_potential, iter_record
from .equilibrate import EquilParams, equilibration
from .genmodel import (
    InitSpec,
    Marginal,
    ModelSpec,
    NoiseModel,
    WeightDist,
    gen_ground_truth,
    gen_init,
    moments,
    sample_batch,
)
from .l1pinv import ls_pinv, min_inf_pinv
from .purify import AlgoParams, Pairing, default_params, run_purification
from .rng import Streams

__all__ = [
    "AlgoParams", "EquilParams", "InitSpec", "Marginal", "ModelSpec", "NoiseModel", "Pairing",
    "Streams", "WeightDist", "col_error", "coupled_potential", "decompose", "default_params",
    "equilibration", "gen_ground_truth", "gen_init", "iter_record", "ls_pinv", "min_inf_pinv",
    "moments", "run_purification", "sample_batch",
]
