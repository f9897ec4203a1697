"""Quantized, repeatable statistical-query estimation.

Campaign configs and artifacts are plain dicts with the same schema as the
CLI's JSON files.
"""

import json

from ._repsq import (
    RNG_ALGORITHM,
    ArtifactVersionMismatch,
    BoundViolation,
    ConfigError,
    DomainError,
    Error,
    InfeasibleRepeatability,
    NonTerminated,
    Partition,
    __version__,
    bernstein_radius,
    collision_probability_lower_bound,
    compute_alpha,
    hoeffding_radius,
    quantize,
    quantized_tolerance,
    required_n_hoeffding,
    tracking_loss,
)
from . import _repsq

__all__ = [
    "RNG_ALGORITHM",
    "ArtifactVersionMismatch",
    "BoundViolation",
    "ConfigError",
    "DomainError",
    "Error",
    "InfeasibleRepeatability",
    "NonTerminated",
    "Partition",
    "__version__",
    "bernstein_radius",
    "collision_probability_lower_bound",
    "compute_alpha",
    "effort",
    "hoeffding_radius",
    "initiator",
    "pairwise",
    "quantize",
    "quantized_tolerance",
    "replicator",
    "required_n_hoeffding",
    "tracking_loss",
]


def _text(doc):
    # Configs and artifacts may be given as dicts or as JSON text.
    return doc if isinstance(doc, str) else json.dumps(doc)


def initiator(config, record_trace=False):
    """Run the initiator; returns {"artifact": ..., "result": ...}."""
    return json.loads(_repsq._initiator(_text(config), record_trace))


def replicator(artifact, seed, sampler=None):
    """One replicator trial on the artifact's partition.

    `sampler` is a sampler dict or a bare kind name such as "monte_carlo".
    """
    return json.loads(
        _repsq._replicator(_text(artifact), seed, None if sampler is None else json.dumps(sampler))
    )


def pairwise(config, pairs, replicator_sampler=None, threads=0):
    """Repeatability report over `pairs` initiator/replicator pairs."""
    sampler = None if replicator_sampler is None else json.dumps(replicator_sampler)
    return json.loads(_repsq._pairwise(_text(config), pairs, sampler, threads))


def effort(config):
    """Terminated trial plus the Hoeffding sample count at equal bounds."""
    return json.loads(_repsq._effort(_text(config)))
