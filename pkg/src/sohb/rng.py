"""Reproducible random streams.

Counter-based Philox generators keyed by (seed, stream): runs with the same
seed are bitwise reproducible, and distinct stream ids give statistically
independent streams from one seed — used to give positions, orientation
noise, and replica workers their own streams without coordination.
"""

import numpy as np

# Fixed stream ids for the pieces of a simulation that must be decoupled
# (e.g. so matrix and quaternion runs can share initial conditions while
# drawing independent dynamical noise).
STREAM_INIT = 0
STREAM_DYNAMICS = 1
STREAM_REPLICA_BASE = 1000


def make_rng(seed, stream=0):
    """A numpy Generator on the Philox counter stream (seed, stream)."""
    return np.random.Generator(np.random.Philox(key=[int(seed), int(stream)]))


def replica_rng(seed, replica):
    """Independent per-replica generator for embarrassingly parallel runs."""
    return make_rng(seed, STREAM_REPLICA_BASE + int(replica))
