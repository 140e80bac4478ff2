import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from moment2d import AtomicMeasure

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def _separated(atoms, min_dist=0.05):
    pts = np.array([(a, b) for a, b, _ in atoms])
    if len(pts) < 2:
        return True
    d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    return d[np.triu_indices(len(pts), 1)].min() >= min_dist


coord = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)
weight = st.floats(0.01, 2.0, allow_nan=False, allow_infinity=False)


def measures(min_atoms=1, max_atoms=6):
    """Atomic measures with well separated atoms and weights bounded away from zero."""
    atoms = st.lists(st.tuples(coord, coord, weight), min_size=min_atoms, max_size=max_atoms)
    return atoms.filter(_separated).map(lambda a: AtomicMeasure(tuple(a)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
