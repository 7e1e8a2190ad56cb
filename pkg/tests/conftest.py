import numpy as np
import pytest

from triteleop.geometry import Pose6
from triteleop.triarm import TriarmGeometry, workspace_margin


@pytest.fixture(scope="session")
def triarm_geometry():
    return TriarmGeometry()


@pytest.fixture(scope="session")
def admissible_poses(triarm_geometry):
    """1000 random poses strictly inside the follower workspace."""
    g = triarm_geometry
    rng = np.random.default_rng(42)
    out = []
    while len(out) < 1000:
        p = g.home_pose.p + rng.uniform(-30, 30, 3)
        e = rng.uniform(-7, 7, 3)
        x = Pose6.from_euler(p, e)
        if workspace_margin(x, g).min() > 2.0:
            out.append(x)
    return out
