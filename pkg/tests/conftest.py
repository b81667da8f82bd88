import os
import tempfile
from pathlib import Path

import numpy as np
import pytest

# keep the API tests off any configured database
os.environ.setdefault("LAB_SQLITE_PATH", str(Path(tempfile.mkdtemp(prefix="ricci-lab-")) / "reports.db"))
os.environ.pop("DB_HOST", None)

from app.cache import clear_ball_volume_cache, clear_cost_matrix_cache, clear_report_cache  # noqa: E402
from app.lab.geometry import euclidean_plane, hyperbolic_plane, sphere_cap  # noqa: E402
from app.lab.presets import variable_warp_surface  # noqa: E402


@pytest.fixture(scope="session")
def euclidean():
    return euclidean_plane()


@pytest.fixture(scope="session")
def hyperbolic():
    return hyperbolic_plane()


@pytest.fixture(scope="session")
def sphere():
    return sphere_cap()


@pytest.fixture(scope="session")
def mild_warp():
    return variable_warp_surface(0.05)


@pytest.fixture(scope="session")
def strong_warp():
    return variable_warp_surface(0.25)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def fresh_caches():
    clear_ball_volume_cache()
    clear_cost_matrix_cache()
    clear_report_cache()
    yield
