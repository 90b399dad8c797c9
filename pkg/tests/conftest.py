import numpy as np
import pytest

from vfcp import FieldSeries, FixedField, gen_synthetic


@pytest.fixture(scope="session")
def vortex_small():
    """16x16x4 moving vortex: one critical point per frame."""
    return gen_synthetic("moving_vortex", 16, 16, 4, seed=3)


@pytest.fixture(scope="session")
def translation_small():
    return gen_synthetic("translation", 16, 16, 4, seed=3)


def make_fixed(u_fp, v_fp, H, W, T, scale=1.0) -> FixedField:
    """FixedField straight from integer arrays (bypasses float conversion)."""
    return FixedField(H, W, T,
                      np.asarray(u_fp, dtype=np.int64).reshape(-1),
                      np.asarray(v_fp, dtype=np.int64).reshape(-1), scale)


def constant_field(H=6, W=6, T=3, cu=1.0, cv=-2.0) -> FieldSeries:
    n = H * W * T
    return FieldSeries(H, W, T, 1.0, 1.0, 1.0,
                       np.full(n, cu, dtype=np.float32),
                       np.full(n, cv, dtype=np.float32))
