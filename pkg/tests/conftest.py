from __future__ import annotations

import functools
import inspect

import numpy as np
import pytest


def repeat(n: int, seed: int = 0):
    """Run the test body ``n`` times with ``rng`` seeded seed, seed+1, ..."""
    def deco(fn):
        sig = inspect.signature(fn)
        params = [p for name, p in sig.parameters.items() if name != "rng"]

        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            for k in range(n):
                fn(*args, rng=np.random.default_rng(seed + k), **kwargs)

        wrapper.__signature__ = sig.replace(parameters=params)
        del wrapper.__wrapped__
        return wrapper
    return deco


@pytest.fixture(scope="session")
def annulus():
    from twohol.scenarios import inner_annulus
    return inner_annulus()


@pytest.fixture(scope="session")
def three_charts():
    from twohol.scenarios import inner_three_charts
    return inner_three_charts()


@pytest.fixture(scope="session")
def sphere1():
    from twohol.scenarios import sphere_gerbe
    return sphere_gerbe(1)
