import math
import sys

import numpy as np
import pytest
from scipy.integrate import quad

from fluidlevel.simulate import SceneConfig


def quad_perimeter(a, b):
    """Arc length of an ellipse by adaptive quadrature."""
    val, _ = quad(lambda t: math.hypot(a * math.sin(t), b * math.cos(t)), 0, math.pi / 2,
                  epsabs=1e-13, epsrel=1e-13, limit=200)
    return 4 * val


def ellipse_points(cx, cy, a, b, rot, n=72, t0=0.0, span=2 * math.pi):
    t = t0 + np.linspace(0, span, n, endpoint=span < 2 * math.pi)
    x, y = a * np.cos(t), b * np.sin(t)
    c, s = math.cos(rot), math.sin(rot)
    return np.column_stack([cx + c * x - s * y, cy + s * x + c * y])


def disk_mask(shape, cx, cy, r):
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r


@pytest.fixture
def scene():
    return SceneConfig()


@pytest.fixture
def wet_scene():
    return SceneConfig(dry_well=False)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
