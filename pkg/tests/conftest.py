import json
import math
import os

import numpy as np
import pytest

from coniso.cone import AsymptoticConeMetric, Perturbation, RadialProfile
from coniso.link import LinkMetric
from coniso.spectral import SpectralField

HERE = os.path.dirname(os.path.abspath(__file__))


@pytest.fixture(scope="session")
def frozen():
    """Independent reference values (see tests/oracles/generate.py)."""
    with open(os.path.join(HERE, "oracles", "frozen.json")) as fh:
        return json.load(fh)


def acceptance_field():
    """Unit-sup link field used for non-radial perturbations."""
    f = SpectralField.from_triples([[2, 0, 1.0], [1, 1, 0.6]], 4)
    return (1.0 / f.sup_norm()) * f


def perturbed_metric(amplitude=0.1, tau=1.0, link=None, r_min=1.0, r_max=100.0, field=True):
    link = link or LinkMetric.scaled_sphere(2, 0.8)
    f = acceptance_field() if field else None
    p = Perturbation(RadialProfile("power", amplitude, tau), f)
    return AsymptoticConeMetric(link, r_min, r_max, p, p, decay_rate=tau)


def conformal_link(c0, b, degree=16):
    """``phi = c0 + b * Y20`` in harmonic coefficients."""
    return LinkMetric.conformal_from_triples([[0, 0, c0 * math.sqrt(4 * math.pi)], [2, 0, b]], degree)


@pytest.fixture(scope="session")
def s2_08():
    return LinkMetric.scaled_sphere(2, 0.8)


@pytest.fixture(scope="session")
def unit_s2():
    return LinkMetric.scaled_sphere(2, 1.0)


@pytest.fixture(scope="session")
def perturbed():
    return perturbed_metric()


@pytest.fixture(scope="session")
def link_minK_12(frozen):
    d = frozen["conformal_links"]["minK_1p2"]
    return conformal_link(d["c0"], d["b_Y20"])


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20261019)


# ----------------------------------------------------------------------
# acceptance reporting: one line per criterion, repeated in the summary

_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record ``criterion(n, ok, detail)``; prints and keeps a summary line."""

    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] acceptance {number:2d}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split("acceptance")[1].split(":")[0])):
            terminalreporter.write_line(line)
