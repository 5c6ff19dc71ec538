import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from calr.annulus import AnnulusConfig  # noqa: E402
from calr.geometry import Circle, Ellipse, PerturbedCircle, ProblemGeometry  # noqa: E402
from calr.npsystem import assemble_block_operators, build_symmetrization  # noqa: E402


@pytest.fixture(scope="session")
def frozen():
    return json.loads((Path(__file__).parent / "frozen_values.json").read_text())


@pytest.fixture(scope="session")
def annulus_config():
    return AnnulusConfig(1.0, 2.0)


@pytest.fixture(scope="session")
def annulus_geometry():
    return ProblemGeometry.annulus(1.0, 2.0, 256)


@pytest.fixture(scope="session")
def annulus_ops(annulus_geometry):
    return assemble_block_operators(annulus_geometry)


@pytest.fixture(scope="session")
def annulus_spectrum(annulus_ops):
    return build_symmetrization(annulus_ops)


@pytest.fixture(scope="session")
def ellipse_geometry():
    return ProblemGeometry(Ellipse(a=2.0, b=1.0), Circle(radius=3.0), 256, 256)


@pytest.fixture(scope="session")
def ellipse_ops(ellipse_geometry):
    return assemble_block_operators(ellipse_geometry)


@pytest.fixture(scope="session")
def ellipse_spectrum(ellipse_ops):
    return build_symmetrization(ellipse_ops)


@pytest.fixture(scope="session")
def perturbed_geometry():
    return ProblemGeometry(PerturbedCircle(base_radius=1.0, amplitude=0.2, wavenumber=3), Circle(radius=2.5), 256, 256)


ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    """Print and keep one pass/fail line per acceptance criterion."""
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append((number, line))
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
