import numpy as np
import pytest

from vrsw.mesh import RawMesh, build_regular_mesh, compute_dual_geometry, regular_raw

LX, LY = 5000.0, 4330.0
G_KM = 7.32e7        # km/day^2
F_COR = 5.3108       # 1/day


def perturbed_mesh(n1d: int, amp: float, seed: int, Lx: float = LX, Ly: float = LY):
    """Regular mesh with vertices jittered by up to ``amp`` edge lengths."""
    raw = regular_raw(n1d, Lx, Ly)
    rng = np.random.default_rng(seed)
    jitter = amp * (Lx / n1d) * rng.uniform(-1.0, 1.0, raw.vertices.shape)
    verts = np.mod(raw.vertices + jitter, [Lx, Ly])
    return compute_dual_geometry(RawMesh(verts, raw.triangles, Lx, Ly))


@pytest.fixture(scope="session")
def mesh4():
    return build_regular_mesh(4, LX, LY)


@pytest.fixture(scope="session")
def mesh8():
    return build_regular_mesh(8, LX, LY)


@pytest.fixture(scope="session")
def mesh16():
    return build_regular_mesh(16, LX, LY)


@pytest.fixture(scope="session")
def mesh32():
    return build_regular_mesh(32, LX, LY)


@pytest.fixture(scope="session")
def pmesh8():
    return perturbed_mesh(8, 0.08, 11)


@pytest.fixture(scope="session")
def params():
    from vrsw.dynamics import PhysParams

    return PhysParams(g=G_KM, f=F_COR, H0=0.75)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
