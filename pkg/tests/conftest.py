import time

import pytest
from hypothesis import HealthCheck, settings

from mobius_sums.constants import QuadratureSpec, constant_L, local_L_many, sum_Lm_over_m

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

# cheap spec for structural tests of the quadrature routines
SMALL_SPEC = QuadratureSpec(tau_max=300.0, prime_max=2000, abs_tol=1e-8)

ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance(request):
    """Record and print one PASS/FAIL line for a criterion; returns the verdict."""
    lines = request.config.stash[ACCEPTANCE_LINES]

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


@pytest.fixture(scope="session")
def small_spec():
    return SMALL_SPEC


@pytest.fixture(scope="session")
def default_constants():
    """L, L(m) for m in {1, 2, 6, 30} and the L(m)/m partial sum at the default spec.

    Shared by the constants tests and the acceptance suite: each is a full
    quadrature pass of about a minute.  Wall times are kept for the time limits.
    """
    spec = QuadratureSpec()
    out = {"spec": spec, "seconds": {}}
    for key, fn in (
        ("L", lambda: constant_L(spec)),
        ("L_m", lambda: local_L_many([1, 2, 6, 30], spec)),
        ("sum_Lm", lambda: sum_Lm_over_m(10**4, spec)),
    ):
        t0 = time.perf_counter()
        out[key] = fn()
        out["seconds"][key] = time.perf_counter() - t0
    return out
