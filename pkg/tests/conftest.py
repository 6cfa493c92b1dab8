"""Shared test helpers and the acceptance-criteria reporting hook."""
import numpy as np

# filled by tests/test_acceptance.py: {criterion number: (status, detail)}
ACCEPTANCE_RESULTS = {}
EXPECTED_CRITERIA = set()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not EXPECTED_CRITERIA and not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(EXPECTED_CRITERIA | set(ACCEPTANCE_RESULTS)):
        if n in ACCEPTANCE_RESULTS:
            status, detail = ACCEPTANCE_RESULTS[n]
            terminalreporter.write_line(f"criterion {n:2d}: {status} - {detail}")
        else:
            terminalreporter.write_line(
                f"criterion {n:2d}: NOT EVALUATED (test errored or was "
                f"deselected)")


def assert_rel_close(approx, exact, tol, context=""):
    """Max absolute difference relative to the larger of 1 and max|exact|."""
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(exact))) if exact.size else 0.0)
    err = float(np.max(np.abs(approx - exact))) if exact.size else 0.0
    assert err <= tol * scale, \
        f"{context} relative error {err / scale:.3e} exceeds {tol:.1e}"


def numeric_gradient(f, x, h=1e-6):
    """Central finite-difference gradient of a scalar function of a 1-d
    array."""
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g
