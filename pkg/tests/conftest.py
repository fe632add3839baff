import pytest

from dfmix.quantum_scheme import fig1b_fields, fig1c_fields, sodium_preset


@pytest.fixture(scope="session")
def scheme():
    return sodium_preset()


@pytest.fixture(scope="session")
def fig1b(scheme):
    return fig1b_fields(scheme)


@pytest.fixture(scope="session")
def fig1c(scheme):
    return fig1c_fields(scheme)


@pytest.fixture(scope="session")
def scans(scheme, fig1b, fig1c):
    """Conversion scans with and without the control field, computed once."""
    from dfmix.propagation import conversion_scan

    cache = {}

    def get(name, control=True):
        key = (name, control)
        if key not in cache:
            f = {"fig1b": fig1b, "fig1c": fig1c}[name]
            cache[key] = conversion_scan(scheme, f if control else f.without_control(), z_max=5.0)
        return cache[key]

    return get


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
