import numpy as np
import pytest

from hetnet_spectrum.model import worst_case_rates
from hetnet_spectrum.topology import (
    EfficiencyTable,
    RadioParams,
    build_efficiency_table,
    drop_scenario,
    generate_hex_grid,
)

SCENARIO_SEED = 0


def geometric_table(k, rng, noise=0.125e-6, alpha=3.0, spread=8.0):
    """Random path-loss table: BTS's uniform in a 100 m square, one UE point near each."""
    pos = rng.uniform(0, 100, (k, 2))
    ue = pos + rng.normal(0, spread, (k, 2))
    dist = np.hypot(*(ue[:, None, :] - pos[None, :, :]).transpose(2, 0, 1)).clip(1.0)
    gain = dist ** -alpha

    def eff(i, members):
        interference = sum(gain[i, j] for j in members if j != i)
        return np.log1p(gain[i, i] / (interference + noise))

    return EfficiencyTable.from_function(k, eff)


def random_stable_instance(k, rng, low=0.3, high=0.9, concentration=0.5):
    """Table, dense stable partition and arrival rates below its worst-case rates."""
    table = geometric_table(k, rng)
    x = np.r_[0.0, rng.dirichlet(np.full((1 << k) - 1, concentration))]
    lam = worst_case_rates(x, table) * rng.uniform(low, high, k)
    return table, x, lam


def random_feasible_lambda(table, rng, low=0.5, high=0.99):
    k = table.k
    x = np.r_[0.0, rng.dirichlet(np.full((1 << k) - 1, 0.3))]
    return worst_case_rates(x, table) * rng.uniform(low, high, k)


@pytest.fixture(scope="session")
def scenario():
    grid = generate_hex_grid(100, 100, 20)
    deployment, used = drop_scenario(grid, 7, SCENARIO_SEED)
    return deployment, build_efficiency_table(deployment, RadioParams())


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary
_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    if report.failed and report.when == "call":
        detail = detail or report.longrepr.reprcrash.message.splitlines()[0]
    _CRITERIA[number] = (title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, verdict, detail = _CRITERIA[number]
        line = f"criterion {number}: {verdict}  {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
