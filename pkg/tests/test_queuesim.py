import csv
import io

import numpy as np
import pytest

from hetnet_spectrum.model import InstabilityError, SpectrumPartition, objective, worst_case_rates
from hetnet_spectrum.queuesim import SimConfig, compare_bound, simulate, simulate_rates
from hetnet_spectrum.topology import EfficiencyTable

from conftest import geometric_table


def mm1_rates(r):
    return np.array([[0.0], [r]])


FAST = SimConfig(horizon=2e4, replications=8, seed=11)


@pytest.mark.parametrize("method", ["event", "uniformization"])
def test_mm1_mean_sojourn(method):
    stats = simulate_rates(mm1_rates(3.0), [1.0], SimConfig(horizon=1e5, seed=1, method=method))
    assert stats.aggregate_sojourn == pytest.approx(0.5, rel=0.02)
    assert stats.packet_aggregate_sojourn == pytest.approx(0.5, rel=0.02)
    assert stats.active_fraction[0] == pytest.approx(1 / 3, rel=0.02)


def test_light_load_sojourn_is_service_time():
    stats = simulate_rates(mm1_rates(2.0), [1e-3], SimConfig(horizon=2e6, seed=2))
    assert stats.packet_aggregate_sojourn == pytest.approx(0.5, rel=0.05)


def test_littles_law_matches_packet_tally():
    rng = np.random.default_rng(4)
    table = geometric_table(3, rng)
    x = SpectrumPartition.from_dense(3, np.r_[0, rng.dirichlet(np.ones(7))])
    lam = 0.6 * worst_case_rates(x, table)
    stats = simulate(table, x, lam, FAST)
    np.testing.assert_allclose(stats.packet_sojourn, stats.mean_sojourn, rtol=0.05)


def test_orthogonal_partition_is_exact():
    table = EfficiencyTable.interference_free([3.0, 4.0, 5.0])
    x = SpectrumPartition.orthogonal([0.3, 0.3, 0.4])
    lam = np.array([0.5, 0.6, 1.0])
    analytic, stats = compare_bound(table, x, lam, SimConfig(horizon=1e5, seed=5))
    assert abs(stats.aggregate_sojourn - analytic) <= stats.aggregate_ci


def test_zero_interference_full_reuse_is_exact():
    # without interference every queue keeps its full rate whatever the others do
    table = EfficiencyTable.interference_free([2.0, 3.0])
    lam = np.array([1.0, 1.5])
    analytic, stats = compare_bound(table, SpectrumPartition.full_reuse(2), lam,
                                    SimConfig(horizon=1e5, seed=6))
    assert analytic == pytest.approx(0.4 * 1.0 + 0.6 * (1 / 1.5))
    assert abs(stats.aggregate_sojourn - analytic) <= stats.aggregate_ci


def test_full_reuse_light_load_beats_bound():
    # idle neighbours stop interfering, so the real delay is well under the bound
    table = EfficiencyTable.from_function(2, lambda i, c: 2.0 if len(c) == 1 else 1.0)
    lam = np.array([0.5, 0.5])
    analytic, stats = compare_bound(table, SpectrumPartition.full_reuse(2), lam, FAST)
    assert analytic == pytest.approx(2.0)
    assert stats.aggregate_sojourn + stats.aggregate_ci < analytic


def test_reproducible_and_seed_sensitive():
    table = EfficiencyTable.interference_free([2.0, 3.0])
    x = SpectrumPartition.full_reuse(2)
    a = simulate(table, x, [1.0, 1.0], FAST)
    b = simulate(table, x, [1.0, 1.0], FAST)
    c = simulate(table, x, [1.0, 1.0], SimConfig(horizon=2e4, replications=8, seed=12))
    np.testing.assert_array_equal(a.per_replication, b.per_replication)
    assert not np.array_equal(a.per_replication, c.per_replication)


def test_delay_grows_with_load():
    table = EfficiencyTable.from_function(2, lambda i, c: 2.0 if len(c) == 1 else 1.4)
    x = SpectrumPartition(2, {1: 0.2, 2: 0.2, 3: 0.6})
    delays = [simulate(table, x, [load, load], FAST).aggregate_sojourn for load in (0.2, 0.5, 0.9)]
    assert delays == sorted(delays)


def test_event_and_uniformization_agree():
    rng = np.random.default_rng(9)
    table = geometric_table(3, rng)
    x = SpectrumPartition.full_reuse(3)
    lam = 0.5 * table.s[7]
    ev = simulate(table, x, lam, SimConfig(horizon=5e4, seed=1))
    un = simulate(table, x, lam, SimConfig(horizon=5e4, seed=2, method="uniformization"))
    assert abs(ev.aggregate_sojourn - un.aggregate_sojourn) <= ev.aggregate_ci + un.aggregate_ci


def test_divergence_flag():
    stats = simulate_rates(mm1_rates(1.0), [2.0],
                           SimConfig(horizon=1e5, replications=2, max_packets=500))
    assert stats.diverged


def test_unstable_bound_raises_in_compare():
    table = EfficiencyTable.from_function(2, lambda i, c: 2.0 if len(c) == 1 else 0.5)
    with pytest.raises(InstabilityError):
        compare_bound(table, SpectrumPartition.full_reuse(2), [1.0, 1.0], FAST)


@pytest.mark.parametrize("kwargs", [dict(horizon=0), dict(replications=0),
                                    dict(warmup=2e5), dict(method="gillespie"),
                                    dict(max_packets=0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_rates_shape_checked():
    with pytest.raises(ValueError):
        simulate_rates(np.ones((3, 2)), [1.0, 1.0])
    with pytest.raises(ValueError):
        simulate_rates(mm1_rates(2.0), [0.0])


def test_replication_seeds_distinct():
    seeds = SimConfig(replications=20).replication_seeds()
    assert len(set(seeds)) == 20


def test_csv_layout():
    table = EfficiencyTable.interference_free([2.0, 3.0])
    stats = simulate(table, SpectrumPartition.full_reuse(2), [1.0, 1.0], FAST)
    rows = list(csv.reader(io.StringIO(stats.to_csv())))
    assert rows[0][:4] == ["bts", "lambda", "mean_queue_length", "mean_sojourn"]
    assert [r[0] for r in rows[1:]] == ["1", "2", "all"]
    assert float(rows[3][3]) == pytest.approx(stats.aggregate_sojourn, rel=1e-8)
    assert objective(SpectrumPartition.full_reuse(2), table, [1.0, 1.0]) == pytest.approx(0.75)
