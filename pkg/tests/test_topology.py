import json
import math

import numpy as np
import pytest

from hetnet_spectrum.topology import (
    Deployment,
    EfficiencyTable,
    HexGrid,
    OrphanBtsError,
    RadioParams,
    TopologyError,
    associate,
    build_efficiency_table,
    deployment_from_dict,
    deployment_to_dict,
    drop_scenario,
    generate_hex_grid,
    members_of,
    place_bts,
    table_from_dict,
    table_to_dict,
)


@pytest.fixture(scope="module")
def grid():
    return generate_hex_grid(100, 100, 20)


def test_default_grid_counts_are_pinned(grid):
    # flat-top tiling anchored at the area center, closed rectangle
    assert grid.n_cells == 27
    assert grid.n_vertices == 66


def test_finer_spacing_roughly_quadruples_cells(grid):
    fine = generate_hex_grid(100, 100, 10)
    assert fine.n_cells == 115
    assert 3.5 <= fine.n_cells / grid.n_cells <= 4.5


def test_degenerate_grid_has_a_cell():
    g = generate_hex_grid(20, 20, 20)
    assert g.n_cells >= 1
    assert g.n_vertices >= 1


def test_cells_and_vertices_inside_area(grid):
    for pts in (grid.cells, grid.vertices):
        assert np.all(pts >= -1e-9)
        assert np.all(pts <= 100 + 1e-9)


def test_neighbouring_centers_are_spacing_apart(grid):
    d = np.hypot(*(grid.cells[:, None, :] - grid.cells[None, :, :]).transpose(2, 0, 1))
    np.fill_diagonal(d, np.inf)
    assert np.allclose(d.min(axis=1), 20.0)


def test_vertices_are_distinct(grid):
    d = np.hypot(*(grid.vertices[:, None, :] - grid.vertices[None, :, :]).transpose(2, 0, 1))
    np.fill_diagonal(d, np.inf)
    assert d.min() > 1.0


@pytest.mark.parametrize("args", [(0, 100, 20), (100, -1, 20), (100, 100, 0), (10, 100, 20)])
def test_invalid_dimensions(args):
    with pytest.raises(TopologyError):
        generate_hex_grid(*args)


def test_place_bts_distinct_and_reproducible(grid):
    a = place_bts(grid, 7, seed=1)
    b = place_bts(grid, 7, seed=1)
    assert len(set(a.bts_vertices)) == 7
    np.testing.assert_array_equal(a.bts_positions, b.bts_positions)
    assert a.bts_vertices == b.bts_vertices


def test_place_single_bts(grid):
    dep = place_bts(grid, 1, seed=3)
    assert dep.k == 1
    assert any(np.allclose(dep.bts_positions[0], v) for v in grid.vertices)


def test_too_many_bts():
    g = generate_hex_grid(20, 20, 20)
    with pytest.raises(TopologyError):
        place_bts(g, g.n_vertices + 1, seed=0)
    with pytest.raises(TopologyError):
        place_bts(generate_hex_grid(100, 100, 20), 17, seed=0)


def _manual_deployment(cells, bts):
    grid = HexGrid(100, 100, 20, np.asarray(cells, float), np.asarray(bts, float))
    return Deployment(grid, np.asarray(bts, float))


def test_tie_split_evenly():
    dep = associate(_manual_deployment([[50, 50]], [[40, 50], [60, 50]]))
    np.testing.assert_allclose(dep.association, [[0.5, 0.5]])


def test_strictly_nearest_gets_everything():
    dep = associate(_manual_deployment([[50, 50]], [[0, 0], [100, 100], [55, 50]]))
    np.testing.assert_allclose(dep.association, [[0, 0, 1]])


def test_single_bts_serves_all(grid):
    dep = associate(place_bts(grid, 1, seed=0))
    np.testing.assert_allclose(dep.association, 1.0)


def test_association_weights_sum_to_one(grid):
    for seed in range(20):
        dep = associate(place_bts(grid, 7, seed=seed))
        np.testing.assert_allclose(dep.association.sum(axis=1), 1.0, atol=1e-12)
        d = np.hypot(*(dep.grid.cells[:, None, :] - dep.bts_positions[None]).transpose(2, 0, 1))
        nearest = d.min(axis=1, keepdims=True)
        assert np.all((dep.association > 0) == np.isclose(d, nearest, rtol=1e-9, atol=0))


def test_single_cell_efficiency_hand_value():
    # 20 m link, p = 1 W/Hz, n = 0.125 uW/Hz, exponent 3: SNR = 1000
    dep = associate(_manual_deployment([[20, 0]], [[0, 0]]))
    table = build_efficiency_table(dep, RadioParams())
    assert table[1, 0] == pytest.approx(math.log(1001), rel=1e-12)
    table2 = build_efficiency_table(dep, RadioParams(log_base="base2"))
    assert table2[1, 0] == pytest.approx(math.log2(1001), rel=1e-12)


def test_interferer_lowers_efficiency():
    dep = associate(_manual_deployment([[20, 0], [80, 0]], [[0, 0], [100, 0]]))
    table = build_efficiency_table(dep, RadioParams())
    # BTS 1 alone vs BTS 2 also transmitting at 80 m from BTS 1's UEs
    snr_alone = 20.0**-3 / 0.125e-6
    sinr = 20.0**-3 / (80.0**-3 + 0.125e-6)
    assert table[0b01, 0] == pytest.approx(math.log1p(snr_alone))
    assert table[0b11, 0] == pytest.approx(math.log1p(sinr))
    assert table[0b11, 0] < table[0b01, 0]


def test_per_bts_psd_is_used_for_interference():
    dep = associate(_manual_deployment([[20, 0], [80, 0]], [[0, 0], [100, 0]]))
    table = build_efficiency_table(dep, RadioParams(), tx_psd=[2.0, 4.0])
    sinr = 2 * 20.0**-3 / (4 * 80.0**-3 + 0.125e-6)
    assert table[0b11, 0] == pytest.approx(math.log1p(sinr))


def test_table_invariants(scenario):
    _, table = scenario
    k = table.k
    for c in range(1 << k):
        members = set(members_of(c))
        for i in range(k):
            assert (table[c, i] > 0) == (i in members)
    # adding one interferer never helps: enough to check single-bit supersets
    for c in range(1, 1 << k):
        for j in range(k):
            if not c >> j & 1:
                sup = c | 1 << j
                assert np.all(table.s[sup][table.s[c] > 0] <= table.s[c][table.s[c] > 0] + 1e-15)


def test_table_is_deterministic(grid):
    a, _ = drop_scenario(grid, 7, 4)
    b, _ = drop_scenario(grid, 7, 4)
    ta = build_efficiency_table(a, RadioParams())
    tb = build_efficiency_table(b, RadioParams())
    assert np.array_equal(ta.s, tb.s)


def test_orphan_bts_raises():
    # BTS 2 is farther from the only cell than BTS 1
    dep = associate(_manual_deployment([[10, 0]], [[0, 0], [100, 0]]))
    with pytest.raises(OrphanBtsError) as info:
        build_efficiency_table(dep, RadioParams())
    assert info.value.bts == [1]


def test_drop_scenario_skips_orphans(grid):
    dep, used = drop_scenario(grid, 7, 0)
    assert used >= 0
    assert np.all(dep.served_weight() > 0)


def test_radio_validation():
    with pytest.raises(ValueError):
        RadioParams(noise_psd=0)
    with pytest.raises(ValueError):
        RadioParams(log_base="base10")
    with pytest.raises(ValueError):
        RadioParams(tx_psd=(1.0, -1.0))


def test_json_roundtrip(grid):
    dep, _ = drop_scenario(grid, 7, 2)
    table = build_efficiency_table(dep, RadioParams())
    dep2 = deployment_from_dict(json.loads(json.dumps(deployment_to_dict(dep))))
    np.testing.assert_allclose(dep2.association, dep.association)
    np.testing.assert_allclose(dep2.bts_positions, dep.bts_positions)
    table2 = table_from_dict(json.loads(json.dumps(table_to_dict(table))))
    assert np.array_equal(table2.s, table.s)
    assert np.array_equal(build_efficiency_table(dep2, RadioParams()).s, table.s)


def test_interference_free_constructor():
    t = EfficiencyTable.interference_free([2.0, 3.0])
    np.testing.assert_array_equal(t.s, [[0, 0], [2, 0], [0, 3], [2, 3]])
