"""Block kernels: correlation determinants, restrictions, resolvents."""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from janossy_kit.chain_ensemble import ChainEnsemble
from janossy_kit.errors import SingularOperatorError
from janossy_kit.janossy import janossy_kernel_explicit
from janossy_kit.kernels import (
    CSV_SCHEMA,
    JSON_SCHEMA,
    check_points,
    correlation_function,
    correlation_kernel,
    dyson_mehta_check,
    export_kernel_csv,
    fredholm_det,
    kernel_to_json,
    resolvent_kernel,
    restrict,
)
from janossy_kit.measure_space import WindowFamily, make_discrete
from janossy_kit.models import build_random
from janossy_kit.oracle import brute_correlation, enumerate_density


def test_kernel_block_layout_and_value_agree():
    ens = build_random(2, 4, 2, 3)
    kernel = correlation_kernel(ens)
    assert kernel.blocks.shape == (3, 3, 4, 4)
    for l in (1, 3):
        for m in (1, 2):
            block = kernel.block(l, m)
            assert block.shape == (4, 4)
            assert kernel.value(l, 1, m, 2) == block[1, 2]
    with pytest.raises(ValueError):
        kernel.block(0, 1)
    with pytest.raises(ValueError):
        kernel.value(1, 4, 1, 0)


def test_check_points_validates_floors_and_nodes():
    ens = build_random(2, 4, 2, 2)
    assert check_points(ens, [(1, 0), (2, 3)]) == [(1, 0), (2, 3)]
    for bad in ([(0, 0)], [(3, 0)], [(1, -1)], [(1, 4)]):
        with pytest.raises(ValueError):
            check_points(ens, bad)


def test_correlation_determinants_match_brute_enumeration():
    ens = build_random(7, 4, 2, 2)
    dist = enumerate_density(ens)
    kernel = correlation_kernel(ens)
    cases = [
        [(1, 0)],
        [(2, 3)],
        [(1, 0), (1, 2)],
        [(1, 1), (2, 2)],
        [(1, 0), (1, 3), (2, 1)],
    ]
    for points in cases:
        det_form = correlation_function(kernel, points)
        brute = brute_correlation(dist, points)
        assert det_form == pytest.approx(brute, abs=1e-11)


def test_empty_point_set_gives_one():
    ens = build_random(7, 4, 2, 2)
    kernel = correlation_kernel(ens)
    assert correlation_function(kernel, []) == 1.0


def test_repeated_point_gives_zero():
    ens = build_random(7, 4, 2, 2)
    kernel = correlation_kernel(ens)
    val = correlation_function(kernel, [(1, 2), (1, 2)])
    assert abs(val) < 1e-12


def test_single_floor_kernel_is_a_reproducing_projection():
    """For M=1 the kernel projects: K W K = K and trace(K W) = n."""
    ens = build_random(5, 6, 3, 1)
    kernel = correlation_kernel(ens)
    K = kernel.blocks[0, 0]
    w = ens.space.weights
    assert np.allclose((K * w[None, :]) @ K, K, atol=1e-10)
    assert np.trace(K * w[None, :]).real == pytest.approx(3.0, abs=1e-10)
    assert abs(np.trace(K * w[None, :]).imag) < 1e-10


def test_dyson_mehta_check_vanishes_on_equal_floors():
    for seed in (3, 4):
        ens = build_random(seed, 4, 2, 2)
        kernel = correlation_kernel(ens)
        for k in (1, 2):
            for x in range(4):
                for z in range(4):
                    assert dyson_mehta_check(kernel, k, k, x, z) < 1e-10


def test_dyson_mehta_cross_floor_residual_is_deterministic():
    ens = build_random(9, 3, 2, 3)
    kernel = correlation_kernel(ens)
    first = [dyson_mehta_check(kernel, 1, 3, x, z)
             for x in range(3) for z in range(3)]
    second = [dyson_mehta_check(kernel, 1, 3, x, z)
              for x in range(3) for z in range(3)]
    assert first == second


def test_restrict_empty_windows_is_trivial():
    ens = build_random(4, 4, 2, 2)
    kernel = correlation_kernel(ens)
    wf = WindowFamily(tuple(ens.space.empty_window() for _ in range(2)))
    op = restrict(kernel, wf)
    assert op.size == 0
    assert fredholm_det(op) == 1.0


def test_restrict_orders_rows_by_floor_then_node():
    ens = build_random(4, 4, 2, 2)
    kernel = correlation_kernel(ens)
    wf = WindowFamily((ens.space.window([True, False, True, False]),
                       ens.space.window([False, True, False, False])))
    op = restrict(kernel, wf)
    assert op.index == ((1, 0), (1, 2), (2, 1))
    assert op.matrix.shape == (3, 3)
    # symmetrized entries: sqrt(w_x) K sqrt(w_y)
    w = ens.space.weights
    expect = np.sqrt(w[0]) * kernel.value(1, 0, 2, 1) * np.sqrt(w[1])
    assert op.matrix[0, 2] == pytest.approx(expect, rel=1e-13)


def test_full_restriction_determinant_is_numerically_zero():
    ens = build_random(4, 4, 2, 2)
    kernel = correlation_kernel(ens)
    wf = WindowFamily(tuple(ens.space.full_window() for _ in range(2)))
    det = fredholm_det(restrict(kernel, wf))
    assert abs(det) <= 1e-8


def test_resolvent_matches_explicit_window_kernel():
    ens = build_random(12, 5, 2, 2)
    kernel = correlation_kernel(ens)
    wf = WindowFamily((ens.space.window([True, True, False, False, False]),
                       ens.space.window([False, False, False, True, True])))
    res = resolvent_kernel(kernel, wf)
    jk = janossy_kernel_explicit(ens, wf)
    for l in (1, 2):
        il = wf.window(l).node_indices
        for m in (1, 2):
            im = wf.window(m).node_indices
            a = res.blocks[l - 1, m - 1][np.ix_(il, im)]
            b = jk.kernel.blocks[l - 1, m - 1][np.ix_(il, im)]
            assert np.allclose(a, b, atol=1e-10)


def test_resolvent_of_empty_windows_is_the_zero_operator():
    """Restricting to nothing leaves nothing to resolve: all blocks zero."""
    ens = build_random(12, 4, 2, 2)
    kernel = correlation_kernel(ens)
    wf = WindowFamily(tuple(ens.space.empty_window() for _ in range(2)))
    res = resolvent_kernel(kernel, wf)
    assert np.all(res.blocks == 0)


def test_resolvent_rejects_singular_restriction():
    # a projection kernel restricted to everything has eigenvalue 1,
    # so Id - K is exactly singular
    ens = build_random(5, 4, 2, 1)
    kernel = correlation_kernel(ens)
    wf = WindowFamily((ens.space.full_window(),))
    with pytest.raises(SingularOperatorError):
        resolvent_kernel(kernel, wf)


def test_correlation_function_requires_correlation_kind():
    ens = build_random(12, 4, 2, 2)
    kernel = correlation_kernel(ens)
    wf = WindowFamily(tuple(ens.space.empty_window() for _ in range(2)))
    res = resolvent_kernel(kernel, wf)
    with pytest.raises(ValueError):
        correlation_function(res, [(1, 0)])


def test_csv_export_round_trips_values(tmp_path):
    ens = build_random(3, 3, 2, 2)
    kernel = correlation_kernel(ens)
    path = tmp_path / "kernel.csv"
    export_kernel_csv(kernel, str(path))
    lines = path.read_text().splitlines()
    assert lines[0].startswith(f"# {CSV_SCHEMA} kernel")
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == (2 * 3) ** 2
    for row in rows[:20]:
        l, x = int(row["floor_row"]), int(row["node_row"])
        m, y = int(row["floor_col"]), int(row["node_col"])
        val = complex(float(row["re"]), float(row["im"]))
        assert val == kernel.value(l, x, m, y)
    assert not list(tmp_path.glob("*.tmp"))


def test_kernel_json_layout():
    ens = build_random(3, 3, 2, 2)
    kernel = correlation_kernel(ens)
    doc = kernel_to_json(kernel)
    assert doc["schema"] == JSON_SCHEMA
    assert doc["kind"] == kernel.kind
    assert doc["floors"] == 2
    val = doc["blocks"][0][1][0][2]
    assert complex(val[0], val[1]) == kernel.value(1, 0, 2, 2)
    json.dumps(doc)  # must be serializable as-is
