import math

import numpy as np
import pytest

from choidiv.bounds import BoundRequest, sandwich, upper_bound
from choidiv.channels import ChoiMatrix, choi_from_kraus, depolarizing, identity, replacer
from choidiv.grid import build_grid
from choidiv.linalg import partial_trace, random_state
from choidiv.spectral import interval_for_pair
from choidiv.resource import (CustomLmi, FreeSetError, FreeSetSpec, RestrictionInfeasible,
                              default_lambda_bar, free_divergence, free_grid,
                              min_over_free_upper, replacer_program)

ID = choi_from_kraus(identity(2))


def test_fixed_free_set_contains_channel():
    g = choi_from_kraus(depolarizing(0.4))
    res = min_over_free_upper(g, FreeSetSpec("fixed", choi=g), free_grid(8.0, 16))
    assert abs(res.upper) <= 1e-6
    assert res.matching_lower <= res.upper + 2e-8


def test_ppt_free_set_contains_ppt_channel():
    g = choi_from_kraus(depolarizing(0.75))
    res = min_over_free_upper(g, FreeSetSpec("ppt"), free_grid(8.0, 16))
    assert abs(res.upper) <= 1e-6


def test_replacer_qubit_identity():
    res = free_divergence(ID, FreeSetSpec("replacer"), eps=1e-2)
    assert abs(res.upper - 2 * math.log(2)) <= 1e-2
    assert res.matching_lower <= res.upper + 2e-8
    out = partial_trace(res.optimizer_choi.op, 2, 2, "B") / 2
    assert np.allclose(out, np.eye(2) / 2, atol=1e-3)


def test_frozen_replacer_matches_fixed():
    sigma = np.eye(2) / 2
    fixed = choi_from_kraus(replacer(sigma))
    grid = build_grid(interval_for_pair(ID, fixed), 24)
    prob, _ = replacer_program(ID, sigma, grid)
    a = prob.solve().primal_objective
    b = min_over_free_upper(ID, FreeSetSpec("fixed", choi=fixed), grid).upper
    assert abs(a - b) <= 1e-8


def test_trivial_output_dimension():
    trace_map = ChoiMatrix(2, 1, np.eye(2))
    res = min_over_free_upper(trace_map, FreeSetSpec("replacer"), free_grid(2.0, 8))
    assert abs(res.upper) <= 1e-6
    assert abs(sandwich(BoundRequest(trace_map, trace_map)).upper) <= 1e-6


def test_fixed_matches_upper_bound():
    g = choi_from_kraus(depolarizing(0.5))
    a = min_over_free_upper(ID, FreeSetSpec("fixed", choi=g), free_grid(8.0, 20)).upper
    b = upper_bound(ID, g, build_grid(interval_for_pair(ID, g), 20)).value
    assert abs(a - b) <= 1e-8


def test_restriction_validity_against_members(rng):
    grid = free_grid(8.0, 32)
    best = min_over_free_upper(ID, FreeSetSpec("replacer"), grid).upper
    for _ in range(5):
        sigma = random_state(2, rng)
        sigma = 0.7 * sigma + 0.3 * np.eye(2) / 2  # keeps lambda below 8
        prob, _ = replacer_program(ID, sigma, grid)
        val = prob.solve().primal_objective
        assert best <= val + 1e-6


def test_lambda_insensitivity_at_optimizer():
    eps = 1e-2
    res = free_divergence(ID, FreeSetSpec("replacer"), eps=eps)
    exact = sandwich(BoundRequest(ID, res.optimizer_choi, eps=eps))
    assert abs(exact.midpoint - res.upper) <= 2 * eps


def test_custom_lmi_all_channels():
    F = FreeSetSpec("custom", lmis=[CustomLmi((np.eye(4),))])
    res = min_over_free_upper(choi_from_kraus(depolarizing(0.3)), F, free_grid(16.0, 16))
    assert abs(res.upper) <= 1e-6


def test_lambda_bar_too_small():
    with pytest.raises(RestrictionInfeasible, match="lambda_bar"):
        min_over_free_upper(ID, FreeSetSpec("replacer", lambda_bar=1.0), free_grid(1.0, 4))


def test_rejected_and_invalid_sets():
    for kind in ("entanglement_breaking", "separable"):
        with pytest.raises(FreeSetError, match="SDP"):
            FreeSetSpec(kind)
    with pytest.raises(FreeSetError):
        FreeSetSpec("replacer", lambda_bar=0.5)
    with pytest.raises(FreeSetError):
        FreeSetSpec("fixed")
    with pytest.raises(FreeSetError):
        FreeSetSpec("replacer", delta_reg=0.3).check_dims(2, 2)


def test_default_lambda_bar():
    assert default_lambda_bar(ID) == 8.0
    assert np.isclose(default_lambda_bar(ID, 0.1), 20.0)


def test_from_json():
    F = FreeSetSpec.from_json({"kind": "replacer", "lambda_bar": 6, "delta_reg": 0.01})
    assert F.kind == "replacer" and F.lambda_bar == 6.0 and F.delta_reg == 0.01
    F = FreeSetSpec.from_json({"kind": "custom", "lmis": [{"terms": [np.eye(4).tolist()]}]})
    assert len(F.lmis) == 1
    F = FreeSetSpec.from_json({"kind": "fixed", "choi": ID.op.real.tolist()}, (2, 2))
    assert np.allclose(F.choi.op, ID.op)
    with pytest.raises(FreeSetError):
        FreeSetSpec.from_json({"lambda_bar": 3})
