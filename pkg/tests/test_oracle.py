import math

import numpy as np
import pytest

from choidiv.channels import (ChoiMatrix, choi_from_kraus, classical_channel, conjugated_output,
                              depolarizing, identity, replacer)
from choidiv.linalg import random_psd, random_state
from choidiv.oracle import (brute_force_channel_re, channel_objective, classical_kl_channel,
                            integral_quadrature, umegaki)


def bsc(e):
    return np.array([[1 - e, e], [e, 1 - e]])


def kl(p, q):
    return float(np.sum(p * np.log(p / q)))


def test_umegaki_examples(rng):
    rho = random_state(3, rng)
    assert abs(umegaki(rho, rho)) <= 1e-12
    assert np.isclose(umegaki(np.diag([1.0, 0.0]), np.eye(2) / 2), math.log(2))
    assert umegaki(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])) == math.inf


def test_quadrature_examples(rng):
    rho = random_state(2, rng)
    assert abs(integral_quadrature(rho, rho)) <= 1e-12
    sigma = random_psd(2, rng)
    ref = umegaki(2 * sigma, sigma)
    assert np.isclose(ref, 2 * math.log(2) * np.trace(sigma).real)
    assert abs(integral_quadrature(2 * sigma, sigma) - ref) <= 1e-8
    with pytest.raises(ValueError):
        integral_quadrature(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))


def test_quadrature_matches_umegaki_subnormalized(rng):
    for _ in range(5):
        rho, sigma = random_psd(3, rng), random_psd(3, rng)
        sigma *= np.trace(rho).real / np.trace(sigma).real
        rho, sigma = 0.4 * rho / np.trace(rho).real, 0.4 * sigma / np.trace(sigma).real
        assert abs(integral_quadrature(rho, sigma) - umegaki(rho, sigma)) <= 1e-4


def test_classical_kl_examples():
    P = bsc(0.1)
    assert classical_kl_channel(P, P) == 0.0
    assert np.isclose(classical_kl_channel(np.eye(2), np.full((2, 2), 0.5)), math.log(2))
    ref = max(kl(bsc(0.1)[0], bsc(0.3)[0]), kl(bsc(0.1)[1], bsc(0.3)[1]))
    assert np.isclose(classical_kl_channel(bsc(0.1), bsc(0.3)), ref)
    assert classical_kl_channel(np.full((2, 2), 0.5), np.eye(2)) == math.inf
    with pytest.raises(ValueError):
        classical_kl_channel(np.eye(2), np.ones((2, 2)))


def test_brute_force_examples():
    g = choi_from_kraus(depolarizing(0.3))
    assert abs(brute_force_channel_re(g, g, n_restarts=2).value) <= 1e-6
    P, Q = np.array([[0.8, 0.2], [0.3, 0.7]]), np.array([[0.5, 0.5], [0.6, 0.4]])
    rep = brute_force_channel_re(classical_channel(P), classical_channel(Q), n_restarts=3)
    assert abs(rep.value - classical_kl_channel(P, Q)) <= 1e-4
    rep = brute_force_channel_re(choi_from_kraus(identity(2)),
                                 choi_from_kraus(replacer(np.eye(2) / 2)), n_restarts=2)
    assert abs(rep.value - 2 * math.log(2)) <= 1e-4
    assert np.allclose(rep.witness, np.eye(2) / 2, atol=1e-2)


def test_brute_force_dominates_point_values(rng):
    gN, gM = choi_from_kraus(identity(2)), choi_from_kraus(depolarizing(0.5))
    best = brute_force_channel_re(gN, gM, n_restarts=3).value
    for _ in range(10):
        rho = random_state(2, rng)
        assert channel_objective(gN, gM, rho) <= best + 1e-6


def test_brute_force_deterministic():
    gN, gM = choi_from_kraus(identity(2)), choi_from_kraus(depolarizing(0.25))
    a = brute_force_channel_re(gN, gM, n_restarts=2, seed=7)
    b = brute_force_channel_re(gN, gM, n_restarts=2, seed=7)
    assert a.value == b.value


def test_brute_force_rejects_infinite():
    gN = choi_from_kraus(identity(2))
    gM = ChoiMatrix(2, 2, np.diag([1.0, 0.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        brute_force_channel_re(gN, gM)
