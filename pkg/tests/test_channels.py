import json

import numpy as np
import pytest

from choidiv.channels import (ChannelError, ChoiMatrix, KrausChannel, amplitude_damping,
                              apply_channel, builtin, channel_from_json, channel_to_json,
                              choi_from_kraus, classical_channel, conjugated_output, dephasing,
                              depolarizing, identity, load_channel, replacer)
from choidiv.linalg import partial_trace, random_state, random_unitary

PHI = np.zeros((4, 4))
PHI[np.ix_([0, 3], [0, 3])] = 1.0


def test_choi_examples():
    g = choi_from_kraus(identity(2))
    assert np.allclose(g.op, PHI)
    assert np.linalg.matrix_rank(g.op) == 1 and np.isclose(np.trace(g.op), 2)
    assert np.allclose(choi_from_kraus(depolarizing(1.0)).op, np.kron(np.eye(2), np.eye(2) / 2))
    sigma = np.array([[0.7, 0.2j], [-0.2j, 0.3]])
    assert np.allclose(choi_from_kraus(replacer(sigma)).op, np.kron(np.eye(2), sigma))


def test_apply_channel(rng):
    rho = random_state(2, rng)
    assert np.allclose(apply_channel(choi_from_kraus(identity(2)), rho), rho)
    sigma = np.diag([0.25, 0.75])
    assert np.allclose(apply_channel(choi_from_kraus(replacer(sigma)), rho), sigma)
    for p in (0.1, 0.5, 0.9):
        out = apply_channel(choi_from_kraus(depolarizing(p)), rho)
        assert np.allclose(out, (1 - p) * rho + p * np.eye(2) / 2, atol=1e-10)
    ch = amplitude_damping(0.3)
    direct = sum(K @ rho @ K.conj().T for K in ch.kraus_ops)
    assert np.allclose(apply_channel(choi_from_kraus(ch), rho), direct, atol=1e-10)
    with pytest.raises(ChannelError):
        apply_channel(choi_from_kraus(ch), np.eye(3))


def test_conjugated_output(rng):
    g = choi_from_kraus(dephasing(0.4))
    assert np.allclose(conjugated_output(g, np.eye(2)), g.op)
    P0 = np.diag([1.0, 0.0])
    out = conjugated_output(g, P0)
    assert np.allclose(out, np.kron(P0, apply_channel(g, P0)))
    rho = random_state(2, rng)
    trA = partial_trace(g.op, 2, 2, "A")
    assert np.isclose(np.trace(conjugated_output(g, rho)), np.trace(rho @ trA), atol=1e-10)
    with pytest.raises(ValueError):
        conjugated_output(g, np.diag([1.0, -0.5]))


def test_builtin_examples():
    assert np.allclose(choi_from_kraus(depolarizing(0.0)).op, choi_from_kraus(identity(2)).op,
                       atol=1e-12)
    g = choi_from_kraus(amplitude_damping(1.0))
    for rho in (np.diag([0.0, 1.0]), np.full((2, 2), 0.5)):
        assert np.allclose(apply_channel(g, rho), np.diag([1.0, 0.0]))
    rho = np.array([[0.6, 0.3 - 0.1j], [0.3 + 0.1j, 0.4]])
    hand = np.array([[0.6, 0.5 * (0.3 - 0.1j)], [0.5 * (0.3 + 0.1j), 0.4]])
    assert np.allclose(apply_channel(choi_from_kraus(dephasing(0.5)), rho), hand)
    with pytest.raises(ChannelError):
        depolarizing(1.5)
    with pytest.raises(ChannelError):
        builtin("erasure", 0.1)
    assert isinstance(builtin("dephasing", 0.2), KrausChannel)


def test_kraus_remix_invariance(rng):
    ch = depolarizing(0.3)
    ops = ch.kraus_ops[:2]
    U = random_unitary(2, rng)
    mixed = [U[0, 0] * ops[0] + U[0, 1] * ops[1], U[1, 0] * ops[0] + U[1, 1] * ops[1]]
    a = choi_from_kraus(KrausChannel(2, 2, tuple(ops) + ch.kraus_ops[2:]))
    b = choi_from_kraus(KrausChannel(2, 2, tuple(mixed) + ch.kraus_ops[2:]))
    assert np.abs(a.op - b.op).max() <= 1e-10


def test_trace_term_vanishes_for_channels(rng):
    gN, gM = choi_from_kraus(depolarizing(0.3)), choi_from_kraus(amplitude_damping(0.4))
    for _ in range(5):
        rho = random_state(2, rng)
        assert abs(np.trace(np.kron(rho, np.eye(2)) @ (gN.op - gM.op))) <= 1e-12


def test_validation_errors():
    with pytest.raises(ChannelError):
        KrausChannel(2, 2, (2 * np.eye(2),))
    with pytest.raises(ChannelError):
        ChoiMatrix(2, 2, -np.eye(4))
    with pytest.raises(ChannelError):
        ChoiMatrix(2, 2, np.eye(3))
    sub = KrausChannel(2, 2, (0.5 * np.eye(2),), trace_preserving=False)
    assert not choi_from_kraus(sub).trace_preserving


def test_classical_channel():
    P = np.array([[0.9, 0.1], [0.2, 0.8]])
    g = classical_channel(P)
    assert np.allclose(np.diag(g.op).real, P.ravel())
    assert np.allclose(apply_channel(g, np.diag([1.0, 0.0])), np.diag(P[0]))


def test_json_round_trip(tmp_path):
    for ch in (identity(2), depolarizing(0.5), amplitude_damping(0.2), dephasing(0.3, d=3)):
        spec = channel_to_json(ch)
        p = tmp_path / "c.json"
        p.write_text(json.dumps(spec))
        assert np.abs(load_channel(p).op - choi_from_kraus(ch).op).max() <= 1e-12
    g = choi_from_kraus(depolarizing(0.5))
    assert np.allclose(channel_from_json(channel_to_json(g)).op, g.op)


def test_json_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"kind": "kraus",\n "ops": [}')
    with pytest.raises(ChannelError, match="line 2"):
        load_channel(p)
    with pytest.raises(ChannelError, match="ops"):
        channel_from_json({"kind": "kraus"})
    with pytest.raises(ChannelError, match="kind"):
        channel_from_json({"kind": "unitary"})
