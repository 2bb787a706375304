import numpy as np
import pytest

from oracles import h_inf_sweep
from reluqc.analysis import (
    build_lip_lmi,
    build_perf_lmi,
    class_structure_residual,
    feasibility_threshold,
    gain_sdp,
    gain_sweep,
    lip_sdp,
    stability_margin,
)
from reluqc.core import QcMatrix, enumerate_sign_patterns, sign_scale
from reluqc.qc_sets import build_m1, mc_membership
from reluqc.systems import (
    NeuralNet,
    StateSpace,
    empirical_gain_lower_bound,
    empirical_lipschitz_lower_bound,
    example_a,
    example_b,
    h_inf_norm,
    stack_network,
)


def _random_system(rng, nx=2, nv=2):
    A = rng.standard_normal((nx, nx))
    A *= 0.5 / np.max(np.abs(np.linalg.eigvals(A)))
    return StateSpace(A, 0.3 * rng.standard_normal((nx, nv)), rng.standard_normal((nx, 1)),
                      0.3 * rng.standard_normal((nv, nx)), np.tril(0.3 * rng.standard_normal((nv, nv)), -1),
                      rng.standard_normal((nv, 1)), rng.standard_normal((1, nx)), 0.5 * rng.standard_normal((1, nv)),
                      0.3 * rng.standard_normal((1, 1)))


def _random_net(rng):
    # McInc_relaxed has 4^m pattern pairs, so the total hidden width stays at most 3
    h1 = int(rng.integers(1, 3))
    dims = [int(rng.integers(1, 4)), h1, int(rng.integers(1, 4 - h1)), int(rng.integers(1, 3))]
    W = tuple(rng.standard_normal((dims[k + 1], dims[k])) for k in range(3))
    return NeuralNet(W, ())


def test_perf_lmi_bounded_real_specialization():
    a, b, c, d = 0.5, 1.0, 2.0, 0.3
    G = StateSpace.lti(a, b, c, d)
    p, g2 = 1.7, 4.2
    got = build_perf_lmi(G, p, np.zeros((0, 0)), g2).const
    want = np.array([[a * p * a - p + c * c, a * p * b + c * d],
                     [b * p * a + d * c, b * p * b + d * d - g2]])
    np.testing.assert_allclose(got, want, rtol=1e-14)


def test_perf_lmi_dimensions_and_constant_term():
    G = example_a()(0.3)
    lmi = build_perf_lmi(G, np.zeros((G.nx, G.nx)), np.zeros((2 * G.nv, 2 * G.nv)), 0.0)
    assert lmi.size == 9
    K = np.hstack([G.C2, G.D21, G.D22])
    np.testing.assert_allclose(lmi.const, K.T @ K)


def test_perf_lmi_qc_term_matches_quadratic_form():
    """``z^T LMI z`` equals the dissipation inequality evaluated along a trajectory step."""
    rng = np.random.default_rng(0)
    G = _random_system(rng)
    P = np.eye(G.nx) * 0.7
    M = build_m1(rng.standard_normal(G.nv))
    g2 = 3.0
    L = build_perf_lmi(G, P, M.m, g2).const
    x, w, d = rng.standard_normal(G.nx), rng.standard_normal(G.nv), rng.standard_normal(G.nd)
    z = np.concatenate([x, w, d])
    xn = G.A @ x + G.B1 @ w + G.B2 @ d
    v = G.C1 @ x + G.D11 @ w + G.D12 @ d
    e = G.C2 @ x + G.D21 @ w + G.D22 @ d
    vw = np.concatenate([v, w])
    want = xn @ P @ xn - x @ P @ x + vw @ M.m @ vw + e @ e - g2 * d @ d
    assert z @ L @ z == pytest.approx(want, rel=1e-12)


def test_lip_lmi_examples():
    sn = stack_network(example_b())
    assert build_lip_lmi(sn, np.zeros((6, 6)), 0.0).size == 6
    const = build_lip_lmi(sn, np.zeros((6, 6)), 0.0).const
    np.testing.assert_allclose(const, sn.C.T @ sn.C)
    assert np.linalg.eigvalsh(const)[-1] > 0
    ident = stack_network(NeuralNet(([[1.0]], [[1.0]]), ()))
    M = np.array([[0.2, 0.5], [0.5, -1.3]])
    np.testing.assert_allclose(build_lip_lmi(ident, M, 0.8).const, [[0.2 - 0.8, 0.5], [0.5, -1.3 + 1.0]])


def test_lip_identity_relu_net_is_one():
    cert = lip_sdp(NeuralNet(([[1.0]], [[1.0]]), ()), "Mi1")
    assert cert.certified and cert.L == pytest.approx(1.0, abs=1e-4)


def test_decoupled_gain_matches_h_inf():
    rng = np.random.default_rng(1)
    G0 = _random_system(rng)
    G = StateSpace(G0.A, np.zeros_like(G0.B1), G0.B2, np.zeros_like(G0.C1), G0.D11, G0.D12, G0.C2,
                   np.zeros_like(G0.D21), G0.D22)
    ref = h_inf_norm(G.A, G.B2, G.C2, G.D22)
    assert ref == pytest.approx(h_inf_sweep(G.A, G.B2, G.C2, G.D22, points=4001), rel=1e-3)
    for cls in ("Mc_relaxed", "M12_relaxed"):
        cert = gain_sdp(G, cls)
        assert cert.certified
        assert cert.gamma == pytest.approx(ref, rel=1e-3)


def test_nominal_gain_example_a():
    for cls in ("Mc_relaxed", "M12_relaxed"):
        cert = gain_sdp(example_a()(0.0), cls)
        assert cert.certified and abs(cert.gamma - 39.8) <= 0.4


def test_class_ordering_on_example_a():
    for alpha in (0.0, 0.2, 0.4, 0.6):
        G = example_a()(alpha)
        c, m = gain_sdp(G, "Mc_relaxed"), gain_sdp(G, "M12_relaxed")
        assert c.certified and m.certified
        assert c.gamma <= m.gamma + 1e-6


def test_m123_matches_m12_on_example_a():
    for alpha in (0.2, 0.4):
        G = example_a()(alpha)
        g12, g123 = gain_sdp(G, "M12_relaxed").gamma, gain_sdp(G, "M123_relaxed").gamma
        assert g123 <= g12 * (1 + 1e-6)
        assert g123 == pytest.approx(g12, rel=1e-4)


def test_gain_soundness_and_ordering_random_systems():
    rng = np.random.default_rng(2)
    for _ in range(5):
        G = _random_system(rng)
        c, m = gain_sdp(G, "Mc_relaxed"), gain_sdp(G, "M12_relaxed")
        assert c.certified and m.certified
        assert c.gamma <= m.gamma + 1e-6
        lower = empirical_gain_lower_bound(G, horizon=256, trials=200, seed=int(rng.integers(1 << 30)))
        assert lower <= c.gamma + 1e-6


def test_gain_certificate_replay():
    G = example_a()(0.4)
    cert = gain_sdp(G, "Mc_relaxed")
    assert cert.certified
    assert np.linalg.eigvalsh(cert.P)[0] >= -1e-7 * max(1.0, np.abs(cert.P).max())
    L = build_perf_lmi(G, cert.P, cert.M.m, cert.gamma ** 2).const
    assert np.linalg.eigvalsh(L)[-1] < 0
    for D in enumerate_sign_patterns(G.nv):
        S = sign_scale(cert.M, D)
        N = np.maximum(cert.extras[f"N_{D}"], 0.0)
        assert np.linalg.eigvalsh(S - N)[0] >= -1e-7 * max(1.0, np.abs(S).max())
    assert class_structure_residual("Mc_relaxed", cert.M.m, cert.extras) >= -1e-7
    assert mc_membership(cert.M).member != "no"


def test_gain_certificate_rejects_tampering():
    G = example_a()(0.4)
    cert = gain_sdp(G, "M12_relaxed")
    L = build_perf_lmi(G, cert.P, cert.M.m, (0.9 * cert.gamma) ** 2).const
    assert np.linalg.eigvalsh(L)[-1] > 0


def test_thresholds():
    fam = example_a()
    t12 = feasibility_threshold(fam, "M12_relaxed", 0.5, 0.9)
    tc = feasibility_threshold(fam, "Mc_relaxed", 0.9, 1.3)
    assert abs(t12 - 0.699) <= 0.02
    assert abs(tc - 1.10) <= 0.02
    assert tc >= t12 - 5e-3
    with pytest.raises(ValueError):
        feasibility_threshold(fam, "M12_relaxed", 0.8, 0.9)


def test_margin_and_gain_agree_on_feasibility():
    fam = example_a()
    assert stability_margin(fam(0.6), "M12_relaxed").feasible
    assert not stability_margin(fam(0.8), "M12_relaxed").feasible
    assert not gain_sdp(fam(0.8), "M12_relaxed").certified
    assert gain_sdp(fam(0.8), "Mc_relaxed").certified


def test_gain_sweep_is_pointwise():
    fam = example_a()
    out = gain_sweep(fam, "M12_relaxed", [0.0, 0.3])
    assert [round(c.gamma, 6) for c in out] == [round(gain_sdp(fam(a), "M12_relaxed").gamma, 6) for a in (0.0, 0.3)]


def test_lipschitz_example_b():
    nn = example_b()
    want = {"Mi1": 1.2528, "Mi1_plus_Mi2": 1.2528, "McInc_relaxed": 1.1817}
    certs = {cls: lip_sdp(nn, cls) for cls in want}
    for cls, L in want.items():
        assert certs[cls].certified
        assert abs(certs[cls].L - L) <= 1e-3, (cls, certs[cls].L)
    assert certs["Mi1_plus_Mi2"].L <= certs["Mi1"].L + 1e-6
    lower = empirical_lipschitz_lower_bound(nn, 10**5, seed=0)
    assert 1.17 - 0.02 <= lower <= min(c.L for c in certs.values())


def test_lipschitz_soundness_and_ordering_random_nets():
    rng = np.random.default_rng(3)
    for _ in range(5):
        nn = _random_net(rng)
        mi1, inc = lip_sdp(nn, "Mi1"), lip_sdp(nn, "McInc_relaxed")
        assert mi1.certified and inc.certified
        assert inc.L <= mi1.L + 1e-6
        lower = empirical_lipschitz_lower_bound(nn, 10**5, seed=int(rng.integers(1 << 30)))
        assert lower <= inc.L + 1e-6


def test_lipschitz_certificate_replay():
    nn = example_b()
    cert = lip_sdp(nn, "McInc_relaxed")
    sn = stack_network(nn)
    L = build_lip_lmi(sn, cert.M.m, cert.L ** 2).const
    assert np.linalg.eigvalsh(L)[-1] <= 1e-7 * max(1.0, np.abs(L).max())
    assert isinstance(cert.M, QcMatrix)


def test_unknown_class_names():
    with pytest.raises(ValueError):
        gain_sdp(example_a()(0.0), "Mi1")
    with pytest.raises(ValueError):
        lip_sdp(example_b(), "Mc_relaxed")
