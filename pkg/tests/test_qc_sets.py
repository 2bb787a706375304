import numpy as np
import pytest

from oracles import plant_violation, random_dh, random_family_instance, random_s_plus_n, random_zero_excess
from reluqc.core import QcMatrix, flipped_relu, householder, inc_qc_form, leaky, qc_form, relu
from reluqc.copositivity import decide
from reluqc.dh_decomp import decompose_zero_excess
from reluqc.qc_sets import (
    QcFamilyTag,
    affine_pullback,
    affine_pushforward,
    build_m1,
    build_m2,
    build_m3,
    build_m12,
    build_mi1,
    build_mi2,
    classify_function,
    leaky_affine_data,
    m123_to_m12,
    m_alpha_beta_membership,
    mc_inc_membership,
    mc_membership,
    mh_membership,
)


def test_build_m1_examples():
    M = build_m1(np.eye(2)).m
    np.testing.assert_array_equal(M, [[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, -2, 0], [0, 1, 0, -2]])
    assert build_m1(-np.eye(2)).nv == 2
    assert not np.any(build_m1(np.zeros((2, 2))).m)
    with pytest.raises(ValueError):
        build_m1([[1, 1], [1, 1]])


def test_build_m2_examples():
    rng = np.random.default_rng(0)
    n = 3
    z = np.zeros((n, n))
    for i, j in [(0, 1), (1, 2)]:
        E = np.zeros((n, n))
        E[i, j] = E[j, i] = 1
        Mw = build_m2(np.block([[z, z], [z, E]]))
        Mwv = build_m2(np.block([[E, z], [z, z]]))
        v, w = rng.standard_normal(n), rng.standard_normal(n)
        assert qc_form(Mw, v, w) == pytest.approx(2 * w[i] * w[j])
        assert qc_form(Mwv, v, w) == pytest.approx(2 * (w[i] - v[i]) * (w[j] - v[j]))
    assert not np.any(build_m2(np.zeros((4, 4))).m)
    with pytest.raises(ValueError):
        build_m2(-np.eye(4), validate=True)


def test_build_m3_examples():
    np.testing.assert_array_equal(build_m3(np.eye(2)).m, build_m1(np.eye(2)).m)
    build_m3([[1, -1], [0, 1]])
    with pytest.raises(ValueError):
        build_m3([[0, 1], [0, 0]])


def test_build_mi1_mi2_examples():
    np.testing.assert_array_equal(build_mi1(np.eye(2)).m, build_m1(np.eye(2)).m)
    with pytest.raises(ValueError):
        build_mi1([1, -1])
    assert not np.any(build_mi1([0, 0]).m)
    M = build_mi2([[1, -1], [-1, 1]], np.eye(2)).m
    np.testing.assert_array_equal(M, [[1, -1, 0, 0], [-1, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    assert not np.any(build_mi2(np.zeros((2, 2)), np.zeros(2)).m)
    with pytest.raises(ValueError):
        build_mi2([[2, -1], [-1, 2]], [2, 2])
    with pytest.raises(ValueError):
        build_mi2([[1, -1], [-1, 1]], [1, 2])


def test_build_mi2_matches_pairwise_sum():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        T2 = random_zero_excess(n, rng)
        M = build_mi2(T2, np.diag(T2)).m
        total = np.zeros((2 * n, 2 * n))
        for t in decompose_zero_excess(T2):
            d = np.zeros(n)
            d[t.i], d[t.j] = 1, -1
            E = np.zeros((n, n))
            E[t.i, t.j] = E[t.j, t.i] = 1
            total += t.lam * np.block([[np.outer(d, d), np.zeros((n, n))], [np.zeros((n, n)), E]])
        np.testing.assert_allclose(M, total, atol=1e-9 * max(1, np.abs(M).max()))


@pytest.mark.parametrize("family", ["M1", "M2", "M3", "M12"])
@pytest.mark.parametrize("fn", [relu, flipped_relu])
def test_validity_sweep(family, fn):
    rng = np.random.default_rng(2)
    for k in range(25):
        nv = 1 + k % 4
        M = random_family_instance(family, nv, rng)
        V = rng.standard_normal((1000, nv)) * rng.exponential()
        W = fn(V)
        Z = np.hstack([V, W])
        vals = np.einsum("ki,ij,kj->k", Z, M.m, Z)
        assert vals.min() >= -1e-9 * max(1.0, np.abs(M.m).max()) * np.max(np.sum(Z * Z, axis=1))


@pytest.mark.parametrize("family", ["Mi1", "Mi2"])
def test_incremental_validity(family):
    rng = np.random.default_rng(3)
    for k in range(10):
        nv = 1 + k % 4 if family == "Mi1" else 2 + k % 3
        M = random_family_instance(family, nv, rng)
        A, B = rng.standard_normal((2, 10_000, nv))
        dZ = np.hstack([A - B, relu(A) - relu(B)])
        vals = np.einsum("ki,ij,kj->k", dZ, M.m, dZ)
        assert vals.min() >= -1e-9 * max(1.0, np.abs(M.m).max())


def test_mc_membership_examples():
    assert mc_membership(build_m1(np.eye(3))).member == "yes"
    rep = mc_membership(QcMatrix(np.diag([0.0, -1.0])))
    assert rep.member == "no"
    v, w = rep.witness["v"], rep.witness["w"]
    np.testing.assert_allclose(w, relu(v))
    assert qc_form(QcMatrix(np.diag([0.0, -1.0])), v, relu(v)) < 0
    assert mc_membership(QcMatrix(np.diag([1.0, 1.0, -1.0, -1.0]))).member == "yes"


@pytest.mark.parametrize("family", ["M1", "M2", "M3", "M12"])
def test_containment(family):
    rng = np.random.default_rng(4)
    for k in range(8):
        M = random_family_instance(family, 1 + k % 3, rng)
        rep = mc_membership(M, exhaustive=True)
        assert rep.member == "yes"
        if family in ("M1", "M3"):
            assert all(v.route in ("zero", "nonnegative", "psd") for _, v in rep.verdicts)


def test_planted_violations_give_witnesses():
    rng = np.random.default_rng(5)
    for k in range(12):
        M0 = random_family_instance(["M1", "M2", "M3", "M12"][k % 4], 1 + k % 3, rng)
        M, _ = plant_violation(M0, rng)
        rep = mc_membership(M)
        assert rep.member == "no"
        v = rep.witness["v"]
        assert qc_form(M, v, relu(v)) < 0


def test_mc_is_a_cone():
    rng = np.random.default_rng(6)
    M = random_family_instance("M12", 2, rng)
    for a in (0.01, 100.0):
        assert mc_membership(a * M).member == "yes"


def test_mc_inc_membership_examples():
    assert mc_inc_membership(build_mi1(np.eye(2))).member == "yes"
    assert mc_inc_membership(build_mi2([[1, -1], [-1, 1]], np.eye(2))).member == "yes"
    m = build_m1(np.eye(2)).m.copy()
    m[2, 2] = -3.0
    rep = mc_inc_membership(QcMatrix(m))
    assert rep.member == "no"
    w = rep.witness
    np.testing.assert_allclose(w["wbar"], relu(w["vbar"]))
    np.testing.assert_allclose(w["what"], relu(w["vhat"]))
    assert inc_qc_form(QcMatrix(m), w["vbar"], w["vhat"], w["wbar"], w["what"]) < 0


def test_affine_examples():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((4, 4))
    M = QcMatrix(A + A.T)
    np.testing.assert_allclose(affine_pushforward(M, 0, 1, 1).m, M.m)
    np.testing.assert_allclose(affine_pullback(M, 0, 1, 1).m, M.m)
    for _ in range(20):
        A0, A1, A2 = rng.standard_normal((3, 2, 2)) + 2 * np.eye(2)
        Mh = affine_pushforward(M, A0, A1, A2)
        np.testing.assert_allclose(affine_pullback(Mh, A0, A1, A2).m, M.m, atol=1e-10 * np.abs(M.m).max() * 100)
        np.testing.assert_allclose(affine_pushforward(affine_pullback(M, A0, A1, A2), A0, A1, A2).m, M.m,
                                   atol=1e-9 * np.abs(M.m).max())
    with pytest.raises(ValueError):
        affine_pushforward(M, 0, np.zeros((2, 2)), 1)
    with pytest.raises(ValueError):
        affine_pullback(M, 0, 1, np.zeros((2, 2)))


def test_leaky_data_and_pushforward_validity():
    A0, A1, A2 = leaky_affine_data(0.1, 1.0, 2)
    np.testing.assert_allclose(A0, 0.1 * np.eye(2))
    np.testing.assert_allclose(A1, 0.9 * np.eye(2))
    rng = np.random.default_rng(8)
    for _ in range(10):
        M = random_family_instance("M12", 2, rng)
        Mh = affine_pushforward(M, A0, A1, A2)
        V = rng.standard_normal((1000, 2))
        Z = np.hstack([V, leaky(0.1, 1.0, V)])
        assert np.einsum("ki,ij,kj->k", Z, Mh.m, Z).min() >= -1e-9 * np.abs(Mh.m).max()
        assert m_alpha_beta_membership(Mh, 0.1, 1.0).member == "yes"


def test_m_alpha_beta_examples():
    rng = np.random.default_rng(9)
    M = random_family_instance("M12", 2, rng)
    a = m_alpha_beta_membership(M, 0.0, 1.0, exhaustive=True)
    b = mc_membership(M, exhaustive=True)
    assert a.member == b.member
    bad = QcMatrix(np.diag([0.0, 0.0, -1.0, -1.0]))
    for alpha, beta in [(0.0, 1.0), (0.2, 0.7), (-1.0, 2.0)]:
        rep = m_alpha_beta_membership(bad, alpha, beta)
        assert rep.member == "no"
        v = rep.witness["v"]
        assert qc_form(bad, v, leaky(alpha, beta, v)) < 0
    with pytest.raises(ValueError):
        m_alpha_beta_membership(bad, 1.0, 1.0)


def test_pullback_agrees_with_alpha_beta_membership():
    rng = np.random.default_rng(10)
    A0, A1, A2 = leaky_affine_data(0.2, 1.5, 2)
    for k in range(10):
        if k % 2:
            A = rng.standard_normal((4, 4))
            Mh = QcMatrix(A + A.T)
        else:
            Mh = affine_pushforward(random_family_instance("M12", 2, rng), A0, A1, A2)
        assert mc_membership(affine_pullback(Mh, A0, A1, A2)).member == m_alpha_beta_membership(Mh, 0.2, 1.5).member


def test_mh_membership_examples():
    h = np.array([1.0, -1.0]) / np.sqrt(2)
    iso = QcMatrix(np.diag([1.0, 1.0, -1.0, -1.0]))
    assert mh_membership(iso, h).member == "yes"
    bad = QcMatrix(np.diag([-1.0, -1.0, 0.0, 0.0]))
    rep = mh_membership(bad, h)
    assert rep.member == "no"
    v = rep.witness["v"]
    assert qc_form(bad, v, householder(h, v)) < 0
    assert mh_membership(QcMatrix(np.zeros((4, 4))), h).member == "yes"
    with pytest.raises(ValueError):
        mh_membership(iso, [1.0, 1.0])


def test_mh_membership_never_unknown_and_witness_valid():
    rng = np.random.default_rng(11)
    for _ in range(30):
        A = rng.standard_normal((6, 6))
        M = QcMatrix(A + A.T)
        h = rng.standard_normal(3)
        h /= np.linalg.norm(h)
        rep = mh_membership(M, h)
        assert rep.member in ("yes", "no")
        if rep.member == "no":
            v = rep.witness["v"]
            assert qc_form(M, v, householder(h, v)) < 0
        else:
            V = rng.standard_normal((500, 3))
            W = np.array([householder(h, v) for v in V])
            Z = np.hstack([V, W])
            assert np.einsum("ki,ij,kj->k", Z, M.m, Z).min() >= -1e-9 * np.abs(M.m).max() * 50


def test_m123_to_m12_examples():
    rng = np.random.default_rng(12)
    q1 = rng.standard_normal(2)
    Q2 = random_s_plus_n(4, rng)[0]
    q1h, Q2h = m123_to_m12(q1, Q2, np.eye(2))
    np.testing.assert_allclose(np.diag(q1h), q1 + 1)
    np.testing.assert_allclose(Q2h, Q2)
    _, Q2h = m123_to_m12(q1, Q2, [[1, -1], [-1, 1]])
    P = Q2h - Q2
    np.testing.assert_allclose(P[:2, 2:], [[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        m123_to_m12(q1, Q2, [[0, 1], [0, 0]])


def test_m123_identity_and_certificate_kept():
    rng = np.random.default_rng(13)
    for k in range(30):
        nv = 1 + k % 4
        q1 = rng.standard_normal(nv)
        Q2 = random_s_plus_n(2 * nv, rng)[0]
        Q3 = random_dh(nv, rng)
        q1h, Q2h = m123_to_m12(q1, Q2, Q3)
        lhs = build_m12(q1h, Q2h).m
        rhs = build_m12(q1, Q2).m + build_m3(Q3).m
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * max(1.0, np.abs(rhs).max()))
        if k < 6:
            assert decide(Q2h).status == "certified"


def _grid(fn, dim, pts=9, radius=2.0):
    axis = np.linspace(-radius, radius, pts)
    G = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), -1).reshape(-1, dim)
    return [(v, fn(v)) for v in G]


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_classifier(dim):
    assert classify_function(_grid(relu, dim)).kind == "consistent_relu"
    assert classify_function(_grid(flipped_relu, dim)).kind == "consistent_flipped"
    for fn in (np.abs, lambda v: leaky(0.5, 1.0, v)):
        res = classify_function(_grid(fn, dim))
        assert res.kind == "violation"
        v, w = _grid(fn, dim)[res.sample]
        assert qc_form(res.probe, v, w) < 0
    ident = classify_function(_grid(lambda v: v.copy(), dim))
    assert ident.kind == ("indeterminate" if dim == 1 else "violation")


def test_classifier_dimension_check():
    with pytest.raises(ValueError):
        classify_function([(np.ones(2), np.ones(2)), (np.ones(3), np.ones(3))])


def test_family_tag_validation():
    with pytest.raises(ValueError):
        QcFamilyTag("MalphaBeta", (1.0,))
    with pytest.raises(ValueError):
        QcFamilyTag("nope")
    assert QcFamilyTag("MalphaBeta", (0.1, 1.0)).to_dict() == {"tag": "MalphaBeta", "alpha": 0.1, "beta": 1.0}
