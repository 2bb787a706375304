"""Gain and Lipschitz certificates as SDPs over QC classes for ReLU.

Each ``*_problem`` function builds an :class:`SdpProblem`; the matching
``*_sdp`` function solves it and re-checks the returned certificate with plain
eigenvalue computations before reporting it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import QcMatrix, enumerate_sign_patterns, inc_orthant_lift, iter_pattern_pairs, orthant_lift
from .dh_decomp import is_doubly_hyperdominant
from .sdp import Expr, SdpProblem, SolveOptions, solve
from .systems import NeuralNet, StackedNet, StateSpace, stack_network

GAIN_CLASSES = ("Mc_relaxed", "M12_relaxed", "M123_relaxed")
LIP_CLASSES = ("Mi1", "Mi1_plus_Mi2", "McInc_relaxed")
EPS_REL = 1e-7
MARGIN_FEASIBLE = 1e-9


def strict_margin(G: StateSpace) -> float:
    """``eps`` in ``LMI <= -eps I``, relative to the performance output term."""
    K = np.hstack([G.C2, G.D21, G.D22])
    return EPS_REL * max(float(np.linalg.norm(K.T @ K, 2)) if K.size else 0.0, 1.0)


def _as_expr(x, size: int) -> Expr:
    if isinstance(x, Expr):
        if x.size != size:
            raise ValueError(f"expression has size {x.size}, expected {size}")
        return x
    a = np.atleast_2d(np.asarray(x, dtype=float))
    if a.shape == (1, 1) and size != 1:
        a = float(a[0, 0]) * np.eye(size)
    if a.shape != (size, size):
        raise ValueError(f"constant has shape {a.shape}, expected {(size, size)}")
    return Expr.constant(a)


def build_perf_lmi(G: StateSpace, P, M, gamma_sq, blocks: str = "xwd") -> Expr:
    """Dissipation LMI of the ReLU loop in ``(x, w, d)`` coordinates.

    ``P``, ``M`` and ``gamma_sq`` are constants or :class:`Expr` (``gamma_sq``
    as an ``nd x nd`` expression, typically ``g2 * I``). ``blocks="xw"``
    returns only the stability part, without the ``d`` channel.
    """
    nx, nv, nd = G.nx, G.nv, G.nd
    with_d = blocks == "xwd"
    n = nx + nv + (nd if with_d else 0)
    cols = [G.A, G.B1] + ([G.B2] if with_d else [])
    P = _as_expr(P, nx)
    top = np.hstack(cols)
    Ex = np.hstack([np.eye(nx), np.zeros((nx, n - nx))])
    out = P.congruence(top) - P.congruence(Ex)
    if with_d:
        K = np.hstack([G.C2, G.D21, G.D22])
        out = out + Expr.constant(K.T @ K)
        Ed = np.hstack([np.zeros((nd, nx + nv)), np.eye(nd)])
        out = out - _as_expr(gamma_sq, nd).congruence(Ed)
    if nv:
        R = np.vstack([
            np.hstack([G.C1, G.D11] + ([G.D12] if with_d else [])),
            np.hstack([np.zeros((nv, nx)), np.eye(nv)] + ([np.zeros((nv, nd))] if with_d else [])),
        ])
        out = out + _as_expr(M, 2 * nv).congruence(R)
    return out


def build_lip_lmi(sn: StackedNet, M, L_sq) -> Expr:
    """``[A; B]^T M [A; B] + C^T C - L^2 D^T D``."""
    AB = np.vstack([sn.A, sn.B])
    out = _as_expr(M, 2 * sn.m).congruence(AB) + Expr.constant(sn.C.T @ sn.C)
    return out - _as_expr(L_sq, sn.n0).congruence(sn.D)


def _m1_expr(name: str, nv: int) -> Expr:
    """``[[0, Q], [Q, -2Q]]`` for a diagonal block ``Q``."""
    J1 = np.vstack([np.eye(nv), np.zeros((nv, nv))])
    J2 = np.vstack([np.zeros((nv, nv)), np.eye(nv)])
    return 2.0 * Expr.term(name, J1, J2.T) - 2.0 * Expr.term(name, J2, J2.T)


def _m2_expr(name: str, nv: int) -> Expr:
    eye = np.eye(nv)
    E = np.block([[-eye, eye], [np.zeros((nv, nv)), eye]])
    return Expr.term(name, E.T, E)


def _m3_expr(name: str, nv: int) -> Expr:
    """``[[0, Q^T], [Q, -(Q + Q^T)]]`` for a general square block ``Q``."""
    J1 = np.vstack([np.eye(nv), np.zeros((nv, nv))])
    J2 = np.vstack([np.zeros((nv, nv)), np.eye(nv)])
    return 2.0 * Expr.term(name, J2, J1.T) - 2.0 * Expr.term(name, J2, J2.T)


def _add_dh_rows(p: SdpProblem, name: str, n: int, symmetric: bool, zero_excess: bool) -> None:
    for i in range(n):
        for j in range(n):
            if i != j and (not symmetric or i < j):
                p.add_row({(name, i, j): -1.0}, 0.0, "ge", f"{name} offdiag ({i},{j}) <= 0")
    for i in range(n):
        p.add_row({(name, i, j): 1.0 for j in range(n)}, 0.0, "eq" if zero_excess else "ge", f"{name} row {i}")
        if not symmetric:
            p.add_row({(name, j, i): 1.0 for j in range(n)}, 0.0, "ge", f"{name} col {i}")


def _relaxed_cop(p: SdpProblem, X: Expr, tag: str) -> None:
    """``X - N >= 0`` with a fresh elementwise nonnegative ``N``."""
    N = p.add_block(f"N_{tag}", "nonneg", X.size)
    p.add_psd(X - Expr.var(N), f"cop[{tag}]")


def inc_reduced_lift(D1, D2) -> tuple[np.ndarray, int]:
    """Columns of the incremental lift with sign-equal pairs merged.

    Where ``D1`` and ``D2`` agree, the two lift columns are exact negatives, so
    the cone they span is a line and the coordinate becomes free. Returns the
    lift (free columns first) and the number of free columns.
    """
    T = inc_orthant_lift(D1, D2)
    m = D1.dim
    same = [i for i in range(m) if D1.signs[i] == D2.signs[i]]
    diff = [i for i in range(m) if D1.signs[i] != D2.signs[i]]
    cols = same + diff + [m + i for i in diff]
    return T[:, cols], len(same)


def _relaxed_cop_mixed(p: SdpProblem, X: Expr, n_free: int, tag: str) -> None:
    """``X - N >= 0`` with ``N >= 0`` supported on the sign-constrained coordinates."""
    k = X.size - n_free
    if k == 0:
        p.add_psd(X, f"cop[{tag}]")
        return
    N = p.add_block(f"N_{tag}", "nonneg", k)
    E = np.vstack([np.zeros((n_free, k)), np.eye(k)])
    p.add_psd(X - Expr.term(N.name, E, E.T), f"cop[{tag}]")


def qc_class_expr(p: SdpProblem, qc_class: str, nv: int) -> Expr:
    """Declare the class's decision blocks in ``p`` and return ``M`` as an expression."""
    if qc_class == "Mc_relaxed":
        Mb = p.add_block("M", "symmetric", 2 * nv)
        M = Expr.var(Mb)
        for D in enumerate_sign_patterns(nv):
            _relaxed_cop(p, M.congruence(orthant_lift(D)), str(D))
        return M
    if qc_class in ("M12_relaxed", "M123_relaxed"):
        p.add_block("Q1", "diagonal", nv)
        Q2 = p.add_block("Q2", "symmetric", 2 * nv)
        _relaxed_cop(p, Expr.var(Q2), "Q2")
        M = _m1_expr("Q1", nv) + _m2_expr("Q2", nv)
        if qc_class == "M123_relaxed":
            p.add_block("Q3", "general", nv)
            _add_dh_rows(p, "Q3", nv, symmetric=False, zero_excess=False)
            M = M + _m3_expr("Q3", nv)
        return M
    raise ValueError(f"unknown gain QC class {qc_class!r}; expected one of {GAIN_CLASSES}")


def gain_problem(G: StateSpace, qc_class: str, eps: float = EPS_REL, mu_scale: float = 1.0) -> SdpProblem:
    """Gain SDP in normalized coordinates ``(P, M, mu) = (P, M, 1) / gamma^2``.

    Dividing the dissipation LMI by ``gamma^2`` keeps all decision variables
    of order one; ``maximize mu`` is ``minimize gamma^2``. The LMI becomes
    ``LMI_xw-terms(P, M) + mu K^T K - E_dd <= -eps I``. The scalar block is
    ``nu = mu / mu_scale``; choosing ``mu_scale`` near the optimal ``mu`` makes
    the objective of order one, which solver tolerances need when gamma is large.
    """
    p = SdpProblem(name=f"gain[{qc_class}]")
    Pb = p.add_block("P", "symmetric", G.nx)
    p.add_block("nu", "scalar")
    M = qc_class_expr(p, qc_class, G.nv) if G.nv else None
    P = Expr.var(Pb)
    p.add_psd(P, "P >= 0")
    lmi = _normalized_perf_lmi(G, P, M if M is not None else 0.0, "nu", mu_scale)
    p.add_psd(-lmi - Expr.constant(eps * np.eye(lmi.size)), "-LMI - eps I >= 0")
    p.minimize({("nu", 0, 0): -1.0})
    return p


def gain_mu_scale(G: StateSpace, qc_class: str, opts: SolveOptions | None = None) -> float:
    """Optimal ``mu`` of a first unscaled solve, or 1 when that solve finds none."""
    cert = _gain_once(G, qc_class, opts)
    return 1.0 / cert.gamma ** 2 if np.isfinite(cert.gamma) else 1.0


def _normalized_perf_lmi(G: StateSpace, P, M, mu, mu_scale: float = 1.0) -> Expr:
    """``LMI(P, M, 1)`` with the output term ``K^T K`` weighted by ``mu``.

    ``mu`` is a number or the name of a scalar block holding ``mu / mu_scale``.
    """
    K = np.hstack([G.C2, G.D21, G.D22])
    no_out = StateSpace(G.A, G.B1, G.B2, G.C1, G.D11, G.D12, np.zeros((0, G.nx)),
                        np.zeros((0, G.nv)), np.zeros((0, G.nd)))
    out = build_perf_lmi(no_out, P, M, np.eye(G.nd))
    gram = K.T @ K
    return out + (Expr.scalar(mu, mu_scale * gram) if isinstance(mu, str) else Expr.constant(float(mu) * gram))


@dataclass
class GainCertificate:
    gamma: float
    qc_class: str
    status: str
    certified: bool
    P: np.ndarray | None = None
    M: QcMatrix | None = None
    lmi_max_eig: float = float("nan")
    solver: str = ""
    seconds: float = 0.0
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"gamma": self.gamma, "qc_class": self.qc_class, "status": self.status,
               "certified": self.certified, "lmi_max_eig": self.lmi_max_eig, "solver": self.solver}
        if self.P is not None:
            out["P"] = self.P.tolist()
        if self.M is not None:
            out["M"] = self.M.m.tolist()
        return out


def _max_eig(X: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (X + X.T))[-1]) if X.size else -np.inf


def _min_eig(X: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (X + X.T))[0]) if X.size else np.inf


def _scaled_min_eig(X: np.ndarray) -> float:
    return _min_eig(X) / max(1.0, float(np.max(np.abs(X))) if X.size else 1.0)


def m12_to_mc_multipliers(N2: np.ndarray, nv: int) -> dict[str, np.ndarray]:
    """Nonnegative parts that make an ``M12_relaxed`` point a ``Mc_relaxed`` point.

    On the orthant of ``D`` the ``Q2`` factor maps the lift to
    ``K_D = [(I-D)/2; (I+D)/2] >= 0`` and the ``Q1`` term vanishes, so
    ``N_D = K_D^T N2 K_D`` with ``S_D = K_D^T S2 K_D`` PSD.
    """
    eye = np.eye(nv)
    out = {}
    for D in enumerate_sign_patterns(nv):
        K = np.vstack([0.5 * (eye - D.matrix), 0.5 * (eye + D.matrix)])
        out[f"N_{D}"] = K.T @ N2 @ K
    return out


def class_structure_residual(qc_class: str, M: np.ndarray, blocks: dict) -> float:
    """Smallest scaled eigenvalue over the class's relaxed copositivity constraints.

    ``blocks`` holds the nonnegative parts by block name; negative entries are
    clipped before the check, so a nonnegative result is a solver-free proof.
    """
    nv = M.shape[0] // 2
    worst = np.inf
    if qc_class == "Mc_relaxed":
        for D in enumerate_sign_patterns(nv):
            T = orthant_lift(D)
            worst = min(worst, _scaled_min_eig(T.T @ M @ T - np.maximum(blocks[f"N_{D}"], 0.0)))
    elif qc_class in ("M12_relaxed", "M123_relaxed"):
        worst = _scaled_min_eig(blocks["Q2"] - np.maximum(blocks["N_Q2"], 0.0))
        if qc_class == "M123_relaxed" and not is_doubly_hyperdominant(blocks["Q3"]):
            worst = min(worst, -1.0)
    else:
        raise ValueError(f"unknown gain QC class {qc_class!r}")
    return worst


STRUCTURE_TOL = 1e-7


def _gain_once(G: StateSpace, qc_class: str, opts: SolveOptions | None, mu_scale: float = 1.0) -> GainCertificate:
    t0 = time.perf_counter()
    res = solve(gain_problem(G, qc_class, mu_scale=mu_scale), opts)
    elapsed = time.perf_counter() - t0
    if not res.assignments or res.status in ("infeasible", "unbounded", "failed"):
        return GainCertificate(float("inf"), qc_class, res.status, False, solver=res.solver, seconds=elapsed)
    mu = mu_scale * float(res.assignments["nu"][0, 0])
    if mu <= 0:
        return GainCertificate(float("inf"), qc_class, res.status, False, solver=res.solver, seconds=elapsed)
    Pn = res.assignments["P"]
    Mn = qc_class_expr(SdpProblem(), qc_class, G.nv).evaluate(res.assignments) if G.nv else np.zeros((0, 0))
    extras = {k: v / mu for k, v in res.assignments.items() if k not in ("P", "nu")}
    return _certify(G, qc_class, res.status, res.usable, mu, Pn, Mn, extras, res.solver, elapsed)


def _certify(G, qc_class, status, usable, mu, Pn, Mn, extras, solver, elapsed) -> GainCertificate:
    """Re-check a normalized assignment with eigenvalue computations only."""
    top_n = _max_eig(_normalized_perf_lmi(G, Pn, Mn, mu).const)
    p_ok = _scaled_min_eig(Pn) >= -STRUCTURE_TOL
    m_ok = (not G.nv) or class_structure_residual(qc_class, Mn / mu, extras) >= -STRUCTURE_TOL
    certified = bool(usable and top_n < 0 and p_ok and m_ok)
    M = QcMatrix(Mn / mu) if G.nv else None
    return GainCertificate(float(1.0 / np.sqrt(mu)), qc_class, status, certified, Pn / mu, M, top_n / mu,
                           solver, elapsed, extras)


def _scaled_gain(G: StateSpace, qc_class: str, opts: SolveOptions | None) -> GainCertificate:
    """Unscaled solve, then a re-solve with ``mu_scale`` set from its optimum."""
    first = _gain_once(G, qc_class, opts)
    if not np.isfinite(first.gamma):
        return first
    second = _gain_once(G, qc_class, opts, 1.0 / first.gamma ** 2)
    second.seconds += first.seconds
    return second if second.certified or not first.certified else first


def gain_sdp(G: StateSpace, qc_class: str = "Mc_relaxed", opts: SolveOptions | None = None,
             embed_subclass: bool = True) -> GainCertificate:
    """Minimize the certified gain over ``qc_class``.

    With ``embed_subclass`` the ``Mc_relaxed`` search also solves the much
    smaller ``M12_relaxed`` program and keeps its certificate, mapped into
    ``Mc_relaxed`` form and re-checked, whenever it is better. The containment
    makes the result the same optimum, minus solver noise on ties.
    """
    cert = _scaled_gain(G, qc_class, opts)
    if qc_class != "Mc_relaxed" or not embed_subclass or not G.nv:
        return cert
    sub = _scaled_gain(G, "M12_relaxed", opts)
    if not sub.certified or (cert.certified and cert.gamma <= sub.gamma):
        return cert
    mu = 1.0 / sub.gamma ** 2
    extras = m12_to_mc_multipliers(sub.extras["N_Q2"], G.nv)
    emb = _certify(G, "Mc_relaxed", sub.status, True, mu, sub.P * mu, sub.M.m * mu, extras,
                   f"{sub.solver} via M12_relaxed", cert.seconds + sub.seconds)
    return emb if emb.certified else cert


def perf_feasible(G: StateSpace, gamma: float, M=None, opts: SolveOptions | None = None) -> bool:
    """Is there ``P >= 0`` with ``LMI(P, M, gamma^2) <= -eps I``? ``M`` is fixed (or absent)."""
    p = SdpProblem(name="perf_feasibility")
    Pb = p.add_block("P", "symmetric", G.nx)
    P = Expr.var(Pb)
    p.add_psd(P, "P >= 0")
    Mc = M if M is not None else np.zeros((2 * G.nv, 2 * G.nv))
    lmi = build_perf_lmi(G, P, Mc, gamma * gamma * np.eye(G.nd))
    p.add_psd(-lmi - Expr.constant(strict_margin(G) * np.eye(lmi.size)), "-LMI - eps I >= 0")
    res = solve(p, opts)
    if res.status != "optimal":
        return False
    lmi_val = build_perf_lmi(G, res.assignments["P"], Mc, gamma * gamma * np.eye(G.nd)).const
    return _max_eig(lmi_val) < 0


# -- stability margin and feasibility threshold -----------------------------------------

def margin_problem(G: StateSpace, qc_class: str) -> SdpProblem:
    """``max t`` with ``LMI_xw <= -t I`` under ``0 <= P <= I`` and ``-I <= M <= I``.

    The normalization keeps ``t`` bounded; the gain SDP is feasible for some
    finite gamma exactly when the optimal ``t`` is positive.
    """
    p = SdpProblem(name=f"margin[{qc_class}]")
    Pb = p.add_block("P", "symmetric", G.nx)
    p.add_block("t", "scalar")
    M = qc_class_expr(p, qc_class, G.nv)
    P = Expr.var(Pb)
    eye_x, eye_m = np.eye(G.nx), np.eye(2 * G.nv)
    p.add_psd(P, "P >= 0")
    p.add_psd(Expr.constant(eye_x) - P, "P <= I")
    p.add_psd(Expr.constant(eye_m) - M, "M <= I")
    p.add_psd(Expr.constant(eye_m) + M, "M >= -I")
    lmi = build_perf_lmi(G, P, M, 0.0, blocks="xw")
    p.add_psd(-lmi - Expr.scalar("t", np.eye(lmi.size)), "-LMI_xw - t I >= 0")
    p.minimize({("t", 0, 0): -1.0})
    return p


@dataclass
class MarginResult:
    margin: float
    feasible: bool
    status: str
    lmi_max_eig: float


def stability_margin(G: StateSpace, qc_class: str, opts: SolveOptions | None = None) -> MarginResult:
    res = solve(margin_problem(G, qc_class), opts)
    if not res.assignments or res.status in ("infeasible", "unbounded", "failed"):
        return MarginResult(float("nan"), False, res.status, float("nan"))
    t = float(res.assignments["t"][0, 0])
    scratch = SdpProblem()
    M = qc_class_expr(scratch, qc_class, G.nv).evaluate(res.assignments)
    top = _max_eig(build_perf_lmi(G, res.assignments["P"], M, 0.0, blocks="xw").const)
    m_ok = class_structure_residual(qc_class, M, res.assignments) >= -STRUCTURE_TOL
    feasible = bool(res.usable and t > MARGIN_FEASIBLE and top < 0 and m_ok)
    return MarginResult(t, feasible, res.status, top)


def feasibility_threshold(family: Callable[[float], StateSpace], qc_class: str, alpha_lo: float,
                          alpha_hi: float, tol: float = 5e-3, opts: SolveOptions | None = None) -> float:
    """Largest certified-feasible ``alpha`` found by bisection on the stability margin."""
    if not alpha_lo < alpha_hi:
        raise ValueError("need alpha_lo < alpha_hi")
    if not stability_margin(family(alpha_lo), qc_class, opts).feasible:
        raise ValueError(f"bracket violated: not certified feasible at alpha_lo={alpha_lo}")
    if stability_margin(family(alpha_hi), qc_class, opts).feasible:
        raise ValueError(f"bracket violated: still feasible at alpha_hi={alpha_hi}")
    lo, hi = alpha_lo, alpha_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if stability_margin(family(mid), qc_class, opts).feasible:
            lo = mid
        else:
            hi = mid
    return lo


def gain_sweep(family: Callable[[float], StateSpace], qc_class: str, alphas: Sequence[float],
               opts: SolveOptions | None = None) -> list[GainCertificate]:
    return [gain_sdp(family(a), qc_class, opts) for a in alphas]


# -- Lipschitz ---------------------------------------------------------------------------

def lip_class_expr(p: SdpProblem, qc_class: str, m: int) -> Expr:
    if qc_class in ("Mi1", "Mi1_plus_Mi2"):
        p.add_block("T1", "diagonal", m)
        for i in range(m):
            p.add_row({("T1", i, i): 1.0}, 0.0, "ge", f"T1[{i}] >= 0")
        M = _m1_expr("T1", m)
        if qc_class == "Mi1_plus_Mi2":
            p.add_block("T2", "symmetric", m)
            p.add_block("S2", "diagonal", m)
            _add_dh_rows(p, "T2", m, symmetric=True, zero_excess=True)
            for i in range(m):
                p.add_row({("S2", i, i): 1.0, ("T2", i, i): -1.0}, 0.0, "eq", f"S2[{i}] = T2[{i},{i}]")
            J1 = np.vstack([np.eye(m), np.zeros((m, m))])
            J2 = np.vstack([np.zeros((m, m)), np.eye(m)])
            M = (M + Expr.term("T2", J1, J1.T) - Expr.term("T2", J2, J2.T) + Expr.term("S2", J2, J2.T))
        return M
    if qc_class == "McInc_relaxed":
        Mb = p.add_block("M", "symmetric", 2 * m)
        M = Expr.var(Mb)
        for D1, D2 in iter_pattern_pairs(m):
            T, n_free = inc_reduced_lift(D1, D2)
            _relaxed_cop_mixed(p, M.congruence(T), n_free, f"{D1}|{D2}")
        return M
    raise ValueError(f"unknown Lipschitz QC class {qc_class!r}; expected one of {LIP_CLASSES}")


def lip_problem(nn: NeuralNet, qc_class: str) -> SdpProblem:
    sn = stack_network(nn)
    p = SdpProblem(name=f"lipschitz[{qc_class}]")
    p.add_block("L2", "scalar")
    M = lip_class_expr(p, qc_class, sn.m)
    p.add_psd(-build_lip_lmi(sn, M, Expr.scalar("L2", np.eye(sn.n0))), "-LMI_Lip >= 0")
    p.minimize({("L2", 0, 0): 1.0})
    return p


@dataclass
class LipschitzCertificate:
    L: float
    qc_class: str
    status: str
    certified: bool
    M: QcMatrix | None = None
    lmi_max_eig: float = float("nan")
    solver: str = ""
    seconds: float = 0.0

    def to_dict(self) -> dict:
        out = {"L": self.L, "qc_class": self.qc_class, "status": self.status, "certified": self.certified,
               "lmi_max_eig": self.lmi_max_eig, "solver": self.solver}
        if self.M is not None:
            out["M"] = self.M.m.tolist()
        return out


def lip_sdp(nn: NeuralNet, qc_class: str = "Mi1", opts: SolveOptions | None = None,
            feas_tol: float = 1e-7) -> LipschitzCertificate:
    t0 = time.perf_counter()
    p = lip_problem(nn, qc_class)
    res = solve(p, opts)
    elapsed = time.perf_counter() - t0
    if not res.assignments or res.status in ("infeasible", "unbounded", "failed"):
        return LipschitzCertificate(float("inf"), qc_class, res.status, False, solver=res.solver, seconds=elapsed)
    sn = stack_network(nn)
    L2 = float(res.assignments["L2"][0, 0])
    M = QcMatrix(lip_class_expr(SdpProblem(), qc_class, sn.m).evaluate(res.assignments))
    lmi = build_lip_lmi(sn, M.m, L2 * np.eye(sn.n0)).const
    top = _max_eig(lmi)
    scale = max(1.0, float(np.max(np.abs(lmi))))
    certified = bool(res.usable and top <= feas_tol * scale and L2 >= 0)
    return LipschitzCertificate(float(np.sqrt(max(L2, 0.0))), qc_class, res.status, certified, M, top,
                                res.solver, elapsed)
