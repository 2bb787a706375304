"""QC families for repeated ReLU, membership in the complete sets, and transforms.

Constructors return :class:`QcMatrix`. Membership checks enumerate sign
patterns and run :func:`copositivity.decide` on each scaled matrix; a negative
answer always carries a concrete input/output pair that violates the QC.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import copositivity as cop
from .core import (
    DEFAULT_PATTERN_CAP,
    DimensionError,
    QcMatrix,
    SignPattern,
    as_sym,
    as_vector,
    enumerate_sign_patterns,
    flipped_relu,
    householder,
    inc_qc_form,
    iter_pattern_pairs,
    leaky,
    qc_form,
    relu,
    sign_scale,
    sign_scale_inc,
)
from .dh_decomp import has_zero_excess, is_doubly_hyperdominant

log = logging.getLogger(__name__)

FAMILY_TAGS = ("M1", "M2", "M3", "M12", "M123", "Mc", "MalphaBeta", "Mh", "Mi1", "Mi2", "McInc")
PSD_TOL = 1e-9
ROW_SUM_TOL = 1e-10
SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class QcFamilyTag:
    tag: str
    params: tuple = ()

    def __post_init__(self):
        if self.tag not in FAMILY_TAGS:
            raise ValueError(f"unknown QC family {self.tag!r}")
        needs = {"MalphaBeta": 2, "Mh": 1}.get(self.tag, 0)
        if len(self.params) != needs:
            raise ValueError(f"family {self.tag} takes {needs} parameter(s), got {len(self.params)}")

    def to_dict(self) -> dict:
        out: dict = {"tag": self.tag}
        if self.tag == "MalphaBeta":
            out["alpha"], out["beta"] = self.params
        elif self.tag == "Mh":
            out["h"] = list(self.params[0])
        return out


@dataclass
class MembershipReport:
    member: str  # yes | no | unknown
    family: QcFamilyTag
    verdicts: list = field(default_factory=list)  # (pattern label, CopositivityVerdict)
    witness: dict | None = None

    def to_dict(self) -> dict:
        return {
            "member": self.member,
            "family": self.family.to_dict(),
            "patterns": [{"pattern": p, **v.to_dict()} for p, v in self.verdicts],
            "witness": None if self.witness is None else {k: np.asarray(x).tolist() for k, x in self.witness.items()},
        }


# -- constructors ----------------------------------------------------------------------

def _diag_arg(Q, name: str) -> np.ndarray:
    a = np.asarray(Q, dtype=float)
    if a.ndim <= 1:
        return as_vector(a, name=name)
    a = np.atleast_2d(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square")
    if np.any(a - np.diag(np.diag(a))):
        raise ValueError(f"{name} must be diagonal")
    return np.diag(a).copy()


def _selector(nv: int) -> np.ndarray:
    """``[[-I, I], [0, I]]``: maps ``[v; w]`` to ``[w - v; w]``."""
    eye = np.eye(nv)
    return np.block([[-eye, eye], [np.zeros((nv, nv)), eye]])


def build_m1(Q1) -> QcMatrix:
    q = np.diag(_diag_arg(Q1, "Q1"))
    return QcMatrix(np.block([[np.zeros_like(q), q], [q, -2 * q]]))


def build_m2(Q2, validate: bool = False, budget: int = cop.DEFAULT_BUDGET) -> QcMatrix:
    Q2 = as_sym(Q2, "Q2")
    if Q2.shape[0] % 2:
        raise DimensionError("Q2 must have even dimension 2*nv")
    if validate:
        verdict = cop.decide(Q2, budget)
        if verdict.status != "certified":
            raise ValueError(f"Q2 copositivity check returned {verdict.status}")
    E = _selector(Q2.shape[0] // 2)
    return QcMatrix(E.T @ Q2 @ E)


def build_m3(Q3) -> QcMatrix:
    Q3 = np.atleast_2d(np.asarray(Q3, dtype=float))
    if Q3.shape[0] != Q3.shape[1]:
        raise DimensionError("Q3 must be square")
    if not is_doubly_hyperdominant(Q3):
        raise ValueError("Q3 is not doubly hyperdominant")
    return QcMatrix(np.block([[np.zeros_like(Q3), Q3.T], [Q3, -(Q3 + Q3.T)]]))


def build_m12(Q1, Q2) -> QcMatrix:
    return build_m1(Q1) + build_m2(Q2)


def build_mi1(T1) -> QcMatrix:
    t = _diag_arg(T1, "T1")
    if np.any(t < 0):
        raise ValueError("T1 must be positive semidefinite (nonnegative diagonal)")
    return build_m1(t)


def build_mi2(T2, S2) -> QcMatrix:
    T2 = as_sym(T2, "T2")
    s = _diag_arg(S2, "S2")
    if s.size != T2.shape[0]:
        raise DimensionError("S2 and T2 sizes differ")
    if not is_doubly_hyperdominant(T2):
        raise ValueError("T2 is not doubly hyperdominant")
    if not has_zero_excess(T2):
        raise ValueError("T2 row sums must be zero")
    scale = max(float(np.max(np.abs(T2))), 1e-300)
    if np.max(np.abs(s - np.diag(T2))) > ROW_SUM_TOL * scale:
        raise ValueError("S2 diagonal must match T2 diagonal")
    z = np.zeros_like(T2)
    return QcMatrix(np.block([[T2, z], [z, np.diag(s) - T2]]))


def m123_to_m12(Q1, Q2, Q3) -> tuple[np.ndarray, np.ndarray]:
    """Fold an M3 term into M1 + M2 parameters; returns ``(Q1hat, Q2hat)``."""
    q1 = _diag_arg(Q1, "Q1")
    Q2 = as_sym(Q2, "Q2")
    Q3 = np.atleast_2d(np.asarray(Q3, dtype=float))
    if not is_doubly_hyperdominant(Q3):
        raise ValueError("Q3 is not doubly hyperdominant")
    nv = q1.size
    if Q2.shape[0] != 2 * nv or Q3.shape != (nv, nv):
        raise DimensionError("parameter sizes disagree")
    P = np.diag(np.diag(Q3)) - Q3
    z = np.zeros((nv, nv))
    return np.diag(q1 + np.diag(Q3)), Q2 + np.block([[z, P.T], [P, z]])


# -- membership --------------------------------------------------------------------------

def _member(verdicts) -> str:
    statuses = [v.status for _, v in verdicts]
    if "falsified" in statuses:
        return "no"
    return "yes" if all(s == "certified" for s in statuses) else "unknown"


def _roundoff_floor(M: np.ndarray, lift_scale: float = 1.0) -> float:
    """Entries of ``T^T M T`` below this are rounding noise, not signal."""
    n = M.shape[0]
    return 8.0 * n * n * np.finfo(float).eps * float(np.max(np.abs(M), initial=0.0)) * lift_scale ** 2


def _scan(matrices, budget: int, seed: int, exhaustive: bool, floor: float = 0.0):
    # Exact cancellations in the sign scaling leave ~eps noise; copositivity checks
    # normalize by the largest entry, which would blow that noise up to order one.
    verdicts = []
    for label, X in matrices:
        X = np.where(np.abs(X) <= floor, 0.0, X)
        v = cop.decide(X, budget, seed)
        verdicts.append((label, v))
        if v.status == "falsified" and not exhaustive:
            break
    return verdicts


def _first_falsified(verdicts):
    for label, v in verdicts:
        if v.status == "falsified":
            return label, v
    return None


def mc_membership(M: QcMatrix, budget: int = cop.DEFAULT_BUDGET, seed: int = 0,
                  cap: int = DEFAULT_PATTERN_CAP, exhaustive: bool = False) -> MembershipReport:
    pats = enumerate_sign_patterns(M.nv, cap)
    verdicts = _scan(((str(D), sign_scale(M, D)) for D in pats), budget, seed, exhaustive, _roundoff_floor(M.m))
    report = MembershipReport(_member(verdicts), QcFamilyTag("Mc"), verdicts)
    hit = _first_falsified(verdicts)
    if hit is not None:
        D = SignPattern(tuple(1 if c == "+" else -1 for c in hit[0]))
        x = hit[1].counterexample
        v = D.matrix @ x
        report.witness = {"v": v, "w": 0.5 * (x + v), "form": np.array(qc_form(M, v, relu(v)))}
    return report


def mc_inc_membership(M: QcMatrix, budget: int = cop.DEFAULT_BUDGET, seed: int = 0,
                      cap: int = DEFAULT_PATTERN_CAP, exhaustive: bool = False) -> MembershipReport:
    pairs = iter_pattern_pairs(M.nv, cap)
    verdicts = _scan(((f"{D1}|{D2}", sign_scale_inc(M, D1, D2)) for D1, D2 in pairs), budget, seed, exhaustive,
                     _roundoff_floor(M.m))
    report = MembershipReport(_member(verdicts), QcFamilyTag("McInc"), verdicts)
    hit = _first_falsified(verdicts)
    if hit is not None:
        s1, s2 = hit[0].split("|")
        D1 = SignPattern(tuple(1 if c == "+" else -1 for c in s1))
        D2 = SignPattern(tuple(1 if c == "+" else -1 for c in s2))
        x = hit[1].counterexample
        n = M.nv
        vbar, vhat = D1.matrix @ x[:n], D2.matrix @ x[n:]
        wbar, what = relu(vbar), relu(vhat)
        report.witness = {"vbar": vbar, "vhat": vhat, "wbar": wbar, "what": what,
                          "form": np.array(inc_qc_form(M, vbar, vhat, wbar, what))}
    return report


def m_alpha_beta_membership(Mhat: QcMatrix, alpha: float, beta: float, budget: int = cop.DEFAULT_BUDGET,
                            seed: int = 0, cap: int = DEFAULT_PATTERN_CAP,
                            exhaustive: bool = False) -> MembershipReport:
    """Complete-set membership for the leaky map with slopes ``alpha`` (v<0) and ``beta`` (v>=0)."""
    if alpha == beta:
        raise ValueError("alpha must differ from beta")
    n = Mhat.nv
    eye = np.eye(n)

    def scaled(D: SignPattern) -> np.ndarray:
        d = D.matrix
        T = np.vstack([d, alpha * d + 0.5 * (beta - alpha) * (eye + d)])
        X = T.T @ Mhat.m @ T
        return 0.5 * (X + X.T)

    pats = enumerate_sign_patterns(n, cap)
    floor = _roundoff_floor(Mhat.m, max(1.0, abs(alpha), abs(beta)))
    verdicts = _scan(((str(D), scaled(D)) for D in pats), budget, seed, exhaustive, floor)
    report = MembershipReport(_member(verdicts), QcFamilyTag("MalphaBeta", (float(alpha), float(beta))), verdicts)
    hit = _first_falsified(verdicts)
    if hit is not None:
        D = SignPattern(tuple(1 if c == "+" else -1 for c in hit[0]))
        v = D.matrix @ hit[1].counterexample
        w = leaky(alpha, beta, v)
        report.witness = {"v": v, "w": w, "form": np.array(qc_form(Mhat, v, w))}
    return report


def mh_membership(Mhat: QcMatrix, h) -> MembershipReport:
    """Householder activation: two PSD conditions, so the answer is always yes or no."""
    h = as_vector(h, Mhat.nv, "h")
    if abs(np.linalg.norm(h) - 1.0) > 1e-9:
        raise ValueError("h must have unit norm")
    n = Mhat.nv
    hh = np.outer(h, h)
    verdicts, witness = [], None
    for d in (1, -1):
        T = np.vstack([np.eye(n), np.eye(n) + (d - 1) * hh])
        X = T.T @ Mhat.m @ T
        X = 0.5 * (X + X.T)
        evals, evecs = np.linalg.eigh(X)
        label = "d=+1" if d > 0 else "d=-1"
        if evals[0] >= -PSD_TOL:
            verdicts.append((label, cop.CopositivityVerdict("certified", X, np.zeros_like(X), route="psd_check")))
            continue
        u = evecs[:, 0]
        if (h @ u >= 0) != (d > 0):
            u = -u
        verdicts.append((label, cop.CopositivityVerdict("falsified", counterexample=u, value=float(evals[0]),
                                                          route="psd_check")))
        if witness is None:
            w = householder(h, u)
            witness = {"v": u, "w": w, "form": np.array(qc_form(Mhat, u, w))}
    member = "no" if witness is not None else "yes"
    return MembershipReport(member, QcFamilyTag("Mh", (tuple(float(x) for x in h),)), verdicts, witness)


# -- affine transforms -------------------------------------------------------------------

def _as_block(A, n: int, name: str) -> np.ndarray:
    a = np.asarray(A, dtype=float)
    if a.ndim == 0:
        return float(a) * np.eye(n)
    a = np.atleast_2d(a)
    if a.shape != (n, n):
        raise DimensionError(f"{name} has shape {a.shape}, expected {(n, n)}")
    return a


def _check_nonsingular(A: np.ndarray, name: str) -> float:
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] < SINGULAR_TOL * max(s[0], 1e-300):
        raise ValueError(f"{name} is singular (min singular value {s[-1]:.3e})")
    cond = float(s[0] / s[-1])
    log.debug("%s condition number %.3e", name, cond)
    return cond


def affine_pushforward(M: QcMatrix, A0, A1, A2) -> QcMatrix:
    """QC for ``v -> A0 v + A1 F(A2 v)`` obtained from a QC ``M`` of ``F``."""
    n = M.nv
    A0, A1, A2 = (_as_block(a, n, nm) for a, nm in ((A0, "A0"), (A1, "A1"), (A2, "A2")))
    _check_nonsingular(A1, "A1")
    A1inv = np.linalg.inv(A1)
    R = np.block([[A2, np.zeros((n, n))], [-A1inv @ A0, A1inv]])
    return QcMatrix(R.T @ M.m @ R)


def affine_pullback(Mhat: QcMatrix, A0, A1, A2) -> QcMatrix:
    """Inverse of :func:`affine_pushforward`; needs ``A1`` and ``A2`` nonsingular."""
    n = Mhat.nv
    A0, A1, A2 = (_as_block(a, n, nm) for a, nm in ((A0, "A0"), (A1, "A1"), (A2, "A2")))
    _check_nonsingular(A1, "A1")
    _check_nonsingular(A2, "A2")
    A2inv = np.linalg.inv(A2)
    Rinv = np.block([[A2inv, np.zeros((n, n))], [A0 @ A2inv, A1]])
    return QcMatrix(Rinv.T @ Mhat.m @ Rinv)


def leaky_affine_data(alpha: float, beta: float, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(A0, A1, A2)`` writing the leaky map as ``alpha v + (beta - alpha) relu(v)``."""
    if alpha == beta:
        raise ValueError("alpha must differ from beta")
    eye = np.eye(n)
    return alpha * eye, (beta - alpha) * eye, eye


# -- function classification -------------------------------------------------------------

@dataclass
class Classification:
    kind: str  # consistent_relu | consistent_flipped | violation | indeterminate
    probe: QcMatrix | None = None
    sample: int | None = None
    value: float | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "detail": self.detail}
        if self.probe is not None:
            out["probe"] = self.probe.m.tolist()
            out["sample"] = self.sample
            out["value"] = self.value
        return out


def _probes(nv: int):
    """Probe matrices from the characterization argument, in a fixed order."""
    for i in range(nv):
        for sgn in (1.0, -1.0):
            q = np.zeros(nv)
            q[i] = sgn
            yield f"M1 Q1=({sgn:+g})e{i}e{i}'", build_m1(q)
    for i in range(nv):
        for j in range(i + 1, nv):
            E = np.zeros((nv, nv))
            E[i, j] = E[j, i] = 1.0
            z = np.zeros((nv, nv))
            yield f"M2 w{i}*w{j}", build_m2(np.block([[z, z], [z, E]]))
            yield f"M2 (w{i}-v{i})(w{j}-v{j})", build_m2(np.block([[E, z], [z, z]]))


def classify_function(samples, tol: float = 1e-9) -> Classification:
    """Test sampled ``(v, F(v))`` pairs against the probes that pin down ReLU.

    ``violation`` carries the probe matrix and the offending sample. Samples
    that pass every probe but match neither ReLU nor its flipped twin give
    ``indeterminate``; with a single channel no probe can separate them.
    """
    pairs = [(as_vector(v, name="v"), as_vector(w, name="w")) for v, w in samples]
    if not pairs:
        raise ValueError("no samples")
    nv = pairs[0][0].size
    for k, (v, w) in enumerate(pairs):
        if v.size != nv or w.size != nv:
            raise DimensionError(f"sample {k} has dimensions ({v.size}, {w.size}), expected {nv}")
    probes = list(_probes(nv))
    for k, (v, w) in enumerate(pairs):
        scale = max(1.0, float(np.max(np.abs(v))), float(np.max(np.abs(w)))) ** 2
        for name, M in probes:
            val = qc_form(M, v, w)
            if val < -tol * scale:
                return Classification("violation", M, k, val, f"probe {name} negative at sample {k}")

    def matches(fn) -> bool:
        return all(np.max(np.abs(w - fn(v))) <= tol * max(1.0, float(np.max(np.abs(v)))) for v, w in pairs)

    if matches(relu):
        return Classification("consistent_relu", detail=f"{len(pairs)} samples")
    if matches(flipped_relu):
        return Classification("consistent_flipped", detail=f"{len(pairs)} samples")
    return Classification("indeterminate", detail=(
        "every probe holds but samples mix ReLU-like and flipped-like outputs; "
        "cross-channel probes need nv >= 2 and a sample exposing the mix"))
