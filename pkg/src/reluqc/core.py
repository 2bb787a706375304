"""Activations, quadratic forms and sign-pattern scaling.

Everything here is a pure function on numpy arrays. Matrices are dense;
the target sizes (nv up to about a dozen) do not warrant sparse storage.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

ASYMMETRY_TOL = 1e-12
UNIT_NORM_TOL = 1e-9
DEFAULT_PATTERN_CAP = 16


class DimensionError(ValueError):
    """Raised when array shapes are not conformable."""


class PatternCapError(ValueError):
    """Raised when a sign-pattern enumeration would exceed the configured cap."""


def as_vector(v, dim: int | None = None, name: str = "vector") -> np.ndarray:
    out = np.asarray(v, dtype=float).reshape(-1) if np.ndim(v) <= 1 else None
    if out is None:
        raise DimensionError(f"{name} must be one-dimensional, got shape {np.shape(v)}")
    if out.size == 0:
        raise DimensionError(f"{name} must have positive dimension")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} has non-finite entries")
    if dim is not None and out.size != dim:
        raise DimensionError(f"{name} has dimension {out.size}, expected {dim}")
    return out


def as_sym(m, name: str = "matrix") -> np.ndarray:
    """Validate a square matrix as symmetric and return its exact symmetrization.

    Asymmetry up to ``1e-12 * maxabs`` is tolerated and averaged away; anything
    larger is rejected.
    """
    a = np.atleast_2d(np.asarray(m, dtype=float))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if np.max(np.abs(a - a.T), initial=0.0) > ASYMMETRY_TOL * max(scale, 1e-300):
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (a + a.T)


@dataclass(frozen=True, eq=False)
class QcMatrix:
    """A symmetric ``2nv x 2nv`` matrix defining a (incremental) quadratic constraint.

    The first ``nv`` coordinates multiply the input ``v`` and the last ``nv``
    the output ``w``.
    """

    m: np.ndarray

    def __post_init__(self):
        m = as_sym(self.m, "QC matrix")
        if m.shape[0] % 2:
            raise DimensionError(f"QC matrix must have even dimension, got {m.shape[0]}")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @property
    def nv(self) -> int:
        return self.m.shape[0] // 2

    def blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(M11, M12, M22)``."""
        n = self.nv
        return self.m[:n, :n], self.m[:n, n:], self.m[n:, n:]

    def __mul__(self, alpha: float) -> "QcMatrix":
        return QcMatrix(alpha * self.m)

    __rmul__ = __mul__

    def __add__(self, other: "QcMatrix") -> "QcMatrix":
        return QcMatrix(self.m + other.m)

    def __repr__(self) -> str:
        return f"QcMatrix(nv={self.nv})"


@dataclass(frozen=True)
class SignPattern:
    """Diagonal +-1 matrix, stored by its diagonal."""

    signs: tuple[int, ...]

    def __post_init__(self):
        s = tuple(int(x) for x in self.signs)
        if not s or any(x not in (-1, 1) for x in s):
            raise ValueError(f"sign pattern entries must be +-1, got {self.signs}")
        object.__setattr__(self, "signs", s)

    @property
    def dim(self) -> int:
        return len(self.signs)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(np.array(self.signs, dtype=float))

    @classmethod
    def of(cls, v) -> "SignPattern":
        """Orthant of ``v`` with the convention sign(0) = +1."""
        return cls(tuple(1 if x >= 0 else -1 for x in np.asarray(v, dtype=float)))

    def __str__(self) -> str:
        return "".join("+" if s > 0 else "-" for s in self.signs)


def _elementwise_arg(v) -> np.ndarray:
    """A vector, or a 2-D batch with one vector per row."""
    a = np.asarray(v, dtype=float)
    if a.ndim == 2:
        if not np.all(np.isfinite(a)):
            raise ValueError("input has non-finite entries")
        return a
    return as_vector(a)


def relu(v) -> np.ndarray:
    return np.maximum(_elementwise_arg(v), 0.0)


def flipped_relu(v) -> np.ndarray:
    """``-relu(-v)``, i.e. the elementwise minimum with zero."""
    return np.minimum(_elementwise_arg(v), 0.0)


def leaky(alpha: float, beta: float, v) -> np.ndarray:
    """Slope ``alpha`` on the negative axis and ``beta`` on the nonnegative axis."""
    if alpha == beta:
        raise ValueError("leaky activation requires alpha != beta")
    v = _elementwise_arg(v)
    return np.where(v < 0, alpha * v, beta * v)


def householder(h, v) -> np.ndarray:
    h = as_vector(h, name="h")
    v = as_vector(v, h.size, name="v")
    if abs(np.linalg.norm(h) - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"householder vector must have unit norm, got {np.linalg.norm(h)}")
    if h @ v >= 0:
        return v.copy()
    return v - 2.0 * h * (h @ v)


def qc_form(M: QcMatrix, v, w) -> float:
    v = as_vector(v, M.nv, "v")
    w = as_vector(w, M.nv, "w")
    z = np.concatenate([v, w])
    return float(z @ M.m @ z)


def inc_qc_form(M: QcMatrix, vbar, vhat, wbar, what) -> float:
    n = M.nv
    dv = as_vector(vbar, n, "vbar") - as_vector(vhat, n, "vhat")
    dw = as_vector(wbar, n, "wbar") - as_vector(what, n, "what")
    z = np.concatenate([dv, dw])
    return float(z @ M.m @ z)


def _check_pattern(D: SignPattern, n: int) -> np.ndarray:
    if D.dim != n:
        raise DimensionError(f"sign pattern has dimension {D.dim}, expected {n}")
    return D.matrix


def orthant_lift(D: SignPattern) -> np.ndarray:
    """``[D; (I+D)/2]``: maps a nonnegative point to an input/ReLU-output pair."""
    d = D.matrix
    return np.vstack([d, 0.5 * (np.eye(D.dim) + d)])


def inc_orthant_lift(D1: SignPattern, D2: SignPattern) -> np.ndarray:
    """``[[D1, -D2], [(I+D1)/2, -(I+D2)/2]]`` for the incremental scaling."""
    d1, d2 = D1.matrix, D2.matrix
    eye = np.eye(D1.dim)
    return np.block([[d1, -d2], [0.5 * (eye + d1), -0.5 * (eye + d2)]])


def sign_scale(M: QcMatrix, D: SignPattern) -> np.ndarray:
    _check_pattern(D, M.nv)
    T = orthant_lift(D)
    out = T.T @ M.m @ T
    return 0.5 * (out + out.T)


def sign_scale_inc(M: QcMatrix, D1: SignPattern, D2: SignPattern) -> np.ndarray:
    _check_pattern(D1, M.nv)
    _check_pattern(D2, M.nv)
    T = inc_orthant_lift(D1, D2)
    out = T.T @ M.m @ T
    return 0.5 * (out + out.T)


def increment_lift(nv: int) -> np.ndarray:
    """Selector ``R`` with ``R [vbar; vhat; wbar; what] = [vbar - vhat; wbar - what]``."""
    eye = np.eye(nv)
    z = np.zeros((nv, nv))
    return np.block([[eye, -eye, z, z], [z, z, eye, -eye]])


def enumerate_sign_patterns(n: int, cap: int = DEFAULT_PATTERN_CAP) -> list[SignPattern]:
    """All ``2**n`` patterns, ``+`` before ``-`` in lexicographic order."""
    if n < 1:
        raise ValueError("pattern dimension must be >= 1")
    if n > cap:
        raise PatternCapError(f"2**{n} sign patterns exceeds cap of 2**{cap}; raise the cap explicitly")
    return [SignPattern(s) for s in itertools.product((1, -1), repeat=n)]


def iter_pattern_pairs(n: int, cap: int = DEFAULT_PATTERN_CAP) -> Iterator[tuple[SignPattern, SignPattern]]:
    if 2 * n > cap:
        raise PatternCapError(f"4**{n} sign-pattern pairs exceeds cap of 2**{cap}; raise the cap explicitly")
    pats = enumerate_sign_patterns(n, cap)
    return itertools.product(pats, pats)


# -- JSON helpers ----------------------------------------------------------

def vector_to_json(v) -> dict:
    v = as_vector(v)
    return {"dim": int(v.size), "data": v.tolist()}


def matrix_to_json(m) -> dict:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[0] == m.shape[1]:
        return {"dim": int(m.shape[0]), "data": m.reshape(-1).tolist()}
    return {"shape": list(m.shape), "data": m.reshape(-1).tolist()}


def matrix_from_json(obj, where: str = "") -> np.ndarray:
    """Decode ``{"dim": n, "data": [...]}`` (flat row-major or nested), ``{"shape", "data"}``
    or a bare nested list into a 2-D array."""
    from .io import InputError

    if isinstance(obj, dict):
        if "data" not in obj:
            raise InputError(where, "missing 'data'")
        data = _numeric(obj["data"], f"{where}/data")
        if "shape" in obj:
            shape = tuple(int(s) for s in obj["shape"])
        elif "dim" in obj:
            shape = (int(obj["dim"]), int(obj["dim"]))
        else:
            raise InputError(where, "matrix needs 'dim' or 'shape'")
        if data.size != int(np.prod(shape)):
            raise InputError(f"{where}/data", f"{data.size} entries do not fill shape {shape}")
        return data.reshape(shape)
    data = _numeric(obj, where)
    return np.atleast_2d(data) if data.ndim < 2 else data


def vector_from_json(obj, where: str = "") -> np.ndarray:
    from .io import InputError

    if isinstance(obj, dict):
        if "data" not in obj:
            raise InputError(where, "missing 'data'")
        data = _numeric(obj["data"], f"{where}/data").reshape(-1)
        if "dim" in obj and data.size != int(obj["dim"]):
            raise InputError(f"{where}/data", f"expected {obj['dim']} entries, got {data.size}")
        return data
    return _numeric(obj, where).reshape(-1)


def _numeric(obj, where: str) -> np.ndarray:
    from .io import InputError

    try:
        out = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise InputError(where, "not a numeric array") from None
    if not np.all(np.isfinite(out)):
        raise InputError(where, "non-finite entry")
    return out


def stack_patterns(patterns: Sequence[SignPattern]) -> np.ndarray:
    return np.array([p.signs for p in patterns], dtype=int)
