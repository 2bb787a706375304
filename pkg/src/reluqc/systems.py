"""LTI/ReLU interconnections, feed-forward nets and sampled lower bounds."""

from __future__ import annotations

import graphlib
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Sequence

import numpy as np

from .core import DimensionError, as_vector, matrix_from_json, relu
from .io import InputError, load_json, require

SS_FIELDS = ("A", "B1", "B2", "C1", "D11", "D12", "C2", "D21", "D22")
FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAXITER = 10_000


@dataclass(frozen=True)
class StateSpace:
    """``x+ = A x + B1 w + B2 d``, ``v = C1 x + D11 w + D12 d``, ``e = C2 x + D21 w + D22 d``, ``w = relu(v)``."""

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    D11: np.ndarray
    D12: np.ndarray
    C2: np.ndarray
    D21: np.ndarray
    D22: np.ndarray

    def __post_init__(self):
        for f in SS_FIELDS:
            a = np.asarray(getattr(self, f), dtype=float)
            if a.ndim != 2:
                raise DimensionError(f"{f} must be a matrix, got shape {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{f} has non-finite entries")
            a = a.copy()
            a.setflags(write=False)
            object.__setattr__(self, f, a)
        nx, nv, nd, ne = self.nx, self.nv, self.nd, self.ne
        want = {"A": (nx, nx), "B1": (nx, nv), "B2": (nx, nd), "C1": (nv, nx), "D11": (nv, nv),
                "D12": (nv, nd), "C2": (ne, nx), "D21": (ne, nv), "D22": (ne, nd)}
        for f, shape in want.items():
            if getattr(self, f).shape != shape:
                raise DimensionError(f"{f} has shape {getattr(self, f).shape}, expected {shape}")

    @property
    def nx(self) -> int:
        return self.A.shape[0]

    @property
    def nv(self) -> int:
        return self.B1.shape[1]

    @property
    def nd(self) -> int:
        return self.B2.shape[1]

    @property
    def ne(self) -> int:
        return self.C2.shape[0]

    @classmethod
    def lti(cls, A, B, C, D) -> "StateSpace":
        """A system with no ReLU channel (``nv = 0``)."""
        A, B, C, D = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (A, B, C, D))
        nx, nd, ne = A.shape[0], B.shape[1], C.shape[0]
        return cls(A, np.zeros((nx, 0)), B, np.zeros((0, nx)), np.zeros((0, 0)), np.zeros((0, nd)),
                   C, np.zeros((ne, 0)), D)

    def scaled(self, alpha: float, fields: Sequence[str]) -> "StateSpace":
        bad = set(fields) - set(SS_FIELDS)
        if bad:
            raise ValueError(f"unknown state-space fields {sorted(bad)}")
        return replace(self, **{f: alpha * getattr(self, f) for f in fields})

    def to_dict(self) -> dict:
        return {f: getattr(self, f).tolist() for f in SS_FIELDS}

    @classmethod
    def from_dict(cls, obj: dict, where: str = "") -> "StateSpace":
        A = matrix_from_json(require(obj, "A", where), f"{where}/A")
        nx = A.shape[0]
        mats = {"A": A}
        for f in ("B1", "B2", "C1", "C2"):
            mats[f] = matrix_from_json(require(obj, f, where), f"{where}/{f}")
        nv, nd, ne = mats["B1"].shape[1], mats["B2"].shape[1], mats["C2"].shape[0]
        shapes = {"D11": (nv, nv), "D12": (nv, nd), "D21": (ne, nv), "D22": (ne, nd)}
        for f, shape in shapes.items():
            raw = obj.get(f, 0)
            if isinstance(raw, (int, float)) and raw == 0:
                mats[f] = np.zeros(shape)
            else:
                mats[f] = matrix_from_json(raw, f"{where}/{f}")
        try:
            return cls(**mats)
        except DimensionError as exc:
            raise InputError(where or "/", str(exc)) from None


@dataclass(frozen=True)
class SystemFamily:
    """``alpha -> G(alpha)`` with the listed fields multiplied by ``alpha``."""

    base: StateSpace
    scaled_fields: tuple = ()
    name: str = ""

    def __call__(self, alpha: float) -> StateSpace:
        return self.base.scaled(alpha, self.scaled_fields) if self.scaled_fields else self.base


def load_system(path) -> SystemFamily:
    obj = load_json(path)
    try:
        ss = StateSpace.from_dict(obj)
        fields = obj.get("scale_by_alpha", [])
        if not isinstance(fields, list) or not all(isinstance(f, str) and f in SS_FIELDS for f in fields):
            raise InputError("/scale_by_alpha", f"expected a list of field names from {SS_FIELDS}")
    except InputError as exc:
        raise exc.with_path(str(path)) from None
    return SystemFamily(ss, tuple(fields), obj.get("name", ""))


def fixture_path(name: str):
    return resources.files("reluqc") / "data" / f"{name}.json"


def example_a() -> SystemFamily:
    return load_system(fixture_path("example_a"))


# -- well-posedness and simulation ------------------------------------------------------

@dataclass(frozen=True)
class Wellposedness:
    status: str  # wellposed_certified | unknown
    method: str = ""
    order: tuple = ()


def wellposed_screen(G: StateSpace) -> Wellposedness:
    """Sufficient checks only: acyclic ``D11`` dependencies or ``||D11||_2 < 1``."""
    n = G.nv
    if n == 0:
        return Wellposedness("wellposed_certified", "no_loop")
    D = G.D11
    ts = graphlib.TopologicalSorter({i: {j for j in range(n) if D[i, j] != 0} for i in range(n)})
    try:
        order = tuple(ts.static_order())
        return Wellposedness("wellposed_certified", "triangular", order)
    except graphlib.CycleError:
        pass
    if np.linalg.norm(D, 2) < 1.0:
        return Wellposedness("wellposed_certified", "contraction")
    return Wellposedness("unknown", "")


@dataclass
class Trajectory:
    x: np.ndarray  # (T+1, nx)
    v: np.ndarray  # (T, nv)
    w: np.ndarray
    e: np.ndarray


def _solve_loop(G: StateSpace, wp: Wellposedness, base: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``v = base + D11 relu(v)``."""
    n = G.nv
    if n == 0:
        return np.zeros(0), np.zeros(0)
    if wp.method == "triangular":
        v = np.zeros(n)
        w = np.zeros(n)
        for i in wp.order:
            v[i] = base[i] + G.D11[i] @ w
            w[i] = max(v[i], 0.0)
        return v, w
    v = base.copy()
    for _ in range(FIXED_POINT_MAXITER):
        v_new = base + G.D11 @ relu(v)
        if np.max(np.abs(v_new - v)) <= FIXED_POINT_TOL * max(1.0, float(np.max(np.abs(v_new)))):
            return v_new, relu(v_new)
        v = v_new
    raise RuntimeError(f"loop equation did not converge in {FIXED_POINT_MAXITER} iterations")


def simulate_lft(G: StateSpace, x0, d, force: bool = False) -> Trajectory:
    """Run the closed loop for ``len(d)`` steps.

    ``force=True`` skips the well-posedness screen and uses fixed-point
    iteration, which may fail to converge.
    """
    d = np.asarray(d, dtype=float)
    if d.ndim == 1:
        d = d.reshape(-1, G.nd) if G.nd else d.reshape(-1, 0)
    if d.shape[1] != G.nd:
        raise DimensionError(f"inputs have width {d.shape[1]}, expected {G.nd}")
    x = as_vector(x0, G.nx, "x0") if G.nx else np.zeros(0)
    wp = wellposed_screen(G)
    if wp.status != "wellposed_certified":
        if not force:
            raise ValueError("well-posedness not certified; pass force=True to iterate anyway")
        wp = Wellposedness("forced", "fixed_point")
    T = d.shape[0]
    xs = np.zeros((T + 1, G.nx))
    vs, ws = np.zeros((T, G.nv)), np.zeros((T, G.nv))
    es = np.zeros((T, G.ne))
    xs[0] = x
    for k in range(T):
        v, w = _solve_loop(G, wp, G.C1 @ x + G.D12 @ d[k])
        vs[k], ws[k] = v, w
        es[k] = G.C2 @ x + G.D21 @ w + G.D22 @ d[k]
        x = G.A @ x + G.B1 @ w + G.B2 @ d[k]
        xs[k + 1] = x
    return Trajectory(xs, vs, ws, es)


def spectral_radius(A) -> float:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0


def h_inf_norm(A, B, C, D, rtol: float = 1e-4) -> float:
    """Induced l2 gain of a stable LTI system by bisection on the bounded-real LMI."""
    from .analysis import perf_feasible

    G = StateSpace.lti(A, B, C, D)
    if spectral_radius(G.A) >= 1.0:
        raise ValueError("A is not Schur stable")
    lo = float(np.linalg.norm(G.D22, 2)) if G.D22.size else 0.0
    if not np.any(G.C2) or not np.any(G.B2):
        return lo
    hi = max(2.0 * lo, 1.0)
    while not perf_feasible(G, hi):
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise RuntimeError("could not bracket the gain")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if perf_feasible(G, mid):
            hi = mid
        else:
            lo = mid
    return hi


def empirical_gain_lower_bound(G: StateSpace, horizon: int = 256, trials: int = 200, seed: int = 0,
                               n_freq: int = 64) -> float:
    """Best ``||e|| / ||d||`` over white-noise trials and a sinusoid sweep (zero initial state)."""
    if wellposed_screen(G).status != "wellposed_certified":
        raise ValueError("well-posedness not certified")
    rng = np.random.default_rng(seed)
    k = np.arange(horizon)
    inputs = [rng.standard_normal((horizon, G.nd)) for _ in range(trials)]
    for omega in np.linspace(0.0, np.pi, n_freq):
        direction = rng.standard_normal(G.nd)
        direction /= max(np.linalg.norm(direction), 1e-300)
        for phase in (0.0, np.pi / 2):
            inputs.append(np.cos(omega * k + phase)[:, None] * direction[None, :])
    best = 0.0
    x0 = np.zeros(G.nx)
    for d in inputs:
        nd = np.linalg.norm(d)
        if nd == 0:
            continue
        e = simulate_lft(G, x0, d).e
        best = max(best, float(np.linalg.norm(e) / nd))
    return best


# -- feed-forward networks ---------------------------------------------------------------

@dataclass(frozen=True)
class NeuralNet:
    weights: tuple
    biases: tuple

    def __post_init__(self):
        W = tuple(np.atleast_2d(np.asarray(w, dtype=float)) for w in self.weights)
        if len(W) < 2:
            raise ValueError("need at least one hidden layer (two weight matrices)")
        for k in range(1, len(W)):
            if W[k].shape[1] != W[k - 1].shape[0]:
                raise DimensionError(f"W{k} has {W[k].shape[1]} columns but W{k - 1} has {W[k - 1].shape[0]} rows")
        b = self.biases
        if b is None or len(b) == 0:
            b = tuple(np.zeros(w.shape[0]) for w in W)
        b = tuple(np.asarray(x, dtype=float).reshape(-1) for x in b)
        if len(b) != len(W) or any(bk.size != wk.shape[0] for bk, wk in zip(b, W)):
            raise DimensionError("biases do not match layer widths")
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "biases", b)

    @property
    def n0(self) -> int:
        return self.weights[0].shape[1]

    @property
    def hidden(self) -> list[int]:
        return [w.shape[0] for w in self.weights[:-1]]

    @classmethod
    def from_dict(cls, obj: dict, where: str = "") -> "NeuralNet":
        ws = require(obj, "weights", where)
        if not isinstance(ws, list):
            raise InputError(f"{where}/weights", "expected a list of matrices")
        W = [matrix_from_json(w, f"{where}/weights/{k}") for k, w in enumerate(ws)]
        bs = obj.get("biases") or []
        b = [np.asarray(x, dtype=float).reshape(-1) for x in bs]
        try:
            return cls(tuple(W), tuple(b))
        except (DimensionError, ValueError) as exc:
            raise InputError(f"{where}/weights", str(exc)) from None

    def to_dict(self) -> dict:
        return {"weights": [w.tolist() for w in self.weights], "biases": [b.tolist() for b in self.biases]}


def load_net(path) -> NeuralNet:
    obj = load_json(path)
    try:
        return NeuralNet.from_dict(obj)
    except InputError as exc:
        raise exc.with_path(str(path)) from None


def example_b() -> NeuralNet:
    return load_net(fixture_path("example_b"))


def nn_eval(nn: NeuralNet, x) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    batched = X.ndim == 2
    X = np.atleast_2d(X)
    if X.shape[1] != nn.n0:
        raise DimensionError(f"input has dimension {X.shape[1]}, expected {nn.n0}")
    for W, b in zip(nn.weights[:-1], nn.biases[:-1]):
        X = np.maximum(X @ W.T + b, 0.0)
    Y = X @ nn.weights[-1].T + nn.biases[-1]
    return Y if batched else Y[0]


@dataclass(frozen=True)
class StackedNet:
    """``B xt = relu(A xt + b)``, ``y = C xt + b_last`` with ``xt = [x0; ...; x_l]``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    b: np.ndarray
    m: int
    n0: int
    b_last: np.ndarray = field(default_factory=lambda: np.zeros(0))


def stack_network(nn: NeuralNet) -> StackedNet:
    W = nn.weights
    hidden = nn.hidden
    n0, m, nl = nn.n0, sum(hidden), hidden[-1]
    ntot = n0 + m
    A = np.zeros((m, ntot))
    r = c = 0
    for Wk in W[:-1]:
        A[r:r + Wk.shape[0], c:c + Wk.shape[1]] = Wk
        r += Wk.shape[0]
        c += Wk.shape[1]
    B = np.hstack([np.zeros((m, n0)), np.eye(m)])
    C = np.zeros((W[-1].shape[0], ntot))
    C[:, ntot - nl:] = W[-1]
    D = np.hstack([np.eye(n0), np.zeros((n0, m))])
    b = np.concatenate(nn.biases[:-1])
    return StackedNet(A, B, C, D, b, m, n0, nn.biases[-1].copy())


def stacked_eval(sn: StackedNet, x) -> np.ndarray:
    """Solve ``B xt = relu(A xt + b)`` by forward sweeps and return the output."""
    x = as_vector(x, sn.n0, "x")
    xt = np.concatenate([x, np.zeros(sn.m)])
    # Layer k only reads layers < k, so each sweep fixes one more layer exactly.
    for _ in range(sn.m):
        nxt = np.concatenate([x, np.maximum(sn.A @ xt + sn.b, 0.0)])
        if np.array_equal(nxt, xt):
            break
        xt = nxt
    return sn.C @ xt + sn.b_last


def empirical_lipschitz_lower_bound(nn: NeuralNet, samples: int = 10**6, seed: int = 0,
                                    batch: int = 100_000) -> float:
    """Largest sampled ``||f(x) - f(xh)|| / ||x - xh||`` over Gaussian input pairs."""
    if samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    best = 0.0
    done = 0
    while done < samples:
        k = min(batch, samples - done)
        x = rng.standard_normal((k, nn.n0))
        xh = rng.standard_normal((k, nn.n0))
        dx = np.linalg.norm(x - xh, axis=1)
        ok = dx > 0
        dy = np.linalg.norm(nn_eval(nn, x) - nn_eval(nn, xh), axis=1)
        if np.any(ok):
            best = max(best, float(np.max(dy[ok] / dx[ok])))
        done += k
    return best
