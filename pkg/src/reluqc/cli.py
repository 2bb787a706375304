"""Command-line front end.

Exit codes: 0 success, 2 a mathematically negative answer (falsified,
not a member, no certificate), 1 a tool or input error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis, copositivity, dh_decomp, qc_sets, systems
from .core import DimensionError, PatternCapError, QcMatrix, flipped_relu, leaky, matrix_from_json, relu
from .io import InputError, load_json
from .sdp import SolveOptions, export_sdpa

log = logging.getLogger("reluqc")

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2

GAIN_CLASS = {"mc": "Mc_relaxed", "m12": "M12_relaxed", "m123": "M123_relaxed"}
LIP_CLASS = {"mi1": "Mi1", "mi1mi2": "Mi1_plus_Mi2", "mcinc": "McInc_relaxed"}
TEST_FUNCTIONS = {
    "relu": relu,
    "flipped": flipped_relu,
    "abs": np.abs,
    "leaky": lambda v: leaky(0.5, 1.0, v),
    "identity": lambda v: np.asarray(v, dtype=float),
}


# -- run metadata --------------------------------------------------------------------------

class Run:
    """Config hash, seed and output plumbing shared by every subcommand."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.seed = args.seed
        cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "timing", "jobs", "func", "verbose")}
        for key in ("matrix", "system", "net", "samples"):
            path = cfg.get(key)
            if path and Path(path).is_file():
                cfg[f"{key}_sha256"] = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        blob = json.dumps(cfg, sort_keys=True, default=str).encode()
        self.config = cfg
        self.config_hash = hashlib.sha256(blob).hexdigest()[:16]

    @property
    def meta(self) -> dict:
        return {"tool": "reluqc", "version": __version__, "config_hash": self.config_hash,
                "seed": self.seed, "command": self.args.command}

    def write_json(self, payload: dict) -> None:
        if not self.args.out:
            return
        doc = {"meta": self.meta, **payload}
        Path(self.args.out).write_text(json.dumps(doc, indent=2, default=_jsonable) + "\n")

    def write_csv(self, header: list[str], rows: list[list], notes: list[str] = ()) -> str:
        buf = io.StringIO()
        buf.write(f"# reluqc {__version__} config={self.config_hash} seed={self.seed} command={self.args.command}\n")
        buf.write(f"# generated {dt.datetime.now(dt.timezone.utc).isoformat(timespec='seconds')}\n")
        for note in notes:
            buf.write(f"# {note}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        text = buf.getvalue()
        if self.args.out:
            Path(self.args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return text


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _fmt(x: float) -> str:
    return "inf" if not np.isfinite(x) else f"{x:.10g}"


def parse_grid(text: str) -> list[float]:
    """``lo:hi:n`` (n points, both ends included) or a comma-separated list."""
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            grid = np.linspace(float(lo), float(hi), n).tolist()
        else:
            grid = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError("/alphas", f"bad grid {text!r}; expected lo:hi:n or a comma list") from None
    if not grid or not all(np.isfinite(grid)):
        raise InputError("/alphas", "grid must be non-empty and finite")
    return grid


def _load_matrix(path: str) -> np.ndarray:
    try:
        return matrix_from_json(load_json(path))
    except InputError as exc:
        raise exc if exc.path else exc.with_path(path) from None


def _load_qc(path: str) -> QcMatrix:
    m = _load_matrix(path)
    if m.shape[0] != m.shape[1] or m.shape[0] % 2:
        raise InputError("/", f"QC matrix must be square with even dimension, got {m.shape}", path)
    try:
        return QcMatrix(m)
    except (ValueError, DimensionError) as exc:
        raise InputError("/", str(exc), path) from None


def _opts() -> SolveOptions:
    return SolveOptions.from_env()


# -- subcommands ---------------------------------------------------------------------------

def cmd_qc_check(run: Run) -> int:
    a = run.args
    M = _load_qc(a.matrix)
    if a.family == "mc":
        rep = qc_sets.mc_membership(M, a.budget, run.seed, exhaustive=a.exhaustive)
    elif a.family == "malphabeta":
        rep = qc_sets.m_alpha_beta_membership(M, a.alpha, a.beta, a.budget, run.seed, exhaustive=a.exhaustive)
    else:
        if a.h is None:
            raise InputError("/h", "--h is required for family mh")
        rep = qc_sets.mh_membership(M, [float(t) for t in a.h.split(",")])
    print(f"member: {rep.member}")
    run.write_json(rep.to_dict())
    return EXIT_NEGATIVE if rep.member == "no" else EXIT_OK


def cmd_qc_inc_check(run: Run) -> int:
    a = run.args
    rep = qc_sets.mc_inc_membership(_load_qc(a.matrix), a.budget, run.seed, exhaustive=a.exhaustive)
    print(f"member: {rep.member}")
    run.write_json(rep.to_dict())
    return EXIT_NEGATIVE if rep.member == "no" else EXIT_OK


def cmd_coposcheck(run: Run) -> int:
    Q = _load_matrix(run.args.matrix)
    v = copositivity.decide(Q, run.args.budget, run.seed, _opts())
    print(v.status)
    if v.diagnostic:
        print(v.diagnostic, file=sys.stderr)
    run.write_json(v.to_dict())
    return EXIT_NEGATIVE if v.status == "falsified" else EXIT_OK


def cmd_dh_decompose(run: Run) -> int:
    T2 = _load_matrix(run.args.matrix)
    try:
        terms = dh_decomp.decompose_zero_excess(T2)
    except ValueError as exc:
        raise InputError("/", str(exc), run.args.matrix) from None
    resid = float(np.max(np.abs(dh_decomp.reconstruct(terms, T2.shape[0]) - T2), initial=0.0))
    for t in terms:
        print(f"lambda[{t.i + 1},{t.j + 1}] = {_fmt(t.lam)}")
    print(f"residual {resid:.3e}")
    run.write_json({"terms": [t.to_dict() for t in terms], "residual": resid, "index_base": 0})
    return EXIT_OK


def cmd_gain(run: Run) -> int:
    a = run.args
    G = systems.load_system(a.system)(a.alpha)
    cert = analysis.gain_sdp(G, GAIN_CLASS[a.qc_class], _opts())
    state = "certified" if cert.certified else "no certificate"
    print(f"gamma {_fmt(cert.gamma)} ({state}, {cert.status})")
    run.write_json({"alpha": a.alpha, **cert.to_dict()})
    return EXIT_OK if cert.certified else EXIT_NEGATIVE


def _sweep_point(job):
    family, cls, alpha = job
    c = analysis.gain_sdp(family(alpha), cls, _opts())
    return c.gamma if c.certified else float("inf"), c.status if c.certified else f"uncertified:{c.status}", c.seconds


def _sweep(family, cls: str, alphas: list[float], jobs: int) -> list[tuple]:
    work = [(family, cls, a) for a in alphas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_sweep_point, work))
    return [_sweep_point(w) for w in work]


def cmd_gain_sweep(run: Run) -> int:
    a = run.args
    family = systems.load_system(a.system)
    alphas = parse_grid(a.alphas)
    results = _sweep(family, GAIN_CLASS[a.qc_class], alphas, a.jobs)
    header = ["alpha", "gamma", "status"] + (["seconds"] if a.timing else [])
    rows = []
    for alpha, (g, status, secs) in zip(alphas, results):
        rows.append([_fmt(alpha), _fmt(g), status] + ([f"{secs:.3f}"] if a.timing else []))
    run.write_csv(header, rows, [f"class={GAIN_CLASS[a.qc_class]}"])
    return EXIT_OK if all(np.isfinite(g) for g, _, _ in results) else EXIT_NEGATIVE


def cmd_lipschitz(run: Run) -> int:
    a = run.args
    nn = systems.load_net(a.net)
    cert = analysis.lip_sdp(nn, LIP_CLASS[a.qc_class], _opts())
    state = "certified" if cert.certified else "no certificate"
    print(f"L {_fmt(cert.L)} ({state}, {cert.status})")
    out = cert.to_dict()
    if a.samples_lower:
        out["empirical_lower_bound"] = systems.empirical_lipschitz_lower_bound(nn, a.samples_lower, run.seed)
        print(f"empirical lower bound {out['empirical_lower_bound']:.6f}")
    run.write_json(out)
    return EXIT_OK if cert.certified else EXIT_NEGATIVE


def cmd_simulate(run: Run) -> int:
    a = run.args
    G = systems.load_system(a.system)(a.alpha)
    rng = np.random.default_rng(run.seed)
    k = np.arange(a.steps)
    if a.input == "noise":
        d = rng.standard_normal((a.steps, G.nd))
    elif a.input == "sine":
        d = np.repeat(np.sin(a.omega * k)[:, None], G.nd, axis=1)
    else:
        d = np.zeros((a.steps, G.nd))
    x0 = np.zeros(G.nx) if a.x0 is None else np.array([float(t) for t in a.x0.split(",")])
    traj = systems.simulate_lft(G, x0, d, force=a.force)
    header = (["k"] + [f"d{i}" for i in range(G.nd)] + [f"e{i}" for i in range(G.ne)]
              + [f"v{i}" for i in range(G.nv)] + [f"w{i}" for i in range(G.nv)] + [f"x{i}" for i in range(G.nx)])
    rows = [[int(t)] + [_fmt(x) for x in np.concatenate([d[t], traj.e[t], traj.v[t], traj.w[t], traj.x[t]])]
            for t in range(a.steps)]
    nd = float(np.linalg.norm(d))
    ratio = float(np.linalg.norm(traj.e)) / nd if nd > 0 else float("nan")
    run.write_csv(header, rows, [f"alpha={_fmt(a.alpha)} input={a.input} energy_ratio={_fmt(ratio)}"])
    return EXIT_OK


def _grid_samples(fn, dim: int, radius: float, points: int) -> list[tuple[np.ndarray, np.ndarray]]:
    axis = np.linspace(-radius, radius, points)
    grid = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    return [(v, np.asarray(fn(v), dtype=float)) for v in grid]


def cmd_classify_fn(run: Run) -> int:
    a = run.args
    if a.samples:
        obj = load_json(a.samples)
        if not isinstance(obj, list):
            raise InputError("/", "expected a list of {\"v\": [...], \"w\": [...]} objects", a.samples)
        samples = []
        for k, item in enumerate(obj):
            if not isinstance(item, dict) or "v" not in item or "w" not in item:
                raise InputError(f"/{k}", "expected an object with 'v' and 'w'", a.samples)
            samples.append((np.asarray(item["v"], dtype=float), np.asarray(item["w"], dtype=float)))
    else:
        samples = _grid_samples(TEST_FUNCTIONS[a.fn], a.dim, a.radius, a.points)
    res = qc_sets.classify_function(samples)
    print(res.kind)
    if res.detail:
        print(res.detail, file=sys.stderr)
    run.write_json(res.to_dict())
    return EXIT_NEGATIVE if res.kind == "violation" else EXIT_OK


def cmd_reproduce(run: Run) -> int:
    if run.args.example == "example-a":
        return _reproduce_a(run)
    return _reproduce_b(run)


def _reproduce_a(run: Run) -> int:
    a = run.args
    family = systems.example_a()
    alphas = parse_grid(a.alphas)
    mc = _sweep(family, "Mc_relaxed", alphas, a.jobs)
    m12 = _sweep(family, "M12_relaxed", alphas, a.jobs)
    t12 = analysis.feasibility_threshold(family, "M12_relaxed", 0.5, 0.9, opts=_opts())
    tmc = analysis.feasibility_threshold(family, "Mc_relaxed", 0.9, 1.3, opts=_opts())
    notes = [f"threshold M12_relaxed={t12:.4f}", f"threshold Mc_relaxed={tmc:.4f}"]
    header = ["alpha", "gamma_Mc", "status_Mc", "gamma_M12", "status_M12"]
    if a.timing:
        header += ["seconds_Mc", "seconds_M12"]
    rows = []
    for alpha, r1, r2 in zip(alphas, mc, m12):
        row = [_fmt(alpha), _fmt(r1[0]), r1[1], _fmt(r2[0]), r2[1]]
        rows.append(row + ([f"{r1[2]:.3f}", f"{r2[2]:.3f}"] if a.timing else []))
    run.write_csv(header, rows, notes)
    if a.out:
        for n in notes:
            print(n)
    return EXIT_OK


def _reproduce_b(run: Run) -> int:
    a = run.args
    nn = systems.example_b()
    rows = []
    for key in ("mi1", "mi1mi2", "mcinc"):
        c = analysis.lip_sdp(nn, LIP_CLASS[key], _opts())
        rows.append([LIP_CLASS[key], f"{c.L:.4f}", "certified" if c.certified else f"uncertified:{c.status}"])
    lower = systems.empirical_lipschitz_lower_bound(nn, a.lower_samples, run.seed)
    rows.append(["empirical_lower_bound", f"{lower:.4f}", f"samples={a.lower_samples}"])
    run.write_csv(["qc_class", "L", "status"], rows)
    if a.out:
        for r in rows:
            print(f"{r[0]:<22} {r[1]}")
    return EXIT_OK


def cmd_export_sdp(run: Run) -> int:
    a = run.args
    if a.system:
        G = systems.load_system(a.system)(a.alpha)
        cls = GAIN_CLASS[a.qc_class or "m12"]
        if a.problem == "margin":
            p = analysis.margin_problem(G, cls)
        else:
            p = analysis.gain_problem(G, cls, mu_scale=analysis.gain_mu_scale(G, cls))
    elif a.net:
        p = analysis.lip_problem(systems.load_net(a.net), LIP_CLASS[a.qc_class or "mi1"])
    else:
        raise InputError("/", "give --system or --net")
    text = export_sdpa(p, f"reluqc {__version__} {p.name} config={run.config_hash}")
    if a.out:
        Path(a.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    common.add_argument("--out", help="output file (JSON for certificates, CSV for tables)")
    common.add_argument("--timing", action="store_true", help="add wall-clock columns to tables")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="reluqc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"reluqc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        s = sub.add_parser(name, parents=[common], help=help_text)
        s.set_defaults(func=func)
        return s

    s = add("qc-check", cmd_qc_check, "membership of a QC matrix in the complete set for ReLU")
    s.add_argument("--matrix", required=True)
    s.add_argument("--family", choices=("mc", "malphabeta", "mh"), default="mc")
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--h", help="comma-separated unit vector for family mh")
    s.add_argument("--budget", type=int, default=copositivity.DEFAULT_BUDGET)
    s.add_argument("--exhaustive", action="store_true", help="check every pattern instead of stopping early")

    s = add("qc-inc-check", cmd_qc_inc_check, "membership in the complete incremental set")
    s.add_argument("--matrix", required=True)
    s.add_argument("--budget", type=int, default=copositivity.DEFAULT_BUDGET)
    s.add_argument("--exhaustive", action="store_true")

    s = add("coposcheck", cmd_coposcheck, "copositivity verdict for a symmetric matrix")
    s.add_argument("--matrix", required=True)
    s.add_argument("--budget", type=int, default=copositivity.DEFAULT_BUDGET)

    s = add("dh-decompose", cmd_dh_decompose, "pairwise decomposition of a zero-excess DH matrix")
    s.add_argument("--matrix", required=True)

    s = add("gain", cmd_gain, "l2-gain certificate at one alpha")
    s.add_argument("--system", required=True)
    s.add_argument("--class", dest="qc_class", choices=tuple(GAIN_CLASS), default="mc")
    s.add_argument("--alpha", type=float, default=1.0, help="scale applied to the fields in scale_by_alpha")

    s = add("gain-sweep", cmd_gain_sweep, "gain over an alpha grid, as CSV")
    s.add_argument("--system", required=True)
    s.add_argument("--class", dest="qc_class", choices=tuple(GAIN_CLASS), default="mc")
    s.add_argument("--alphas", default="0:0.6:20", help="lo:hi:n or a comma list")

    s = add("lipschitz", cmd_lipschitz, "Lipschitz bound for a feed-forward ReLU net")
    s.add_argument("--net", required=True)
    s.add_argument("--class", dest="qc_class", choices=tuple(LIP_CLASS), default="mi1")
    s.add_argument("--samples-lower", type=int, default=0, help="also sample a lower bound")

    s = add("simulate", cmd_simulate, "closed-loop trajectory as CSV")
    s.add_argument("--system", required=True)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--input", choices=("noise", "sine", "zeros"), default="noise")
    s.add_argument("--omega", type=float, default=0.1)
    s.add_argument("--x0", help="comma-separated initial state")
    s.add_argument("--force", action="store_true", help="iterate the loop even if well-posedness is unknown")

    s = add("classify-fn", cmd_classify_fn, "test sampled input/output pairs against the ReLU probes")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--fn", choices=tuple(TEST_FUNCTIONS))
    g.add_argument("--samples", help='JSON list of {"v": [...], "w": [...]}')
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--radius", type=float, default=2.0)
    s.add_argument("--points", type=int, default=21, help="grid points per axis")

    s = add("reproduce", cmd_reproduce, "regenerate the two worked examples")
    s.add_argument("example", choices=("example-a", "example-b"))
    s.add_argument("--alphas", default="0:0.6:20")
    s.add_argument("--lower-samples", type=int, default=10**6)

    s = add("export-sdp", cmd_export_sdp, "write a certification SDP in SDPA sparse format")
    s.add_argument("--system")
    s.add_argument("--net")
    s.add_argument("--class", dest="qc_class", choices=tuple(GAIN_CLASS) + tuple(LIP_CLASS))
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--problem", choices=("gain", "margin"), default="gain")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "qc_class", None) and args.command == "export-sdp":
        want = GAIN_CLASS if args.system else LIP_CLASS
        if args.qc_class not in want:
            print(f"error: --class {args.qc_class} does not fit this problem; choose from {sorted(want)}",
                  file=sys.stderr)
            return EXIT_ERROR
    try:
        return args.func(Run(args))
    except (InputError, DimensionError, PatternCapError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
