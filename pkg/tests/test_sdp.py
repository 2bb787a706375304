import numpy as np
import pytest

from reluqc.analysis import gain_mu_scale, gain_problem, lip_problem
from reluqc.sdp import (
    Block,
    Expr,
    SdpProblem,
    SolveOptions,
    compile_problem,
    export_sdpa,
    import_sdpa,
    reference_solve,
    replay,
    sdpa_to_compiled,
    solve,
    solve_compiled,
)
from reluqc.systems import example_a, example_b


def _two_by_two() -> SdpProblem:
    p = SdpProblem(name="two_by_two")
    p.add_block("x", "scalar")
    p.add_psd(Expr.scalar("x", np.eye(2)) + Expr.constant([[0.0, 1.0], [1.0, 0.0]]), "[[x,1],[1,x]]")
    p.minimize({("x", 0, 0): 1.0})
    return p


def test_solve_examples():
    p = SdpProblem()
    p.add_block("x", "scalar")
    p.add_psd(Expr.scalar("x", np.eye(1)))
    p.minimize({("x", 0, 0): 1.0})
    r = solve(p)
    assert r.status == "optimal" and r.objective == pytest.approx(0.0, abs=1e-7)

    r = solve(_two_by_two())
    assert r.status == "optimal" and r.objective == pytest.approx(1.0, abs=1e-6)
    assert r.assignments["x"][0, 0] == pytest.approx(1.0, abs=1e-6)

    p = SdpProblem()
    p.add_block("x", "scalar")
    p.add_psd(Expr.scalar("x", np.eye(1)) - Expr.constant(np.eye(1)))
    p.add_psd(Expr.scalar("x", -np.eye(1)))
    p.minimize({("x", 0, 0): 1.0})
    assert solve(p).status == "infeasible"


def test_optimal_results_pass_replay():
    r = solve(_two_by_two())
    assert r.usable and r.residuals["replay_ok"]
    X = np.array([[1.0, 1.0], [1.0, 1.0]]) * 0 + r.assignments["x"][0, 0] * np.eye(2) + [[0, 1], [1, 0]]
    assert np.linalg.eigvalsh(X)[0] >= -1e-8


def test_block_kinds():
    p = SdpProblem()
    N = p.add_block("N", "nonneg", 3)
    D = p.add_block("D", "diagonal", 3)
    p.add_psd(Expr.var(N) + Expr.var(D) - Expr.constant(np.ones((3, 3))), "N + D >= J")
    p.add_psd(Expr.constant(np.eye(3)) - Expr.var(N), "N <= I")
    p.minimize({("D", i, i): 1.0 for i in range(3)})
    r = solve(p)
    assert r.status == "optimal"
    assert np.all(r.assignments["N"] >= -1e-8)
    Dv = r.assignments["D"]
    assert np.count_nonzero(Dv - np.diag(np.diag(Dv))) == 0
    with pytest.raises(ValueError):
        Block("bad", "wrong", 2)


def test_validate_catches_undeclared_block():
    p = SdpProblem()
    p.add_block("x", "scalar")
    p.add_psd(Expr.scalar("y", np.eye(1)))
    with pytest.raises(ValueError):
        p.validate()


def test_constraint_scaling_leaves_objective_unchanged():
    base = solve(_two_by_two()).objective
    p = SdpProblem()
    p.add_block("x", "scalar")
    p.add_psd(10.0 * (Expr.scalar("x", np.eye(2)) + Expr.constant([[0.0, 1.0], [1.0, 0.0]])))
    p.minimize({("x", 0, 0): 1.0})
    assert solve(p).objective == pytest.approx(base, rel=1e-6)


def test_export_empty_problem_is_header_only():
    text = export_sdpa(SdpProblem(name="empty"))
    lines = text.splitlines()
    assert lines[0].startswith('"') and lines[1] == "0" and lines[2] == "0"
    assert len(lines) == 4 and lines[3] == ""
    data = import_sdpa(text)
    assert data.m == 0 and data.block_sizes == []


def test_export_two_by_two_body():
    text = export_sdpa(_two_by_two())
    lines = text.splitlines()
    assert lines[1:4] == ["1", "1", "2"]
    body = lines[4:]
    assert len(body) == 4
    data = import_sdpa(text)
    np.testing.assert_allclose(data.c, [1.0])
    np.testing.assert_allclose(data.matrix(1, 1), np.eye(2))
    np.testing.assert_allclose(data.matrix(0, 1), -np.array([[0.0, 1.0], [1.0, 0.0]]))
    status, obj, _ = reference_solve(data)
    assert status == "optimal" and obj == pytest.approx(1.0, abs=1e-6)


def test_import_is_inverse_of_export():
    p = gain_problem(example_a()(0.3), "M12_relaxed")
    text = export_sdpa(p)
    again = import_sdpa(text)
    assert export_sdpa_from_data(again, text.splitlines()[0]) == text


def export_sdpa_from_data(data, comment_line):
    from reluqc.sdp import _format_sdpa

    return _format_sdpa(data, comment_line.strip('"'))


def _acceptance_problems():
    out = []
    for alpha in (0.0, 0.2, 0.4, 0.6):
        for cls in ("Mc_relaxed", "M12_relaxed"):
            out.append((f"gain {cls} alpha={alpha}", alpha, cls))
    for alpha in (0.2, 0.4):
        out.append((f"gain M123_relaxed alpha={alpha}", alpha, "M123_relaxed"))
    for cls in ("Mi1", "Mi1_plus_Mi2", "McInc_relaxed"):
        out.append((f"lip {cls}", None, cls))
    return out


@pytest.mark.parametrize("label,alpha,cls", _acceptance_problems(), ids=lambda v: str(v))
def test_reference_solver_agrees(label, alpha, cls):
    if alpha is None:
        p = lip_problem(example_b(), cls)
    else:
        G = example_a()(alpha)
        p = gain_problem(G, cls, mu_scale=gain_mu_scale(G, cls))
    ours = solve(p)
    assert ours.usable, ours.message
    data = import_sdpa(export_sdpa(p))
    status, obj, x = reference_solve(data)
    assert x is not None, status
    # the reference point must itself satisfy the exported constraints
    comp = sdpa_to_compiled(data)
    assert replay(comp, x, 1e-6)["replay_ok"], status
    assert obj == pytest.approx(ours.objective, rel=1e-5)


def test_imported_problem_solves_through_own_chain():
    p = lip_problem(example_b(), "Mi1")
    data = import_sdpa(export_sdpa(p))
    st, y, _, _, _ = solve_compiled(sdpa_to_compiled(data))
    assert st == "optimal"
    assert float(data.c @ y) == pytest.approx(solve(p).objective, rel=1e-6)


def test_solver_chain_env_override(monkeypatch):
    monkeypatch.setenv("RELUQC_SOLVERS", "cvxopt")
    opts = SolveOptions.from_env()
    assert opts.solvers == ("CVXOPT",)
    r = solve(_two_by_two(), opts)
    assert r.solver == "CVXOPT" and r.objective == pytest.approx(1.0, abs=1e-6)


def test_compile_counts():
    comp = compile_problem(_two_by_two())
    assert comp.nvar == 1 and len(comp.psd) == 1
