import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ossqp import cost
from ossqp.driver import IterationTrace, SolverConfig, run_ifqipm
from ossqp.errors import BoundViolated, EmptyTrace, NonInterior
from ossqp.nullspace import build_null_basis
from ossqp.oss import assemble_oss
from ossqp.problem import LcqoProblem, PrimalDualPoint, synthesize_instance

import oracles


def _pt(x, s):
    return PrimalDualPoint(np.asarray(x, float), np.zeros(1), np.asarray(s, float))


def _neighborhood_point(n, theta, seed):
    """Random point with ||XSe - mu e|| <= theta mu."""
    rng = np.random.default_rng(seed)
    x = np.exp(rng.standard_normal(n))
    dev = rng.standard_normal(n)
    dev -= dev.mean()
    if n > 1:
        dev *= rng.uniform(0, theta) / np.linalg.norm(dev)
    return _pt(x, (1 + dev) / x)


class TestPsiSpectrum:
    def test_central_distinct(self):
        x = np.array([2.0, 0.5, 3.0])
        spec = cost.psi_spectrum(_pt(x, 1 / x), 1.0, 0.1)
        assert np.allclose(spec.q_plus, np.maximum(x**2, 1 / x**2))
        assert np.allclose(spec.q_minus, np.minimum(x**2, 1 / x**2))

    def test_symmetric_case(self):
        spec = cost.psi_spectrum(_pt([1.0, 1.0], [1.0, 1.0]), 1.0, 0.1)
        assert np.array_equal(spec.q_plus, spec.q_minus)
        assert np.array_equal(spec.q_plus, [1.0, 1.0])

    @given(st.integers(1, 20), st.floats(0.01, 0.3), st.integers(0, 10_000))
    def test_matches_dense_eigensolve(self, n, theta, seed):
        pt = _neighborhood_point(n, theta, seed)
        mu = float(pt.x @ pt.s) / n
        spec = cost.psi_spectrum(pt, mu, theta)
        dense = np.linalg.eigvalsh(oracles.psi1(pt.x, pt.s, mu))
        closed = spec.eigenvalues()
        assert np.max(np.abs(closed - dense)) <= 1e-8 * np.max(np.abs(dense))
        # At these moderate scales every eigenvalue is resolved to relative accuracy.
        assert np.allclose(closed, dense, rtol=1e-8, atol=0)
        assert spec.q_minus.min() > 0
        assert spec.lower_holds and spec.upper_holds

    def test_off_neighborhood_point_violates_bound(self):
        pt = _pt([0.1, 3.0], [0.1, 3.0])
        mu = float(pt.x @ pt.s) / 2
        with pytest.raises(BoundViolated):
            cost.psi_spectrum(pt, mu, 0.1)
        assert not cost.psi_spectrum(pt, mu, 0.1, strict=False).lower_holds

    def test_non_interior(self):
        with pytest.raises(NonInterior):
            cost.psi_spectrum(_pt([1.0, 0.0], [1.0, 1.0]), 0.5, 0.1)


class TestKappa:
    def test_hand_example(self):
        p = LcqoProblem.from_dense([[1, 1]], [2], [0, 0])
        km, kb, kv = cost.kappa_bounds(p, build_null_basis(p), _pt([1, 1], [1, 1]), 1.0)
        assert km == pytest.approx(1.0)
        assert kb >= km

    def test_vaq_independent_of_point(self):
        p, start = synthesize_instance(3, 9, seed=2)
        basis = build_null_basis(p)
        _, _, k1 = cost.kappa_bounds(p, basis, start, 1.0)
        scaled = PrimalDualPoint(3 * start.x, start.y, start.s)
        _, _, k2 = cost.kappa_bounds(p, basis, scaled, 3.0)
        assert k1 == k2

    @pytest.mark.parametrize("seed", range(4))
    def test_against_oracles(self, seed):
        p, _ = synthesize_instance(4, 12, seed=seed)
        basis = build_null_basis(p)
        pt = _neighborhood_point(12, 0.1, seed)
        mu = float(pt.x @ pt.s) / 12
        A, Q = p.A.toarray(), p.dense_Q()
        V = oracles.dense_null_basis(A, [0, 1, 2, 3])
        km, kb, kv = cost.kappa_bounds(p, basis, pt, mu)
        assert km == pytest.approx(oracles.cond2(oracles.oss_matrix(A, Q, V, pt.x, pt.s)), rel=1e-8)
        assert kv == pytest.approx(oracles.cond2(oracles.vaq(A, Q, V)), rel=1e-8)
        omega = max(pt.x.max(), pt.s.max())
        smax = np.linalg.eigvalsh(Q)[-1]
        chain = 3 * omega**2 * (omega**2 + math.sqrt(2) * mu + 2 * mu * smax) / mu**2
        assert kb == pytest.approx(math.sqrt(chain) * kv, rel=1e-12)
        assert km <= kb

    @pytest.mark.parametrize("seed", range(3))
    def test_gram_factorization(self, seed):
        # M^T M = VAQ Psi VAQ^T, the identity behind the bound.
        p, _ = synthesize_instance(3, 10, seed=seed)
        basis = build_null_basis(p)
        pt = _neighborhood_point(10, 0.2, seed)
        mu = float(pt.x @ pt.s) / 10
        M = assemble_oss(p, basis, pt, 1.0).M
        W = cost.vaq_matrix(p, basis)
        G = W @ cost.psi_matrix(p, pt, mu) @ W.T
        assert np.allclose(M.T @ M, G, rtol=1e-12, atol=1e-12 * np.linalg.norm(G))

    @pytest.mark.parametrize("seed", range(3))
    def test_variants_are_ordered(self, seed):
        p, _ = synthesize_instance(3, 10, seed=seed)
        basis = build_null_basis(p)
        pt = _neighborhood_point(10, 0.1, seed)
        mu = float(pt.x @ pt.s) / 10
        smax = cost.sigma_max_q(p)
        eig = cost.kappa_psi_eig(p, pt, mu)
        rig = cost.kappa_psi_rigorous(pt, mu, smax)
        assert eig <= rig * (1 + 1e-9)
        km, _, kv = cost.kappa_bounds(p, basis, pt, mu)
        assert km <= math.sqrt(eig) * kv * (1 + 1e-9)

    def test_strict_violation(self, monkeypatch):
        p, start = synthesize_instance(2, 6, seed=0)
        monkeypatch.setattr(cost, "kappa_psi_chain", lambda *a: 1e-6)
        with pytest.raises(BoundViolated):
            cost.kappa_bounds(p, build_null_basis(p), start, 1.0)


class TestBlockEncoding:
    def test_unit_norms(self):
        expected = math.sqrt(2) * math.sqrt(2) * (math.sqrt(2) + math.sqrt(2) * 1 + 1)
        assert cost.alpha_be(1, 1, 1, 1, 1) == pytest.approx(expected, rel=1e-15)
        assert cost.alpha_be(1, 1, 1, 1, 1) == pytest.approx(oracles.alpha_be(1, 1, 1, 1, 1), rel=1e-15)

    def test_q_zero_factor(self):
        assert cost.alpha_be(2, 3, 0, 1, 1) / (math.hypot(2, 3) * math.sqrt(2)) == pytest.approx(math.sqrt(2) + 1)

    @given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0, 10), st.floats(0.01, 100), st.floats(0.1, 10))
    def test_linear_in_omega_and_oracle(self, fv, fa, fq, omega, fm):
        a = cost.alpha_be(fv, fa, fq, omega, fm)
        assert a == pytest.approx(oracles.alpha_be(fv, fa, fq, omega, fm), rel=1e-13)
        assert cost.alpha_be(fv, fa, fq, 2 * omega, fm) == pytest.approx(2 * a, rel=1e-13)
        assert a > 0

    def test_components_and_budget(self):
        p, start = synthesize_instance(3, 9, seed=4)
        basis = build_null_basis(p)
        oss = assemble_oss(p, basis, start, 0.9)
        be = cost.block_encoding_factor(p, basis, start, oss, eps_qlsa=0.075)
        fv = np.linalg.norm(basis.dense())
        fa = np.linalg.norm(p.A.toarray())
        fq = np.linalg.norm(p.dense_Q())
        assert be.alpha == pytest.approx(oracles.alpha_be(fv, fa, fq, 1.0, oss.frob_M), rel=1e-12)
        names = [c.name for c in be.components]
        assert names == ["M1", "M2/omega", "M3", "M4/omega"]
        va = math.hypot(fv, fa)
        K = math.sqrt(2) * va * (math.sqrt(2) * fq + math.sqrt(2) + 1) ** 2
        e1 = 0.075 / be.kappa_M**3 / (2 * K)
        e2 = e1 / (2 * va)
        got = {c.name: c for c in be.components}
        assert got["M1"].alpha == pytest.approx(va) and got["M1"].eps == pytest.approx(e1)
        assert got["M2/omega"].eps == pytest.approx(e2)
        assert got["M3"].alpha == pytest.approx(fq + 1) and got["M3"].eps == pytest.approx((fq + 1) * e2)
        assert got["M4/omega"].eps == pytest.approx(math.sqrt(2) * e2)
        assert be.kappa_M == pytest.approx(np.linalg.cond(oss.M))


def _trace(k=0, mu=1.0, omega=1.0, frob_M=1.0, kappa=1.0):
    return IterationTrace(
        k=k, mu=mu, gap=4 * mu, omega=omega, frob_M=frob_M, eps_oss=0.0, residual_norm=0.0,
        rc_norm=1.0, neighborhood_distance=0.0, kappa_M=kappa, wall_time=0.0,
    )


class TestReport:
    def _problem4(self):
        return LcqoProblem.from_dense([[1, 0, 1, 1], [0, 1, 1, -1]], [1, 1], np.zeros(4))

    def test_single_iteration_units(self):
        rep = cost.cost_report(self._problem4(), [_trace()])
        row = rep.rows[0]
        assert row.t_qlsa_units == 1.0 and row.t_qta_units == 4.0
        assert row.iter_cost_units == 20.0
        assert rep.total_units == 20.0 and rep.iterations == 1

    def test_empty(self):
        with pytest.raises(EmptyTrace):
            cost.cost_report(self._problem4(), [])

    def test_missing_kappa_uses_bound(self):
        rep = cost.cost_report(self._problem4(), [_trace(kappa=None)])
        assert rep.rows[0].kappa_M == rep.rows[0].kappa_bound
        assert not rep.rows[0].kappa_measured
        assert "not traced" in rep.render_table()

    def test_invariant_violation(self):
        with pytest.raises(BoundViolated):
            cost.cost_report(self._problem4(), [_trace(omega=3.0, frob_M=1.0)])
        rep = cost.cost_report(self._problem4(), [_trace(omega=3.0, frob_M=1.0)], strict=False)
        assert rep.violations()

    def test_solver_run(self):
        p, start = synthesize_instance(3, 9, seed=1)
        res = run_ifqipm(p, start, SolverConfig(trace_kappa=True))
        rep = cost.cost_report(p, res.traces)
        assert rep.violations() == []
        total = 0.0
        for t in res.traces:
            t_qlsa = t.kappa_M * t.omega / t.frob_M
            total += 9 * t_qlsa + 81
        assert rep.total_units == total
        omega_bar = max(t.omega for t in res.traces)
        eps = min(t.mu for t in res.traces)
        kv = oracles.cond2(oracles.vaq(p.A.toarray(), p.dense_Q(), build_null_basis(p).dense()))
        bound = 9 * (omega_bar**2 / eps + np.linalg.eigvalsh(p.dense_Q())[-1]) * kv + 81
        assert rep.theorem1_bound_units == pytest.approx(bound, rel=1e-9)
        assert rep.c_observed <= rep.c_theory
        d = json.loads(rep.to_json())
        assert set(d) == {"rows", "totals", "instance", "polylog"}
        assert set(d["rows"][0]) >= {
            "omega", "frob_M", "kappa_M", "kappa_bound", "alpha_BE",
            "t_qlsa_units", "t_qta_units", "iter_cost_units",
        }
        assert set(d["instance"]) >= {"frob_V", "frob_A", "frob_Q", "sigma_max_Q", "kappa_VAQ"}
        assert d["totals"]["iterations"] == res.iterations
        lines = rep.render_table().splitlines()
        assert len(lines) > res.iterations and len({len(l) for l in lines[2 : 2 + res.iterations]}) == 1
