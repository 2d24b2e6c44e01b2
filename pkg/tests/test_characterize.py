import numpy as np
import pytest

from psido import grid as G, symbols as Y, operators as P, characterize as C


def rec_grid():
    return G.Grid(1, 128, np.pi)


def wsum(x):
    return Y.weierstrass(0.5, 4)(x)


class TestSmoothingFamily:
    def test_inert_member_is_identity_like(self):
        g = G.Grid(1, 64, 8 * np.pi)
        fam = C.SmoothingFamily(P.identity(g), schedule=(0.05,))
        u = G.gaussian(g)
        Te = C.smooth_member(fam, 0.05)
        err = G.lp_norm(G.GridFunction(g, Te(u).values - u.values), 2)
        assert err / G.lp_norm(u, 2) <= 1e-6

    def test_convergence_trace_monotone(self):
        # criterion-9 setup: T = Lambda^1, Gaussian input
        g = G.Grid(1, 64, 8 * np.pi)
        fam = C.SmoothingFamily(P.order_reducer(g, 1.0))
        rows = fam.convergence_trace(G.gaussian(g))
        rel = [r["relative"] for r in rows]
        assert all(b < a for a, b in zip(rel, rel[1:]))
        assert rel[-1] <= 1e-4

    def test_commutator_uniformity(self):
        # sup over the schedule of ||ad(-ix) T_eps|| stays within
        # 2 ||ad(-ix) T|| + 1
        g = G.Grid(1, 32, 2 * np.pi)
        T = P.quantize(Y.builtin("sin_coeff", m=0.0), g)
        base, _ = P.op_norm(P.ad_x(T), taper=True)
        fam = C.SmoothingFamily(T)
        worst = max(P.op_norm(P.ad_x(fam.member(e)), taper=True)[0]
                    for e in fam.schedule)
        assert worst <= 2 * base + 1

    def test_schedule_enforced(self):
        fam = C.SmoothingFamily(P.identity(G.Grid(1, 32, np.pi)))
        with pytest.raises(ValueError):
            C.smooth_member(fam, 0.123)


class TestProbeDoubleSymbol:
    def test_multiplication_probe(self):
        # T = mult by m(x): p(x, xi, y) = m(x) g(x - y) exactly (inert eps);
        # the window translate is circular, so the oracle distance is too
        g = rec_grid()
        mvals = 0.7 + 0.3 * np.cos(g.axis_nodes())
        T = P.multiplication(g, mvals)
        ds = C.probe_double_symbol(T)
        x = g.axis_nodes()
        d = x[:, None] - x[None, ds._y_idx]
        d = (d + g.half_length) % (2 * g.half_length) - g.half_length
        target = mvals[:, None] * np.exp(-d ** 2 / 2)
        err = np.max(np.abs(ds._table[:, g.n // 2, :] - target))
        assert err <= 1e-8

    def test_multiplier_probe_is_smoothed_symbol(self):
        # T = m(D): p(x, xi, y) = int e^{i(x-y)z} m(xi+z) ghat(z) dqz;
        # oracle by direct quadrature with the Gaussian window transform
        g = rec_grid()
        mfun = lambda xi: (1 + xi ** 2) ** -0.5
        T = P.multiplier(g, mfun)
        ds = C.probe_double_symbol(T)
        xi = g.axis_freqs()
        z = np.linspace(-20, 20, 4001)
        ghat = np.sqrt(2 * np.pi) * np.exp(-z ** 2 / 2)
        k0 = g.n // 2 + 4
        x0 = g.n // 2
        y0 = list(ds._y_idx).index(g.n // 2)
        oracle = np.trapezoid(mfun(xi[k0] + z) * ghat, z) / (2 * np.pi)
        # the probe sums the frequency lattice at spacing dxi = 1; against
        # the continuum convolution that leaves an e^{-2 pi}-type gap
        assert ds._table[x0, k0, y0] == pytest.approx(oracle, abs=1e-4)

    def test_zero_operator(self):
        g = rec_grid()
        Z = P.lincomb([(0.0, P.identity(g))])
        ds = C.probe_double_symbol(Z)
        assert np.max(np.abs(ds._table)) == 0.0

    def test_window_conditions_enforced(self):
        g = rec_grid()
        bad = G.gaussian(g, center=0.5)  # g(0) != 1 and not even
        with pytest.raises(ValueError):
            C.probe_double_symbol(P.identity(g), window=bad)


class TestReduce:
    def test_right_coefficient_moves_left(self):
        g = rec_grid()
        mfun = lambda t: 0.8 + 0.3 * np.cos(t) + 0.1 * np.sin(2 * t)
        a = Y.DoubleSymbol(lambda x, xi, xp: mfun(xp) + 0j * (x + xi))
        r = C.reduce_double_symbol(a, g)
        target = mfun(g.axis_nodes())[:, None]
        assert np.max(np.abs(r._table - target)) <= 1e-5

    def test_multiplier_passes_through(self):
        g = rec_grid()
        qfun = lambda xi: (1 + xi ** 2) ** -1.0
        a = Y.DoubleSymbol(lambda x, xi, xp: qfun(xi) + 0j * (x + xp))
        r = C.reduce_double_symbol(a, g)
        assert np.max(np.abs(r._table - qfun(g.axis_freqs())[None, :])) <= 1e-6

    def test_shift_identity(self):
        # a = e^{i x'} <xi>^-2 reduces to e^{i x} <xi+1>^-2, value 1/2 at 0
        g = rec_grid()
        a = Y.DoubleSymbol(
            lambda x, xi, xp: np.exp(1j * xp) * (1 + xi ** 2) ** -1.0)
        r = C.reduce_double_symbol(a, g)
        assert r._table[g.n // 2, g.n // 2] == pytest.approx(0.5, abs=1e-4)
        x = g.axis_nodes()
        xi = g.axis_freqs()
        target = np.exp(1j * x)[:, None] * (1 + (xi[None, :] + 1) ** 2) ** -1.0
        inner = np.abs(xi + 1) <= g.n // 4 * g.freq_spacing
        assert np.max(np.abs(r._table - target)[:, inner]) <= 1e-4

    def test_budget_bookkeeping(self):
        g = rec_grid()
        a = Y.DoubleSymbol(lambda x, xi, xp: 1.0 + 0j * (x + xi + xp),
                           N_budget=5)
        r = C.reduce_double_symbol(a, g)
        assert r.M == 3  # N - (n + 1)

    def test_chi_damped_values_converge(self):
        g = rec_grid()
        a = Y.DoubleSymbol(
            lambda x, xi, xp: np.exp(1j * xp) * (1 + xi ** 2) ** -1.0)
        ref = C.reduce_double_symbol(a, g)._table[g.n // 2, g.n // 2]
        diffs = []
        for eps in (0.4, 0.2, 0.1, 0.05):
            v = C.reduce_double_symbol(a, g, chi_eps=eps)._table[g.n // 2, g.n // 2]
            diffs.append(abs(v - ref))
        assert all(b < a for a, b in zip(diffs, diffs[1:]))
        assert diffs[-1] <= 1e-5

    def test_operator_level_identity(self):
        # quantize_double(a) and quantize(reduce(a)) agree on probes
        g = G.Grid(1, 64, np.pi)
        probes = [G.gaussian(g, width=0.6),
                  G.gaussian(g, width=0.9, xi0=3.0),
                  G.gaussian(g, width=0.5, center=0.7, xi0=-2.0)]
        mfun = lambda t: 0.8 + 0.3 * np.cos(t)
        qfun = lambda xi: (1 + xi ** 2) ** -1.0
        cases = [
            Y.DoubleSymbol(lambda x, xi, xp: mfun(xp) + 0j * (x + xi)),
            Y.DoubleSymbol(lambda x, xi, xp: qfun(xi) + 0j * (x + xp)),
            Y.DoubleSymbol(lambda x, xi, xp: np.exp(1j * xp) * qfun(xi)),
            Y.DoubleSymbol(lambda x, xi, xp: np.sin(x) * qfun(xi) + 0j * xp),
        ]
        for a in cases:
            Td = P.quantize_double(a, g)
            Tr = P.quantize(C.reduce_double_symbol(a, g), g)
            assert P.operator_distance(Td, Tr, probes) <= 1e-5


class TestRecovery:
    def test_order_reducer_recovery(self):
        g = rec_grid()
        rec = C.recover_symbol(P.order_reducer(g, 1.0), m=1.0,
                               classify={"tau": 0.5, "rho": 1, "M": 2})
        xi = g.axis_freqs()
        target = np.broadcast_to(np.sqrt(1 + xi ** 2)[None, :], (g.n, g.n))
        rel = np.max(np.abs(rec.symbol._table - target)) / np.max(np.abs(target))
        assert rel <= 1e-4
        assert rec.replay_max <= 1e-4
        assert rec.verdict

    def test_weierstrass_multiplication_recovery(self):
        g = rec_grid()
        T = P.multiplication(g, wsum(g.axis_nodes()))
        rec = C.recover_symbol(T, m=0.0, classify={"tau": 0.5, "rho": 1, "M": 2})
        target = np.broadcast_to(wsum(g.axis_nodes())[:, None], (g.n, g.n))
        assert np.max(np.abs(rec.symbol._table - target)) <= 1e-3
        assert rec.verdict

    def test_nonsmooth_first_order_recovery(self):
        g = rec_grid()
        p = Y.builtin("weierstrass_times_bracket", tau=0.5, m=1, J=4)
        rec = C.recover_symbol(P.quantize(p, g), m=1.0,
                               classify={"tau": 0.5, "rho": 1, "M": 2})
        target = p.table(g)
        rel = np.max(np.abs(rec.symbol._table - target)) / np.max(np.abs(target))
        assert rel <= 1e-2
        assert rec.replay_max <= 1e-2
        assert rec.verdict

    def test_replay_soundness_smooth_builtins(self):
        g = rec_grid()
        for p in (Y.builtin("bracket_power", m=1),
                  Y.builtin("sin_coeff", m=1),
                  Y.builtin("mode", k=1)):
            rec = C.recover_symbol(P.quantize(p, g), m=p.m)
            assert rec.replay_max <= 5e-3, p.name

    def test_eps_robustness_on_inert_grid(self):
        # both cutoff scales sit below the inert threshold on this grid, so
        # the two recoveries must coincide (the deterministic stand-in for
        # the compactness step)
        g = G.Grid(1, 32, 2 * np.pi)
        p = Y.builtin("weierstrass_times_bracket", tau=0.5, m=1, J=2)
        T = P.quantize(p, g)
        ra = C.recover_symbol(T, m=1.0, eps=0.05)
        rb = C.recover_symbol(T, m=1.0, eps=0.025)
        assert np.max(np.abs(ra.symbol._table - rb.symbol._table)) <= 2e-3

    def test_reflection_outside_class(self):
        # on the lattice the reflection u(x) -> u(-x) is op(e^{-2 i x xi}),
        # so recovery replays it fine while the class verdict rejects it
        g = rec_grid()
        R = P.LinearOperator(g, lambda v: np.roll(v[::-1], 1),
                             name="reflection")
        rec = C.recover_symbol(R, m=0.0, classify={"tau": 0.5, "rho": 1,
                                                   "M": 2})
        assert rec.replay_max <= 1e-2
        assert not rec.class_table.verdict and not rec.verdict

    def test_replay_tolerance_flag(self):
        # the failed flag fires when the replay diagnostic exceeds the
        # requested tolerance
        g = rec_grid()
        p = Y.builtin("weierstrass_times_bracket", tau=0.5, m=1, J=4)
        rec = C.recover_symbol(P.quantize(p, g), m=1.0, tolerance=1e-12)
        assert rec.failed and not rec.verdict

    def test_recovery_consistency_all_builtins(self):
        g = rec_grid()
        for p in (Y.builtin("bracket_power", m=1),
                  Y.builtin("sin_coeff", m=1),
                  Y.builtin("mode", k=1),
                  Y.builtin("weierstrass_times_bracket", tau=0.5, m=1, J=4)):
            rec = C.recover_symbol(P.quantize(p, g), m=p.m)
            target = p.table(g)
            rel = (np.max(np.abs(rec.symbol._table - target))
                   / np.max(np.abs(target)))
            assert rel <= 1e-2, p.name


class TestComposition:
    def test_conditions_report(self):
        p1 = Y.builtin("bracket_power", m=1.0)
        p2 = Y.builtin("bracket_power", m=-1.0)
        rep = C.composition_conditions(p1, p2, m_tilde=1, M=3)
        assert rep["m"] == 0.0 and rep["rho"] == 1
        assert rep["all_hold"]

    def test_multiplier_cancellation(self):
        g = rec_grid()
        rec = C.compose_and_classify(Y.builtin("bracket_power", m=1.0),
                                     Y.builtin("bracket_power", m=-1.0), g)
        assert np.max(np.abs(rec.symbol._table - 1.0)) <= 1e-6

    def test_left_ordered_product(self):
        # p1 = a(x) multiplication, p2 = q(D): symbol a(x) q(xi) exactly
        g = rec_grid()
        p1 = Y.builtin("mode", k=1)
        p2 = Y.builtin("bracket_power", m=-2.0)
        rec = C.compose_and_classify(p1, p2, g)
        x = g.axis_nodes()
        xi = g.axis_freqs()
        target = np.exp(1j * x)[:, None] * (1 + xi ** 2)[None, :] ** -1.0
        assert np.max(np.abs(rec.symbol._table - target)) <= 1e-4

    def test_shift_composition(self):
        # q(D) then e^{ix}: recovered symbol e^{ix} <xi+1>^-2
        g = rec_grid()
        rec = C.compose_and_classify(Y.builtin("bracket_power", m=-2.0),
                                     Y.builtin("mode", k=1), g)
        x = g.axis_nodes()
        xi = g.axis_freqs()
        target = np.exp(1j * x)[:, None] * (1 + (xi[None, :] + 1) ** 2) ** -1.0
        assert np.max(np.abs(rec.symbol._table - target)) <= 1e-3

    def test_condition_violation_warns_but_runs(self):
        g = G.Grid(1, 64, np.pi)
        p1 = Y.builtin("weierstrass_times_bracket", tau=0.5, m=1, J=3)
        p2 = Y.builtin("bracket_power", m=-1.0)
        rec = C.compose_and_classify(p1, p2, g, m_tilde=2, M=3)
        conds = rec.diagnostics["composition"]["conditions"]
        assert not conds["ii_m_tilde_window"]  # m~ exceeds p1's budget
        assert rec.symbol._table.shape == (g.n, g.n)


class TestBlowup:
    def test_rough_coefficient_grows(self):
        rep = C.blowup_probe("weierstrass", 0.5)
        assert all(f >= 1.3 for f in rep["growth_factors"])
        assert rep["flag_no_continuous_coefficient"]

    def test_smooth_control_converges(self):
        rep = C.blowup_probe("sin", 0.5)
        assert all(f <= 1.05 for f in rep["growth_factors"])
        assert not rep["flag_no_continuous_coefficient"]

    def test_constant_coefficient_commutes(self):
        g = G.Grid(1, 32, np.pi)
        T = P.multiplication(g, np.full(32, 2.0))
        u = G.gaussian(g)
        assert np.max(np.abs(P.ad_D(T)(u).values)) <= 1e-12
