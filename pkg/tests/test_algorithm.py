"""Tests for the compressed update loop, schedules, and run traces."""
import numpy as np
import pytest

from hedzoc.algorithm import (
    AgentStates,
    InvariantViolation,
    init_states,
    make_schedule,
    neighbor_sum,
    neighbor_views,
    run,
    run_uncompressed,
    step,
)
from hedzoc.compressors import params_for, parse_compressor
from hedzoc.graph import complete, erdos_renyi, laplacian, mixing_matrices, ring
from hedzoc.problems import ProblemFamily, QuadraticAgent, make_family
from hedzoc.rng import agent_streams


def small_family(n=4, p=3, seed=0, noise=0.2):
    return make_family("quadratic", n=n, p=p, rho_h=0.6, noise_sigma=noise, seed=seed)


def default_schedule(n, p, T, **params):
    params.setdefault("rho2", 1.0)
    return make_schedule("nonconvex", n, p, T, params=params)


def positive_orthant_family(n: int, p: int, seed: int) -> ProblemFamily:
    """Centers in [1, 2] so iterates started there stay in one binade."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    agents = []
    for _ in range(n):
        eigs = rng.uniform(0.5, 1.5, size=p)
        q, r = np.linalg.qr(rng.standard_normal((p, p)))
        q *= np.sign(np.diag(r))
        a = (q * eigs) @ q.T
        a = (a + a.T) / 2.0
        c = rng.uniform(1.0, 2.0, size=p)
        agents.append(QuadraticAgent(A=a, c=c, d=0.0, noise_sigma=0.1, ell=float(eigs.max())))
    return ProblemFamily(
        kind="quadratic", agents=agents, p=p, rho_h=1.0,
        noise_sigma=0.1, rho_nc=0.0, seed=seed,
    )


class TestSchedule:
    def test_fixed_step_value(self):
        s = make_schedule("nonconvex", 10, 50, 10_000, params={"eps1": 4.0, "eps3": 0.5})
        assert s.alpha(0) == 0.00223606797749979
        assert s.alpha(9_999) == s.alpha(0)
        assert s.beta(3) == 4.0 * s.gamma(3)
        assert s.alpha(5) * s.gamma(5) == pytest.approx(s.eps2, rel=1e-15)

    def test_exploration_radius_value(self):
        s = make_schedule("nonconvex", 10, 50, 10_000, params={"eps1": 4.0, "eps3": 0.5})
        assert s.mu(0, 0) == 0.0043167001068522524
        assert s.mu(7, 0) == s.mu(0, 0)

    def test_horizon_power_value(self):
        s = make_schedule("pl_unknown", 10, 50, 9_999, params={"eps1": 4.0, "theta": 0.6})
        assert s.alpha(0) == 0.003981071705534973
        assert s.alpha(123) == s.alpha(0)

    def test_harmonic_decay_values(self):
        s = make_schedule(
            "pl_known", 10, 50, 100,
            params={"eps1": 4.0, "eps2": 0.5, "eps4": 0.25, "m": 100, "nu": 3.0},
        )
        assert s.gamma(0) == 25.0
        assert s.alpha(0) == 0.02
        assert s.beta(0) == 100.0
        assert s.gamma(7) == 26.75
        assert s.vartheta == 3.0

    def test_default_eps1_needs_rho2(self):
        with pytest.raises(ValueError, match="rho2"):
            make_schedule("nonconvex", 4, 3, 10)

    def test_default_eps1_value(self):
        s = make_schedule("nonconvex", 4, 3, 10, params={"rho2": 2.0})
        assert s.eps1 == 2.0 * 3.25

    def test_unknown_parameter_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            make_schedule("nonconvex", 4, 3, 10, params={"rho2": 1.0, "alpha": 0.1})

    def test_omega_above_mixing_cap_rejected(self):
        with pytest.raises(ValueError, match="omega"):
            make_schedule("nonconvex", 4, 3, 10, params={"rho2": 1.0, "omega": 0.5}, r=4.0)

    def test_omega_defaults_to_mixing_cap(self):
        s = make_schedule("nonconvex", 4, 3, 10, params={"rho2": 1.0}, r=4.0625)
        assert s.omega == 1.0 / 4.0625

    def test_theta_interval_enforced(self):
        for theta in (0.5, 1.0, 0.2):
            with pytest.raises(ValueError, match="theta"):
                make_schedule("pl_unknown", 4, 3, 10, params={"rho2": 1.0, "theta": theta})

    def test_decay_mode_coupling_constraint(self):
        with pytest.raises(ValueError, match="eps4"):
            make_schedule(
                "pl_known", 4, 3, 10,
                params={"rho2": 1.0, "eps2": 0.5, "eps4": 0.5, "nu": 3.0},
            )
        with pytest.raises(ValueError, match="nu"):
            make_schedule("pl_known", 4, 3, 10, params={"rho2": 1.0, "eps4": 0.01})

    def test_undersized_horizon_warns(self):
        with pytest.warns(UserWarning, match="floor"):
            make_schedule("nonconvex", 4, 3, 10, params={"rho2": 1.0}, t_floor=1e6)


class TestStatesAndViews:
    def test_init_states_zero_default(self):
        st = init_states(3, 4)
        assert np.array_equal(st.X, np.zeros((3, 4)))
        assert np.array_equal(st.V, np.zeros((3, 4)))

    def test_init_states_broadcasts_vector(self):
        st = init_states(3, 2, x0=np.array([1.0, -1.0]))
        assert np.array_equal(st.X, np.tile([1.0, -1.0], (3, 1)))

    def test_init_states_shape_check(self):
        with pytest.raises(ValueError, match="shape"):
            init_states(3, 2, x0=np.zeros((2, 3)))

    def test_neighbor_sum_matches_dense_product(self):
        g = erdos_renyi(8, 0.5, seed=4)
        L = laplacian(g)
        views = neighbor_views(L)
        rows = np.random.default_rng(0).standard_normal((8, 5))
        assert np.abs(neighbor_sum(views, rows) - L @ rows).max() < 1e-12

    def test_views_cover_only_neighborhoods(self):
        g = ring(6)
        views = neighbor_views(laplacian(g))
        assert list(views[0].indices) == [0, 1, 5]


class TestRunTraceSemantics:
    def test_zero_horizon_single_record(self):
        fam = small_family()
        tr = run(fam, complete(4), params_for(parse_compressor("identity"), 3),
                 default_schedule(4, 3, 1), T=0, seed=0)
        assert len(tr.k) == 1
        assert tr.k[0] == 0 and tr.bits_cum[0] == 0 and tr.fn_evals_cum[0] == 0

    def test_counter_semantics(self):
        fam = small_family()
        comp = params_for(parse_compressor("topk:1"), 3)
        tr = run(fam, complete(4), comp, default_schedule(4, 3, 3), seed=0)
        assert list(tr.k) == [0, 1, 2, 3]
        per_round = 4 * comp.bits_per_vector
        assert list(tr.bits_cum) == [per_round, 2 * per_round, 3 * per_round, 3 * per_round]
        assert list(tr.fn_evals_cum) == [8, 16, 24, 24]

    def test_per_edge_bits_scale_with_degree(self):
        fam = small_family(n=5)
        comp = params_for(parse_compressor("topk:1"), 3)
        broadcast = run(fam, ring(5), comp, default_schedule(5, 3, 2), seed=0)
        per_edge = run(fam, ring(5), comp, default_schedule(5, 3, 2), seed=0, per_edge_bits=True)
        assert per_edge.bits_cum[-1] == 2 * broadcast.bits_cum[-1]

    def test_deterministic_under_seed(self):
        fam = small_family()
        comp = params_for(parse_compressor("quant:3"), 3)
        a = run(fam, ring(4), comp, default_schedule(4, 3, 40), seed=5)
        b = run(fam, ring(4), comp, default_schedule(4, 3, 40), seed=5)
        assert np.array_equal(a.x_final, b.x_final)
        assert np.array_equal(a.grad_norm_sq, b.grad_norm_sq)

    def test_seed_changes_trajectory(self):
        fam = small_family()
        comp = params_for(parse_compressor("quant:3"), 3)
        a = run(fam, ring(4), comp, default_schedule(4, 3, 40), seed=5)
        b = run(fam, ring(4), comp, default_schedule(4, 3, 40), seed=6)
        assert not np.array_equal(a.x_final, b.x_final)

    def test_lyapunov_recording(self):
        fam = small_family()
        comp = params_for(parse_compressor("identity"), 3)
        tr = run(fam, ring(4), comp, default_schedule(4, 3, 10), seed=1, record_lyapunov=True)
        assert tr.has_lyapunov
        assert tr.e1.shape == tr.k.shape
        assert np.all(tr.e1 >= -1e-12)
        assert np.all(tr.e5 >= -1e-12)
        partial = tr.lyapunov_partial()
        assert np.allclose(partial, tr.e1 + tr.e2 + tr.e3 + tr.e5, atol=0.0)

    def test_divergence_detected_and_reported(self):
        fam = small_family()
        comp = params_for(parse_compressor("identity"), 3)
        sched = default_schedule(4, 3, 500, eps3=1e9)
        tr = run(fam, ring(4), comp, sched, seed=0)
        assert tr.diverged
        assert "iteration" in tr.divergence_info
        assert len(tr.k) < 501

    def test_graph_family_size_mismatch_rejected(self):
        fam = small_family(n=4)
        comp = params_for(parse_compressor("identity"), 3)
        with pytest.raises(ValueError, match="agents"):
            run(fam, ring(5), comp, default_schedule(5, 3, 5), seed=0)


class TestInvariants:
    @pytest.mark.parametrize("spec", ["identity", "quant:4", "topk:1", "randk:2", "normsign"])
    def test_structural_identities_hold(self, spec):
        fam = small_family(n=5, p=4)
        comp = params_for(parse_compressor(spec), 4)
        sched = make_schedule("nonconvex", 5, 4, 60, params={"rho2": 1.0}, r=comp.r)
        tr = run(fam, erdos_renyi(5, 0.7, seed=2), comp, sched, seed=3, check_invariants=True)
        assert not tr.diverged
        assert tr.invariant_maxima["dual_sum"] <= 1e-9
        assert tr.invariant_maxima["accumulator"] <= 1e-9
        assert tr.invariant_maxima["mean_dynamics"] <= 1e-12

    def test_violation_type_is_assertion(self):
        assert issubclass(InvariantViolation, AssertionError)

    def test_reference_tracks_iterate_with_identity(self):
        """omega = 1 and lossless payloads make the reference equal the
        previous iterate, so the compression error is one step of drift."""
        fam = small_family(n=4, p=3)
        comp = params_for(parse_compressor("identity"), 3)
        views = neighbor_views(laplacian(complete(4)))
        sched = default_schedule(4, 3, 10)
        states = init_states(4, 3, x0=np.ones((4, 3)))
        xi = agent_streams(0, 4, "xi")
        zeta = agent_streams(0, 4, "zeta")
        dither = agent_streams(0, 4, "dither")
        x_before = states.X.copy()
        step(states, views, comp, fam, sched, 0, xi, zeta, dither)
        assert np.array_equal(states.Y, x_before)


class TestUncompressedReduction:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_identity_run_is_bit_identical(self, seed):
        fam = positive_orthant_family(5, 4, seed)
        g = erdos_renyi(5, 0.8, seed=seed + 100)
        comp = params_for(parse_compressor("identity"), 4)
        sched = make_schedule(
            "nonconvex", 5, 4, 50, params={"rho2": 1.0, "eps3": 0.2}, r=comp.r
        )
        rng = np.random.default_rng(np.random.SeedSequence((seed, 77)))
        x0 = rng.uniform(1.0, 2.0, size=(5, 4))
        a = run(fam, g, comp, sched, seed=seed, x0=x0)
        b = run_uncompressed(fam, g, sched, seed=seed, x0=x0)
        assert np.array_equal(a.x_final, b.x_final)
        assert np.array_equal(a.grad_norm_sq, b.grad_norm_sq)
        assert np.array_equal(a.consensus_err, b.consensus_err)
        assert a.bits_cum[-1] == b.bits_cum[-1]

    def test_uncompressed_counts_full_vectors(self):
        fam = small_family(n=4, p=3)
        sched = default_schedule(4, 3, 2)
        tr = run_uncompressed(fam, complete(4), sched, seed=0)
        assert tr.bits_cum[0] == 4 * 3 * 64
