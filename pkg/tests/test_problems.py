"""Tests for the synthetic problem families and their reference solutions."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hedzoc.problems import (
    MultiplicativeNoiseAgent,
    ProblemFamily,
    QuadraticAgent,
    assumption_check,
    family_from_text,
    family_to_text,
    heterogeneity_dispersion,
    make_family,
    set_global_reference,
)
from hedzoc.rng import stream


def two_agent_line() -> ProblemFamily:
    """Two scalar quadratics 0.5 (x - c)² with centers 0 and 2."""
    agents = [
        QuadraticAgent(A=np.array([[1.0]]), c=np.array([0.0]), d=0.0, noise_sigma=0.0, ell=1.0),
        QuadraticAgent(A=np.array([[1.0]]), c=np.array([2.0]), d=0.0, noise_sigma=0.0, ell=1.0),
    ]
    return ProblemFamily(
        kind="quadratic", agents=agents, p=1, rho_h=1.0,
        noise_sigma=0.0, rho_nc=0.0, seed=0,
    )


class TestReference:
    def test_two_agent_closed_form(self):
        fam = two_agent_line()
        set_global_reference(fam)
        assert fam.x_star == pytest.approx(1.0, abs=1e-12)
        assert fam.f_star == pytest.approx(0.5, abs=1e-12)
        assert fam.nu == pytest.approx(1.0, abs=1e-12)
        assert fam.reference_exact

    def test_gradient_vanishes_at_reference(self):
        fam = make_family("quadratic", n=5, p=7, rho_h=0.8, seed=4)
        g = fam.grad(fam.x_star)
        assert float(g @ g) < 1e-20

    def test_reference_dominates_random_points(self):
        fam = make_family("quadratic", n=4, p=5, rho_h=0.6, seed=9)
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = fam.x_star + rng.standard_normal(5)
            assert fam.f(x) >= fam.f_star - 1e-12

    def test_ripple_reference_within_exhaustive_dim(self):
        fam = make_family("nonconvex", n=3, p=2, rho_h=0.5, rho_nc=0.3, seed=1)
        assert not fam.reference_exact
        rng = np.random.default_rng(1)
        for _ in range(50):
            x = rng.standard_normal(2) * 2.0
            assert fam.f(x) >= fam.f_star - 1e-9

    def test_ripple_reference_warns_at_large_dim(self):
        fam = make_family("nonconvex", n=3, p=12, rho_h=0.5, rho_nc=0.2, seed=2,
                          compute_reference=False)
        with pytest.warns(UserWarning, match="approximate"):
            set_global_reference(fam, starts=4)

    def test_heterogeneity_dispersion_two_agent(self):
        fam = two_agent_line()
        set_global_reference(fam)
        assert heterogeneity_dispersion(fam) == pytest.approx(1.0, abs=1e-12)


class TestMakeFamily:
    def test_deterministic_in_seed(self):
        a = make_family("quadratic", n=4, p=6, rho_h=0.5, seed=3)
        b = make_family("quadratic", n=4, p=6, rho_h=0.5, seed=3)
        for ag_a, ag_b in zip(a.agents, b.agents):
            assert np.array_equal(ag_a.A, ag_b.A)
            assert np.array_equal(ag_a.c, ag_b.c)
            assert ag_a.d == ag_b.d

    def test_zero_heterogeneity_collapses_centers(self):
        fam = make_family("quadratic", n=5, p=4, rho_h=0.0, seed=7)
        first = fam.agents[0].c
        for ag in fam.agents[1:]:
            assert np.allclose(ag.c, first, atol=1e-15)

    def test_heterogeneity_scales_dispersion(self):
        lo = make_family("quadratic", n=6, p=5, rho_h=0.1, seed=11)
        hi = make_family("quadratic", n=6, p=5, rho_h=1.0, seed=11)
        assert heterogeneity_dispersion(hi) > heterogeneity_dispersion(lo)

    def test_spectrum_range_bounds_eigenvalues(self):
        fam = make_family("quadratic", n=3, p=8, rho_h=0.5, spectrum_range=(0.4, 1.6), seed=5)
        for ag in fam.agents:
            eigs = np.linalg.eigvalsh(ag.A)
            assert eigs.min() >= 0.4 - 1e-12
            assert eigs.max() <= 1.6 + 1e-12
            assert ag.ell == pytest.approx(eigs.max(), rel=1e-12)

    def test_family_aggregates(self):
        fam = make_family("quadratic", n=4, p=3, rho_h=0.5, seed=8)
        x = np.array([0.1, -0.2, 0.3])
        want_f = sum(ag.f(x) for ag in fam.agents) / 4.0
        assert fam.f(x) == pytest.approx(want_f, rel=1e-15)
        stack = fam.grad_stack(x)
        assert stack.shape == (4, 3)
        assert np.allclose(stack.mean(axis=0), fam.grad(x), atol=1e-15)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError, match="kind"):
            make_family("cubic", n=3, p=2, rho_h=0.5)
        with pytest.raises(ValueError, match="agents"):
            make_family("quadratic", n=1, p=2, rho_h=0.5)
        with pytest.raises(ValueError, match="heterogeneity"):
            make_family("quadratic", n=3, p=2, rho_h=1.5)
        with pytest.raises(ValueError, match="spectrum"):
            make_family("quadratic", n=3, p=2, rho_h=0.5, spectrum_range=(2.0, 1.0))


class TestAgents:
    def test_quadratic_noise_free_xi_is_zero(self):
        fam = make_family("quadratic", n=3, p=4, rho_h=0.5, seed=0)
        xi = fam.agents[0].sample_xi(stream(0, 0, "xi"))
        assert np.array_equal(xi, np.zeros(4))

    def test_additive_noise_enters_value_linearly(self):
        ag = QuadraticAgent(A=np.eye(2), c=np.zeros(2), d=0.0, noise_sigma=0.5, ell=1.0)
        x = np.array([1.0, 2.0])
        xi = np.array([0.3, -0.1])
        assert ag.value(x, xi) == pytest.approx(ag.f(x) + float(xi @ x), rel=1e-15)

    def test_multiplicative_noise_bounded(self):
        fam = make_family("mulnoise", n=3, p=2, rho_h=0.5, eta=0.4, seed=6)
        ag = fam.agents[0]
        rng = stream(1, 0, "xi")
        x = np.array([0.5, -1.0])
        for _ in range(100):
            u = ag.sample_xi(rng)
            assert -1.0 <= u <= 1.0
            assert abs(ag.value(x, u) - ag.f(x)) <= 0.4 * abs(ag.f(x)) + 1e-15
        assert ag.sigma1 == 0.0
        assert ag.eta1 == 0.4
        assert fam.eta1 == 0.4

    def test_ripple_gradient_matches_finite_differences(self):
        fam = make_family("nonconvex", n=2, p=3, rho_h=0.5, rho_nc=0.4, seed=3,
                          compute_reference=False)
        ag = fam.agents[0]
        x = np.array([0.7, -0.3, 1.1])
        g = ag.true_gradient(x)
        h = 1e-6
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            fd = (ag.f(x + e) - ag.f(x - e)) / (2.0 * h)
            assert g[j] == pytest.approx(fd, abs=1e-6)

    def test_ripple_raises_smoothness_constant(self):
        plain = make_family("quadratic", n=3, p=4, rho_h=0.5, seed=2, compute_reference=False)
        ripple = make_family("nonconvex", n=3, p=4, rho_h=0.5, rho_nc=0.25, seed=2,
                             compute_reference=False)
        assert ripple.ell == pytest.approx(plain.ell + 0.5, rel=1e-12)


class TestAssumptionCheck:
    @pytest.mark.parametrize(
        "kind,kwargs",
        [
            ("quadratic", {"noise_sigma": 0.3}),
            ("nonconvex", {"rho_nc": 0.2}),
            ("mulnoise", {"eta": 0.3}),
        ],
    )
    def test_default_families_pass(self, kind, kwargs):
        fam = make_family(kind, n=4, p=5, rho_h=0.7, seed=1, **kwargs)
        report = assumption_check(fam, samples=60, rng=np.random.default_rng(0))
        assert report.passed, [c.name for c in report.failures()]

    def test_catches_understated_smoothness(self):
        ag = QuadraticAgent(A=2.0 * np.eye(2), c=np.zeros(2), d=0.0, noise_sigma=0.0, ell=0.5)
        fam = ProblemFamily(
            kind="quadratic", agents=[ag, ag], p=2, rho_h=0.0,
            noise_sigma=0.0, rho_nc=0.0, seed=0,
        )
        set_global_reference(fam)
        report = assumption_check(fam, samples=60, rng=np.random.default_rng(0))
        assert not report.passed
        assert any(c.name == "smoothness" for c in report.failures())


class TestTextRoundTrip:
    @pytest.mark.parametrize(
        "kind,kwargs",
        [
            ("quadratic", {"noise_sigma": 0.25}),
            ("nonconvex", {"rho_nc": 0.15}),
            ("mulnoise", {"eta": 0.2}),
        ],
    )
    def test_round_trip_exact(self, kind, kwargs):
        fam = make_family(kind, n=3, p=4, rho_h=0.6, seed=13, **kwargs)
        back = family_from_text(family_to_text(fam))
        assert back.kind == fam.kind
        assert back.n == fam.n and back.p == fam.p
        for a, b in zip(fam.agents, back.agents):
            assert np.array_equal(a.A, b.A)
            assert np.array_equal(a.c, b.c)
            assert a.d == b.d and a.ell == b.ell
        assert back.f_star == fam.f_star
        assert np.array_equal(back.x_star, fam.x_star)
        assert back.nu == fam.nu
        x = np.array([0.3, -0.7, 0.2, 1.0])
        assert back.f(x) == fam.f(x)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=5000), rho_h=st.floats(min_value=0.0, max_value=1.0))
def test_reference_is_stationary_for_quadratics(seed, rho_h):
    fam = make_family("quadratic", n=3, p=3, rho_h=rho_h, seed=seed)
    g = fam.grad(fam.x_star)
    assert float(g @ g) < 1e-18
