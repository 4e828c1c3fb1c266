import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lbexperts.quantities import (
    Q_unknown_horizon,
    expected_regret_bound,
    hessian_quadratic_form,
    hp_regret_bound,
    hp_regret_bound_part_ii,
    hp_regret_bound_tuned,
    popoviciu_bound,
    potential_phi,
    preset_quantity,
    relative_quadratic_variation,
    spread,
    theorem_Q,
    tune_beta,
    tune_eta,
    tune_eta_preset,
)


def loop_Q(lam, s):
    """Reference: one round, one expert at a time."""
    q = ss = hy = 0.0
    for lt, st_ in zip(lam, s):
        d = max(lt) - min(lt)
        q += d * d
        ss += sum(v * v for v in st_)
        hy += max(st_) * d
    return q, ss, hy


@st.composite
def lb_games(draw, unit=False):
    n = draw(st.integers(1, 6))
    t = draw(st.integers(1, 8))
    if unit:
        l = draw(arrays(float, (t, n), elements=st.floats(0, 1)))
        frac = draw(arrays(float, (t, n), elements=st.floats(0, 1)))
        return l * frac, l - l * frac
    lam = draw(arrays(float, (t, n), elements=st.floats(-3, 3)))
    s = draw(arrays(float, (t, n), elements=st.floats(0, 2)))
    return lam, s


class TestSpread:
    def test_constant(self):
        assert spread([0.4, 0.4, 0.4]) == 0

    def test_by_hand(self):
        assert spread([0.1, 0.7, 0.4]) == pytest.approx(0.6, abs=1e-15)

    @given(arrays(float, st.integers(1, 10), elements=st.floats(-1e6, 1e6)), st.randoms())
    def test_permutation_invariant(self, x, rnd):
        y = list(x)
        rnd.shuffle(y)
        assert spread(x) == spread(y)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            spread([])


class TestQuadraticVariation:
    def test_empty(self):
        assert relative_quadratic_variation([]) == 0

    def test_two_rounds(self):
        assert relative_quadratic_variation([[0.1, 0.7], [0.5, 0.1]]) == pytest.approx(0.52, abs=1e-15)

    def test_identical_experts(self):
        assert relative_quadratic_variation([[0.3, 0.3], [0.9, 0.9]]) == 0

    def test_ragged_rejected(self):
        with pytest.raises(ValueError):
            relative_quadratic_variation([[0.1, 0.2], [0.3]])


class TestSecondOrderQuantity:
    def test_worked_example(self):
        bq = theorem_Q([[0.0, 0.2]], [[0.1, 0.3]])
        assert bq.q_lb == pytest.approx(0.04, abs=1e-15)
        assert bq.sum_sq_slack == pytest.approx(0.10, abs=1e-15)
        assert bq.hybrid == pytest.approx(0.06, abs=1e-15)
        assert bq.Q_theorem == pytest.approx(0.46, abs=1e-15)
        assert bq.Q_uh is None

    def test_bandit_has_only_slack_term(self):
        rng = np.random.default_rng(1)
        l = rng.uniform(size=(40, 5))
        bq = theorem_Q(np.zeros_like(l), l)
        assert bq.q_lb == 0 and bq.hybrid == 0
        assert bq.Q_theorem == pytest.approx(2 * np.sum(l * l), rel=1e-14)
        assert bq.Q_theorem <= 2 * 5 * 40

    def test_full_information_is_half_variation(self):
        rng = np.random.default_rng(2)
        l = rng.uniform(size=(40, 5))
        bq = theorem_Q(l, np.zeros_like(l))
        assert bq.Q_theorem == pytest.approx(relative_quadratic_variation(l) / 2, rel=1e-14)

    def test_negative_slack_rejected(self):
        with pytest.raises(ValueError):
            theorem_Q([[0.0]], [[-0.1]])

    @settings(max_examples=300)
    @given(lb_games())
    def test_matches_loop_reference(self, game):
        lam, s = game
        q, ss, hy = loop_Q(lam.tolist(), s.tolist())
        bq = theorem_Q(lam, s)
        assert bq.q_lb == pytest.approx(q, rel=1e-12, abs=1e-12)
        assert bq.sum_sq_slack == pytest.approx(ss, rel=1e-12, abs=1e-12)
        assert bq.hybrid == pytest.approx(hy, rel=1e-12, abs=1e-12)
        assert bq.Q_theorem == bq.q_lb / 2 + 2 * bq.sum_sq_slack + 4 * bq.hybrid
        assert bq.Q_prime == 4 * (bq.q_lb + bq.sum_sq_slack)

    def test_sandwich_on_1000_random_instances(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            n, t = rng.integers(1, 9), rng.integers(1, 30)
            lam = rng.uniform(-2, 2, (t, n))
            s = rng.exponential(size=(t, n)) * rng.integers(0, 2, (t, n))
            bq = theorem_Q(lam, s)
            base = bq.q_lb + bq.sum_sq_slack
            assert base / 2 <= bq.Q_theorem * (1 + 1e-12) + 1e-12
            assert bq.Q_theorem <= 4 * base * (1 + 1e-12) + 1e-12

    @given(lb_games(unit=True))
    def test_unit_range_pessimistic_dominates(self, game):
        lam, s = game
        assert Q_unknown_horizon(lam) >= theorem_Q(lam, s).Q_theorem - 1e-12


class TestUnknownHorizonQuantity:
    def test_all_ones_is_zero(self):
        assert Q_unknown_horizon(np.ones((5, 3))) == 0

    def test_all_zero_is_2NT(self):
        assert Q_unknown_horizon(np.zeros((7, 3))) == 2 * 3 * 7

    def test_single_expert_half(self):
        assert Q_unknown_horizon([[0.5], [0.5], [0.5]]) == pytest.approx(1.5)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            Q_unknown_horizon([[1.5]])


class TestEtaTuning:
    def test_cancellation(self):
        assert tune_eta(4 * math.log(7), 7) == pytest.approx(1.0, abs=1e-15)

    def test_two_experts_unit_Q(self):
        assert tune_eta(1.0, 2) == pytest.approx(1.6651092223153954, rel=1e-14)

    @given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6), st.integers(2, 100))
    def test_decreasing_in_Q(self, a, b, n):
        lo, hi = sorted((a, b))
        assert tune_eta(hi, n) <= tune_eta(lo, n)

    @pytest.mark.parametrize("Q,N", [(0.0, 2), (-1.0, 3), (1.0, 1)])
    def test_invalid(self, Q, N):
        with pytest.raises(ValueError):
            tune_eta(Q, N)

    def test_tuned_rate_balances_general_bound(self):
        Q, N = 123.0, 6
        eta = tune_eta(Q, N)
        assert expected_regret_bound(eta, Q, N) == pytest.approx(math.sqrt(Q * math.log(N)), rel=1e-14)
        for other in (eta / 2, eta * 2):
            assert expected_regret_bound(other, Q, N) > expected_regret_bound(eta, Q, N)


class TestPresets:
    def test_bandit_one_round(self):
        # sqrt(2 ln N / (N T)) with N=2, T=1 is sqrt(ln 2).
        assert tune_eta_preset("bandit", N=2, T=1) == pytest.approx(math.sqrt(math.log(2)), rel=1e-15)
        assert tune_eta_preset("bandit", N=2, T=1) == pytest.approx(0.8326, abs=1e-4)

    def test_bandit_anchor_bound(self):
        q = preset_quantity("bandit", N=2, T=1000)
        assert math.sqrt(q * math.log(2)) == pytest.approx(52.66, abs=0.005)

    def test_mixed_without_bandit_rounds(self):
        assert tune_eta_preset("mixed", N=5, T_f=40, T_b=0) == pytest.approx(math.sqrt(8 * math.log(5) / 40))

    def test_full_subsets(self):
        got = tune_eta_preset("variable_subset", N=4, subset_sizes=[4] * 30)
        assert got == pytest.approx(math.sqrt(8 * math.log(4) / (9 * 30)))

    def test_full_info(self):
        assert tune_eta_preset("full_info", q=3.0, N=4) == pytest.approx(math.sqrt(8 * math.log(4) / 3))

    @pytest.mark.parametrize(
        "scenario,params",
        [
            ("full_info", {"q": 2.5, "N": 3}),
            ("bandit", {"N": 3, "T": 50}),
            ("mixed", {"N": 3, "T_f": 20, "T_b": 30}),
            ("variable_subset", {"N": 3, "subset_sizes": [0, 1, 2, 3, 1]}),
        ],
    )
    def test_preset_rate_is_second_order_rate_of_preset_quantity(self, scenario, params):
        q = preset_quantity(scenario, **params)
        assert tune_eta_preset(scenario, **params) == pytest.approx(tune_eta(q, params["N"]), rel=1e-14)

    def test_missing_parameter(self):
        with pytest.raises(ValueError):
            tune_eta_preset("bandit", N=3)
        with pytest.raises(ValueError):
            tune_eta_preset("mixed", N=3, T_f=0, T_b=0)
        with pytest.raises(ValueError):
            tune_eta_preset("nope", N=3)

    def test_subset_sizes_out_of_range(self):
        with pytest.raises(ValueError):
            preset_quantity("variable_subset", N=2, subset_sizes=[3])


class TestBetaTuning:
    def test_hp_ii_unit(self):
        assert tune_beta(2.0, 5, 0.05, "hp_ii").beta == pytest.approx(1.0)

    def test_hp_i_example(self):
        got = tune_beta(2.0, 5, 0.05, "hp_i")
        assert got.beta == pytest.approx(math.sqrt(math.log(160)), rel=1e-14)
        assert got.beta == pytest.approx(2.25281, abs=1e-5)
        assert got.delta_prime == pytest.approx(0.05 / 8)

    def test_hp_iii_large_Q_matches_hp_i(self):
        a = tune_beta(1e9, 5, 0.05, "hp_iii", T=100)
        b = tune_beta(1e9, 5, 0.05, "hp_i")
        assert a.beta == b.beta < 1
        assert not a.substituted

    def test_hp_iii_substitutes_and_caps(self):
        got = tune_beta(1.0, 5, 0.05, "hp_iii", T=3)
        assert got.Q_used == 6.0 and got.substituted
        assert got.beta == 1.0

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.1])
    def test_bad_delta(self, delta):
        with pytest.raises(ValueError):
            tune_beta(1.0, 2, delta, "hp_i")

    def test_bad_Q_and_mode(self):
        with pytest.raises(ValueError):
            tune_beta(0.0, 2, 0.1, "hp_i")
        with pytest.raises(ValueError):
            tune_beta(1.0, 2, 0.1, "hp_iv")
        with pytest.raises(ValueError):
            tune_beta(1.0, 2, 0.1, "hp_iii")


class TestHighProbabilityBounds:
    def test_tuned_display_value(self):
        Q, N, d = 400.0, 4, 0.05
        expect = (1 + 1 / (2 * math.sqrt(2))) * math.sqrt(Q * math.log(N)) + (math.sqrt(2) + 1.5) * math.sqrt(
            Q * math.log((N + 3) / d)
        )
        assert hp_regret_bound_tuned(Q, N, d) == pytest.approx(expect, rel=1e-14)

    def test_general_form_at_tuned_parameters_is_below_display(self):
        rng = np.random.default_rng(5)
        lam = rng.uniform(size=(200, 4))
        s = rng.uniform(size=(200, 4)) * 0.3
        bq = theorem_Q(lam, s)
        N, d = 4, 0.05
        beta = tune_beta(bq.Q_theorem, N, d, "hp_i").beta
        eta = tune_eta(bq.Q_theorem, N)
        general = hp_regret_bound(eta, beta, d, N, bq, float(np.sum(s.max(axis=1) ** 2)))
        assert general <= hp_regret_bound_tuned(bq.Q_theorem, N, d) * (1 + 1e-12)

    def test_part_ii_exceeds_expected_bound(self):
        assert hp_regret_bound_part_ii(100.0, 3, 0.1) > math.sqrt(100 * math.log(3))


def _phi_mp(z, eta, p0):
    eta = mpmath.mpf(eta)
    s = mpmath.fsum(mpmath.mpf(p) * mpmath.exp(-eta * v) for p, v in zip(p0, z))
    return -mpmath.log(s) / eta


def _second_directional_mp(z, x, eta, p0):
    """Central second difference at 60 digits; truncation error is O(h^2) = 1e-24."""
    with mpmath.workdps(60):
        h = mpmath.mpf("1e-12")
        f = lambda t: _phi_mp([mpmath.mpf(zi) + t * mpmath.mpf(xi) for zi, xi in zip(z, x)], eta, p0)
        return float((f(h) - 2 * f(0) + f(-h)) / h**2)


class TestPotential:
    def test_zero(self):
        assert potential_phi(np.zeros(3), 1.3, np.full(3, 1 / 3)) == pytest.approx(0.0, abs=1e-15)

    @given(st.floats(-1e3, 1e3), st.floats(0.01, 10))
    def test_translation(self, c, eta):
        p0 = np.array([0.2, 0.3, 0.5])
        z = np.array([0.1, -0.4, 0.9])
        assert potential_phi(z + c, eta, p0) == pytest.approx(c + potential_phi(z, eta, p0), abs=1e-9)
        assert potential_phi(np.full(3, c), eta, p0) == pytest.approx(c, abs=1e-12)

    def test_worked_example(self):
        got = potential_phi(np.array([0.0, math.log(3)]), 1.0, np.array([0.5, 0.5]))
        assert got == pytest.approx(math.log(1.5), rel=1e-15)

    def test_overflow_safe(self):
        assert math.isfinite(potential_phi(np.array([1e6, 2e6]), 5.0, np.array([0.5, 0.5])))

    @given(arrays(float, st.integers(2, 8), elements=st.floats(-100, 100)), st.floats(0.01, 10))
    def test_softmin_within_log_n_over_eta(self, L, eta):
        n = len(L)
        phi = potential_phi(L, eta, np.full(n, 1 / n))
        assert phi - L.min() <= math.log(n) / eta + 1e-9
        assert phi >= L.min() - 1e-9

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            potential_phi(np.array([np.nan, 0.0]), 1.0, np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            potential_phi(np.zeros(2), 0.0, np.array([0.5, 0.5]))


class TestHessian:
    def test_constant_direction(self):
        assert hessian_quadratic_form(np.array([0.3, 1.0]), np.full(2, 4.2), 2.0, np.array([0.5, 0.5])) == pytest.approx(
            0.0, abs=1e-15
        )

    def test_uniform_two_point(self):
        got = hessian_quadratic_form(np.zeros(2), np.array([0.0, 1.0]), 1.0, np.array([0.5, 0.5]))
        assert got == pytest.approx(-0.25, rel=1e-15)

    def test_matches_high_precision_second_derivative(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(2, 7))
            z = rng.uniform(-1, 1, n)
            x = rng.uniform(-1, 1, n)
            eta = float(rng.uniform(0.1, 5))
            p0 = rng.uniform(0.05, 1, n)
            p0 /= p0.sum()
            ref = _second_directional_mp(z.tolist(), x.tolist(), eta, p0.tolist())
            got = hessian_quadratic_form(z, x, eta, p0)
            assert abs(got - ref) <= 1e-6 * abs(ref)

    @settings(max_examples=300)
    @given(
        arrays(float, 4, elements=st.floats(-50, 50)),
        arrays(float, 4, elements=st.floats(-50, 50)),
        st.floats(0.01, 10),
        arrays(float, 4, elements=st.floats(0.01, 1)),
    )
    def test_within_popoviciu_range(self, z, x, eta, w):
        p0 = w / w.sum()
        h = hessian_quadratic_form(z, x, eta, p0)
        assert h <= 0
        assert h >= -eta * popoviciu_bound(x.min(), x.max()) * (1 + 1e-12) - 1e-12
        assert popoviciu_bound(x.min(), x.max()) == pytest.approx(spread(x) ** 2 / 4)


class TestPopoviciu:
    def test_degenerate(self):
        assert popoviciu_bound(2.0, 2.0) == 0

    def test_unit_range(self):
        assert popoviciu_bound(0.0, 1.0) == 0.25

    def test_attained_by_fair_two_point(self):
        m, M = -1.5, 2.5
        vals = np.array([m, M])
        assert popoviciu_bound(m, M) == pytest.approx(np.var(vals), rel=1e-15)

    def test_order(self):
        with pytest.raises(ValueError):
            popoviciu_bound(1.0, 0.0)
