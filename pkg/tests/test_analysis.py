import math

import numpy as np
import pytest

from annihilation import (
    DomainError,
    ExternalForce,
    Forcing,
    ForcingTerm,
    InsufficientWindowError,
    InteractionLaw,
    ParticleSystem,
    StepController,
    fit_holder_exponent,
    run_hybrid,
    two_body_closed_form,
)
from annihilation import analysis as an
from annihilation.collisions import CollisionEvent, HybridTrajectory
from annihilation.integrator import GAP_BELOW_EPSILON, TrajectorySegment


def test_closed_form_examples():
    tau1, r, x = two_body_closed_form(1.0, 1.0, 0.0, 0.1)
    assert tau1 == 0.25 and r == pytest.approx(math.sqrt(1 - 0.4))
    np.testing.assert_allclose(x, [-r / 2, r / 2])
    tau1, r, _ = two_body_closed_form(2.0, 1.0, 0.0, 0.1)
    assert tau1 == pytest.approx(1 / 6) and r == pytest.approx((1 - 0.6) ** (1 / 3))
    for a in (0.3, 1.0, 2.5):
        assert two_body_closed_form(a, 2.0, 1.0, 0.0)[1] == pytest.approx(2.0)
    assert an.collapse_prefactor(1.0) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        two_body_closed_form(1.0, 1.0, 0.0, 0.3)


def test_fit_exact_power_laws():
    t = 0.25 - np.logspace(-8, -2, 30)
    fit = fit_holder_exponent(np.column_stack([t, 2 * np.sqrt(0.25 - t)]), 0.25)
    assert fit.exponent == pytest.approx(0.5, abs=1e-9)
    assert fit.prefactor == pytest.approx(2.0, rel=1e-7)
    assert fit.residual == pytest.approx(1.0)
    assert fit.t_lo < fit.t_hi < 0.25
    t = 1 / 6 - np.logspace(-7, -2, 30)
    fit = fit_holder_exponent(np.column_stack([t, np.cbrt(1 - 6 * t)]), 1 / 6)
    assert fit.exponent == pytest.approx(1 / 3, abs=1e-6)


def test_fit_errors():
    t = 0.25 - np.logspace(-3, -2.5, 20)
    with pytest.raises(InsufficientWindowError):
        fit_holder_exponent(np.column_stack([t, np.sqrt(0.25 - t)]), 0.25)
    t = 0.25 - np.logspace(-6, -2, 5)
    with pytest.raises(InsufficientWindowError):
        fit_holder_exponent(np.column_stack([t, np.sqrt(0.25 - t)]), 0.25)
    t = 0.25 - np.logspace(-6, -2, 20)
    q = np.sqrt(0.25 - t)
    q[3] = 0.0
    with pytest.raises(DomainError):
        fit_holder_exponent(np.column_stack([t, q]), 0.25)
    with pytest.raises(DomainError):
        fit_holder_exponent(np.column_stack([t + 1, np.sqrt(0.25 - t)]), 0.25)


def _synthetic(prefactor, a, members=(0, 1)):
    # A pair whose gap is exactly prefactor * (tau - t)**(1/(1+a)), symmetric about 0.
    tau = 1.0
    t = tau - np.logspace(-9, 0, 400)[::-1]
    r = prefactor * (tau - t) ** (1 / (1 + a))
    seg = TrajectorySegment(
        times=t, positions=np.column_stack([-r / 2, r / 2]), labels=np.array(members),
        signs=np.array([-1, 1]), step=np.ones(len(t), bool), step_sizes=np.zeros(len(t)),
        error_estimates=np.zeros(len(t)), stop_reason=GAP_BELOW_EPSILON, n_total=2, t_end=tau,
    )
    event = CollisionEvent(tau, 0.0, tuple(members), (-1, 1), None, segment_index=0)
    return HybridTrajectory([seg], [event], None, 2.0), event


def test_bounds_on_exact_power_law():
    traj, event = _synthetic(3.0, 1.0)
    (upper,) = an.check_upper_bound(traj, event, 1.0)
    assert upper.passed and upper.value == pytest.approx(3.0, rel=1e-12)
    lower = an.check_lower_bounds(traj, event, 1.0)
    assert all(e.passed for e in lower)
    assert lower[0].value == pytest.approx(3.0, rel=1e-12)
    assert lower[1].value == pytest.approx(1.5, rel=1e-12)


def test_two_body_constants(two_body_runs):
    for a, run in two_body_runs.items():
        event = run.events[0]
        ca = an.collapse_prefactor(a)
        (upper,) = an.check_upper_bound(run, event, a)
        lower = an.check_lower_bounds(run, event, a)
        assert upper.passed and upper.value == pytest.approx(ca, rel=0.02)
        assert lower[0].passed and lower[0].value == pytest.approx(ca, rel=0.02)
        for outer in lower[1:]:
            assert outer.value == pytest.approx(ca / 2, rel=0.02)
        (fit,) = an.check_holder_exponents(run, event, a)
        assert abs(fit.value - 1 / (1 + a)) <= 0.01
        assert an.check_gap_ratio_bound(run, event, a).details["vacuous"]


def test_triple_constants(triple_run):
    law, run = triple_run
    event = run.events[0]
    for entry in an.check_upper_bound(run, event, 1.0):
        assert entry.value == pytest.approx(1.0, rel=0.05)
    lower = an.check_lower_bounds(run, event, 1.0)
    for entry in lower:
        assert entry.passed and entry.value == pytest.approx(1.0, rel=0.05)
    for entry in an.check_holder_exponents(run, event, 1.0):
        assert abs(entry.value - 0.5) <= 0.05


def test_gap_ratio_constants():
    assert an.gap_ratio_b(1.0) == 0.5 and an.gap_ratio_b(3.0) == 1.0
    assert an.gap_ratio_constant(1.0) == pytest.approx(0.03125)
    assert an.gap_ratio_constant(2.0) == pytest.approx(0.25)


def test_gap_ratio_minimum_by_hand():
    # members at 0, 1, 3: pairs (0,1) -> 1/min(inf, 2) = 0.5, (1,2) -> 2/min(1, inf) = 2
    assert an._gap_ratio_min(np.array([0.0, 1.0, 3.0])) == pytest.approx(0.5)


def test_differential_inequalities_two_body(two_body_runs):
    entries = {e.name: e for e in an.check_differential_inequalities(two_body_runs[1.0], InteractionLaw(1.0))}
    assert all(e.passed for e in entries.values())
    # equality case: dr/dt = -2 f(r)
    assert entries["gap_speed_lower_bound"].margin == pytest.approx(0.0, abs=1e-12)
    assert entries["collapse_rate_bound"].margin == pytest.approx(0.0, abs=1e-12)
    assert entries["gap_speed_lower_bound"].details["C"] == 0.0


def test_differential_inequalities_detect_violation():
    # Reduced mode with a strong constant pull declared as zero: the gap speed bound must fail.
    forcing = Forcing((ForcingTerm.constant(50.0), ForcingTerm.constant(-50.0)))
    law = InteractionLaw(1.0)
    run = run_hybrid(law, ParticleSystem([0.0, 1.0], [-1, 1], forcing=forcing), 0.2, StepController())
    honest = {e.name: e for e in an.check_differential_inequalities(run, law)}
    assert honest["gap_speed_lower_bound"].passed and honest["gap_speed_lower_bound"].details["C"] == 100.0
    lying = {e.name: e for e in an.check_differential_inequalities(run, law, forcing_bound=0.0)}
    assert not lying["gap_speed_lower_bound"].passed


def test_gap_coordinates():
    M, r = an.to_gap_coordinates([0.0, 1.0, 3.0])
    assert M == 4.0 and r.tolist() == [1.0, 2.0]
    rng = np.random.default_rng(0)
    x = np.cumsum(rng.uniform(0.01, 1.0, (1000, 7)), axis=1) - 3.0
    M, r = an.to_gap_coordinates(x)
    np.testing.assert_allclose(an.from_gap_coordinates(M, r), x, rtol=0, atol=1e-12)
    with pytest.raises(DomainError):
        an.from_gap_coordinates(1.0, [1.0, 0.0])
    assert an.from_gap_coordinates(2.5, np.zeros(0)).tolist() == [2.5]


@pytest.mark.parametrize(
    "signs,expected",
    [([-1, 1], 0.0), ([1, -1, 1], 1.0)],
)
def test_M_lipschitz_constant_force(signs, expected):
    law = InteractionLaw(1.0, g_ext=ExternalForce.constant(1.0))
    x = np.linspace(0.0, 3.0, len(signs))
    run = run_hybrid(law, ParticleSystem(x, signs), 0.3, StepController())
    entry = an.check_M_lipschitz(run, law)
    assert entry.passed
    assert entry.value == pytest.approx(expected, abs=1e-6)


def test_M_lipschitz_zero_force(two_body_runs):
    entry = an.check_M_lipschitz(two_body_runs[1.0], InteractionLaw(1.0))
    assert entry.passed and entry.value <= 1e-9
    assert an.check_conservation(two_body_runs[1.0]).passed


def test_report_serialises(triple_run):
    law, run = triple_run
    report = an.verify_trajectory(run, law, suites=False)
    assert report.passed
    data = report.to_dict()
    assert data["passed"] and all("name" in e for e in data["entries"])
    assert report["opposite_pair_speed_bound"].passed
