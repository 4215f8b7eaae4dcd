import numpy as np
import pytest

from annihilation import (
    AlternatingSignError,
    CollisionEvent,
    ExternalForce,
    IllConditionedFit,
    InteractionLaw,
    ParticleSystem,
    StepController,
    run_hybrid,
)
from annihilation.collisions import annihilate, detect_clusters, estimate_collision_time
from annihilation.config import random_positions
from annihilation.integrator import default_epsilon

PURE1 = InteractionLaw(1.0)


def test_detect_clusters_examples():
    assert detect_clusters(np.array([0.0, 1e-9, 1.0, 1.0 + 1e-9]), 1e-6) == [[0, 1], [2, 3]]
    assert detect_clusters(np.array([0.0, 0.5, 1.0]), 1e-6) == []
    assert detect_clusters(np.array([0.0, 1e-9, 2e-9]), 1e-6) == [[0, 1, 2]]
    assert detect_clusters(ParticleSystem([0.0, 1e-9], [1, -1]), 1e-6) == [[0, 1]]


def test_estimate_collision_time_exact_power_laws():
    t = np.array([0.20, 0.22, 0.24])
    tau = estimate_collision_time(np.column_stack([t, np.sqrt(1 - 4 * t)]), 1.0)
    assert tau == pytest.approx(0.25, abs=1e-12)
    t = np.linspace(0.1, 0.16, 7)
    tau = estimate_collision_time(np.column_stack([t, np.cbrt(1 - 6 * t)]), 2.0)
    assert tau == pytest.approx(1.0 / 6.0, abs=1e-12)
    tau, err = estimate_collision_time(np.column_stack([t, np.cbrt(1 - 6 * t)]), 2.0, return_error=True)
    assert 0 < err < 1e-12


def test_estimate_collision_time_rejects_bad_samples():
    with pytest.raises(IllConditionedFit):
        estimate_collision_time([[0.0, 1.0], [0.1, 1.2], [0.2, 1.3]], 1.0)
    with pytest.raises(IllConditionedFit):
        estimate_collision_time([[0.0, 1.0], [0.1, 0.9]], 1.0)


def test_annihilate_rules():
    assert annihilate([1, -1], [4, 5]) == ([4, 5], None)
    removed, survivor = annihilate([-1, 1, -1], [0, 1, 2])
    assert survivor in (0, 2) and len(removed) == 2
    removed, survivor = annihilate([1, -1, 1, -1, 1], [3, 4, 5, 6, 7])
    assert survivor == 5 and sorted(removed) == [3, 4, 6, 7]
    with pytest.raises(AlternatingSignError):
        annihilate([1, 1], [0, 1])


def test_collision_event_invariants():
    with pytest.raises(AlternatingSignError):
        CollisionEvent(0.1, 0.0, (0, 1), (1, 1), None)
    with pytest.raises(ValueError):
        CollisionEvent(0.1, 0.0, (0, 1, 2), (1, -1, 1), None)
    with pytest.raises(ValueError):
        CollisionEvent(0.1, 0.0, (0, 1, 2), (1, -1, 1), 1)
    event = CollisionEvent(0.1, 0.5, (0, 1, 2), (1, -1, 1), 2, tau_error=1e-9)
    assert CollisionEvent.from_record(event.to_record()).to_record() == event.to_record()
    assert event.to_record()["members"] == [1, 2, 3]


def test_two_body(two_body_runs):
    run = two_body_runs[1.0]
    assert len(run.events) == 1
    event = run.events[0]
    assert event.tau_hat == pytest.approx(0.25, abs=1e-6)
    assert event.survivor is None
    assert run.final_state.n == 0


def test_symmetric_triple(triple_run):
    _, run = triple_run
    assert len(run.events) == 1
    event = run.events[0]
    assert event.members == (0, 1, 2)
    assert event.location == pytest.approx(0.0, abs=1e-8)
    assert event.tau_hat == pytest.approx(1.0, abs=1e-4)
    assert event.member_signs[event.members.index(event.survivor)] == 1
    assert run.final_state.n == 1 and run.final_state.signs[0] == 1


def test_separated_pairs(controller):
    system = ParticleSystem([0.0, 0.1, 10.0, 10.1], [1, -1, 1, -1])
    run = run_hybrid(PURE1, system, 1.0, controller)
    assert len(run.events) == 2
    locations = sorted(e.location for e in run.events)
    assert locations[0] == pytest.approx(0.05, abs=1e-3)
    assert locations[1] == pytest.approx(10.05, abs=1e-3)
    for event in run.events:
        assert abs(event.tau_hat - 0.0025) < 2e-3


def _check_run_invariants(run, system, T):
    taus = [e.tau_hat for e in run.events]
    assert taus == sorted(taus)
    removed = sum(len(e.removed) for e in run.events)
    assert removed % 2 == 0 and removed <= system.n
    assert run.final_state.n == system.n - removed
    for event in run.events:
        signs = event.member_signs
        assert all(s != t for s, t in zip(signs, signs[1:]))
    # segments tile [0, T]
    assert run.segments[0].t_start == 0.0
    for prev, nxt in zip(run.segments, run.segments[1:]):
        assert nxt.t_start == pytest.approx(prev.t_end, abs=0)
    assert run.segments[-1].t_end == T
    for seg in run.segments:
        acc = seg.accepted()
        if seg.n > 1:
            assert np.all(np.diff(acc.positions, axis=1) > 0)


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("n", [3, 5, 6])
def test_random_runs_invariants(controller, n, seed):
    system = ParticleSystem(*random_positions(n, seed))
    run = run_hybrid(InteractionLaw(1.0), system, 50.0, controller)
    _check_run_invariants(run, system, 50.0)
    assert run.final_state.n == n % 2


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("seed", range(3))
def test_halving_epsilon_within_error_estimate(a, seed):
    law = InteractionLaw(a)
    system = ParticleSystem(*random_positions(4, seed))
    eps = default_epsilon(a)
    coarse = run_hybrid(law, system, 50.0, StepController(collision_gap_epsilon=eps))
    fine = run_hybrid(law, system, 50.0, StepController(collision_gap_epsilon=eps / 2))
    assert len(coarse.events) == len(fine.events)
    for e1, e2 in zip(coarse.events, fine.events):
        assert abs(e1.tau_hat - e2.tau_hat) < e1.tau_error


def test_same_sign_squeeze_is_never_accepted():
    # Two + particles pressed together by a strong confining force settle
    # inside the collision layer; the cluster must be refused.
    law = InteractionLaw(1.0, g_ext=ExternalForce.affine(-1e13, 0.0))
    system = ParticleSystem([-1e-3, 1e-3], [1, 1])
    run = run_hybrid(law, system, 2e-10, StepController())
    assert run.events == []
    assert run.final_state.n == 2
    assert run.final_state.min_gap() < default_epsilon(1.0)
    with pytest.raises(AlternatingSignError) as info:
        run_hybrid(law, system, 2e-10, StepController(), max_refinements=0)
    assert info.value.signs == [1, 1]


def test_restart_state_is_ordered(controller):
    system = ParticleSystem([0.0, 0.2, 0.5, 1.4, 1.45], [-1, 1, -1, 1, -1])
    run = run_hybrid(PURE1, system, 20.0, controller)
    for seg in run.segments:
        assert seg.n < 2 or seg.system_at(0).is_ordered()
    assert run.final_state.n == 1


def test_rejects_nonpositive_horizon(controller):
    with pytest.raises(ValueError):
        run_hybrid(PURE1, ParticleSystem([0.0, 1.0], [-1, 1]), 0.0, controller)
