import numpy as np
import pytest

from flowdesk import optim as op


def quadratic(x):
    return (x[0] - 0.3) ** 2 + (x[1] - 0.05) ** 2


PM_BOX = op.Bounds(((0.20, 0.50), (0.01, 0.09)))


def test_bounds_validation():
    with pytest.raises(ValueError):
        op.Bounds(((1.0, 0.0),))
    b = op.Bounds(((0.0, 1.0), (2.0, 4.0)))
    assert b.dim == 2
    assert np.array_equal(b.clip(np.array([-1.0, 5.0])), [0.0, 4.0])


def test_latin_hypercube_stratification():
    pts = op.latin_hypercube(5, op.Bounds(((0.0, 1.0),)), seed=3)
    strata = sorted(int(x * 5) for x in pts[:, 0])
    assert strata == [0, 1, 2, 3, 4]


def test_latin_hypercube_box_and_projections():
    pts = op.latin_hypercube(10, PM_BOX, seed=5)
    assert all(PM_BOX.contains(p) for p in pts)
    for j, (lo, hi) in enumerate(PM_BOX.box):
        strata = sorted(int((x - lo) / (hi - lo) * 10 - 1e-12) for x in pts[:, j])
        assert strata == list(range(10))


def test_latin_hypercube_determinism_and_validation():
    a = op.latin_hypercube(7, PM_BOX, seed=1)
    b = op.latin_hypercube(7, PM_BOX, seed=1)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        op.latin_hypercube(0, PM_BOX, seed=1)


def test_anneal_quadratic_reaches_minimum():
    res = op.anneal(quadratic, PM_BOX, op.AnnealConfig(seed=0))
    assert np.abs(res.best_point - [0.3, 0.05]).max() < 1e-3
    assert res.best_value < 1e-6


def test_anneal_constant_objective_accepts_everything():
    res = op.anneal(lambda x: 4.2, PM_BOX, op.AnnealConfig(seed=1, max_iters=200, polish=False))
    assert res.best_value == 4.2
    sa_steps = [s for s in res.trajectory[1:]]
    assert all(s.accepted for s in sa_steps)
    assert all(ratio == 1.0 for _, ratio in res.stage_acceptance)


def test_anneal_deterministic_per_seed():
    r1 = op.anneal(quadratic, PM_BOX, op.AnnealConfig(seed=7))
    r2 = op.anneal(quadratic, PM_BOX, op.AnnealConfig(seed=7))
    assert len(r1.trajectory) == len(r2.trajectory)
    assert all(
        np.array_equal(a.point, b.point) and a.value == b.value
        for a, b in zip(r1.trajectory, r2.trajectory)
    )


def test_anneal_all_points_within_bounds():
    res = op.anneal(quadratic, PM_BOX, op.AnnealConfig(seed=2))
    for step in res.trajectory:
        assert PM_BOX.contains(step.point)


def test_anneal_best_value_is_trajectory_min():
    res = op.anneal(quadratic, PM_BOX, op.AnnealConfig(seed=3))
    finite = [s.value for s in res.trajectory if np.isfinite(s.value)]
    assert res.best_value == min(finite)


def test_anneal_temperature_monotone_decay():
    res = op.anneal(quadratic, PM_BOX, op.AnnealConfig(seed=4, polish=False))
    temps = [t for t, _ in res.stage_acceptance]
    assert all(t2 < t1 for t1, t2 in zip(temps, temps[1:]))
    assert all(0 < ratio <= 1 for _, ratio in res.stage_acceptance)


def test_anneal_handles_nonfinite_regions():
    def patchy(x):
        if x[0] > 0.35:
            return float("nan")
        return quadratic(x)

    res = op.anneal(patchy, PM_BOX, op.AnnealConfig(seed=5))
    assert np.abs(res.best_point - [0.3, 0.05]).max() < 1e-3
    assert np.isfinite(res.best_value)


def test_anneal_rejects_nonfinite_start():
    with pytest.raises(ValueError):
        op.anneal(lambda x: float("nan"), PM_BOX,
                  op.AnnealConfig(seed=0, x0=np.array([0.25, 0.05])))


def test_anneal_new_best_events_nonincreasing():
    res = op.anneal(quadratic, PM_BOX, op.AnnealConfig(seed=6))
    best = float("inf")
    bests = []
    for s in res.trajectory:
        if np.isfinite(s.value) and s.value < best:
            best = s.value
            bests.append(best)
    assert bests == sorted(bests, reverse=True)


def test_trajectory_csv_format():
    res = op.anneal(quadratic, PM_BOX, op.AnnealConfig(seed=0, max_iters=50, polish=False))
    text = res.trajectory_csv()
    lines = text.strip().splitlines()
    assert lines[0] == "iter,m,p,objective,accepted,T"
    assert len(lines) == len(res.trajectory) + 1
    fields = lines[1].split(",")
    assert len(fields) == 6


def test_airfoil_bounds_match_design_box():
    assert op.AIRFOIL_BOUNDS.box == ((0.01, 0.09), (0.20, 0.50))
