import json
import math

import numpy as np
import pytest

from sphg.errors import InvalidArgumentError
from sphg.galerkin import PDEProblem
from sphg.geometry import fibonacci_nodes, save_points
from sphg.harness import (
    ConvergenceRecord,
    ExperimentConfig,
    RuleCache,
    StepResult,
    builtin_problem,
    condition_study,
    evaluation_rule,
    fit_rate,
    kappa_sensitivity,
    node_set,
    pde_residual,
    relative_l2_error,
    sweep_centers,
    sweep_interpolation,
    sweep_quadrature,
)

NORTH = np.array([[0.0, 0.0, 1.0]])


@pytest.mark.parametrize("pid", [1, 2])
def test_builtin_problems(pid):
    p = builtin_problem(pid)
    assert p.exact_u(NORTH)[0] == pytest.approx(math.e)
    assert pde_residual(p) < 1e-4
    p.check_bounds()


def test_problem_one_load_at_poles():
    # f = e^z (z^2 + 2z): 3e at the north pole, -1/e at the south pole
    f = builtin_problem(1).f
    assert f(NORTH)[0] == pytest.approx(3 * math.e)
    assert f(-NORTH)[0] == pytest.approx(-1 / math.e)


def test_residual_detects_wrong_load():
    p = builtin_problem(1)
    wrong = PDEProblem(p.a, p.b, lambda x: p.f(x) + 0.05 * x[:, 0], p.exact_u)
    assert pde_residual(wrong) > 1e-2


def test_unknown_problem():
    with pytest.raises(InvalidArgumentError):
        builtin_problem(3)


def test_relative_error_examples():
    E = evaluation_rule(5000)
    p = builtin_problem(1)
    assert relative_l2_error(0.0, p, E) == pytest.approx(1.0, abs=1e-14)
    assert relative_l2_error(p.exact_u, p, E) == 0.0
    assert relative_l2_error(lambda x: 1.01 * p.exact_u(x), p, E) == pytest.approx(0.01, rel=1e-10)


def test_evaluation_rule_size():
    assert len(evaluation_rule(62_500)) == 62_658
    assert math.fsum(evaluation_rule().weights) == pytest.approx(4 * math.pi, rel=1e-14)


def test_fit_rate_examples():
    r = fit_rate([(0.1, 1e-4), (0.05, 6.25e-6), (0.025, 3.90625e-7)])
    assert r.slope == pytest.approx(4.0, abs=1e-12)
    assert r.residual < 1e-12
    with pytest.raises(InvalidArgumentError):
        fit_rate([(0.1, 1e-4), (0.05, 1e-5)])
    with pytest.raises(InvalidArgumentError):
        fit_rate([0.1, 0.05, 0.02], [1e-4, 0.0, 1e-6])


def test_fit_rate_scale_invariant(rng):
    h = np.sort(rng.uniform(0.01, 0.2, 6))
    e = 3.0 * h**2.5 * np.exp(0.05 * rng.standard_normal(6))
    a = fit_rate(h, e)
    b = fit_rate(7 * h, 1e-3 * e)
    assert a.slope == pytest.approx(b.slope, abs=1e-12)
    assert a.residual == pytest.approx(b.residual, abs=1e-12)


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(m=1)
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(basis="banded")
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(K=0)
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(y_sizes=[100, 100, 200])
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig.from_dict({"bogus": 1})
    c = ExperimentConfig(x_sizes=[100, 200, 400], K=5.0)
    assert ExperimentConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c


def _record():
    rec = ConvergenceRecord("N_Y", config=ExperimentConfig().to_dict())
    for n, e, k in ((100, 1e-2, 10.0), (400, 6.25e-4, 40.5), (1600, 3.9e-5, 160.25)):
        rec.steps.append(StepResult("N_Y", n, n**-0.5, e, k, 12.5, {"fit": True}))
    rec.steps.append(StepResult("cond-y", 100, 0.1, float("nan"), 10.1, 1.0))
    rec.fit()
    return rec


def test_record_main_steps_and_fit():
    rec = _record()
    assert rec.sizes == [100, 400, 1600]
    assert rec.rate == pytest.approx(4.0, abs=0.01)
    rec.steps[0].info["fit"] = False
    assert rec.fit() is None and rec.rate is None


def test_record_roundtrips():
    rec = _record()
    back = ConvergenceRecord.from_json(rec.to_json())
    assert back.to_json() == rec.to_json()
    rows = ConvergenceRecord.from_csv(rec.to_csv())
    assert [s.error for s in rows.steps[:3]] == rec.errors
    assert math.isnan(rows.steps[3].error)
    assert rec.to_csv().splitlines()[0] == "sweep,size,h,error,kappa2,wall_ms"
    with pytest.raises(InvalidArgumentError):
        ConvergenceRecord.from_csv("a,b\n")


def test_record_write_is_deterministic(tmp_path):
    rec = _record()
    a = rec.write(tmp_path / "a", deterministic=True)
    rec.steps[0].wall_ms = 999.0
    b = rec.write(tmp_path / "b.csv", deterministic=True)
    assert [p.name for p in b] == ["b.csv", "b.json"]
    for p, q in zip(a, b):
        assert p.read_bytes() == q.read_bytes()
    assert not list(tmp_path.glob(".*"))


def test_node_set_sources(tmp_path):
    assert len(node_set("icosahedral", 642)) == 642
    save_points(fibonacci_nodes(50), tmp_path / "50.txt")
    assert np.array_equal(node_set(str(tmp_path), 50).points, fibonacci_nodes(50).points)
    with pytest.raises(InvalidArgumentError):
        node_set(str(tmp_path), 60)
    with pytest.raises(InvalidArgumentError):
        node_set("icosahedral", 643)


def test_rule_cache_disk_roundtrip(tmp_path):
    Y = fibonacci_nodes(300)
    a = RuleCache(tmp_path).get(Y, 2)
    assert len(list(tmp_path.glob("*.rule"))) == 1
    b = RuleCache(tmp_path).get(Y, 2)
    assert np.array_equal(a.weights, b.weights)
    assert b.info.get("source")


SMALL = dict(x_source="fibonacci", y_source="fibonacci", n_eval=5000)


def test_small_quadrature_sweep():
    cfg = ExperimentConfig(x_sizes=[100], y_sizes=[500, 1000, 2000, 4000], **SMALL)
    rec = sweep_quadrature(cfg, RuleCache())
    assert rec.sizes == [500, 1000, 2000, 4000]
    assert all(s.info["h_Y_measured"] > 0 for s in rec.steps)
    assert rec.errors[-1] < rec.errors[0]
    assert len(list(rec.summary_lines())) >= 4


def test_small_center_and_interp_sweeps():
    cfg = ExperimentConfig(x_sizes=[50, 100, 200], y_sizes=[4000], kappa=False, **SMALL)
    rec = sweep_centers(cfg, RuleCache())
    assert all(math.isnan(k) for k in rec.kappas)
    assert rec.rate > 2.0
    rec = sweep_interpolation(cfg)
    assert rec.rate > 2.5


def test_small_condition_study():
    cfg = ExperimentConfig(x_sizes=[50, 100, 200], y_sizes=[2000, 4000], **SMALL)
    rec = condition_study(cfg, RuleCache())
    assert len(rec.main_steps()) == 3 and len(rec.steps) == 6
    assert 1.5 < rec.rate < 2.5
    sens = kappa_sensitivity(rec)
    assert set(sens) == {50, 100, 200}
    assert max(sens.values()) < 0.05


def test_rate_bands():
    from sphg.harness import RATE_BANDS, rate_in_band

    rec = _record()
    assert RATE_BANDS["N_Y"][0] == 4.0
    assert rate_in_band(rec) is True
    assert "in_band=True" in list(rec.summary_lines())[-1]
    rec.rate = 3.0
    assert rate_in_band(rec) is False
    rec.sweep = "solve"
    assert rate_in_band(rec) is None
