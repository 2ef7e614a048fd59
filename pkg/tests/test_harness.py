import json
import math
import re

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pffl.errors import ConstraintUnattainable, EmptyImageSet
from pffl.feature_map import build_penalty
from pffl.harness import (CorrelationTable, ExperimentConfig, FixPsnr, FixSsim, correlation_study,
                          emit_report, lower_median, projected_pffl_descent, run_experiment,
                          tripartite)
from pffl.harness.correlation import descent_path, is_monotone
from pffl.harness.experiment import expand_images
from pffl.harness.fixtures import fixture_set
from pffl.harness.report import CORRELATION_HEADER, REPORT_HEADER, read_csv
from pffl.metrics import mse, pffl, psnr, ssim
from pffl.tensor_io import save_png

SMALL = dict(images=[{"fixture": "tripartite", "count": 3, "size": 24}], budget=200,
             checkpoints=[100, 200])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
def test_lower_median_matches_sort(values):
    v = sorted(values)
    assert lower_median(values) == v[(len(v) - 1) // 2]
    if len(v) % 2:
        assert lower_median(values) == float(np.median(values))


def test_lower_median_examples():
    assert lower_median([3.0]) == 3.0
    assert lower_median([4, 1, 3, 2]) == 2
    with pytest.raises(ValueError):
        lower_median([])


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"images": ["a.png"], "bogus": 1})
    with pytest.raises(ValueError):
        ExperimentConfig(images=["a.png"], checkpoints=[200, 100])
    with pytest.raises(ValueError):
        ExperimentConfig(images=["a.png"], budget=100, checkpoints=[200])
    with pytest.raises(ValueError):
        ExperimentConfig(images=["a.png"], objectives=["l1"])
    with pytest.raises(EmptyImageSet):
        ExperimentConfig(images=[])
    cfg = ExperimentConfig(images=["a.png"], algorithm="boundary", attack={"gamma": 0.1})
    assert cfg.attack_config().gamma == 0.1


def test_expand_images(tmp_path):
    save_png(np.zeros((3, 24, 24)), tmp_path / "z.png")
    imgs = expand_images(["z.png", {"fixture": "tripartite", "count": 2, "size": 24}], tmp_path)
    assert len(imgs) == 3 and imgs[0].shape == (3, 24, 24)
    assert np.array_equal(imgs[2], tripartite(24, 1, 3)[0])
    with pytest.raises(ValueError):
        expand_images([{"fixture": "other"}])


def test_fixture_set_is_seeded():
    a, b = fixture_set(3, 24, seed=4), fixture_set(3, 24, seed=4)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[0], a[1])


def test_single_image_experiment():
    cfg = ExperimentConfig(**{**SMALL, "images": [{"fixture": "tripartite", "size": 24}]})
    table = run_experiment(cfg)
    assert len(table.rows) == 4
    for r in table.rows:
        tr = table.traces[(r.objective, 0)]
        rec = tr.by_queries()[r.checkpoint]
        assert r.n_images == 1 and r.median_ssim == rec.ssim and r.median_pffl == rec.pffl


def test_unit_penalty_makes_objectives_identical():
    cfg = ExperimentConfig(**SMALL, penalty="ones")
    table = run_experiment(cfg)
    for c in cfg.checkpoints:
        a, b = table.row("pffl", c), table.row("l2", c)
        assert (a.median_ssim, a.median_psnr, a.median_pffl) == \
               (b.median_ssim, b.median_psnr, b.median_pffl)
    for i in range(3):
        assert np.array_equal(table.traces[("pffl", i)].x_adv, table.traces[("l2", i)].x_adv)


def test_experiment_is_deterministic():
    a = run_experiment(ExperimentConfig(**SMALL))
    b = run_experiment(ExperimentConfig(**SMALL))
    assert a.rows == b.rows


def test_medians_follow_traces():
    table = run_experiment(ExperimentConfig(**SMALL, objectives=["pffl"]))
    for c in (100, 200):
        recs = [table.traces[("pffl", i)].by_queries()[c] for i in range(3)
                if c in table.traces[("pffl", i)].by_queries()]
        assert table.row("pffl", c).median_psnr == lower_median([r.psnr for r in recs])


def test_targeted_and_boundary_experiment():
    table = run_experiment(ExperimentConfig(**SMALL, goal="targeted", algorithm="boundary",
                                            objectives=["pffl"]))
    assert len(table.rows) == 2
    assert all(r.n_images + len(table.skipped) + len(table.failures) >= 1 for r in table.rows)


def test_wrong_labels_are_skipped():
    table = run_experiment(ExperimentConfig(**SMALL, objectives=["l2"], labels=[99, 99, 99]))
    assert table.skipped == [0, 1, 2]
    assert all(r.n_images == 0 and math.isnan(r.median_ssim) for r in table.rows)


def test_report_files_round_trip(tmp_path):
    table = run_experiment(ExperimentConfig(**SMALL))
    csv_path, svg_path = emit_report(table, tmp_path)
    rows = read_csv(csv_path)
    assert rows[0] == REPORT_HEADER
    assert len(rows) == 1 + len(table.rows)
    for line, r in zip(rows[1:], table.rows):
        assert line[0] == r.objective and int(line[1]) == r.checkpoint
        assert float(line[4]) == pytest.approx(r.median_pffl, rel=1e-5)
        assert int(line[5]) == r.n_images
    svg = svg_path.read_text()
    polys = re.findall(r'<polyline data-objective="(\w+)" points="([^"]*)"', svg)
    assert sorted(p[0] for p in polys) == ["l2", "l2", "pffl", "pffl"]
    assert all(len(p[1].split()) == 2 for p in polys)
    with pytest.raises(ValueError):
        emit_report(CorrelationTable([20.0], [0.9]), tmp_path)


def test_bench_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({**SMALL, "objectives": ["l2"]}))
    cfg = ExperimentConfig.from_json(path)
    assert cfg.objectives == ["l2"] and cfg.budget == 200


def test_fix_psnr_descent_properties():
    img, _ = tripartite(32, 0, 3)
    m = np.where(np.arange(32)[None, :] < 16, 1.0, 0.5) * np.ones((32, 1))
    c = FixPsnr(25.0)
    path = list(descent_path(img, m, c, steps=30))
    vals = [pffl(img + d, img, m) for d in path]
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))
    for d in path:
        assert psnr(img + d, img) == pytest.approx(25.0, abs=1e-9)
    assert vals[-1] < vals[0]


def test_fix_psnr_unit_map_is_constant():
    img, _ = tripartite(32, 1, 3)
    x = projected_pffl_descent(img, np.ones((32, 32)), FixPsnr(30.0), steps=5)
    assert pffl(x, img, np.ones((32, 32))) == pytest.approx(img.size * 10 ** -3.0)
    start = projected_pffl_descent(img, np.ones((32, 32)), FixPsnr(25.0), steps=0)
    grid = [round(ssim(start, img), 2), 0.5]
    table = correlation_study(img, np.ones((32, 32)), [25.0], grid, steps=20)
    # with M = 1 every iterate has the same PFFL, so filled cells all agree
    filled = [v for v in table.column(25.0) if v is not None]
    assert filled and all(v == pytest.approx(img.size * 10 ** -2.5) for v in filled)


def test_fix_ssim_projection():
    img, _ = tripartite(32, 2, 3)
    m = np.ones((32, 32))
    x = projected_pffl_descent(img, m, FixSsim(0.9), steps=3)
    assert ssim(x, img) == pytest.approx(0.9, abs=1e-3)
    with pytest.raises(ConstraintUnattainable):
        projected_pffl_descent(img, m, FixSsim(0.9, tol=1e-12, max_bisect=3), steps=0)


def test_correlation_cells_meet_targets():
    img, _ = tripartite(32, 0, 3)
    m, _ = build_penalty(img)
    table = correlation_study(img, m, [25.0, math.inf], [0.9, 0.95, 0.99], steps=100)
    assert table.value(math.inf, 0.99) == 0.0
    assert table.value(math.inf, 0.9) is None
    assert any(v is not None for v in table.column(25.0))
    cols, _ = is_monotone(table)
    assert cols
    with pytest.raises(ValueError):
        correlation_study(img, m, [], [0.9])


def test_correlation_csv(tmp_path):
    table = CorrelationTable([20.0, 30.0], [0.9], {(20.0, 0.9): 12.5, (30.0, 0.9): None})
    (path,) = emit_report(table, tmp_path)
    rows = read_csv(path)
    assert rows == [CORRELATION_HEADER, ["20", "0.9", "12.5"], ["30", "0.9", ""]]


def test_is_monotone():
    t = CorrelationTable([20.0, 30.0], [0.8, 0.9],
                         {(20.0, 0.8): 5.0, (20.0, 0.9): 4.0, (30.0, 0.8): 3.0, (30.0, 0.9): None})
    assert is_monotone(t) == (True, True)
    t.cells[(30.0, 0.9)] = 4.5
    assert is_monotone(t) == (False, False)


def test_mse_of_fix_psnr_target():
    assert FixPsnr(20.0).target_mse == pytest.approx(0.01)
    img, _ = tripartite(24, 0, 1)
    x = projected_pffl_descent(img, np.ones((24, 24)), FixPsnr(20.0), steps=0)
    assert mse(x, img) == pytest.approx(0.01)
