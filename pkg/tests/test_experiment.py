import csv
import json
import os
import warnings

import numpy as np
import pytest

from nfdm.exceptions import ConfigError, ResourceBudgetError
from nfdm.experiment import (
    ExperimentConfig,
    ExperimentResult,
    emit_plot_data,
    estimate_runtime,
    load_manifest,
    result_from_manifest,
    run_experiment,
    save_result,
)
from nfdm.rate import TransitionHistogram
from nfdm.units import Normalization, dbm_to_watts

# small meshes keep these runs quick; the coarse lambda band is fine for plumbing checks
pytestmark = pytest.mark.filterwarnings("ignore::nfdm.modem.BandwidthWarning")

SMALL = dict(n_samples=1024, trials=6, powers=[0.1, 0.4], n_rings=2, n_phases=4, noise_psd=1e-3)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def small_run():
    return run_experiment(ExperimentConfig(**SMALL))


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@pytest.mark.parametrize(
    "bad",
    [
        {"trials": 0},
        {"trials": 2.5},
        {"n_users": True},
        {"scheme": "ofdm"},
        {"powers": []},
        {"powers": [0.1, -0.2]},
        {"ring_inner": 2.0, "ring_outer": 1.0},
        {"rolloff": 1.5},
        {"distance": -1.0},
        {"noise_bandwidth": 0.0},
        {"z_steps": 0},
        {"power_unit": "mW"},
        {"n_lambda": 512},
        {"dispersion_ps_nm_km": 0.0},
        {"time_window": float("nan")},
    ],
)
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig(**bad)


def test_nested_dict_and_yaml_round_trip(tmp_path):
    cfg = ExperimentConfig(scheme="wdm", n_rings=3, distance=0.1, powers=[0.2, 0.3], seed=9)
    d = cfg.to_dict()
    assert d["constellation"]["rings"] == 3 and d["channel"]["distance"] == 0.1
    assert ExperimentConfig.from_dict(d) == cfg
    path = tmp_path / "cfg.yaml"
    cfg.to_yaml(path)
    assert ExperimentConfig.from_yaml(path) == cfg


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"colour": "blue"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"channel": {"length": 1}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"channel": 3})
    bad = tmp_path / "bad.yaml"
    bad.write_text("trials: [1, 2\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_yaml(bad)
    seq = tmp_path / "seq.yaml"
    seq.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_yaml(seq)
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    assert ExperimentConfig.from_yaml(empty) == ExperimentConfig()


def test_dbm_powers_use_the_fibre_normalisation():
    cfg = ExperimentConfig(power_unit="dBm", powers=[-0.33, 0.0])
    norm = Normalization.from_fiber(-17.0, 1.27, 1550.0, 117e-12)
    np.testing.assert_allclose(cfg.normalized_powers(), [norm.power(dbm_to_watts(p)) for p in (-0.33, 0.0)])
    assert cfg.normalized_powers()[0] == pytest.approx(0.743, abs=1e-3)


# --------------------------------------------------------------------------
# runs
# --------------------------------------------------------------------------


def test_budget_refusal_reports_estimate():
    cfg = ExperimentConfig(**SMALL, budget_seconds=1e-3)
    with pytest.raises(ResourceBudgetError) as err:
        run_experiment(cfg)
    assert err.value.estimate == pytest.approx(estimate_runtime(cfg))
    assert err.value.estimate > 1e-3


def test_runtime_estimate_scales_with_work():
    a = estimate_runtime(ExperimentConfig(**SMALL))
    b = estimate_runtime(ExperimentConfig(**{**SMALL, "trials": 12}))
    assert b == pytest.approx(2 * a)


def test_result_shapes(small_run):
    r = small_run
    assert r.powers == [0.1, 0.4]
    for series in (r.rates, r.entropies, r.alphas, r.failures, r.rotations, r.total_powers, r.histograms):
        assert len(series) == 2
    assert r.failures == [0, 0]
    assert all(s.size == 6 for s in r.sent)
    assert all(isinstance(h, TransitionHistogram) for h in r.histograms)
    # 2 rings x 4 phases, every input seen 3 times
    assert r.histograms[0].n_inputs == 8 and np.all(r.histograms[0].trials == 3)
    assert all(0 < x <= 3 + 1e-9 for x in r.rates)
    assert r.total_powers[1] > r.total_powers[0] > 0
    assert r.rotations == [0.0, 0.0]
    assert r.noise_bandwidth > 0
    assert {"seconds", "estimate_seconds", "python", "numpy"} <= r.runtime.keys()


def test_identical_config_is_bit_identical(small_run):
    again = run_experiment(ExperimentConfig(**SMALL))
    assert again.fingerprint() == small_run.fingerprint()
    for a, b in zip(again.received, small_run.received):
        np.testing.assert_array_equal(a, b)
    other = run_experiment(ExperimentConfig(**{**SMALL, "seed": 2}))
    assert other.fingerprint() != small_run.fingerprint()


def test_worker_pool_does_not_change_results(small_run):
    pooled = run_experiment(ExperimentConfig(**SMALL, workers=2))
    assert pooled.fingerprint() == small_run.fingerprint()


def test_wdm_run_records_rotation():
    r = run_experiment(ExperimentConfig(**{**SMALL, "scheme": "wdm"}))
    assert all(np.isfinite(r.rotations))
    assert r.rotations[1] != 0


def test_failures_are_counted_not_fatal():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = ExperimentConfig(**{**SMALL, "powers": [0.1, 1e4], "distance": 0.0, "noise_bandwidth": 4.0})
        r = run_experiment(cfg)
    assert r.failures == [0, 6]
    assert np.isfinite(r.rates[0]) and np.isnan(r.rates[1])
    assert r.sent[1].size == 0


def test_progress_callback(tmp_path):
    seen = []
    run_experiment(ExperimentConfig(**{**SMALL, "powers": [0.1]}), progress=lambda i, p, r: seen.append((i, p)))
    assert seen == [(0, 0.1)]


# --------------------------------------------------------------------------
# persistence and plot data
# --------------------------------------------------------------------------


def test_save_and_reload(small_run, tmp_path):
    path = save_result(small_run, tmp_path)
    m = load_manifest(tmp_path)
    assert path == os.path.join(tmp_path, "manifest.json")
    assert m["config"] == ExperimentConfig(**SMALL).to_dict()
    assert m["fingerprint"] == small_run.fingerprint()
    assert m["label"] == "desk-scale reproduction"
    for f in m["files"]:
        assert os.path.exists(tmp_path / f)
    back = result_from_manifest(tmp_path)
    assert back.rates == small_run.rates and back.total_powers == small_run.total_powers
    for a, b in zip(back.received, small_run.received):
        np.testing.assert_array_equal(a, b)
    h = TransitionHistogram.from_csv(tmp_path / "histogram_p0.csv")
    np.testing.assert_array_equal(h.counts, small_run.histograms[0].counts)
    with open(path) as fh:
        json.load(fh)


def test_emit_rate_and_entropy_rows(small_run, tmp_path):
    files = emit_plot_data(small_run, "rate", tmp_path)
    r = rows(files[0])
    assert r[0] == ["power", "total_power", "rate_bits_2d", "failures"]
    assert len(r) == 1 + len(small_run.powers)
    assert float(r[1][2]) == small_run.rates[0]
    e = rows(emit_plot_data(small_run, "entropy", tmp_path)[0])
    assert e[0] == ["power", "total_power", "conditional_entropy_bits"]
    assert len(e) == 3


def test_emit_clouds_rows_equal_trials(small_run, tmp_path):
    files = emit_plot_data(small_run, "clouds", tmp_path)
    assert len(files) == 2
    for f in files:
        r = rows(f)
        assert r[0] == ["sent_re", "sent_im", "recv_re", "recv_im"]
        assert len(r) - 1 == 6


def test_emit_empty_result_gives_header_only(tmp_path):
    files = emit_plot_data(ExperimentResult.empty(), "all", tmp_path)
    assert len(files) == 3
    for f in files:
        assert len(rows(f)) == 1


def test_emit_unknown_kind_lists_kinds(small_run, tmp_path):
    with pytest.raises(ValueError, match="rate.*clouds.*entropy"):
        emit_plot_data(small_run, "histogram", tmp_path)
