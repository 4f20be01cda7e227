import math
import os
import pathlib

import numpy as np
import pytest

import ecgdnn

DATA = pathlib.Path(os.environ.get("ECGDNN_DATA_DIR", pathlib.Path(__file__).resolve().parents[2] / "data"))


def test_class_names():
    assert ecgdnn.CLASS_NAMES == ["1dAVb", "RBBB", "LBBB", "SB", "AF", "ST"]


def test_synthesize_and_measure():
    p = ecgdnn.SynthParams()
    p.heart_rate = 45.0
    p.noise_std = 0.02
    samples, labels = ecgdnn.synthesize(p)
    assert samples.shape == (12, 4000)
    assert labels == [False, False, False, True, False, False]
    m = ecgdnn.measure(samples, 400)
    assert abs(m["heart_rate"] - 45.0) < 2.0


def test_preprocess_pads_to_window():
    p = ecgdnn.SynthParams()
    p.sampling_rate = 500
    p.duration = 8.0
    samples, _ = ecgdnn.synthesize(p)
    x = ecgdnn.preprocess(samples, 500)
    assert x.shape == (12, 4096)
    assert np.all(x[:, :100] == 0.0)
    with pytest.raises(ValueError):
        ecgdnn.preprocess(samples[:5], 500)


def test_model_predict_and_checkpoint(tmp_path):
    model = ecgdnn.Model.build(seed=1)
    assert model.parameter_count == 1215046
    batch = np.random.default_rng(0).normal(size=(2, 12, 4096)).astype(np.float32)
    p = model.predict(batch)
    assert p.shape == (2, 6)
    assert np.all((p > 0) & (p < 1))
    path = tmp_path / "m.ckpt"
    ecgdnn.save_checkpoint(model, [0.5] * 6, path)
    back = ecgdnn.load_checkpoint(path)
    assert np.array_equal(back.model.predict(batch), p)
    path.write_bytes(b"garbage")
    with pytest.raises(ValueError):
        ecgdnn.load_checkpoint(path)


def test_metrics():
    s = ecgdnn.scores(26, 4, 795, 2)
    assert round(s["precision"], 3) == 0.867
    assert round(s["f1"], 3) == 0.897
    assert ecgdnn.average_precision([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == pytest.approx(5 / 12)
    assert ecgdnn.select_threshold([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0]) == 0.8
    assert abs(ecgdnn.kappa_from_table(45, 5, 5, 45) - 0.8) < 1e-9
    assert abs(ecgdnn.mcnemar(10, 0)["p_value"] - 2 * 0.5**10) < 1e-9
    assert ecgdnn.kappa([1, 0, 1, 0], [1, 0, 1, 0]) == 1.0
    q = ecgdnn.bootstrap_quantiles([[True] * 6] * 10, [[True] * 6] * 10, 50, 3)
    assert q[0][3] == [1.0] * 5


def test_consolidate():
    st = [False] * 5 + [True]
    none = [False] * 6
    rows = ecgdnn.consolidate(st, st, none, heart_rate=95.0, pr_interval=160.0, qrs_duration=90.0, nn_sd=30.0)
    assert rows[5] == ("Rejected", "2a", "")
    assert all(r == ("Rejected", "absent", "") for r in rows[:5])
    rows = ecgdnn.consolidate(st, st, none, heart_rate=95.0, measurements_veto_agreement=False)
    assert rows[5] == ("Accepted", "1a", "")
    rows = ecgdnn.consolidate(st, st, none)
    assert rows[5] == ("NeedsReview", "2a", "missing_measurement")


def test_textlabel():
    labeler = ecgdnn.TextLabeler(DATA / "rulebase_pt.json", DATA / "stopwords_pt.txt")
    y = labeler.label("Ritmo sinusal. Bloqueio de ramo direito.")
    assert y[1] and not y[2]
    assert not any(labeler.label(""))
    assert ecgdnn.tokenize("Fibrilação Atrial") == ["fibrilacao", "atrial"]
    assert math.isfinite(max(labeler.scores("taquicardia sinusal")))
