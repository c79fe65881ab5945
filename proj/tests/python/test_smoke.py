import json

import pytest

import sbp


def test_correlated_branch_is_recovered():
    trace = sbp.gen_correlated(m=2, k=1, length=20000, seed=3)
    layout = sbp.correlated_layout(2, 1)
    model = sbp.train(trace, layout["pc_b"], gh=16, lh=16)
    assert model.accuracy == 1.0
    assert model.sufficient
    assert [i for i, _ in model.weights] == [layout["a_history_index"]]


def test_trace_round_trip(tmp_path):
    trace = sbp.gen_loop(5, 100)
    path = tmp_path / "loop.sbpt"
    sbp.write_trace(trace, path)
    back = sbp.read_trace(path)
    assert back == trace
    assert len(back) == 100
    assert back.outcomes[:5] == [True, True, True, True, False]


def test_corrupt_trace_raises(tmp_path):
    path = tmp_path / "bad.sbpt"
    path.write_bytes(b"nope")
    with pytest.raises(sbp.TraceError):
        sbp.read_trace(path)


def test_quantization_and_storage():
    assert sbp.quantize_value(0.40) == 0.375
    assert sbp.quantize_value(100.0) == 7.9375
    assert sbp.storage_bits(13, 36) == 16016
    assert sbp.storage_bits(2, 34, q=32) == 4072


def test_fit_single_feature():
    x = [[1 if (i >> j) & 1 else -1 for j in range(4)] for i in range(64)]
    y = [row[2] > 0 for row in x]
    model = sbp.fit(x, y, 0.01)
    assert model.nnz == 1
    assert model.weights[0][0] == 2


def test_pipeline_and_simulate(tmp_path):
    trace = sbp.gen_correlated(m=2, k=1, length=40000, seed=4)
    trace.phase_id = "corr"
    report = sbp.run_phase(trace, gh=16, lh=16, baseline="gshare", min_occurrences=5000, hint_dir=tmp_path)
    assert report["coupled"]["mpki"] < report["baseline"]["mpki"]
    assert report["hints"]["n"] >= 1
    again = sbp.simulate(trace, baseline="gshare", gh=16, lh=16, hints=tmp_path / "corr.sbph")
    assert again["coupled"] == report["coupled"]
    assert sbp.simulate(trace, gh=16, lh=16)["coupled"] is None


def test_online():
    trace = sbp.gen_correlated(m=2, k=1, length=20000, seed=5)
    pc_b = sbp.correlated_layout(2)["pc_b"]
    res = sbp.run_online(trace, [pc_b], gh=16, lh=16)
    assert res[pc_b]["mispredictions"] < 0.05 * res[pc_b]["occurrences"]


def test_cli(tmp_path):
    out = tmp_path / "t.sbpt"
    code, _, _ = sbp.cli(["gen", "--kind", "loop", "--s", "3", "--len", "30", "-o", str(out)])
    assert code == 0
    assert len(sbp.read_trace(out)) == 30
    code, _, err = sbp.cli(["gen", "--kind", "loop"])
    assert code == 2
    assert "--len" in err


def test_bad_hints_raise(tmp_path):
    trace = sbp.gen_loop(5, 100)
    bad = tmp_path / "h.sbph"
    bad.write_bytes(b"SBPHxx")
    with pytest.raises(sbp.HintError):
        sbp.simulate(trace, gh=8, lh=8, hints=bad)
