import json

import numpy as np

from fnofuse.cli import main
from fnofuse.core import DEFAULT_TILES, FnoLayerConfig, random_spectral
from fnofuse.cgemm import ComplexMatrix
from fnofuse.pipeline import run_layer
from fnofuse.reporting import read_raw_tensor, write_raw_matrix, write_raw_tensor

TINY_GRID = {"grids": [
    {"dims": [[64, 16]], "hidden_range": [16], "batch_range": [32], "rank": 1},
    {"dims": [[32, 8]], "hidden_range": [16], "batch_range": [64], "rank": 2},
]}


def write_grid(tmp_path, doc):
    path = tmp_path / "grid.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_count_ops_output(capsys):
    assert main(["count-ops", "4", "1"]) == 0
    out = capsys.readouterr().out
    assert "3 / 8 = 0.375" in out
    assert main(["count-ops", "4", "4"]) == 0
    assert "8 / 8 = 1" in capsys.readouterr().out
    assert main(["count-ops", "256", "64", "256"]) == 0
    assert "1728 / 2048" in capsys.readouterr().out


def test_simulate_banks_json(capsys):
    assert main(["simulate-banks", "--layout", "fft16_naive", "--step", "0"]) == 0
    out = capsys.readouterr().out
    doc = json.loads(out[:out.index("\nbanks")])
    assert doc["step 0"]["utilization"] == 0.0625
    assert main(["simulate-banks", "--layout", "strided_vkfft",
                 "--gemm-read"]) == 0
    out = capsys.readouterr().out
    doc = json.loads(out[:out.index("\nbanks")])
    assert doc["gemm-read"]["utilization"] == 0.25


def test_verify_tiny_grid(tmp_path, capsys):
    cfg = write_grid(tmp_path, TINY_GRID)
    assert main(["verify", "--config", cfg, "--seed", "0"]) == 0
    assert "verify: PASS" in capsys.readouterr().out


def test_verify_rejects_bad_grid(tmp_path, capsys):
    cfg = write_grid(tmp_path, {"dims": [[128, 300]], "hidden_range": [16],
                                "batch_range": [32], "rank": 1})
    assert main(["verify", "--config", cfg]) != 0
    assert "TruncationExceedsLength" in capsys.readouterr().out


def test_verify_empty_grid_warns(tmp_path, capsys):
    cfg = write_grid(tmp_path, {"dims": [], "hidden_range": [],
                                "batch_range": [], "rank": 1})
    assert main(["verify", "--config", cfg]) == 0
    assert "empty grid" in capsys.readouterr().out


def test_report_writes_outputs(tmp_path, capsys):
    cfg = write_grid(tmp_path, TINY_GRID)
    out = tmp_path / "rep"
    assert main(["report", "--config", cfg, "--seed", "1",
                 "--out", str(out)]) == 0
    assert (out / "report.csv").exists()
    assert (out / "report.json").exists()
    assert list(out.glob("heatmap_*.png"))
    header = (out / "report.csv").read_text().splitlines()[0]
    assert header.startswith("rank,mode,dim,keep,hidden")

    out2 = tmp_path / "rep2"
    assert main(["report", "--config", cfg, "--seed", "1", "--out", str(out2),
                 "--mode", "staged", "--mode", "fully_fused",
                 "--no-figures"]) == 0
    assert not list(out2.glob("heatmap_*.png"))
    doc = json.loads((out2 / "report.json").read_text())
    assert {r["mode"] for r in doc["rows"]} == {"staged", "fully_fused"}


def test_fno_run_matches_library(tmp_path, capsys):
    cfg = FnoLayerConfig(batch=2, hidden_dim=16, output_dim=24, dim_x=1,
                         dim_y=64, keep_x=1, keep_y=16, rank=1)
    rng = np.random.default_rng(4)
    x = random_spectral(cfg, rng)
    w = ComplexMatrix.random(16, 24, rng)
    inp = tmp_path / "in.bin"
    wf = tmp_path / "w.bin"
    outp = tmp_path / "out.bin"
    ledp = tmp_path / "ledger.json"
    write_raw_tensor(str(inp), x.data)
    write_raw_matrix(str(wf), w)
    conf = tmp_path / "layer.json"
    conf.write_text(json.dumps({
        "layer": {"output_dim": 24, "keep_x": 1, "keep_y": 16, "rank": 1},
        "tiles": DEFAULT_TILES.to_json_dict(),
    }))
    assert main(["fno-run", "--input", str(inp), "--out", str(outp),
                 "--config", str(conf), "--weights", str(wf),
                 "--mode", "fully_fused", "--ledger-out", str(ledp)]) == 0
    got = read_raw_tensor(str(outp))
    want, led = run_layer(cfg, x, w, mode="fully_fused")
    assert np.array_equal(got, want.data)
    doc = json.loads(ledp.read_text())
    assert doc == led.to_json_dict()
    assert doc["kernel_launches"] == 1


def test_fno_run_header_config_mismatch(tmp_path, capsys):
    cfg = FnoLayerConfig(batch=2, hidden_dim=16, output_dim=16, dim_x=1,
                         dim_y=64, keep_x=1, keep_y=16, rank=1)
    rng = np.random.default_rng(4)
    x = random_spectral(cfg, rng)
    inp = tmp_path / "in.bin"
    write_raw_tensor(str(inp), x.data)
    conf = tmp_path / "layer.json"
    conf.write_text(json.dumps({"layer": {
        "batch": 3, "output_dim": 16, "keep_x": 1, "keep_y": 16, "rank": 1}}))
    assert main(["fno-run", "--input", str(inp), "--out",
                 str(tmp_path / "o.bin"), "--config", str(conf)]) == 2
    assert "disagrees" in capsys.readouterr().err


def test_fno_run_missing_input_io_error(tmp_path, capsys):
    conf = tmp_path / "layer.json"
    conf.write_text(json.dumps({"layer": {"output_dim": 16, "keep_x": 1,
                                          "keep_y": 16, "rank": 1}}))
    assert main(["fno-run", "--input", str(tmp_path / "nope.bin"),
                 "--out", str(tmp_path / "o.bin"), "--config", str(conf)]) == 3
