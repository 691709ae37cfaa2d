import filecmp
import json
import os

from frdlat.cli import main

MINIMAL = {"d": 2, "m": 1, "L": 3, "N": 1, "A": [1.0]}


def write_cfg(tmp_path, name="cfg.json", **overrides):
    doc = dict(MINIMAL)
    doc.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def outdir(tmp_path, name="out"):
    d = tmp_path / name
    d.mkdir(exist_ok=True)
    return str(d)


def same_tree(a, b):
    names = sorted(os.listdir(a))
    if names != sorted(os.listdir(b)):
        return False
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    return not mismatch and not errors


def test_decompose_writes_artifacts(tmp_path):
    cfg = write_cfg(tmp_path)
    out = outdir(tmp_path)
    assert main(["decompose", "--config", cfg, "--out", out]) == 0
    for name in ("kernel_k1.csv", "kernel_k2.csv", "diagnostics.json"):
        assert os.path.exists(os.path.join(out, name))
    diag = json.loads(open(os.path.join(out, "diagnostics.json")).read())
    assert diag["sum_residual"] <= 1e-12
    assert diag["schedule"] == [None]


def test_decompose_is_byte_stable(tmp_path):
    cfg = write_cfg(tmp_path)
    a = outdir(tmp_path, "a")
    b = outdir(tmp_path, "b")
    assert main(["decompose", "--config", cfg, "--out", a]) == 0
    assert main(["decompose", "--config", cfg, "--out", b]) == 0
    assert same_tree(a, b)


def test_impossible_tolerance_fails_named_check(tmp_path, capsys):
    cfg = write_cfg(tmp_path, L=5, A=[[2.0, 0.5], [0.5, 1.0]], schedule=[3],
                    tolerances={"sum": 1e-300})
    out = outdir(tmp_path)
    capsys.readouterr()
    assert main(["decompose", "--config", cfg, "--out", out]) == 1
    err = capsys.readouterr().err
    assert "check failed: sum_residual" in err


def test_verify_minimal_config(tmp_path):
    cfg = write_cfg(tmp_path)
    out = outdir(tmp_path)
    assert main(["verify", "--config", cfg, "--out", out]) == 0
    report = json.loads(open(os.path.join(out, "verify_report.json")).read())
    assert all(report["checks"].values())
    assert report["oracle"]["performed"] is True
    assert report["decay"]["performed"] is False
    assert os.path.exists(os.path.join(out, "envelope.csv"))


def test_verify_with_two_live_scales(tmp_path):
    cfg = write_cfg(tmp_path, L=5, N=2, schedule=[3, 5])
    out = outdir(tmp_path)
    assert main(["verify", "--config", cfg, "--out", out]) == 0
    report = json.loads(open(os.path.join(out, "verify_report.json")).read())
    assert report["decay"]["performed"] is True
    assert report["decay"]["slopes"]["0,0"] < 0.0
    assert os.path.exists(os.path.join(out, "decay.csv"))
    assert report["range_residual"][0] is not None


def test_sample_artifacts_and_thread_identity(tmp_path):
    cfg = write_cfg(tmp_path, samples=400)
    a = outdir(tmp_path, "a")
    b = outdir(tmp_path, "b")
    assert main(["sample", "--config", cfg, "--out", a, "--threads", "1"]) == 0
    assert main(["sample", "--config", cfg, "--out", b, "--threads", "4"]) == 0
    assert same_tree(a, b)
    report = json.loads(open(os.path.join(a, "sample_report.json")).read())
    assert report["n"] == 400
    assert report["seed"] == 0
    assert report["gradient"]["1"] is None
    for name in (
        "covariance_k1.csv",
        "covariance_k1_se.csv",
        "covariance_k2.csv",
        "covariance_total.csv",
        "covariance_total_se.csv",
    ):
        assert os.path.exists(os.path.join(a, name))


def test_sample_seed_and_count_overrides(tmp_path):
    cfg = write_cfg(tmp_path)
    out = outdir(tmp_path)
    args = ["sample", "--config", cfg, "--out", out, "--samples", "64", "--seed", "9"]
    assert main(args) == 0
    report = json.loads(open(os.path.join(out, "sample_report.json")).read())
    assert report["n"] == 64
    assert report["seed"] == 9


def test_sample_writes_fields_on_request(tmp_path):
    cfg = write_cfg(tmp_path, samples=8, write_samples=True)
    out = outdir(tmp_path)
    assert main(["sample", "--config", cfg, "--out", out]) == 0
    lines = open(os.path.join(out, "samples.csv")).read().strip().split("\n")
    assert len(lines) == 1 + 8 * 9


def test_deriv_report(tmp_path):
    cfg = write_cfg(tmp_path)
    out = outdir(tmp_path)
    assert main(["deriv", "--config", cfg, "--out", out]) == 0
    report = json.loads(open(os.path.join(out, "deriv_report.json")).read())
    assert report["order"] == 1
    assert report["nodes"] == 64
    assert all(report["checks"].values())
    assert os.path.exists(os.path.join(out, "deriv_k1.csv"))
    assert os.path.exists(os.path.join(out, "deriv_green.csv"))


def test_exit_codes(tmp_path, capsys):
    out = outdir(tmp_path)
    assert main(["decompose", "--config", str(tmp_path / "nope.json"), "--out", out]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["decompose", "--config", str(bad), "--out", out]) == 2
    even = write_cfg(tmp_path, name="even.json", L=4)
    capsys.readouterr()
    assert main(["decompose", "--config", even, "--out", out]) == 2
    assert "odd" in capsys.readouterr().err
    cfg = write_cfg(tmp_path)
    assert main(["decompose", "--config", cfg, "--out", str(tmp_path / "missing")]) == 3
    assert main(["decompose", "--config", cfg]) == 2
    shallow = write_cfg(tmp_path, name="nodes.json", derivative={"nodes": 4})
    assert main(["deriv", "--config", shallow, "--out", out]) == 4
