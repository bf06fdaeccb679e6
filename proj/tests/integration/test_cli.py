import hashlib
import json
import os
import subprocess
import time
from pathlib import Path

import numpy as np
import pytest

Image = pytest.importorskip("PIL.Image")

CLI = os.environ.get("CCE_CLI")
pytestmark = pytest.mark.skipif(not CLI, reason="CCE_CLI not set")


def cce(*args, cwd=None):
    return subprocess.run([CLI, *map(str, args)], cwd=cwd, capture_output=True, text=True)


def ok(*args, cwd=None):
    r = cce(*args, cwd=cwd)
    assert r.returncode == 0, r.stdout + r.stderr
    return r


def digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def tree_digest(root):
    root = Path(root)
    return {str(p.relative_to(root)): digest(p) for p in sorted(root.rglob("*")) if p.is_file()}


def columns(path, n=4):
    a = np.asarray(Image.open(path).convert("RGB"))
    w = a.shape[1] // n
    return [a[:, i * w:(i + 1) * w] for i in range(n)]


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    ok("gen-data", "--count", 16, "--size", 16, "--val", 4, "--seed", 3, "--out", "data", cwd=root)
    return root


@pytest.fixture(scope="module")
def trained(work):
    start = time.monotonic()
    ok("train", "--data", "data", "--epochs", 2, "--latent-dim", 16, "--stages", "1,2,single", "--out", "t",
       cwd=work)
    elapsed = time.monotonic() - start
    return work / "t", elapsed


def test_gen_data_layout_and_determinism(work):
    data = work / "data"
    assert len(list((data / "train").glob("*.png"))) == 12
    assert len(list((data / "val").glob("*.png"))) == 4
    manifest = json.loads((data / "manifest.json").read_text())
    assert manifest
    ok("gen-data", "--count", 16, "--size", 16, "--val", 4, "--seed", 3, "--out", "data2", cwd=work)
    first, second = tree_digest(data), tree_digest(work / "data2")
    first.pop("config.txt")
    second.pop("config.txt")
    assert first == second


def test_gen_data_rejects_odd_size(tmp_path):
    r = cce("gen-data", "--size", 15, "--out", tmp_path / "x")
    assert r.returncode == 1
    assert "synth.size" in r.stderr


def test_train_smoke(trained):
    out, elapsed = trained
    assert elapsed < 60
    for name in ("stage1.cepk", "cascade.ccpk", "single.cepk", "train_log.jsonl", "config.txt"):
        assert (out / name).is_file()
    records = [json.loads(line) for line in (out / "train_log.jsonl").read_text().splitlines()]
    assert {r["stage"] for r in records} >= {"stage1", "stage2"}
    assert all(np.isfinite(r["rec_loss"]) for r in records)


def test_stage1_only_and_embedded_hash(work, trained):
    r = ok("train", "--data", "data", "--epochs", 2, "--latent-dim", 16, "--stages", "1", "--out", "only1",
           cwd=work)
    assert sorted(p.name for p in (work / "only1").iterdir()) == ["config.txt", "stage1.cepk", "train_log.jsonl"]
    out, _ = trained
    assert digest(work / "only1" / "stage1.cepk") == digest(out / "stage1.cepk")
    standalone = next(l for l in r.stdout.splitlines() if "stage1 checkpoint" in l).split()[-1]

    r = ok("train", "--data", "data", "--epochs", 2, "--latent-dim", 16, "--stages", "2",
           "--stage1", "only1/stage1.cepk", "--out", "only2", cwd=work)
    embedded = next(l for l in r.stdout.splitlines() if "embedded stage1" in l).split()[-1]
    assert embedded == standalone
    assert digest(work / "only2" / "cascade.ccpk") == digest(out / "cascade.ccpk")


def test_resolved_config_reproduces(work, trained):
    out, _ = trained
    ok("train", "--config", out / "config.txt", "--out", "replay", cwd=work)
    for name in ("stage1.cepk", "cascade.ccpk", "single.cepk"):
        assert digest(work / "replay" / name) == digest(out / name)


def test_eval_nsd_idempotent_and_layout(work, trained):
    out, _ = trained
    args = ["eval-nsd", out / "single.cepk", out / "cascade.ccpk", "--names", "single,cascade", "--data", "data",
            "--masks", 8, "--images", 4]
    ok(*args, "--out", "e1", cwd=work)
    ok(*args, "--out", "e2", cwd=work)
    a, b = tree_digest(work / "e1"), tree_digest(work / "e2")
    a.pop("config.txt", None)
    b.pop("config.txt", None)
    assert a == b
    for name in ("single", "cascade"):
        d = work / "e1" / name
        assert (d / "report.txt").is_file() and (d / "latents.txt").is_file()
        assert len(list((d / "latents").glob("*.ltnt"))) == 4
        records = [json.loads(l) for l in (d / "records.jsonl").read_text().splitlines()]
        assert len(records) == 4
    assert (work / "e1" / "comparison.txt").is_file()

    ok("eval-nsd", "--from-latents", work / "e1" / "single" / "latents.txt", "--out", "e3", cwd=work)
    assert (work / "e3" / "single" / "report.txt").read_text() == (work / "e1" / "single" / "report.txt").read_text()


def test_eval_nsd_rejects_dimension_mismatch(work, trained):
    out, _ = trained
    ok("train", "--data", "data", "--epochs", 1, "--latent-dim", 8, "--stages", "single", "--out", "d8", cwd=work)
    r = cce("eval-nsd", out / "single.cepk", "d8/single.cepk", "--data", "data", "--masks", 4, "--images", 2,
            "--out", "bad", cwd=work)
    assert r.returncode == 1
    assert "dimension" in r.stderr.lower() or "latent" in r.stderr.lower()


def test_inpaint_batch_and_empty_mask(work, trained):
    out, _ = trained
    ok("inpaint", out / "cascade.ccpk", "--data", "data", "--count", 10, "--out", "ip", cwd=work)
    # Only 4 validation images exist, so the batch is capped there.
    pngs = sorted((work / "ip").glob("*_inpaint.png"))
    assert len(pngs) == 4
    original, masked, coarse, final = columns(pngs[0])
    assert original.shape == (16, 16, 3)
    assert (masked != original).any()

    Image.fromarray(np.zeros((16, 16), np.uint8)).save(work / "empty.png")
    for model in ("cascade.ccpk", "single.cepk"):
        ok("inpaint", out / model, "--data", "data", "--mask-png", "empty.png", "--out", "ip_empty", cwd=work)
        for png in (work / "ip_empty").glob("*_inpaint.png"):
            original, masked, _, final = columns(png)
            assert (masked == original).all()
            assert (final == original).all()


def test_inpaint_batch_of_ten(tmp_path):
    ok("gen-data", "--count", 24, "--size", 16, "--val", 12, "--out", "d", cwd=tmp_path)
    ok("train", "--data", "d", "--epochs", 1, "--latent-dim", 8, "--stages", "single", "--out", "m", cwd=tmp_path)
    ok("inpaint", "m/single.cepk", "--data", "d", "--out", "ip", cwd=tmp_path)
    assert len(list((tmp_path / "ip").glob("*_inpaint.png"))) == 10


def test_inpaint_resolution_mismatch(work, trained, tmp_path):
    out, _ = trained
    Image.fromarray(np.zeros((32, 32, 3), np.uint8)).save(tmp_path / "big.png")
    r = cce("inpaint", out / "single.cepk", "--images", tmp_path / "big.png", "--out", tmp_path / "o")
    assert r.returncode == 2


def test_grad_check_exit_codes(tmp_path):
    r = ok("grad-check", "--resolution", 8, "--out", tmp_path / "g")
    assert "FAIL" not in r.stdout and "threshold 1e-05" in r.stdout
    assert (tmp_path / "g" / "grad_check.txt").is_file()
    r = cce("grad-check", "--resolution", 8, "--mutate", "--out", tmp_path / "m")
    assert r.returncode == 3
    assert "FAIL" in r.stdout


def test_mask_preview(tmp_path):
    r = ok("mask-preview", "--count", 5, "--size", 32, "--mask", "random_blocks", "--seed", 7, "--out", tmp_path)
    pngs = sorted(tmp_path.glob("mask_*.png"))
    assert len(pngs) == 5
    for p in pngs:
        m = np.asarray(Image.open(p).convert("L")) > 127
        assert 0 < m.mean() <= 0.25
    assert r.stdout.count("coverage") == 5


def test_bad_usage_exit_code(tmp_path):
    assert cce("train", "--set", "nonsense", "--out", tmp_path).returncode == 1
    assert cce("train", "--set", "train.mask=diagonal", "--out", tmp_path).returncode == 1
    assert cce("no-such-command").returncode == 1
