# Copyright 2026 The slidetune Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Command-line behaviour: exit codes, overwrite guard, determinism."""

import filecmp
import os
import subprocess

import pytest

CLI = os.environ.get("SLIDETUNE_CLI")
pytestmark = pytest.mark.skipif(not CLI, reason="SLIDETUNE_CLI not set")

SMALL = ["--classes", "3", "--dim", "6", "--train-per-class", "6", "--test-per-class", "4",
         "--patches-min", "3", "--patches-max", "6"]


def run(*args, env=None):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, env=env)


@pytest.fixture()
def corpus(tmp_path):
    out = tmp_path / "corpus"
    r = run("synth", "--out", out, *SMALL)
    assert r.returncode == 0, r.stderr
    return out / "manifest.tsv"


def test_synth_guard_and_validation(tmp_path, corpus):
    again = run("synth", "--out", corpus.parent, *SMALL)
    assert again.returncode == 1
    assert run("synth", "--out", corpus.parent, "--force", *SMALL).returncode == 0
    bad = tmp_path / "bad"
    r = run("synth", "--out", bad, "--informative", "0")
    assert r.returncode == 1
    assert not bad.exists() or not any(bad.iterdir())


def test_synth_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("synth", "--out", a, "--seed", "7", *SMALL).returncode == 0
    assert run("synth", "--out", b, "--seed", "7", *SMALL).returncode == 0
    cmp = filecmp.dircmp(a, b)
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    for name in os.listdir(a / "embeddings"):
        assert filecmp.cmp(a / "embeddings" / name, b / "embeddings" / name, shallow=False)


def test_train_eval_and_zero_epochs(tmp_path, corpus):
    for method in ("simlp", "abmil"):
        out = tmp_path / method
        r = run("train", "--manifest", corpus, "--method", method, "--out", out,
                "--hidden-width", "16", "--attention-hidden", "8", "--epochs", "3")
        assert r.returncode == 0, r.stderr
        assert "parameter" in r.stdout.lower()
        assert (out / "model.ckpt").exists() and (out / "loss_trace.csv").exists()
    r = run("eval", "--manifest", corpus, "--checkpoint", tmp_path / "simlp" / "model.ckpt",
            "--bootstrap", "100")
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "simlp" / "eval_test.txt").exists()

    zero = tmp_path / "zero"
    assert run("train", "--manifest", corpus, "--out", zero, "--epochs", "0", "--seed", "5",
               "--hidden-width", "16").returncode == 0
    r = run("gradcheck", "--checkpoint", zero / "model.ckpt", "--init-seed", "5")
    assert r.returncode == 0, r.stdout + r.stderr


def test_eval_class_count_mismatch(tmp_path, corpus):
    other = tmp_path / "four"
    assert run("synth", "--out", other, *SMALL[:0], "--classes", "4", "--dim", "6",
               "--train-per-class", "3", "--test-per-class", "2").returncode == 0
    out = tmp_path / "m"
    assert run("train", "--manifest", corpus, "--out", out, "--epochs", "1",
               "--hidden-width", "8").returncode == 0
    r = run("eval", "--manifest", other / "manifest.tsv", "--checkpoint", out / "model.ckpt",
            "--bootstrap", "100")
    assert r.returncode == 1


def test_missing_embedding_names_slide(tmp_path, corpus):
    victim = sorted((corpus.parent / "embeddings").iterdir())[0]
    victim.unlink()
    r = run("train", "--manifest", corpus, "--out", tmp_path / "t", "--epochs", "1")
    assert r.returncode == 1
    assert victim.stem in r.stderr


def test_ablate_report_roundtrip(tmp_path, corpus):
    out = tmp_path / "ablate"
    r = run("ablate", "--manifest", corpus, "--out", out, "--seeds", "0", "1",
            "--bootstrap", "100", "--epochs", "1", "--hidden-width", "8")
    assert r.returncode == 0, r.stderr
    table = (out / "ablation_grid.txt").read_text()
    assert sum(line.startswith(("Mean +", "Max +")) for line in table.splitlines()) == 6
    rerendered = tmp_path / "rerendered"
    r = run("report", "--records", out / "records.jsonl", "--out", rerendered)
    assert r.returncode == 0, r.stderr
    assert (rerendered / "ablation_grid.txt").read_text() == table


def test_jobs_do_not_change_records(tmp_path, corpus):
    logs = []
    for jobs in (1, 2):
        out = tmp_path / f"jobs{jobs}"
        r = run("benchmark", "--manifest", corpus, "--out", out, "--seeds", "0", "1",
                "--methods", "simlp", "linear", "--jobs", jobs, "--bootstrap", "100",
                "--epochs", "2", "--hidden-width", "8", "--no-checkpoints")
        assert r.returncode == 0, r.stderr
        logs.append((out / "records.jsonl").read_text())
    assert logs[0] == logs[1]


def test_report_on_empty_log(tmp_path):
    empty = tmp_path / "records.jsonl"
    empty.write_text("")
    r = run("report", "--records", empty)
    assert r.returncode == 1
    assert "no records" in r.stderr


def test_gradcheck_suite():
    r = run("gradcheck")
    assert r.returncode == 0, r.stdout
    assert "abmil" in r.stdout


def test_output_root_from_environment(tmp_path):
    env = dict(os.environ, SLIDETUNE_OUT=str(tmp_path / "root"))
    r = run("synth", *SMALL, env=env)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "root" / "corpus" / "manifest.tsv").exists()
