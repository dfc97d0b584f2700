import hashlib
import json
import os

import numpy as np
import pytest

from starkit import (
    PolicyConfig,
    PolicyStep,
    PredictionSet,
    save_policy,
    save_record,
)
from starkit.cli import main
from starkit.metrics import save_predictions
from starkit.records import load_metadata, load_record


def tree_digest(directory):
    """Stable digest of every file in a directory tree."""
    h = hashlib.sha256()
    for root, _, files in sorted(os.walk(directory)):
        for name in sorted(files):
            path = os.path.join(root, name)
            h.update(name.encode())
            h.update(open(path, "rb").read())
    return h.hexdigest()


def run_synth(out_dir, count=3, **extra):
    argv = ["synth", str(out_dir), "--duration", "5", "--fs", "250",
            "--leads", "2", "--count", str(count)]
    for key, value in extra.items():
        argv += [f"--{key}", str(value)]
    assert main(argv) == 0


class TestSynthCommand:
    def test_writes_records_peaks_manifest(self, tmp_path):
        run_synth(tmp_path / "out")
        names = sorted(os.listdir(tmp_path / "out"))
        assert "manifest.json" in names
        sigs = [n for n in names if n.endswith(".sig")]
        assert len(sigs) == 3
        for sig in sigs:
            assert f"{sig}.hdr" in names
            assert f"{sig}.peaks" in names
        doc = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert doc["format"] == "starmanifest/1"
        assert len(doc["records"]) == 3

    def test_same_flags_twice_identical(self, tmp_path):
        run_synth(tmp_path / "a")
        run_synth(tmp_path / "b")
        assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")

    def test_ten_peak_default_record(self, tmp_path):
        assert main(["synth", str(tmp_path / "out")]) == 0
        doc = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert doc["records"][0]["n_peaks"] == 10

    def test_zero_duration_fails(self, tmp_path):
        assert main(["synth", str(tmp_path / "out"), "--duration", "0"]) == 1


class TestAugmentCommand:
    @pytest.fixture
    def fixture_dir(self, tmp_path):
        in_dir = tmp_path / "in"
        run_synth(in_dir, count=4)
        os.remove(in_dir / "manifest.json")
        return tmp_path

    def _policy(self, path, steps, seed=11):
        save_policy(PolicyConfig(steps=tuple(steps), master_seed=seed),
                    str(path))

    def test_empty_policy_identity(self, fixture_dir):
        policy = fixture_dir / "empty.json"
        self._policy(policy, [])
        out = fixture_dir / "out"
        assert main(["augment", str(fixture_dir / "in"), str(out),
                     "--policy", str(policy)]) == 0
        for name in os.listdir(fixture_dir / "in"):
            if name.endswith(".hdr") or name.endswith(".peaks"):
                continue
            assert (out / name).read_bytes() == \
                (fixture_dir / "in" / name).read_bytes()

    def test_star_policy_emits_metadata(self, fixture_dir):
        policy = fixture_dir / "star.json"
        self._policy(policy, [PolicyStep(kind="star", probability=1.0)])
        out = fixture_dir / "out"
        assert main(["augment", str(fixture_dir / "in"), str(out),
                     "--policy", str(policy), "--emit-meta"]) == 0
        sigs = [n for n in os.listdir(fixture_dir / "in")
                if n.endswith(".sig")]
        for sig in sigs:
            meta = load_metadata(str(out / f"{sig}.meta"))
            assert not meta.is_identity

    def test_rerun_byte_identical(self, fixture_dir):
        policy = fixture_dir / "p.json"
        self._policy(policy, [
            PolicyStep(kind="star", probability=0.5),
            PolicyStep(kind="multiply_triangle", probability=0.5,
                       params={"alpha": 2.0}),
            PolicyStep(kind="add_noise", probability=1.0,
                       params={"sigma": 0.01}),
        ])
        for sub in ("a", "b"):
            assert main(["augment", str(fixture_dir / "in"),
                         str(fixture_dir / sub), "--policy", str(policy),
                         "--emit-meta"]) == 0
        assert tree_digest(fixture_dir / "a") == tree_digest(fixture_dir / "b")

    def test_worker_counts_agree(self, fixture_dir):
        policy = fixture_dir / "p.json"
        self._policy(policy, [
            PolicyStep(kind="star", probability=1.0),
            PolicyStep(kind="add_noise", probability=1.0,
                       params={"sigma": 0.01}),
        ])
        for sub, workers in (("w1", "1"), ("w8", "8")):
            assert main(["augment", str(fixture_dir / "in"),
                         str(fixture_dir / sub), "--policy", str(policy),
                         "--workers", workers]) == 0
        assert tree_digest(fixture_dir / "w1") == \
            tree_digest(fixture_dir / "w8")

    def test_seed_override_changes_output(self, fixture_dir):
        policy = fixture_dir / "p.json"
        self._policy(policy, [PolicyStep(kind="add_noise", probability=1.0,
                                         params={"sigma": 0.01})])
        assert main(["augment", str(fixture_dir / "in"),
                     str(fixture_dir / "s1"), "--policy", str(policy)]) == 0
        assert main(["augment", str(fixture_dir / "in"),
                     str(fixture_dir / "s2"), "--policy", str(policy),
                     "--seed", "999"]) == 0
        sig = [n for n in os.listdir(fixture_dir / "in")
               if n.endswith(".sig")][0]
        assert (fixture_dir / "s1" / sig).read_bytes() != \
            (fixture_dir / "s2" / sig).read_bytes()


class TestInvertCommand:
    def test_round_trip_reports_error(self, tmp_path, capsys):
        in_dir = tmp_path / "in"
        run_synth(in_dir, count=2)
        policy = tmp_path / "star.json"
        save_policy(PolicyConfig(steps=(
            PolicyStep(kind="star", probability=1.0,
                       params={"a2": 1.5, "a3": 0.5}),
        ), master_seed=3), str(policy))
        fwd = tmp_path / "fwd"
        assert main(["augment", str(in_dir), str(fwd),
                     "--policy", str(policy), "--emit-meta"]) == 0
        back = tmp_path / "back"
        assert main(["invert", str(fwd), str(fwd), str(back),
                     "--reference", str(in_dir)]) == 0
        reported = capsys.readouterr().out.strip().splitlines()
        assert len(reported) == 2
        for line in reported:
            assert float(line.split("\t")[1]) <= 1e-2

    def test_missing_metadata_skipped(self, tmp_path, capsys):
        in_dir = tmp_path / "in"
        run_synth(in_dir, count=1)
        out = tmp_path / "out"
        assert main(["invert", str(in_dir), str(tmp_path / "nometa"),
                     str(out)]) == 0
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["records"][0]["skipped"] == "missing metadata"
        assert "no metadata" in capsys.readouterr().err


class TestDiagnoseCommand:
    def test_triangle_spectrum_zero_rows(self, tmp_path):
        out = tmp_path / "spec.tsv"
        assert main(["diagnose", "triangle-spectrum", "--duration", "2",
                     "--freq-max", "4", "--freq-step", "0.5",
                     "--out", str(out)]) == 0
        rows = {float(a): float(b) for a, b in
                (ln.split("\t") for ln in out.read_text().splitlines())}
        for k_hz in (1.0, 2.0, 3.0):
            assert abs(rows[k_hz]) <= 1e-12
        assert rows[0.0] == 2.0

    def test_psd_shift_self_zero(self, tmp_path):
        in_dir = tmp_path / "in"
        run_synth(in_dir, count=1)
        sig = [n for n in os.listdir(in_dir) if n.endswith(".sig")][0]
        out = tmp_path / "psd.tsv"
        assert main(["diagnose", "psd-shift",
                     "--record", str(in_dir / sig),
                     "--other", str(in_dir / sig), "--out", str(out)]) == 0
        for ln in out.read_text().splitlines():
            _, delta, _ = ln.split("\t")
            assert float(delta) == 0.0

    def test_apex_sweep_alpha_one_zero_bias(self, tmp_path):
        in_dir = tmp_path / "in"
        run_synth(in_dir, count=1)
        sig = [n for n in os.listdir(in_dir) if n.endswith(".sig")][0]
        out = tmp_path / "sweep.tsv"
        assert main(["diagnose", "apex-sweep",
                     "--record", str(in_dir / sig),
                     "--peaks", str(in_dir / f"{sig}.peaks"),
                     "--alpha", "1.0", "--out", str(out)]) == 0
        for ln in out.read_text().splitlines():
            assert abs(float(ln.split("\t")[1])) <= 1e-12

    def test_local_snr_uses_stored_peaks(self, tmp_path):
        in_dir = tmp_path / "in"
        run_synth(in_dir, count=1, noise="0.02")
        sig = [n for n in os.listdir(in_dir) if n.endswith(".sig")][0]
        out = tmp_path / "snr.tsv"
        assert main(["diagnose", "local-snr",
                     "--record", str(in_dir / sig),
                     "--peaks", str(in_dir / f"{sig}.peaks"),
                     "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == len(
            open(in_dir / f"{sig}.peaks").read().split())


class TestStratifyCommand:
    def test_writes_assignment(self, tmp_path):
        index = tmp_path / "index.tsv"
        lines = []
        rng = np.random.default_rng(0)
        for source in ("siteA", "siteB"):
            for i in range(25):
                label = "AF" if rng.random() < 0.4 else ""
                lines.append(f"{source}-{i}\t{source}\t{label}\tp/{i}.sig")
        index.write_text("\n".join(lines) + "\n")
        out = tmp_path / "folds.tsv"
        assert main(["stratify", str(index), "--k", "5",
                     "--out", str(out)]) == 0
        rows = out.read_text().splitlines()
        assert len(rows) == 50
        folds = {int(r.split("\t")[1]) for r in rows}
        assert folds == set(range(5))


class TestMetricsCommand:
    def _write_preds(self, path, scores, labels):
        preds = PredictionSet(scores=np.asarray(scores),
                              labels=np.asarray(labels),
                              class_names=("c0",))
        save_predictions(preds, str(path))

    def test_perfect_predictions(self, tmp_path, capsys):
        path = tmp_path / "preds.tsv"
        self._write_preds(path, [[0.9], [0.8], [0.1]], [[1], [1], [0]])
        assert main(["metrics", str(path), "--metric", "auroc_micro"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["auroc_micro"]["point"] == 1.0

    def test_bootstrap_report(self, tmp_path, capsys):
        path = tmp_path / "preds.tsv"
        rng = np.random.default_rng(1)
        labels = (rng.random((60, 1)) < 0.5).astype(int)
        scores = labels + rng.normal(0, 0.5, (60, 1))
        self._write_preds(path, scores, labels)
        assert main(["metrics", str(path), "--metric", "ap_micro",
                     "--bootstrap", "200", "--threshold-criterion",
                     "f1"]) == 0
        report = json.loads(capsys.readouterr().out)
        block = report["ap_micro"]
        assert block["ci_lower"] <= block["point"] <= block["ci_upper"]
        assert len(report["thresholds"]["values"]) == 1

    def test_malformed_file_exits_nonzero(self, tmp_path, capsys):
        path = tmp_path / "bad.tsv"
        path.write_text("c0\tc1\nr0\tsite\t0.5\t1\n")
        assert main(["metrics", str(path)]) == 1
        assert "starkit metrics" in capsys.readouterr().err


class TestManifest:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0

    def test_csv_records_discovered(self, tmp_path):
        from starkit import EcgRecord

        in_dir = tmp_path / "in"
        in_dir.mkdir()
        record = EcgRecord(data=np.arange(16.0).reshape(2, 8), fs_hz=250.0,
                           record_id="csv-1")
        save_record(record, str(in_dir / "csv-1.csv"))
        policy = tmp_path / "empty.json"
        save_policy(PolicyConfig(steps=(), master_seed=0), str(policy))
        out = tmp_path / "out"
        assert main(["augment", str(in_dir), str(out),
                     "--policy", str(policy)]) == 0
        back = load_record(str(out / "csv-1.csv"))
        np.testing.assert_array_equal(back.data, record.data)
