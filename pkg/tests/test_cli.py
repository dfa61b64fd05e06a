import numpy as np
import pytest

from ferasec.cli import main
from ferasec.features import load_features
from ferasec.frames import load_frameset, load_manifest, store_frameset, FrameSet
from ferasec.hmm import load_model


SCRIPTS_TEXT = """\
[left] duration=0.45
0.30; bump(0.12, 0.05, 0.10); 0.9
[right] duration=0.45
0.30; bump(0.30, 0.05, -0.10); 0.9
[far] duration=0.45
0.55; bump(0.20, 0.08, -0.15); 0.9
"""


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_corpus")
    scripts = out / "scripts.txt"
    scripts.write_text(SCRIPTS_TEXT, encoding="utf-8")
    code = main(
        [
            "generate",
            "--scripts", str(scripts),
            "--reps", "3",
            "--noise", "0.5",
            "--onset-jitter", "0.02",
            "--duration-jitter", "0.02",
            "--seed", "7",
            "--out", str(out),
        ]
    )
    assert code == 0
    return out


class TestGenerate:
    def test_writes_manifest_and_files(self, corpus_dir):
        manifest = load_manifest(corpus_dir / "manifest.tsv")
        assert len(manifest.entries) == 9
        assert manifest.class_count == 3
        fs = load_frameset(manifest.resolve(manifest.entries[0]))
        assert fs.n == 256

    def test_preset_generation(self, tmp_path, capsys):
        code = main(
            ["generate", "--reps", "2", "--difficulty", "easy", "--seed", "1",
             "--out", str(tmp_path / "preset")]
        )
        assert code == 0
        assert "16 frame sets" in capsys.readouterr().out
        manifest = load_manifest(tmp_path / "preset" / "manifest.tsv")
        assert manifest.class_count == 8


class TestExtract:
    def test_extract_writes_feature_matrix(self, corpus_dir, tmp_path):
        manifest = load_manifest(corpus_dir / "manifest.tsv")
        item = manifest.resolve(manifest.entries[0])
        out = tmp_path / "item.ftm"
        code = main(["extract", "--input", str(item), "--output", str(out)])
        assert code == 0
        matrix = load_features(out)
        assert matrix.shape[0] == 6

    def test_missing_input_exits_2(self, tmp_path, capsys):
        code = main(
            ["extract", "--input", str(tmp_path / "nope.frs"), "--output", str(tmp_path / "o")]
        )
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_bad_file_exits_2(self, tmp_path):
        bad = tmp_path / "bad.frs"
        bad.write_bytes(b"JUNKJUNKJUNKJUNKJUNKJUNK" + bytes(8))
        code = main(["extract", "--input", str(bad), "--output", str(tmp_path / "o")])
        assert code == 2


@pytest.fixture(scope="module")
def trained(corpus_dir, tmp_path_factory):
    model_path = tmp_path_factory.mktemp("model") / "model.hmm"
    code = main(
        [
            "train",
            "--corpus", str(corpus_dir / "manifest.tsv"),
            "--seed", "3",
            "--rounds", "2",
            "--epochs", "6",
            "--batch-size", "32",
            "--learning-rate", "0.05",
            "--out", str(model_path),
        ]
    )
    assert code == 0
    return model_path


class TestTrainAndClassify:

    def test_model_loads(self, trained):
        model = load_model(trained)
        assert model.class_count == 3

    def test_classify_hmm(self, corpus_dir, trained, tmp_path, capsys):
        manifest = load_manifest(corpus_dir / "manifest.tsv")
        item = manifest.resolve(manifest.entries[0])
        feats = tmp_path / "t.ftm"
        assert main(["extract", "--input", str(item), "--output", str(feats)]) == 0
        capsys.readouterr()
        code = main(
            ["classify", "--method", "hmm", "--model", str(trained), "--test", str(feats)]
        )
        assert code == 0
        line = capsys.readouterr().out.strip()
        label, score = line.split("\t")
        assert label in {"left", "right", "far"}

    def test_classify_dtw(self, corpus_dir, tmp_path, capsys):
        manifest = load_manifest(corpus_dir / "manifest.tsv")
        item = manifest.resolve(manifest.entries[0])
        feats = tmp_path / "t.ftm"
        assert main(["extract", "--input", str(item), "--output", str(feats)]) == 0
        capsys.readouterr()
        code = main(
            ["classify", "--method", "dtw", "--refs", str(corpus_dir / "manifest.tsv"),
             "--test", str(feats)]
        )
        assert code == 0
        line = capsys.readouterr().out.strip()
        label, distance = line.split("\t")
        assert label == manifest.entries[0].label
        # small residual: the feature file stores float32, references are in-memory
        assert float(distance) < 1e-3

    def test_classify_dtw_requires_refs(self, tmp_path):
        feats = tmp_path / "t.ftm"
        from ferasec.features import store_features

        store_features(np.zeros((6, 8)), feats)
        assert main(["classify", "--method", "dtw", "--test", str(feats)]) == 2


class TestLoocvCommand:
    def test_dtw_loocv_with_report(self, corpus_dir, tmp_path, capsys):
        report_path = tmp_path / "report.txt"
        code = main(
            ["loocv", "--method", "dtw", "--corpus", str(corpus_dir / "manifest.tsv"),
             "--seed", "5", "--report", str(report_path)]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "accuracy" in out
        text = report_path.read_text(encoding="utf-8")
        assert "method=dtw" in text

    def test_hmm_cr_alias(self, corpus_dir, capsys):
        code = main(
            ["loocv", "--method", "hmm-cr", "--corpus", str(corpus_dir / "manifest.tsv"),
             "--seed", "5", "--fast-loocv", "--rounds", "1", "--epochs", "2",
             "--batch-size", "32"]
        )
        assert code == 0
        assert "hmm-clutterreduced" in capsys.readouterr().out


class TestAid:
    def test_pass_and_fail(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        ref = rng.uniform(0, 100, (1, 256))
        store_frameset(FrameSet(ref), tmp_path / "ref.frs")
        store_frameset(FrameSet(ref), tmp_path / "same.frs")
        shifted = np.roll(ref, 64, axis=1)
        store_frameset(FrameSet(shifted), tmp_path / "moved.frs")

        code = main(["aid", "--reference", str(tmp_path / "ref.frs"),
                     "--live", str(tmp_path / "same.frs")])
        assert code == 0
        assert "PASS" in capsys.readouterr().out

        code = main(["aid", "--reference", str(tmp_path / "ref.frs"),
                     "--live", str(tmp_path / "moved.frs"), "--threshold", "0.95"])
        assert code == 0
        assert "FAIL" in capsys.readouterr().out

    def test_bad_threshold_exits_2(self, tmp_path):
        rng = np.random.default_rng(1)
        store_frameset(FrameSet(rng.uniform(0, 100, (1, 16))), tmp_path / "r.frs")
        code = main(["aid", "--reference", str(tmp_path / "r.frs"),
                     "--live", str(tmp_path / "r.frs"), "--threshold", "1.5"])
        assert code == 2


class TestArgumentErrors:
    def test_unknown_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
