import json

import pytest

import cuedspeech as cs
from cuedspeech import network
from cuedspeech.cli import build_parser, main


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A tiny synthetic corpus with split, features, and one trained model."""
    root = tmp_path_factory.mktemp("pipeline")
    corpus = root / "corpus.jsonl"
    assert run(
        "synth", "--out", str(corpus), "--sentences", "6", "--repeats", "2",
        "--seed", "3", "--alphabet", "v1",
        "--min-phonemes", "2", "--max-phonemes", "4",
        "--min-frames", "3", "--max-frames", "5",
    ) == 0
    assert run(
        "split", "--corpus", str(corpus), "--out", str(root / "plan.json"),
        "--k", "4", "--mode", "ordered",
    ) == 0
    assert run(
        "pca-fit", "--corpus", str(corpus), "--out", str(root / "features.json"),
        "--split", str(root / "plan.json"), "--fold", "0",
    ) == 0
    assert run(
        "train", "--corpus", str(corpus), "--outdir", str(root / "run"),
        "--split", str(root / "plan.json"), "--fold", "0",
        "--arch", "early-fusion", "--seed", "1", "--epochs", "2",
        "--hidden", "6", "--fusion-hidden", "6",
        "--features", str(root / "features.json"),
    ) == 0
    return root, corpus


class TestSynth:
    def test_deterministic_files(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        args = ["--sentences", "4", "--seed", "9", "--min-phonemes", "2", "--max-phonemes", "3"]
        assert run("synth", "--out", str(a), *args) == 0
        assert run("synth", "--out", str(b), *args) == 0
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.jsonl.lexicon").read_bytes() == (tmp_path / "b.jsonl.lexicon").read_bytes()

    def test_repeats_give_duplicate_texts(self, tmp_path):
        out = tmp_path / "c.jsonl"
        run("synth", "--out", str(out), "--sentences", "3", "--repeats", "2", "--seed", "0",
            "--min-phonemes", "2", "--max-phonemes", "3")
        utts = cs.load_corpus(out, cs.alphabet("v1"))
        texts = [u.text for u in utts]
        assert len(texts) == 6
        assert len(set(texts)) == 3

    def test_v2_header(self, tmp_path):
        out = tmp_path / "v2.jsonl"
        run("synth", "--out", str(out), "--sentences", "2", "--alphabet", "v2", "--seed", "0",
            "--min-phonemes", "2", "--max-phonemes", "3")
        header = json.loads(out.read_text().splitlines()[0])
        assert header["alphabet"] == "v2"
        assert len(cs.alphabet("v2").symbols) == 37


class TestTrainCommand:
    def test_defaults_match_protocol_values(self):
        parser = build_parser()
        args = parser.parse_args(["train", "--corpus", "x", "--outdir", "y", "--arch", "three-stream"])
        assert args.lr == 0.001
        assert args.batch_size == 16
        assert args.stop_patience == 10
        assert args.hidden == 128
        assert args.fusion_hidden == 256

    def test_early_fusion_checkpoint_has_no_fusion_layer(self, workspace):
        root, _ = workspace
        params, meta = network.load_checkpoint(root / "run" / "best.json")
        assert params.fusion_layer is None
        assert meta["architecture"] == "early-fusion"

    def test_run_report_names_fold(self, workspace):
        root, _ = workspace
        report = json.loads((root / "run" / "run.json").read_text())
        assert report["test_fold"] == 0
        assert report["architecture"] == "early-fusion"
        assert (root / "run" / "train_log.jsonl").read_text().count("\n") == report["epochs_run"]


class TestDecodeCommand:
    def test_greedy_hypotheses(self, workspace, tmp_path):
        root, corpus = workspace
        hyp = tmp_path / "hyp.jsonl"
        assert run(
            "decode", "--checkpoint", str(root / "run" / "best.json"),
            "--corpus", str(corpus), "--features", str(root / "features.json"),
            "--split", str(root / "plan.json"), "--fold", "0",
            "--decode", "greedy", "--out", str(hyp),
        ) == 0
        records = [json.loads(l) for l in hyp.read_text().splitlines()]
        assert records
        assert all("phonemes" in r and "words" not in r for r in records)

    def test_lexicon_mode_emits_words_with_matching_pronunciations(self, workspace, tmp_path):
        root, corpus = workspace
        hyp = tmp_path / "hyp_lex.jsonl"
        assert run(
            "decode", "--checkpoint", str(root / "run" / "best.json"),
            "--corpus", str(corpus), "--features", str(root / "features.json"),
            "--split", str(root / "plan.json"), "--fold", "0",
            "--decode", "lexicon", "--lexicon", str(corpus) + ".lexicon",
            "--beam-width", "16", "--out", str(hyp),
        ) == 0
        alpha = cs.alphabet("v1")
        lex = cs.load_lexicon(str(corpus) + ".lexicon", alpha)
        for rec in map(json.loads, hyp.read_text().splitlines()):
            assert "words" in rec
            pron = [p for w in rec["words"] for p in lex[w][0]]
            assert alpha.to_indices(rec["phonemes"]) == pron

    def test_lexicon_mode_requires_lexicon(self, workspace, tmp_path):
        root, corpus = workspace
        code = run(
            "decode", "--checkpoint", str(root / "run" / "best.json"),
            "--corpus", str(corpus), "--features", str(root / "features.json"),
            "--decode", "lexicon", "--out", str(tmp_path / "x.jsonl"),
        )
        assert code != 0


class TestEvalCommand:
    def test_perfect_hypotheses_score_one(self, workspace, tmp_path):
        root, corpus = workspace
        alpha = cs.alphabet("v1")
        utts = cs.load_corpus(corpus, alpha)
        hyp = tmp_path / "perfect.jsonl"
        with hyp.open("w") as fh:
            for u in utts:
                fh.write(json.dumps({"id": u.id, "phonemes": alpha.to_labels(u.phonemes)}) + "\n")
        report_path = tmp_path / "report.json"
        assert run("eval", "--ref", str(corpus), "--hyp", str(hyp), "--out", str(report_path)) == 0
        report = json.loads(report_path.read_text())
        assert report["accuracy"] == 1.0
        assert report["wilson_high"] == 1.0

    def test_unknown_id_is_an_error(self, workspace, tmp_path):
        root, corpus = workspace
        hyp = tmp_path / "bad.jsonl"
        hyp.write_text(json.dumps({"id": "nope", "phonemes": []}) + "\n")
        assert run("eval", "--ref", str(corpus), "--hyp", str(hyp), "--out", str(tmp_path / "r.json")) != 0

    def test_multiple_hyp_files_report_min_mean_max(self, workspace, tmp_path):
        root, corpus = workspace
        alpha = cs.alphabet("v1")
        utts = cs.load_corpus(corpus, alpha)
        h1, h2 = tmp_path / "f1.jsonl", tmp_path / "f2.jsonl"
        with h1.open("w") as fh:
            for u in utts[:4]:
                fh.write(json.dumps({"id": u.id, "phonemes": alpha.to_labels(u.phonemes)}) + "\n")
        with h2.open("w") as fh:
            for u in utts[4:8]:
                fh.write(json.dumps({"id": u.id, "phonemes": alpha.to_labels(u.phonemes[:-1])}) + "\n")
        out = tmp_path / "agg.json"
        assert run("eval", "--ref", str(corpus), "--hyp", str(h1), str(h2), "--out", str(out)) == 0
        report = json.loads(out.read_text())
        assert {"min_accuracy", "mean_accuracy", "max_accuracy"} <= set(report)
        assert report["max_accuracy"] == 1.0
        assert report["min_accuracy"] < 1.0

    def test_word_correctness_reported(self, workspace, tmp_path):
        root, corpus = workspace
        alpha = cs.alphabet("v1")
        utts = cs.load_corpus(corpus, alpha)
        hyp = tmp_path / "w.jsonl"
        with hyp.open("w") as fh:
            for u in utts[:4]:
                fh.write(json.dumps({
                    "id": u.id,
                    "phonemes": alpha.to_labels(u.phonemes),
                    "words": list(u.words),
                }) + "\n")
        out = tmp_path / "w.json"
        assert run("eval", "--ref", str(corpus), "--hyp", str(hyp), "--out", str(out), "--words") == 0
        assert json.loads(out.read_text())["word_correctness"] == 1.0


class TestBiasCommand:
    def test_report_structure_and_determinism(self, tmp_path):
        corpus = tmp_path / "bias_corpus.jsonl"
        run("synth", "--out", str(corpus), "--sentences", "8", "--repeats", "2",
            "--seed", "5", "--min-phonemes", "2", "--max-phonemes", "3",
            "--min-frames", "3", "--max-frames", "4")
        args = [
            "bias", "--corpus", str(corpus), "--k", "2", "--arch", "early-fusion",
            "--seed", "0", "--epochs", "1", "--hidden", "4", "--fusion-hidden", "4",
        ]
        out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
        assert run(*args, "--out", str(out1)) == 0
        assert run(*args, "--out", str(out2)) == 0
        assert out1.read_bytes() == out2.read_bytes()
        report = json.loads(out1.read_text())
        assert {"ordered", "shuffled", "accuracy_difference"} <= set(report)
        assert report["shuffled"]["mean_overlap_fraction"] > report["ordered"]["mean_overlap_fraction"]
        for mode in ("ordered", "shuffled"):
            assert {"mean_accuracy", "mean_overlap_fraction", "folds"} <= set(report[mode])

    def test_rejects_corpus_without_repeats(self, tmp_path):
        corpus = tmp_path / "single.jsonl"
        run("synth", "--out", str(corpus), "--sentences", "4", "--repeats", "1", "--seed", "2",
            "--min-phonemes", "2", "--max-phonemes", "3")
        assert run(
            "bias", "--corpus", str(corpus), "--k", "2", "--arch", "early-fusion",
            "--epochs", "1", "--out", str(tmp_path / "r.json"),
        ) != 0


class TestConfigFile:
    def test_config_supplies_defaults_flags_override(self, tmp_path):
        cfg = tmp_path / "synth.cfg"
        cfg.write_text("sentences = 3\nseed = 4\nmin_phonemes = 2\nmax_phonemes = 3\n")
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        assert run("synth", "--config", str(cfg), "--out", str(a)) == 0
        assert run("synth", "--config", str(cfg), "--seed", "5", "--out", str(b)) == 0
        utts = cs.load_corpus(a, cs.alphabet("v1"))
        assert len(utts) == 6  # 3 sentences x default 2 repeats
        assert a.read_bytes() != b.read_bytes()
