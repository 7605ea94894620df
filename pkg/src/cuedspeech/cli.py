"""Command-line pipeline: synth, split, pca-fit, train, decode, eval, bias."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import ctc, evaluation, features, lexicon as lexicon_mod, network, synthetic, training


def _config_file_args(path: str) -> list[str]:
    """Turn ``key = value`` lines into CLI flags (flags given later win)."""
    out: list[str] = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            out.append(flag)
        elif value.lower() in ("false", "no", "off"):
            pass
        else:
            out.extend([flag, value])
    return out


def _alphabet_for(path, override: str | None) -> corpus_mod.PhonemeAlphabet:
    version = override or corpus_mod.corpus_alphabet_version(path)
    if version is None:
        raise ValueError(f"{path}: no alphabet header; pass --alphabet")
    return corpus_mod.alphabet(version)


def _plan_for(args, n_utterances: int) -> evaluation.SplitPlan:
    if getattr(args, "split", None):
        return _load_plan(args.split)
    return evaluation.kfold_split(n_utterances, min(10, n_utterances), shuffled=False)


def _save_plan(plan: evaluation.SplitPlan, path):
    obj = {
        "format": "cs-split",
        "fold_count": plan.fold_count,
        "assignments": list(plan.assignments),
        "shuffled": plan.shuffled,
        "seed": plan.seed,
    }
    Path(path).write_text(json.dumps(obj, sort_keys=True), encoding="utf-8")


def _load_plan(path) -> evaluation.SplitPlan:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("format") != "cs-split":
        raise ValueError(f"{path}: not a split-plan file")
    return evaluation.SplitPlan(
        fold_count=obj["fold_count"],
        assignments=tuple(obj["assignments"]),
        shuffled=obj["shuffled"],
        seed=obj["seed"],
    )


def _dataset(utterances, extractor):
    return [(extractor.transform(u), u.phonemes) for u in utterances]


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    spec = synthetic.SyntheticSpec(
        n_sentences=args.sentences,
        repeats=args.repeats,
        phonemes_per_sentence=(args.min_phonemes, args.max_phonemes),
        frames_per_phoneme=(args.min_frames, args.max_frames),
        hand_lead_frames=(args.min_lead, args.max_lead),
        coordinate_noise_std=args.noise,
        seed=args.seed,
    )
    alpha = corpus_mod.alphabet(args.alphabet)
    utterances = synthetic.generate_synthetic(spec, alpha)
    corpus_mod.save_corpus(args.out, utterances, alpha)
    lex_path = args.lexicon_out or (str(args.out) + ".lexicon")
    lexicon_mod.save_lexicon(synthetic.pseudo_lexicon(utterances, alpha), lex_path, alpha)
    print(f"wrote {len(utterances)} utterances to {args.out} (lexicon: {lex_path})")
    return 0


def cmd_split(args) -> int:
    alpha = _alphabet_for(args.corpus, args.alphabet)
    utterances = corpus_mod.load_corpus(args.corpus, alpha)
    plan = evaluation.kfold_split(len(utterances), args.k, args.mode == "shuffled", args.seed)
    _save_plan(plan, args.out)
    print(f"wrote {args.mode} {args.k}-fold plan for {len(utterances)} utterances to {args.out}")
    return 0


def cmd_pca_fit(args) -> int:
    alpha = _alphabet_for(args.corpus, args.alphabet)
    utterances = corpus_mod.load_corpus(args.corpus, alpha)
    if args.split:
        plan = _load_plan(args.split)
        train_utts = [utterances[i] for i in plan.complement_indices(args.fold)]
    else:
        train_utts = utterances
    extractor = features.fit_feature_extractor(train_utts, args.components)
    features.save_feature_extractor(extractor, args.out)
    lips_evr = float(extractor.lips_pca.explained_variance_ratio.sum())
    hand_evr = float(extractor.hand_pca.explained_variance_ratio.sum())
    print(
        f"fit {args.components}-component PCA on {len(train_utts)} utterances "
        f"(explained variance: lips {lips_evr:.4f}, hand {hand_evr:.4f})"
    )
    return 0


def _train_fold(utterances, alpha, plan, fold, args):
    train_utts = [utterances[i] for i in plan.complement_indices(fold)]
    valid_utts = [utterances[i] for i in plan.fold_indices(fold)]
    if args.features:
        extractor = features.load_feature_extractor(args.features)
    else:
        extractor = features.fit_feature_extractor(train_utts)
    config = training.TrainConfig(
        batch_size=args.batch_size,
        initial_lr=args.lr,
        lr_halving_patience=args.lr_patience,
        stop_patience=args.stop_patience,
        max_epochs=args.epochs,
        seed=args.seed,
    )
    model = network.init_params(
        args.arch, alpha.size, seed=args.seed, hidden=args.hidden, fusion_hidden=args.fusion_hidden
    )
    best, logs = training.train(
        model,
        _dataset(train_utts, extractor),
        _dataset(valid_utts, extractor),
        config,
        checkpoint_dir=None,
        alphabet_version=alpha.version,
    )
    return best, logs, extractor


def cmd_train(args) -> int:
    alpha = _alphabet_for(args.corpus, args.alphabet)
    utterances = corpus_mod.load_corpus(args.corpus, alpha)
    plan = _plan_for(args, len(utterances))
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    best, logs, extractor = _train_fold(utterances, alpha, plan, args.fold, args)

    network.save_checkpoint(best, outdir / "best.json", alpha.version)
    if not args.features:
        features.save_feature_extractor(extractor, outdir / "features.json")
    with (outdir / "train_log.jsonl").open("w", encoding="utf-8") as fh:
        for log in logs:
            fh.write(json.dumps(log.__dict__, sort_keys=True) + "\n")
    best_idx = min(range(len(logs)), key=lambda i: logs[i].valid_loss)
    _write_json(
        outdir / "run.json",
        {
            "architecture": args.arch,
            "alphabet": alpha.version,
            "test_fold": args.fold,
            "epochs_run": len(logs),
            "best_epoch": logs[best_idx].epoch,
            "best_valid_loss": logs[best_idx].valid_loss,
            "best_valid_accuracy": logs[best_idx].valid_accuracy,
        },
    )
    print(
        f"trained {args.arch} on fold {args.fold}: best valid loss "
        f"{logs[best_idx].valid_loss:.4f}, accuracy {logs[best_idx].valid_accuracy:.4f} "
        f"({len(logs)} epochs)"
    )
    return 0


def cmd_decode(args) -> int:
    if args.decode == "lexicon" and not args.lexicon:
        raise ValueError("--lexicon is required with --decode lexicon")
    params, meta = network.load_checkpoint(args.checkpoint)
    alpha = _alphabet_for(args.corpus, args.alphabet or meta.get("alphabet"))
    utterances = corpus_mod.load_corpus(args.corpus, alpha)
    extractor = features.load_feature_extractor(args.features)
    if args.split:
        plan = _load_plan(args.split)
        utterances = [utterances[i] for i in plan.fold_indices(args.fold)]
    tree = None
    if args.decode == "lexicon":
        tree = lexicon_mod.build_prefix_tree(lexicon_mod.load_lexicon(args.lexicon, alpha))
    with Path(args.out).open("w", encoding="utf-8") as fh:
        for utt in utterances:
            posteriors, _ = network.forward(params, extractor.transform(utt))
            if tree is None:
                hyp = ctc.greedy_decode(posteriors)
                rec = {"id": utt.id, "phonemes": alpha.to_labels(hyp)}
            else:
                try:
                    words, phonemes, score = lexicon_mod.token_passing_decode(
                        posteriors, tree, args.beam_width, args.word_penalty
                    )
                except ValueError:
                    print(f"warning: no feasible word sequence for {utt.id}", file=sys.stderr)
                    words, phonemes, score = [], [], None
                rec = {
                    "id": utt.id,
                    "phonemes": alpha.to_labels(phonemes),
                    "words": words,
                    "log_score": score,
                }
            fh.write(json.dumps(rec) + "\n")
    print(f"decoded {len(utterances)} utterances to {args.out}")
    return 0


def _load_hypotheses(path) -> dict[str, dict]:
    hyps = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rec = json.loads(line)
            hyps[rec["id"]] = rec
    return hyps


def cmd_eval(args) -> int:
    alpha = _alphabet_for(args.ref, args.alphabet)
    references = {u.id: u for u in corpus_mod.load_corpus(args.ref, alpha)}
    summaries = []
    for hyp_path in args.hyp:
        hyps = _load_hypotheses(hyp_path)
        unknown = sorted(set(hyps) - set(references))
        if unknown:
            raise ValueError(f"{hyp_path}: hypothesis ids not in reference corpus: {unknown}")
        stats = evaluation.AlignmentStats(0, 0, 0, 0)
        word_stats = evaluation.AlignmentStats(0, 0, 0, 0)
        have_words = False
        for utt_id, rec in sorted(hyps.items()):
            ref = references[utt_id]
            hyp_phonemes = alpha.to_indices(rec.get("phonemes", []))
            stats = stats + evaluation.align(ref.phonemes, hyp_phonemes)
            if "words" in rec:
                have_words = True
                word_stats = word_stats + evaluation.align(ref.words, rec["words"])
        summary = evaluation.fold_summary(stats)
        summary["hyp_file"] = str(hyp_path)
        summary["n_utterances"] = len(hyps)
        if args.words and have_words:
            summary["word_correctness"] = (
                word_stats.n_ref - word_stats.deletions - word_stats.substitutions
            ) / word_stats.n_ref
        summaries.append(summary)
    report = evaluation.across_folds(summaries) if len(summaries) > 1 else summaries[0]
    _write_json(args.out, report)
    if len(summaries) > 1:
        print(
            f"accuracy across {len(summaries)} folds: min {report['min_accuracy']:.4f} "
            f"mean {report['mean_accuracy']:.4f} max {report['max_accuracy']:.4f}"
        )
    else:
        s = summaries[0]
        print(
            f"accuracy {s['accuracy']:.4f} "
            f"(Wilson 95% [{s['wilson_low']:.4f}, {s['wilson_high']:.4f}], N={s['n_ref']})"
        )
    return 0


def cmd_bias(args) -> int:
    alpha = _alphabet_for(args.corpus, args.alphabet)
    utterances = corpus_mod.load_corpus(args.corpus, alpha)
    texts = [u.text for u in utterances]
    if len(set(texts)) == len(texts):
        raise ValueError("bias comparison needs a corpus with repeated sentence texts")
    report: dict = {}
    for mode in ("ordered", "shuffled"):
        plan = evaluation.kfold_split(len(utterances), args.k, mode == "shuffled", args.seed)
        fold_entries = []
        for fold in range(args.k):
            best, _logs, extractor = _train_fold(utterances, alpha, plan, fold, args)
            stats = evaluation.AlignmentStats(0, 0, 0, 0)
            for utt in (utterances[i] for i in plan.fold_indices(fold)):
                posteriors, _ = network.forward(best, extractor.transform(utt))
                stats = stats + evaluation.align(utt.phonemes, ctc.greedy_decode(posteriors))
            entry = evaluation.fold_summary(stats)
            entry["fold"] = fold
            entry["overlap_fraction"] = evaluation.overlap_fraction(plan, texts, fold)
            fold_entries.append(entry)
        accs = [e["accuracy"] for e in fold_entries]
        overlaps = [e["overlap_fraction"] for e in fold_entries]
        report[mode] = {
            "folds": fold_entries,
            "mean_accuracy": sum(accs) / len(accs),
            "mean_overlap_fraction": sum(overlaps) / len(overlaps),
        }
    report["accuracy_difference"] = (
        report["shuffled"]["mean_accuracy"] - report["ordered"]["mean_accuracy"]
    )
    _write_json(args.out, report)
    print(
        f"mean accuracy ordered {report['ordered']['mean_accuracy']:.4f} "
        f"vs shuffled {report['shuffled']['mean_accuracy']:.4f} "
        f"(difference {report['accuracy_difference']:+.4f}); "
        f"mean overlap ordered {report['ordered']['mean_overlap_fraction']:.4f} "
        f"vs shuffled {report['shuffled']['mean_overlap_fraction']:.4f}"
    )
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_train_options(p):
    p.add_argument("--arch", required=True, choices=network.ARCHITECTURES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--stop-patience", type=int, default=10)
    p.add_argument("--lr-patience", type=int, default=5)
    p.add_argument("--hidden", type=int, default=network.DEFAULT_HIDDEN)
    p.add_argument("--fusion-hidden", type=int, default=network.DEFAULT_FUSION_HIDDEN)
    p.add_argument("--features", help="feature-extractor file (default: fit on the train folds)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cuedspeech",
        description="Cued-speech phonetic decoding experiments on landmark corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus and its pseudo-lexicon")
    p.add_argument("--out", required=True)
    p.add_argument("--lexicon-out")
    p.add_argument("--sentences", type=int, default=200)
    p.add_argument("--repeats", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alphabet", choices=corpus_mod.ALPHABET_VERSIONS, default="v1")
    p.add_argument("--min-phonemes", type=int, default=4)
    p.add_argument("--max-phonemes", type=int, default=10)
    p.add_argument("--min-frames", type=int, default=4)
    p.add_argument("--max-frames", type=int, default=10)
    p.add_argument("--min-lead", type=int, default=0)
    p.add_argument("--max-lead", type=int, default=6)
    p.add_argument("--noise", type=float, default=0.01)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="write a k-fold split plan")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--mode", choices=("ordered", "shuffled"), default="ordered")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alphabet", choices=corpus_mod.ALPHABET_VERSIONS)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("pca-fit", help="fit per-stream PCA and fingertip statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--components", type=int, default=features.N_COMPONENTS)
    p.add_argument("--split", help="split plan; fit on the folds outside --fold")
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--alphabet", choices=corpus_mod.ALPHABET_VERSIONS)
    p.set_defaults(func=cmd_pca_fit)

    p = sub.add_parser("train", help="train one architecture on one fold")
    p.add_argument("--corpus", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--split", help="split plan (default: ordered 10-fold)")
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--alphabet", choices=corpus_mod.ALPHABET_VERSIONS)
    _add_train_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="write per-utterance hypotheses")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--decode", required=True, choices=("greedy", "lexicon"))
    p.add_argument("--lexicon")
    p.add_argument("--beam-width", type=int, default=64)
    p.add_argument("--word-penalty", type=float, default=0.0)
    p.add_argument("--split")
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--alphabet", choices=corpus_mod.ALPHABET_VERSIONS)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="score hypothesis files against a reference corpus")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True, nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--words", action="store_true", help="also report word correctness")
    p.add_argument("--alphabet", choices=corpus_mod.ALPHABET_VERSIONS)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bias", help="ordered vs shuffled k-fold comparison, end to end")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--alphabet", choices=corpus_mod.ALPHABET_VERSIONS)
    _add_train_options(p)
    p.set_defaults(func=cmd_bias)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--config" in argv:
        i = argv.index("--config")
        if i + 1 >= len(argv):
            print("error: --config needs a file path", file=sys.stderr)
            return 2
        config_args = _config_file_args(argv[i + 1])
        del argv[i : i + 2]
        argv = argv[:1] + config_args + argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
