#!/usr/bin/env python3
"""End-to-end demo on synthetic data: generate, split, train, decode, score.

Writes everything under ./pipeline_out. Sizes are kept small so the whole
run takes a few minutes on one core; raise SENTENCES / EPOCHS for a
fuller experiment.
"""

import pathlib
import sys

from cuedspeech.cli import main

OUT = pathlib.Path("pipeline_out")
SENTENCES = 60
EPOCHS = 50
ARCH = "three-stream"
SEED = 1
# small corpus: smaller batches and a higher rate give enough optimiser steps
BATCH = 8
LR = 0.002


def run(*args):
    print("+ cuedspeech " + " ".join(args))
    code = main(list(args))
    if code != 0:
        sys.exit(code)


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    corpus = OUT / "corpus.jsonl"
    plan = OUT / "plan.json"
    rundir = OUT / "run"

    run("synth", "--out", str(corpus), "--sentences", str(SENTENCES),
        "--repeats", "2", "--seed", str(SEED), "--alphabet", "v1")
    run("split", "--corpus", str(corpus), "--out", str(plan), "--k", "10", "--mode", "ordered")
    run("train", "--corpus", str(corpus), "--outdir", str(rundir),
        "--split", str(plan), "--fold", "0", "--arch", ARCH,
        "--seed", str(SEED), "--epochs", str(EPOCHS),
        "--batch-size", str(BATCH), "--lr", str(LR),
        "--hidden", "48", "--fusion-hidden", "96")
    run("decode", "--checkpoint", str(rundir / "best.json"), "--corpus", str(corpus),
        "--features", str(rundir / "features.json"), "--split", str(plan), "--fold", "0",
        "--decode", "greedy", "--out", str(OUT / "hyp_greedy.jsonl"))
    run("eval", "--ref", str(corpus), "--hyp", str(OUT / "hyp_greedy.jsonl"),
        "--out", str(OUT / "report_greedy.json"))
    run("decode", "--checkpoint", str(rundir / "best.json"), "--corpus", str(corpus),
        "--features", str(rundir / "features.json"), "--split", str(plan), "--fold", "0",
        "--decode", "lexicon", "--lexicon", str(corpus) + ".lexicon",
        "--beam-width", "64", "--out", str(OUT / "hyp_lexicon.jsonl"))
    run("eval", "--ref", str(corpus), "--hyp", str(OUT / "hyp_lexicon.jsonl"),
        "--out", str(OUT / "report_lexicon.json"), "--words")
    print(f"done; reports in {OUT}/")
