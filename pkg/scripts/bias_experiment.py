#!/usr/bin/env python3
"""Ordered vs shuffled split comparison on a repeated-sentence corpus.

Every sentence appears twice, so shuffling before the k-fold split leaks
test texts into training; the report quantifies the accuracy gap next to
the measured text-overlap fractions. Takes roughly ten minutes on one core.
"""

import pathlib
import sys

from cuedspeech.cli import main

OUT = pathlib.Path("bias_out")


def run(*args):
    print("+ cuedspeech " + " ".join(args))
    code = main(list(args))
    if code != 0:
        sys.exit(code)


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    corpus = OUT / "corpus.jsonl"
    # noise and hand lead are raised so the task is not saturated; the leak
    # then shows up as a shuffled-split advantage
    run("synth", "--out", str(corpus), "--sentences", "48", "--repeats", "2",
        "--seed", "2", "--min-phonemes", "3", "--max-phonemes", "7",
        "--min-frames", "3", "--max-frames", "6",
        "--min-lead", "0", "--max-lead", "8", "--noise", "0.035")
    run("bias", "--corpus", str(corpus), "--out", str(OUT / "report.json"),
        "--k", "5", "--arch", "three-stream", "--seed", "3",
        "--epochs", "40", "--batch-size", "8", "--lr", "0.002",
        "--stop-patience", "8", "--lr-patience", "4",
        "--hidden", "32", "--fusion-hidden", "64")
    print(f"done; report in {OUT}/report.json")
