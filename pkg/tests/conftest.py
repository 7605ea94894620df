import numpy as np
import pytest

import cuedspeech as cs


@pytest.fixture(scope="session")
def v1():
    return cs.alphabet("v1")


@pytest.fixture(scope="session")
def v2():
    return cs.alphabet("v2")


@pytest.fixture(scope="session")
def small_corpus(v1):
    spec = cs.SyntheticSpec(n_sentences=8, repeats=2, seed=11)
    return cs.generate_synthetic(spec, v1)


@pytest.fixture(scope="session")
def small_extractor(small_corpus):
    return cs.fit_feature_extractor(small_corpus)


def random_posteriorgram(rng, n_frames, n_classes):
    probs = rng.random((n_frames, n_classes + 1)) + 1e-3
    probs /= probs.sum(axis=1, keepdims=True)
    return cs.Posteriorgram(probs)


def one_hot_posteriorgram(path, n_classes):
    probs = np.zeros((len(path), n_classes + 1))
    for t, k in enumerate(path):
        probs[t, k] = 1.0
    return cs.Posteriorgram(probs)
