"""Continuous cued-speech phonetic decoding on landmark streams."""

from .corpus import (
    FINGERTIP_LANDMARK,
    CuedFrame,
    PhonemeAlphabet,
    Utterance,
    alphabet,
    load_corpus,
    save_corpus,
)
from .ctc import CtcResult, brute_force_likelihood, ctc_loss, greedy_decode
from .evaluation import (
    AlignmentStats,
    SplitPlan,
    accuracy,
    align,
    kfold_split,
    overlap_fraction,
    wilson_interval,
    word_correctness,
)
from .features import (
    FeatureExtractor,
    PcaModel,
    StreamSet,
    build_streams,
    fit_feature_extractor,
    fit_pca,
    project,
)
from .lexicon import (
    PrefixTree,
    build_prefix_tree,
    exhaustive_decode,
    load_lexicon,
    save_lexicon,
    token_passing_decode,
)
from .network import (
    ModelParams,
    Posteriorgram,
    backward,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .synthetic import SyntheticSpec, generate_synthetic, geometry_for, pseudo_lexicon
from .training import AdamState, EpochLog, TrainConfig, adam_step, train

__version__ = "0.1.0"
