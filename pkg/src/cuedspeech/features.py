"""Landmark normalisation: per-stream PCA and stream-matrix assembly."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Utterance

N_COMPONENTS = 20
SCALE_FLOOR = 1e-8


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray                      # (d,)
    components: np.ndarray                # (k, d), orthonormal rows
    explained_variance_ratio: np.ndarray  # (k,)
    scale: np.ndarray                     # (k,), projected train std, floored

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def input_dim(self) -> int:
        return self.components.shape[1]


@dataclass(frozen=True)
class StreamSet:
    """The three per-utterance feature matrices fed to the network."""

    lips: np.ndarray       # (T, 20)
    hand: np.ndarray       # (T, 20)
    fingertip: np.ndarray  # (T, 2)

    def __post_init__(self):
        if not (self.lips.shape[0] == self.hand.shape[0] == self.fingertip.shape[0]):
            raise ValueError("stream matrices disagree on frame count")

    @property
    def n_frames(self) -> int:
        return self.lips.shape[0]


def fit_pca(data: np.ndarray, n_components: int) -> PcaModel:
    """Fit PCA by eigendecomposition of the sample covariance (ddof=1).

    Components are ordered by descending eigenvalue; each row is signed so its
    largest-magnitude entry is non-negative, which makes the fit deterministic.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("data must be a 2-D matrix")
    n, d = data.shape
    if n < 2:
        raise ValueError("need at least 2 samples to fit PCA")
    if not 1 <= n_components <= min(n, d):
        raise ValueError(f"n_components must be in [1, {min(n, d)}], got {n_components}")
    mean = data.mean(axis=0)
    centred = data - mean
    cov = centred.T @ centred / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    components = eigvecs[:, order].T[:n_components].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    total = float(eigvals.sum())
    ratio = eigvals[:n_components] / total if total > 0 else np.zeros(n_components)
    scale = np.maximum(np.sqrt(eigvals[:n_components]), SCALE_FLOOR)
    return PcaModel(
        mean=mean,
        components=components,
        explained_variance_ratio=ratio,
        scale=scale,
    )


def project(model: PcaModel, frames: np.ndarray) -> np.ndarray:
    """Centre, rotate onto the components, and divide by the train-set scale."""
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 2 or frames.shape[1] != model.input_dim:
        raise ValueError(
            f"expected frames of dimension {model.input_dim}, got shape {frames.shape}"
        )
    return (frames - model.mean) @ model.components.T / model.scale


def reconstruct(model: PcaModel, projected: np.ndarray) -> np.ndarray:
    return (projected * model.scale) @ model.components + model.mean


def lip_matrix(utt: Utterance) -> np.ndarray:
    return np.array([f.lips.reshape(-1) for f in utt.frames])


def hand_matrix(utt: Utterance) -> np.ndarray:
    return np.array([f.hand.reshape(-1) for f in utt.frames])


def fingertip_matrix(utt: Utterance) -> np.ndarray:
    return np.array([f.fingertip for f in utt.frames])


def build_streams(
    utterance: Utterance,
    lips_pca: PcaModel,
    hand_pca: PcaModel,
    fingertip_norm: tuple[np.ndarray, np.ndarray],
) -> StreamSet:
    """Project an utterance onto its three normalised feature streams."""
    if utterance.n_frames == 0:
        raise ValueError(f"empty utterance {utterance.id!r}")
    if lips_pca.n_components != N_COMPONENTS or hand_pca.n_components != N_COMPONENTS:
        raise ValueError(f"stream PCA models must keep {N_COMPONENTS} components")
    ft_mean, ft_std = fingertip_norm
    ft_std = np.maximum(np.asarray(ft_std, dtype=float), SCALE_FLOOR)
    return StreamSet(
        lips=project(lips_pca, lip_matrix(utterance)),
        hand=project(hand_pca, hand_matrix(utterance)),
        fingertip=(fingertip_matrix(utterance) - ft_mean) / ft_std,
    )


@dataclass(frozen=True)
class FeatureExtractor:
    """Train-fold feature statistics, frozen for validation and test."""

    lips_pca: PcaModel
    hand_pca: PcaModel
    fingertip_mean: np.ndarray
    fingertip_std: np.ndarray

    def transform(self, utterance: Utterance) -> StreamSet:
        return build_streams(
            utterance, self.lips_pca, self.hand_pca, (self.fingertip_mean, self.fingertip_std)
        )


def fit_feature_extractor(utterances, n_components: int = N_COMPONENTS) -> FeatureExtractor:
    if not utterances:
        raise ValueError("cannot fit features on an empty utterance list")
    lips = np.concatenate([lip_matrix(u) for u in utterances])
    hand = np.concatenate([hand_matrix(u) for u in utterances])
    tips = np.concatenate([fingertip_matrix(u) for u in utterances])
    return FeatureExtractor(
        lips_pca=fit_pca(lips, n_components),
        hand_pca=fit_pca(hand, n_components),
        fingertip_mean=tips.mean(axis=0),
        fingertip_std=np.maximum(tips.std(axis=0), SCALE_FLOOR),
    )


def _pca_to_obj(model: PcaModel) -> dict:
    return {
        "n_components": model.n_components,
        "mean": model.mean.tolist(),
        "components": model.components.tolist(),
        "explained_variance_ratio": model.explained_variance_ratio.tolist(),
        "scale": model.scale.tolist(),
    }


def _pca_from_obj(obj: dict) -> PcaModel:
    model = PcaModel(
        mean=np.asarray(obj["mean"], dtype=float),
        components=np.asarray(obj["components"], dtype=float),
        explained_variance_ratio=np.asarray(obj["explained_variance_ratio"], dtype=float),
        scale=np.asarray(obj["scale"], dtype=float),
    )
    if model.n_components != obj["n_components"]:
        raise ValueError("PCA file component count disagrees with stored matrix")
    return model


def save_pca_model(model: PcaModel, path):
    Path(path).write_text(json.dumps(_pca_to_obj(model)), encoding="utf-8")


def load_pca_model(path) -> PcaModel:
    return _pca_from_obj(json.loads(Path(path).read_text(encoding="utf-8")))


def save_feature_extractor(extractor: FeatureExtractor, path):
    obj = {
        "format": "cs-features",
        "version": 1,
        "lips": _pca_to_obj(extractor.lips_pca),
        "hand": _pca_to_obj(extractor.hand_pca),
        "fingertip_mean": extractor.fingertip_mean.tolist(),
        "fingertip_std": extractor.fingertip_std.tolist(),
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_feature_extractor(path) -> FeatureExtractor:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("format") != "cs-features":
        raise ValueError(f"{path}: not a feature-extractor file")
    return FeatureExtractor(
        lips_pca=_pca_from_obj(obj["lips"]),
        hand_pca=_pca_from_obj(obj["hand"]),
        fingertip_mean=np.asarray(obj["fingertip_mean"], dtype=float),
        fingertip_std=np.asarray(obj["fingertip_std"], dtype=float),
    )
