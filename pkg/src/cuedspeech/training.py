"""Mini-batch CTC training: Adam, plateau LR halving, early stopping."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import ctc, evaluation, network

# Validation loss must drop by at least this much to count as an improvement,
# so float noise cannot keep resetting the patience counters.
IMPROVEMENT_EPS = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    initial_lr: float = 0.001
    lr_halving_patience: int = 5
    stop_patience: int = 10
    max_epochs: int = 100
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr_halving_patience < 1 or self.stop_patience < 1:
            raise ValueError("patience values must be >= 1")
        if self.initial_lr <= 0:
            raise ValueError("initial_lr must be > 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0


def init_adam_state(params: network.ModelParams) -> AdamState:
    tensors = network.named_tensors(params)
    return AdamState(
        m={k: np.zeros_like(t) for k, t in tensors.items()},
        v={k: np.zeros_like(t) for k, t in tensors.items()},
        step=0,
    )


def adam_step(
    params: network.ModelParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> tuple[network.ModelParams, AdamState]:
    """One bias-corrected Adam update over all tensors in fixed name order."""
    tensors = network.named_tensors(params)
    if set(grads) != set(tensors):
        missing = set(tensors) ^ set(grads)
        raise ValueError(f"gradient tensors do not match parameters: {sorted(missing)}")
    step = state.step + 1
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    new_tensors = {}
    for name, tensor in tensors.items():
        g = grads[name]
        if g.shape != tensor.shape:
            raise ValueError(f"gradient shape mismatch for {name}: {g.shape} vs {tensor.shape}")
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        new_tensors[name] = tensor - lr * (m / bc1) / (np.sqrt(v / bc2) + epsilon)
    state.step = step
    return network.replace_tensors(params, new_tensors), state


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_loss: float
    valid_loss: float
    valid_accuracy: float
    lr: float
    improved: bool


def _utterance_loss_and_grads(params, streams, labels):
    posteriors, trace = network.forward(params, streams)
    result = ctc.ctc_loss(posteriors, labels)
    grads = network.backward(params, trace, result.grad_wrt_logits)
    return result.loss, grads


def evaluate_loss(params, dataset) -> tuple[float, float]:
    """Mean CTC loss and aggregate greedy phoneme accuracy over a dataset."""
    total_loss = 0.0
    stats = evaluation.AlignmentStats(0, 0, 0, 0)
    for streams, labels in dataset:
        posteriors, _ = network.forward(params, streams)
        total_loss += ctc.ctc_loss(posteriors, labels).loss
        stats = stats + evaluation.align(labels, ctc.greedy_decode(posteriors))
    return total_loss / len(dataset), evaluation.accuracy(stats)


def check_feasible(dataset, what: str):
    for i, (streams, labels) in enumerate(dataset):
        need = ctc.min_frames(labels)
        if streams.n_frames < need:
            raise ValueError(
                f"{what} sample {i} is CTC-infeasible: {streams.n_frames} frames "
                f"for {len(labels)} labels (minimum {need})"
            )


def train(
    model: network.ModelParams,
    train_set,
    valid_set,
    config: TrainConfig,
    checkpoint_dir=None,
    alphabet_version: str = "custom",
    on_epoch=None,
) -> tuple[network.ModelParams, list[EpochLog]]:
    """Train until the validation loss plateaus; returns the best parameters.

    Epochs draw seeded shuffles, bucket by length, and average per-utterance
    CTC gradients over each mini-batch (no padding). After
    ``lr_halving_patience`` epochs without improvement the learning rate
    halves once per streak; after ``stop_patience`` the loop stops. The
    optional ``on_epoch`` callback sees each EpochLog and may return True to
    stop early.
    """
    if not train_set or not valid_set:
        raise ValueError("train and validation sets must be non-empty")
    check_feasible(train_set, "train")
    check_feasible(valid_set, "validation")
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(config.seed)
    state = init_adam_state(model)
    params = model
    lr = config.initial_lr
    best_loss = np.inf
    best_params = network.copy_params(params)
    since_improvement = 0
    halved_this_streak = False
    logs: list[EpochLog] = []
    log_fh = (checkpoint_dir / "train_log.jsonl").open("w") if checkpoint_dir else None

    try:
        for epoch in range(1, config.max_epochs + 1):
            order = rng.permutation(len(train_set))
            # stable sort by length so batches hold similar-length utterances
            order = order[np.argsort([train_set[i][0].n_frames for i in order], kind="stable")]
            epoch_loss = 0.0
            for start in range(0, len(order), config.batch_size):
                batch = order[start : start + config.batch_size]
                batch_grads: dict[str, np.ndarray] | None = None
                batch_loss = 0.0
                for i in batch:
                    streams, labels = train_set[i]
                    loss, grads = _utterance_loss_and_grads(params, streams, labels)
                    batch_loss += loss
                    if batch_grads is None:
                        batch_grads = grads
                    else:
                        for name in batch_grads:
                            batch_grads[name] += grads[name]
                scale = 1.0 / len(batch)
                for name in batch_grads:
                    batch_grads[name] *= scale
                epoch_loss += batch_loss
                params, state = adam_step(
                    params, batch_grads, state, lr,
                    config.adam_beta1, config.adam_beta2, config.adam_epsilon,
                )

            valid_loss, valid_acc = evaluate_loss(params, valid_set)
            improved = valid_loss < best_loss - IMPROVEMENT_EPS
            if improved:
                best_loss = valid_loss
                best_params = network.copy_params(params)
                since_improvement = 0
                halved_this_streak = False
                if checkpoint_dir is not None:
                    network.save_checkpoint(
                        best_params, checkpoint_dir / "best.json", alphabet_version
                    )
            else:
                since_improvement += 1

            log = EpochLog(
                epoch=epoch,
                train_loss=epoch_loss / len(train_set),
                valid_loss=valid_loss,
                valid_accuracy=valid_acc,
                lr=lr,
                improved=improved,
            )
            logs.append(log)
            if log_fh is not None:
                log_fh.write(json.dumps(asdict(log)) + "\n")
                log_fh.flush()

            if on_epoch is not None and on_epoch(log):
                break
            if since_improvement >= config.stop_patience:
                break
            if since_improvement >= config.lr_halving_patience and not halved_this_streak:
                lr /= 2.0
                halved_this_streak = True
    finally:
        if log_fh is not None:
            log_fh.close()
    return best_params, logs
