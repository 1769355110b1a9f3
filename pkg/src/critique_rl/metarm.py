"""Meta reward model: predicts the composite reward of a critique without a
human reference, so outcome-only data can still receive a process signal.

The model is linear over hand-built critique features. It is trained on
unclamped scores and clamped to ``[0, 1 + lambda]`` only at inference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import POLARITIES
from .policy import NumericError, ShapeError, rollout
from .rewards import DEFAULT_LAMBDA, RewardRecord, composite_reward, process_reward
from .similarity import compute_similarity, repeated_argument_check

VARIANTS = ("regression", "binary", "classifier")
CHECKPOINT_VERSION = 1


class FeatureError(KeyError):
    pass


def feature_dim(universe_size: int) -> int:
    u = universe_size
    # bias, label match, slot x polarity one-hot, count, repeated, one-hot x response cues
    return 4 + 2 * u + 2 * u * u


def featurize(sample, rollout_record, universe) -> np.ndarray:
    """Fixed-length critique features.

    Layout: ``[1, label match, presence of each (slot, polarity) (2U),
    argument count / U, repeated flag, presence x response cue (2U * U)]``.
    The last block ties each critique argument to what the two responses
    discuss; the cues are read from the rollout's recorded slot context.
    """
    u = len(universe)
    slot_of = {a.content_key: i for i, a in enumerate(universe)}
    x = np.zeros(feature_dim(u))
    x[0] = 1.0
    x[1] = float(rollout_record.format_valid and rollout_record.predicted_label == sample.label)
    args = rollout_record.argument_set
    present = np.zeros(2 * u)
    for a in args:
        if a.content_key not in slot_of:
            raise FeatureError(f"argument key {a.content_key!r} is not in the universe")
        present[2 * slot_of[a.content_key] + POLARITIES.index(a.polarity)] = 1.0
    x[2:2 + 2 * u] = present
    x[2 + 2 * u] = len(args) / u
    x[3 + 2 * u] = float(repeated_argument_check(args))
    cues = np.asarray(rollout_record.contexts[-1][1:1 + u])
    x[4 + 2 * u:] = np.outer(present, cues).ravel()
    return x


def class_levels(lam: float) -> np.ndarray:
    """Values of the classifier's three classes: invalid, wrong label, right label.

    The right-label class stands for targets in ``[1, 1 + lam]`` and takes
    the midpoint of that range.
    """
    return np.array([-1.0, 0.0, 1.0 + lam / 2])


@dataclass(frozen=True)
class MetaRmModel:
    weights: np.ndarray
    lam: float = DEFAULT_LAMBDA
    variant: str = "regression"
    levels: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        w = np.array(self.weights, dtype=float)
        if not np.all(np.isfinite(w)):
            raise NumericError("non-finite MetaRM weights")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.variant == "classifier":
            levels = class_levels(self.lam) if self.levels is None else np.asarray(self.levels, dtype=float)
            if w.ndim != 2 or w.shape[1] != len(levels):
                raise ShapeError("classifier weights must be (dim, n_levels)")
            object.__setattr__(self, "levels", levels)
        elif w.ndim != 1:
            raise ShapeError("regression weights must be a vector")

    @classmethod
    def initial(cls, dim: int, lam: float = DEFAULT_LAMBDA, variant: str = "regression") -> "MetaRmModel":
        if variant == "classifier":
            return cls(np.zeros((dim, len(class_levels(lam)))), lam, variant)
        return cls(np.zeros(dim), lam, variant)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def with_weights(self, weights) -> "MetaRmModel":
        return MetaRmModel(weights, self.lam, self.variant, self.levels)


@dataclass(frozen=True)
class MetaRmTarget:
    features: np.ndarray
    target: float


def raw_score(model: MetaRmModel, features) -> np.ndarray | float:
    x = np.asarray(features, dtype=float)
    if x.shape[-1] != model.dim:
        raise ShapeError(f"feature dim {x.shape[-1]} != model dim {model.dim}")
    if model.variant == "classifier":
        z = x @ model.weights
        z = z - z.max(axis=-1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=-1, keepdims=True)
        return p @ model.levels
    return x @ model.weights


def predict(model: MetaRmModel, features):
    """Reward estimate in ``[0, 1 + lambda]``; vectorised over leading axes."""
    top = 1.0 + model.lam
    s = raw_score(model, features)
    if model.variant == "binary":
        out = np.where(s >= 0.5 * top, top, 0.0)
    else:
        out = np.clip(s, 0.0, top)
    return float(out) if np.ndim(out) == 0 else out


# --- losses ----------------------------------------------------------------

def mse_loss_and_grad(weights, X, y):
    resid = X @ weights - y
    return float(np.mean(resid ** 2)), 2.0 * X.T @ resid / len(y)


def level_indices(y):
    """Class of each target: 0 for -1, 1 for anything below 1, 2 for [1, 1 + lam]."""
    y = np.asarray(y, dtype=float)
    return np.where(y < -0.5, 0, np.where(y < 1.0, 1, 2))


def cross_entropy_loss_and_grad(weights, X, classes):
    z = X @ weights
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = len(classes)
    loss = -float(logp[np.arange(n), classes].mean())
    p = np.exp(logp)
    p[np.arange(n), classes] -= 1.0
    return loss, X.T @ p / n


def _stack(targets):
    X = np.stack([t.features for t in targets])
    y = np.array([t.target for t in targets], dtype=float)
    return X, y


def mse_train(model: MetaRmModel, targets, epochs: int, learning_rate: float, seed=0,
              batch_size: int | None = None) -> MetaRmModel:
    """Gradient descent on squared error of the unclamped score.

    The classifier variant minimises cross-entropy against the target's
    class instead. ``batch_size=None`` means full batch; otherwise batches are
    drawn from a seeded shuffle each epoch.
    """
    if not targets:
        raise ValueError("targets must be non-empty")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    X, y = _stack(targets)
    if X.shape[1] != model.dim:
        raise ShapeError(f"feature dim {X.shape[1]} != model dim {model.dim}")
    if model.variant == "classifier":
        labels = level_indices(y)

        def loss_grad(w, idx):
            return cross_entropy_loss_and_grad(w, X[idx], labels[idx])
    else:
        def loss_grad(w, idx):
            return mse_loss_and_grad(w, X[idx], y[idx])

    rng = np.random.default_rng(seed)
    w = model.weights.copy()
    n = len(y)
    for _ in range(epochs):
        if batch_size is None or batch_size >= n:
            batches = [np.arange(n)]
        else:
            order = rng.permutation(n)
            batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
        for idx in batches:
            loss, g = loss_grad(w, idx)
            if not np.isfinite(loss) or not np.all(np.isfinite(g)):
                raise NumericError("non-finite MetaRM loss")
            w = w - learning_rate * g
    return model.with_weights(w)


def online_update(model: MetaRmModel, fresh_targets, learning_rate: float, epochs_per_round: int = 1,
                  seed=0, batch_size: int | None = None) -> MetaRmModel:
    if not fresh_targets:
        return model
    return mse_train(model, fresh_targets, epochs_per_round, learning_rate, seed, batch_size)


# --- targets from human-critique scoring ------------------------------------

def exact_similarity(ref, gen) -> float:
    return compute_similarity(ref, gen, "core").f1


def score_with_critique(sample, record, critique, lam=DEFAULT_LAMBDA, regularized=True,
                        scorer=exact_similarity) -> RewardRecord:
    """Composite reward of one rollout judged against a human critique."""
    label_match = record.format_valid and record.predicted_label == sample.label
    s = scorer(critique, record.argument_set) if record.format_valid else None
    r_proc = process_reward(s) if s is not None else None
    value = composite_reward(record.format_valid, label_match, r_proc, lam, regularized)
    return RewardRecord(label_match, record.format_valid, s, value, "human_critique")


def targets_from_rewards(samples_and_records, rewards, universe, include_invalid=False):
    out = []
    for (sample, record), reward in zip(samples_and_records, rewards):
        if not reward.format_valid and not include_invalid:
            continue
        out.append(MetaRmTarget(featurize(sample, record, universe), reward.composite))
    return out


def cold_start_targets(policy, d_h, env, n_sample=8, seed=0, temperature=1.0, lam=DEFAULT_LAMBDA,
                       regularized=True, include_invalid=False, scorer=exact_similarity):
    """Roll out the initial policy ``n_sample`` times per critiqued sample and
    turn the human-critique rewards into regression targets."""
    if not d_h:
        raise ValueError("cold start needs at least one sample with a human critique")
    pairs, rewards = [], []
    for i, sample in enumerate(d_h):
        critique = env.critique_at(sample, 0) if env is not None else sample.human_critique
        if critique is None:
            raise ValueError(f"sample {sample.id} has no human critique")
        cues = env.cues(sample.id)
        for rec in rollout(policy, sample, n_sample, temperature, [seed, i], cues):
            pairs.append((sample, rec))
            rewards.append(score_with_critique(sample, rec, critique, lam, regularized, scorer))
    return targets_from_rewards(pairs, rewards, policy.universe, include_invalid)


def cold_start(policy, d_h, env, n_sample=8, epochs=3, lr=0.1, seed=0, temperature=1.0,
               lam=DEFAULT_LAMBDA, variant="regression", regularized=True, include_invalid=False,
               batch_size: int | None = 32, scorer=exact_similarity) -> MetaRmModel:
    targets = cold_start_targets(policy, d_h, env, n_sample, seed, temperature, lam,
                                 regularized, include_invalid, scorer)
    model = MetaRmModel.initial(feature_dim(policy.universe_size), lam, variant)
    if not targets:
        return model
    return mse_train(model, targets, epochs, lr, seed, batch_size)


# --- checkpoints -----------------------------------------------------------
# JSON object: {"format": "metarm", "version": 1, "variant": str, "lambda": float,
#   "dim": int, "n_outputs": int, "levels": [..] | null, "weights": row-major floats}

def save_metarm(model: MetaRmModel, path) -> None:
    doc = {
        "format": "metarm",
        "version": CHECKPOINT_VERSION,
        "variant": model.variant,
        "lambda": model.lam,
        "dim": model.dim,
        "n_outputs": 1 if model.weights.ndim == 1 else model.weights.shape[1],
        "levels": None if model.levels is None else [float(v) for v in model.levels],
        "weights": [float(v) for v in model.weights.ravel()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_metarm(path) -> MetaRmModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "metarm" or doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} metarm checkpoint")
    w = np.array(doc["weights"], dtype=float)
    if doc["n_outputs"] > 1:
        w = w.reshape(doc["dim"], doc["n_outputs"])
    return MetaRmModel(w, doc["lambda"], doc["variant"], doc["levels"])
