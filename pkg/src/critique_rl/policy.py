"""Toy generative-reward-model policy and GRPO optimisation.

The policy makes ``1 + U`` categorical decisions per rollout. Decisions
``1..U`` are argument slots (omit / include-positive / include-negative) and
are sampled first from the sample's context. Decision ``0`` is the verdict,
sampled last from the same context plus the net stance of the arguments
just generated, so a sound critique can carry the label. The verdict may
carry a third "garble" option that produces a format-invalid output.

Logits for decision ``d`` are ``context_d @ params[:, block_d] / temperature``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import Argument, ArgumentSet, LABELS

OMIT, INCLUDE_POSITIVE, INCLUDE_NEGATIVE = 0, 1, 2
GARBLE = 2
CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    pass


class NumericError(FloatingPointError):
    pass


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass(frozen=True)
class ToyPolicy:
    params: np.ndarray
    universe: tuple
    n_label_options: int = 2

    def __post_init__(self):
        params = np.array(self.params, dtype=float)
        params.setflags(write=False)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "universe", tuple(self.universe))
        if self.n_label_options not in (2, 3):
            raise ValueError("n_label_options must be 2 or 3")
        if params.shape != (self.n_features, self.n_logits):
            raise ShapeError(f"params shape {params.shape} != {(self.n_features, self.n_logits)}")

    @classmethod
    def initial(cls, universe, garble_fraction: float = 0.0, omit_bias: float = 0.0) -> "ToyPolicy":
        """Zero weights except biases: ``omit_bias`` on every omit logit and a
        garble logit set so that garbling has probability ``garble_fraction``."""
        u = len(universe)
        n_label = 3 if garble_fraction > 0 else 2
        params = np.zeros((u + 2, n_label + 3 * u))
        if n_label == 3:
            params[0, GARBLE] = np.log(2 * garble_fraction / (1 - garble_fraction))
        params[0, n_label::3] = omit_bias
        return cls(params, universe, n_label)

    @property
    def universe_size(self) -> int:
        return len(self.universe)

    @property
    def n_features(self) -> int:
        return self.universe_size + 2

    @property
    def n_logits(self) -> int:
        return self.n_label_options + 3 * self.universe_size

    @property
    def n_decisions(self) -> int:
        return 1 + self.universe_size

    def block(self, d: int) -> slice:
        if d == 0:
            return slice(0, self.n_label_options)
        start = self.n_label_options + 3 * (d - 1)
        return slice(start, start + 3)

    def with_params(self, params) -> "ToyPolicy":
        return ToyPolicy(params, self.universe, self.n_label_options)

    def log_probs(self, contexts: np.ndarray, d: int, temperature: float = 1.0) -> np.ndarray:
        return log_softmax(contexts @ self.params[:, self.block(d)] / temperature)


def slot_context(cues) -> np.ndarray:
    return np.concatenate(([1.0], np.asarray(cues, dtype=float), [0.0]))


def label_context(cues, arguments) -> np.ndarray:
    stance = float(sum(a.stance for a in arguments))
    return np.concatenate(([1.0], np.asarray(cues, dtype=float), [stance]))


def decode(decisions, universe):
    """Map a decision vector to (arguments, label, format_valid).

    Slot ``k`` refers to ``universe[k]``; the argument keeps that entry's key
    and target and takes the chosen polarity. It is fatal only if the chosen
    polarity agrees with the universe entry's fatal flaw.
    """
    decisions = list(decisions)
    if len(decisions) != 1 + len(universe):
        raise ShapeError(f"expected {1 + len(universe)} decisions, got {len(decisions)}")
    args = []
    for slot, choice in enumerate(decisions[1:]):
        if choice == OMIT:
            continue
        ref = universe[slot]
        polarity = "positive" if choice == INCLUDE_POSITIVE else "negative"
        args.append(Argument(ref.content_key, ref.target, polarity, ref.fatal and polarity == ref.polarity))
    label_choice = decisions[0]
    if label_choice == GARBLE:
        return ArgumentSet(tuple(args)), None, False
    return ArgumentSet(tuple(args)), LABELS[label_choice], True


@dataclass(frozen=True)
class RolloutRecord:
    sample_id: str
    decisions: tuple
    argument_set: ArgumentSet
    predicted_label: str | None
    format_valid: bool
    logprobs_old: tuple
    contexts: np.ndarray = field(repr=False)
    temperature: float = 1.0


def _sample(rng, logp):
    """Inverse-CDF draw per row of ``logp``."""
    cdf = np.cumsum(np.exp(logp), axis=-1)
    u = np.asarray(rng.random(logp.shape[:-1]))[..., None]
    idx = (u > cdf).sum(axis=-1)
    return np.minimum(idx, logp.shape[-1] - 1)


def rollout(policy: ToyPolicy, sample, n: int, temperature: float, seed, cues) -> list[RolloutRecord]:
    """Draw ``n`` independent rollouts for one sample.

    ``seed`` is anything ``numpy.random.default_rng`` accepts; ``cues`` is the
    sample's presence-indicator vector over the argument universe.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    rng = np.random.default_rng(seed)
    u = policy.universe_size
    ctx = slot_context(cues)
    slot_logp = np.stack([policy.log_probs(ctx, d, temperature) for d in range(1, u + 1)])
    slot_choices = _sample(rng, np.broadcast_to(slot_logp, (n, u, 3)))
    records = []
    for i in range(n):
        choices = [int(c) for c in slot_choices[i]]
        provisional, _, _ = decode([0] + choices, policy.universe)
        lctx = label_context(cues, provisional)
        label_logp = policy.log_probs(lctx, 0, temperature)
        label_choice = int(_sample(rng, label_logp))
        decisions = (label_choice, *choices)
        args, label, valid = decode(decisions, policy.universe)
        logprobs = [float(label_logp[label_choice])] + [float(slot_logp[k, c]) for k, c in enumerate(choices)]
        contexts = np.vstack([lctx] + [ctx] * u)
        records.append(RolloutRecord(sample.id, decisions, args, label, valid, tuple(logprobs), contexts, temperature))
    return records


def _flatten(groups, advantages, n_decisions):
    if len(groups) != len(advantages):
        raise ShapeError(f"{len(groups)} rollout groups but {len(advantages)} advantage groups")
    recs, adv = [], []
    for g, a in zip(groups, advantages):
        values = a.advantages if hasattr(a, "advantages") else a
        if len(g) != len(values):
            raise ShapeError(f"group of {len(g)} rollouts has {len(values)} advantages")
        recs.extend(g)
        adv.extend(values)
    for r in recs:
        if len(r.decisions) != n_decisions or len(r.logprobs_old) != n_decisions:
            raise ShapeError("rollout decision count does not match the policy layout")
    return recs, np.asarray(adv, dtype=float)


def surrogate_loss(policy: ToyPolicy, rollouts, advantages, eps: float = 0.2, beta: float = 0.0,
                   ref_policy: ToyPolicy | None = None, temperature: float | None = None):
    """Negated clipped-ratio GRPO objective with exact per-decision KL, and its gradient.

    ``rollouts`` is a list of groups (one per prompt), ``advantages`` the
    matching list of ``GroupAdvantages`` (or plain sequences). The objective is
    the mean over rollouts of the mean over decisions of
    ``min(r*A, clip(r, 1-eps, 1+eps)*A) - beta*KL(pi || pi_ref)``.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if beta > 0 and ref_policy is None:
        raise ValueError("beta > 0 requires a reference policy")
    recs, adv = _flatten(rollouts, advantages, policy.n_decisions)
    n_rollouts = len(recs)
    grad = np.zeros_like(policy.params)
    if n_rollouts == 0:
        return 0.0, grad
    if temperature is None:
        temperature = recs[0].temperature

    n_dec = policy.n_decisions
    weight = 1.0 / (n_rollouts * n_dec)
    objective = 0.0
    for d in range(n_dec):
        blk = policy.block(d)
        ctx = np.stack([r.contexts[d] for r in recs])
        actions = np.array([r.decisions[d] for r in recs])
        old = np.array([r.logprobs_old[d] for r in recs])
        logp = policy.log_probs(ctx, d, temperature)
        p = np.exp(logp)
        lp_a = logp[np.arange(n_rollouts), actions]
        ratio = np.exp(lp_a - old)
        clipped = np.clip(ratio, 1 - eps, 1 + eps)
        unclipped_term = ratio * adv
        clipped_term = clipped * adv
        surr = np.minimum(unclipped_term, clipped_term)
        # gradient flows only where the unclipped branch is the active minimum
        active = unclipped_term <= clipped_term
        onehot = np.zeros_like(p)
        onehot[np.arange(n_rollouts), actions] = 1.0
        dz = (active * ratio * adv)[:, None] * (onehot - p)

        if beta > 0:
            logq = ref_policy.log_probs(ctx, d, temperature)
            kl = np.sum(p * (logp - logq), axis=-1)
            dz -= beta * p * (logp - logq - kl[:, None])
            surr = surr - beta * kl

        objective += weight * surr.sum()
        grad[:, blk] += weight * ctx.T @ dz / temperature
    return -objective, -grad


def kl_to_reference(policy: ToyPolicy, ref_policy: ToyPolicy, contexts, d: int, temperature: float = 1.0):
    logp = policy.log_probs(contexts, d, temperature)
    logq = ref_policy.log_probs(contexts, d, temperature)
    return np.sum(np.exp(logp) * (logp - logq), axis=-1)


def clip_gradient(grad: np.ndarray, max_norm: float | None) -> np.ndarray:
    if max_norm is None:
        return grad
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        return grad * (max_norm / norm)
    return grad


def policy_update(policy: ToyPolicy, gradient: np.ndarray, learning_rate: float,
                  max_grad_norm: float | None = None) -> ToyPolicy:
    """One plain gradient-descent step on the loss."""
    if learning_rate <= 0:
        raise ValueError("learning_rate must be > 0")
    gradient = np.asarray(gradient, dtype=float)
    if not np.all(np.isfinite(gradient)):
        raise NumericError("non-finite policy gradient")
    gradient = clip_gradient(gradient, max_grad_norm)
    return policy.with_params(policy.params - learning_rate * gradient)


# --- checkpoints -----------------------------------------------------------
# JSON object: {"format": "toy-policy", "version": 1, "step": int,
#   "config_digest": str, "n_label_options": int,
#   "universe": [argument dicts], "shape": [F, L], "params": row-major floats}

def save_policy(policy: ToyPolicy, path, step: int = 0, config_digest: str = "") -> None:
    doc = {
        "format": "toy-policy",
        "version": CHECKPOINT_VERSION,
        "step": int(step),
        "config_digest": config_digest,
        "n_label_options": policy.n_label_options,
        "universe": [a.to_dict() for a in policy.universe],
        "shape": list(policy.params.shape),
        "params": [float(v) for v in policy.params.ravel()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_policy(path):
    """Return ``(policy, step, config_digest)``."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "toy-policy" or doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} toy-policy checkpoint")
    universe = tuple(Argument(**a) for a in doc["universe"])
    params = np.array(doc["params"], dtype=float).reshape(doc["shape"])
    return ToyPolicy(params, universe, doc["n_label_options"]), doc["step"], doc["config_digest"]
