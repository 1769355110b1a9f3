"""Online training loop over two data streams.

Each step: roll out every batch sample, score critiqued samples against their
human critique, refresh the MetaRM from those scores, score the remaining
samples with the refreshed MetaRM, then take one GRPO step. The MetaRM
refresh always happens before it scores anything in the same step.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import GeneratorConfig, generate_environment, split_streams
from .metarm import (
    MetaRmModel, MetaRmTarget, cold_start, exact_similarity, featurize, online_update, predict,
    save_metarm, score_with_critique, targets_from_rewards,
)
from .policy import ToyPolicy, policy_update, rollout, save_policy, surrogate_loss
from .rewards import RewardRecord, composite_reward, group_advantages, metarm_reward, process_reward
from .similarity import compute_similarity

log = logging.getLogger(__name__)

REGIMES = (
    "outcome_only",
    "naive",
    "offline_metarm",
    "online_metarm",
    "full_human_critique",
    "only_metarm",
)
METARM_REGIMES = ("offline_metarm", "online_metarm", "only_metarm")
ONLINE_REGIMES = ("online_metarm", "only_metarm")


class ConfigError(ValueError):
    pass


class StepError(RuntimeError):
    def __init__(self, step, cause):
        super().__init__(f"step {step}: {cause}")
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    regime: str = "online_metarm"
    lam: float = 0.5
    n_rollout: int = 8
    eps: float = 0.2
    beta: float = 0.001
    temperature: float = 0.7
    policy_lr: float = 1.0
    max_grad_norm: float | None = None
    metarm_cold_lr: float = 0.1
    metarm_online_lr: float = 0.05
    metarm_aggressive_lr: float = 0.1
    cold_epochs: int = 3
    online_epochs: int = 1
    aggressive_epochs: int = 2
    metarm_batch_size: int | None = 32
    steps: int = 100
    batch_size: int = 16
    dh_fraction: float | None = None
    metarm_variant: str = "regression"
    aggressive: bool = False
    outcome_regularization: bool = True
    do_for_metarm: bool = False
    include_invalid_targets: bool = False
    literal_sigma: bool = False
    garble_fraction: float = 0.05
    omit_bias: float = 1.0
    async_scoring: bool = False
    scoring_workers: int = 4
    log_timing: bool = False
    checkpoint_every: int = 0
    seed: int = 0
    env_seed: int = 0
    env_universe_size: int = 6
    env_n_samples: int = 200
    env_fraction_with_critique: float = 0.5
    env_fatal_fraction: float = 0.2
    env_shift_steps: tuple = ()

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lam must lie in [0, 1]")
        if self.beta < 0:
            raise ConfigError("beta must be >= 0")
        for name in ("policy_lr", "metarm_cold_lr", "metarm_online_lr", "metarm_aggressive_lr",
                     "temperature", "eps"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.n_rollout < 1 or self.batch_size < 1 or self.steps < 0:
            raise ConfigError("n_rollout and batch_size must be >= 1, steps >= 0")
        if self.dh_fraction is not None and not 0.0 <= self.dh_fraction <= 1.0:
            raise ConfigError("dh_fraction must lie in [0, 1]")
        if self.metarm_variant not in ("regression", "binary", "classifier"):
            raise ConfigError(f"unknown metarm_variant {self.metarm_variant!r}")
        object.__setattr__(self, "env_shift_steps", tuple(int(s) for s in self.env_shift_steps))

    @classmethod
    def paper_profile(cls, **overrides) -> "TrainConfig":
        """Hyperparameters as used for billion-parameter models; far too slow at desk scale."""
        base = dict(n_rollout=8, temperature=0.7, beta=0.001, policy_lr=1e-6,
                    metarm_cold_lr=1e-5, metarm_online_lr=5e-6, metarm_aggressive_lr=1e-5,
                    cold_epochs=3, online_epochs=1, aggressive_epochs=2, steps=1200, batch_size=256)
        base.update(overrides)
        return cls(**base)

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(
            universe_size=self.env_universe_size,
            n_samples=self.env_n_samples,
            fraction_with_critique=self.env_fraction_with_critique,
            fatal_fraction=self.env_fatal_fraction,
            shift_steps=self.env_shift_steps,
        )

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif v is None:
                v = "none"
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()


def _parse_bool(s):
    low = s.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _converter(default):
    if isinstance(default, bool):
        return _parse_bool
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    if isinstance(default, tuple):
        return lambda s: tuple(int(x) for x in s.split(",") if x.strip())
    return str


_OPTIONAL = {"max_grad_norm": float, "metarm_batch_size": int, "dh_fraction": float}


def parse_config(text: str, base: TrainConfig | None = None) -> TrainConfig:
    """Parse flat ``key=value`` lines; ``#`` starts a comment; unknown keys are rejected."""
    base = base or TrainConfig()
    names = {f.name for f in dataclasses.fields(TrainConfig)}
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in names:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _OPTIONAL:
                changes[key] = None if value.lower() == "none" else _OPTIONAL[key](value)
            else:
                changes[key] = _converter(getattr(base, key))(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return base.replace(**changes)


def load_config(path, base: TrainConfig | None = None) -> TrainConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), base)


# --- metrics -----------------------------------------------------------------

@dataclass(frozen=True)
class StepMetrics:
    step: int
    outcome_accuracy: float
    mean_similarity_f1: float
    metarm_mae_vs_oracle: float | None
    p_process0_given_outcome1: float | None
    p_process1_given_outcome0: float | None
    mean_argument_count: float
    time_rollout: float | None = None
    time_scoring: float | None = None
    time_metarm: float | None = None
    time_policy: float | None = None


METRIC_COLUMNS = tuple(f.name for f in dataclasses.fields(StepMetrics))


def metrics_row(m: StepMetrics) -> list[str]:
    return ["" if v is None else repr(v) for v in dataclasses.astuple(m)]


def inconsistency_metrics(records, threshold: float = 0.5):
    """(P(process=0 | outcome=1), P(process=1 | outcome=0)) from
    ``(outcome_correct, similarity)`` pairs; None where nothing is conditioned on."""
    n1 = n0 = bad1 = good0 = 0
    for outcome_correct, similarity in records:
        good = similarity > threshold
        if outcome_correct:
            n1 += 1
            bad1 += not good
        else:
            n0 += 1
            good0 += good
    return (bad1 / n1 if n1 else None), (good0 / n0 if n0 else None)


# --- state -------------------------------------------------------------------

@dataclass(frozen=True)
class MetaRmSnapshot:
    model: MetaRmModel
    version: int


@dataclass(frozen=True)
class StepTrace:
    """Which MetaRM snapshots a step used, for ordering checks."""
    start_version: int | None
    updated_version: int | None
    scored_version: int | None
    n_fresh_targets: int
    n_rewarded: int


@dataclass(frozen=True)
class TrainState:
    policy: ToyPolicy
    ref_policy: ToyPolicy
    metarm: MetaRmSnapshot | None
    step: int = 0
    last_trace: StepTrace | None = None


def init_state(config: TrainConfig, env, samples) -> TrainState:
    policy = ToyPolicy.initial(env.argument_universe, config.garble_fraction, config.omit_bias)
    snapshot = None
    if config.regime in METARM_REGIMES:
        d_h, _ = split_streams(samples)
        model = cold_start(
            policy, d_h, env, n_sample=config.n_rollout, epochs=config.cold_epochs,
            lr=config.metarm_cold_lr, seed=[config.seed, 10**6], temperature=config.temperature,
            lam=config.lam, variant=config.metarm_variant,
            regularized=config.outcome_regularization,
            include_invalid=config.include_invalid_targets, batch_size=config.metarm_batch_size,
        )
        snapshot = MetaRmSnapshot(model, 0)
    return TrainState(policy, policy, snapshot, 0)


# --- one step --------------------------------------------------------------------

def _label_match(sample, rec):
    return rec.format_valid and rec.predicted_label == sample.label


def _outcome_record(sample, rec) -> RewardRecord:
    match = _label_match(sample, rec)
    return RewardRecord(match, rec.format_valid, None,
                        composite_reward(rec.format_valid, match, 0, 0.0), "outcome_only")


def _uses_critique(regime, sample):
    if regime == "outcome_only":
        return False
    if regime == "full_human_critique":
        return True
    return sample.has_critique


def _oracle_f1(env, sample, rec, step):
    return compute_similarity(env.gold_at(sample.id, step), rec.argument_set, "core").f1


def training_step(state: TrainState, batch, env, config: TrainConfig, scorer=exact_similarity):
    """Run one step; returns ``(new_state, StepMetrics)``. The input state is never modified."""
    step = state.step
    regime = config.regime
    lam = config.lam
    timing = {}

    # 1 + 2: rollouts, with human-critique scoring overlapping when async
    t0 = time.perf_counter()
    groups = []
    scoring = [None] * len(batch)

    def score_group(sample, recs):
        critique = env.critique_at(sample, step) if sample.has_critique else env.gold_at(sample.id, step)
        return [score_with_critique(sample, r, critique, lam, config.outcome_regularization, scorer)
                for r in recs]

    pool = ThreadPoolExecutor(config.scoring_workers) if config.async_scoring else None
    try:
        for i, sample in enumerate(batch):
            recs = rollout(state.policy, sample, config.n_rollout, config.temperature,
                           [config.seed, step, i], env.cues(sample.id))
            groups.append(recs)
            if _uses_critique(regime, sample):
                scoring[i] = pool.submit(score_group, sample, recs) if pool else score_group(sample, recs)
        t1 = time.perf_counter()
        rewards = [None] * len(batch)
        for i, sample in enumerate(batch):
            if scoring[i] is not None:
                rewards[i] = scoring[i].result() if pool else scoring[i]
    finally:
        if pool:
            pool.shutdown()
    t2 = time.perf_counter()
    timing["time_rollout"] = t1 - t0
    timing["time_scoring"] = t2 - t1

    # 3: MetaRM refresh from this step's critique-scored rollouts
    snapshot = state.metarm
    start_version = snapshot.version if snapshot else None
    n_fresh = 0
    universe = state.policy.universe
    if snapshot is not None and regime in ONLINE_REGIMES:
        pairs, rs = [], []
        for i, sample in enumerate(batch):
            if rewards[i] is not None:
                pairs.extend((sample, r) for r in groups[i])
                rs.extend(rewards[i])
        fresh = targets_from_rewards(pairs, rs, universe, config.include_invalid_targets)
        if config.do_for_metarm:
            for i, sample in enumerate(batch):
                if rewards[i] is None:
                    for rec in groups[i]:
                        if rec.format_valid:
                            target = 1.0 + lam / 2 if _label_match(sample, rec) else 0.0
                            fresh.append(MetaRmTarget(featurize(sample, rec, universe), target))
        n_fresh = len(fresh)
        if fresh:
            lr = config.metarm_aggressive_lr if config.aggressive else config.metarm_online_lr
            epochs = config.aggressive_epochs if config.aggressive else config.online_epochs
            model = online_update(snapshot.model, fresh, lr, epochs, [config.seed, step, 7],
                                  config.metarm_batch_size)
            snapshot = MetaRmSnapshot(model, snapshot.version + 1)
    t3 = time.perf_counter()

    # 4: remaining samples, scored by the refreshed MetaRM or by outcome alone
    scored_version = None
    mae_terms = []
    for i, sample in enumerate(batch):
        if rewards[i] is not None:
            continue
        recs = groups[i]
        if snapshot is None:
            rewards[i] = [_outcome_record(sample, r) for r in recs]
            continue
        scored_version = snapshot.version
        feats = np.stack([featurize(sample, r, universe) for r in recs])
        preds = predict(snapshot.model, feats)
        out = []
        for rec, pred in zip(recs, np.atleast_1d(preds)):
            match = _label_match(sample, rec)
            if regime == "only_metarm":
                value = -1.0 if not rec.format_valid else float(pred)
            else:
                value = metarm_reward(rec.format_valid, match, float(pred), lam)
            out.append(RewardRecord(match, rec.format_valid, float(pred), value, "metarm"))
            oracle = composite_reward(rec.format_valid, match,
                                      process_reward(_oracle_f1(env, sample, rec, step)), lam)
            mae_terms.append(abs(value - oracle))
        rewards[i] = out
    t4 = time.perf_counter()
    timing["time_metarm"] = t3 - t2 + (t4 - t3)

    # 5: group advantages and one policy step
    advantages = [group_advantages([r.composite for r in rs], literal_sigma=config.literal_sigma)
                  for rs in rewards]
    _, grad = surrogate_loss(state.policy, groups, advantages, config.eps, config.beta,
                             state.ref_policy, config.temperature)
    new_policy = policy_update(state.policy, grad, config.policy_lr, config.max_grad_norm)
    timing["time_policy"] = time.perf_counter() - t4

    # metrics against the oracle gold critiques
    flat = [(sample, rec) for sample, recs in zip(batch, groups) for rec in recs]
    f1s = [_oracle_f1(env, s, r, step) for s, r in flat]
    outcome = [_label_match(s, r) for s, r in flat]
    p01, p10 = inconsistency_metrics(zip(outcome, f1s))
    n_rewarded = sum(len(rs) for rs in rewards)
    if not config.log_timing:
        timing = {}
    metrics = StepMetrics(
        step=step + 1,
        outcome_accuracy=float(np.mean(outcome)),
        mean_similarity_f1=float(np.mean(f1s)),
        metarm_mae_vs_oracle=float(np.mean(mae_terms)) if mae_terms else None,
        p_process0_given_outcome1=p01,
        p_process1_given_outcome0=p10,
        mean_argument_count=float(np.mean([len(r.argument_set) for _, r in flat])),
        **timing,
    )
    trace = StepTrace(start_version, snapshot.version if snapshot else None, scored_version,
                      n_fresh, n_rewarded)
    return TrainState(new_policy, state.ref_policy, snapshot, step + 1, trace), metrics


# --- batching and experiments ---------------------------------------------------

def make_batch(samples_h, samples_o, config: TrainConfig, step: int):
    rng = np.random.default_rng([config.seed, step, 99])
    total = len(samples_h) + len(samples_o)
    frac = config.dh_fraction if config.dh_fraction is not None else len(samples_h) / total
    n_h = int(round(config.batch_size * frac))
    n_h = min(n_h, len(samples_h))
    n_o = min(config.batch_size - n_h, len(samples_o))
    picks_h = rng.choice(len(samples_h), n_h, replace=False) if n_h else []
    picks_o = rng.choice(len(samples_o), n_o, replace=False) if n_o else []
    batch = [samples_h[j] for j in picks_h] + [samples_o[j] for j in picks_o]
    order = rng.permutation(len(batch))
    return [batch[j] for j in order]


def evaluate_policy(policy, env, samples, step: int, n: int = 8, temperature: float = 0.7, seed=0):
    """Oracle metrics of sampled rollouts on ``samples`` (e.g. held-out ones)."""
    f1s, outcome, counts = [], [], []
    for i, sample in enumerate(samples):
        for rec in rollout(policy, sample, n, temperature, [seed, 31337, i], env.cues(sample.id)):
            f1s.append(_oracle_f1(env, sample, rec, step))
            outcome.append(_label_match(sample, rec))
            counts.append(len(rec.argument_set))
    p01, p10 = inconsistency_metrics(zip(outcome, f1s))
    return {
        "outcome_accuracy": float(np.mean(outcome)),
        "mean_similarity_f1": float(np.mean(f1s)),
        "p01": p01,
        "p10": p10,
        "mean_argument_count": float(np.mean(counts)),
    }


def write_metrics_csv(metrics, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for m in metrics:
        writer.writerow(metrics_row(m))
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


@dataclass
class ExperimentResult:
    state: TrainState
    metrics: list = field(default_factory=list)
    out_dir: Path | None = None


def run_experiment(config: TrainConfig, env, samples, out_dir=None, scorer=exact_similarity) -> ExperimentResult:
    """Train for ``config.steps`` steps; optionally write metrics.csv, config.txt and checkpoints."""
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(config.to_text(), encoding="utf-8")
    d_h, d_o = split_streams(samples)
    state = init_state(config, env, samples)
    metrics = []
    for step in range(config.steps):
        batch = make_batch(d_h, d_o, config, step)
        try:
            state, m = training_step(state, batch, env, config, scorer)
        except Exception as exc:
            raise StepError(step + 1, exc) from exc
        metrics.append(m)
        if out is not None and config.checkpoint_every and state.step % config.checkpoint_every == 0:
            _write_checkpoints(state, out, config, suffix=f"_step{state.step}")
    if out is not None:
        write_metrics_csv(metrics, out / "metrics.csv")
        _write_checkpoints(state, out, config)
    return ExperimentResult(state, metrics, out)


def _write_checkpoints(state, out: Path, config, suffix=""):
    save_policy(state.policy, out / f"policy{suffix}.json", state.step, config.digest())
    if state.metarm is not None:
        save_metarm(state.metarm.model, out / f"metarm{suffix}.json")


def experiment_from_config(config: TrainConfig):
    """Generate the synthetic environment a config describes."""
    return generate_environment(config.generator_config(), config.env_seed)
