"""Pairwise preference samples, structured critiques, and a synthetic critique environment.

The synthetic environment stands in for real responses and human critiques: every
sample carries a gold set of arguments drawn from a fixed argument universe, so
critique quality can always be scored against ground truth.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

LABELS = ("A", "B")
POLARITIES = ("positive", "negative")


class DatasetError(ValueError):
    """Base class for dataset loading problems."""


class ParseError(DatasetError):
    pass


class SchemaError(DatasetError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Argument:
    """One point made in a critique.

    Two arguments are equal when they share content key, target and polarity;
    the ``fatal`` flag does not take part in equality or hashing.
    """

    content_key: str
    target: str
    polarity: str
    fatal: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not self.content_key:
            raise ValueError("content_key must be non-empty")
        if self.target not in LABELS:
            raise ValueError(f"target must be one of {LABELS}, got {self.target!r}")
        if self.polarity not in POLARITIES:
            raise ValueError(f"polarity must be one of {POLARITIES}, got {self.polarity!r}")

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.content_key, self.target, self.polarity)

    @property
    def stance(self) -> int:
        """+1 if the argument speaks for response A, -1 if for B."""
        favours_target = self.polarity == "positive"
        return 1 if favours_target == (self.target == "A") else -1

    def to_dict(self) -> dict:
        return {
            "content_key": self.content_key,
            "target": self.target,
            "polarity": self.polarity,
            "fatal": self.fatal,
        }


@dataclass(frozen=True)
class ArgumentSet:
    """Ordered, possibly duplicated, list of arguments."""

    arguments: tuple[Argument, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "arguments", tuple(self.arguments))

    def __iter__(self):
        return iter(self.arguments)

    def __len__(self):
        return len(self.arguments)

    def unique_keys(self) -> list[tuple[str, str, str]]:
        """Distinct argument tuples in first-seen order."""
        return list(dict.fromkeys(a.key for a in self.arguments))

    def key_counts(self) -> Counter:
        return Counter(a.key for a in self.arguments)

    def fatal_keys(self) -> list[tuple[str, str, str]]:
        return list(dict.fromkeys(a.key for a in self.arguments if a.fatal))

    def to_list(self) -> list[dict]:
        return [a.to_dict() for a in self.arguments]


@dataclass(frozen=True)
class PreferenceSample:
    id: str
    query: str
    response_a: str
    response_b: str
    label: str
    human_critique: ArgumentSet | None = None
    human_critique_text: str | None = None

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be A or B, got {self.label!r}")

    @property
    def has_critique(self) -> bool:
        return self.human_critique is not None

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "query": self.query,
            "response_a": self.response_a,
            "response_b": self.response_b,
            "label": self.label,
        }
        if self.human_critique_text is not None:
            out["human_critique_text"] = self.human_critique_text
        if self.human_critique is not None:
            out["human_critique"] = self.human_critique.to_list()
        return out


def render_critique(arguments: Iterable[Argument]) -> str:
    """Plain-text rendering of an argument set, one line per argument."""
    lines = []
    for a in arguments:
        verb = "is a strength of" if a.polarity == "positive" else "is a flaw in"
        prefix = "FATAL: " if a.fatal else ""
        lines.append(f"- {prefix}{a.content_key} {verb} Response {a.target}")
    return "\n".join(lines)


# --- JSONL ---------------------------------------------------------------

_REQUIRED = ("id", "query", "response_a", "response_b", "label")


def argument_from_dict(obj, lineno: int) -> Argument:
    if not isinstance(obj, dict):
        raise SchemaError(f"line {lineno}: human_critique entries must be objects")
    try:
        return Argument(
            content_key=obj["content_key"],
            target=obj["target"],
            polarity=obj["polarity"],
            fatal=bool(obj.get("fatal", False)),
        )
    except KeyError as exc:
        raise SchemaError(f"line {lineno}: argument missing field {exc.args[0]!r}") from None
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"line {lineno}: {exc}") from None


def sample_from_dict(obj: dict, lineno: int = 0) -> PreferenceSample:
    if not isinstance(obj, dict):
        raise SchemaError(f"line {lineno}: record must be a JSON object")
    for name in _REQUIRED:
        if name not in obj:
            raise SchemaError(f"line {lineno}: missing required field {name!r}")
        if not isinstance(obj[name], str):
            raise SchemaError(f"line {lineno}: field {name!r} must be a string")
    if obj["label"] not in LABELS:
        raise SchemaError(f"line {lineno}: label must be 'A' or 'B', got {obj['label']!r}")
    critique = None
    if obj.get("human_critique") is not None:
        raw = obj["human_critique"]
        if not isinstance(raw, list):
            raise SchemaError(f"line {lineno}: human_critique must be an array")
        critique = ArgumentSet(tuple(argument_from_dict(a, lineno) for a in raw))
    text = obj.get("human_critique_text")
    if text is not None and not isinstance(text, str):
        raise SchemaError(f"line {lineno}: human_critique_text must be a string")
    return PreferenceSample(
        id=obj["id"],
        query=obj["query"],
        response_a=obj["response_a"],
        response_b=obj["response_b"],
        label=obj["label"],
        human_critique=critique,
        human_critique_text=text,
    )


def load_dataset(path) -> list[PreferenceSample]:
    """Read a JSONL dataset. Blank lines are skipped; unknown fields are ignored."""
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: {exc.msg}") from None
            samples.append(sample_from_dict(obj, lineno))
    return samples


def dump_dataset(samples: Iterable[PreferenceSample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def split_streams(samples):
    """Partition into (with human critique, outcome-only), preserving order."""
    d_h = [s for s in samples if s.has_critique]
    d_o = [s for s in samples if not s.has_critique]
    return d_h, d_o


# --- synthetic environment -----------------------------------------------

@dataclass(frozen=True)
class GeneratorConfig:
    universe_size: int = 6
    n_samples: int = 200
    fraction_with_critique: float = 0.5
    fatal_fraction: float = 0.2
    min_frequency: float = 0.1
    max_frequency: float = 0.6
    shift_steps: tuple[int, ...] = ()

    def validate(self):
        if self.universe_size < 2:
            raise ConfigError("universe_size must be >= 2")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if not 0.0 <= self.fraction_with_critique <= 1.0:
            raise ConfigError("fraction_with_critique must lie in [0, 1]")
        if not 0.0 <= self.fatal_fraction <= 1.0:
            raise ConfigError("fatal_fraction must lie in [0, 1]")
        if not 0.0 < self.min_frequency <= self.max_frequency <= 1.0:
            raise ConfigError("need 0 < min_frequency <= max_frequency <= 1")
        if any(s < 0 for s in self.shift_steps):
            raise ConfigError("shift steps must be non-negative")


def gold_label(gold: Iterable[Argument]) -> str:
    """A wins when its net positive count is at least B's."""
    net = {"A": 0, "B": 0}
    for a in gold:
        net[a.target] += 1 if a.polarity == "positive" else -1
    return "A" if net["A"] >= net["B"] else "B"


@dataclass(frozen=True)
class EnvironmentSpec:
    """Argument universe, gold critiques and an optional shift schedule.

    ``gold_slots`` maps a sample id to the universe indices of its gold
    arguments. A shift entry ``(step, perm)`` relabels the gold arguments from
    that step on: universe index ``j`` becomes ``perm[j]``. Permutations only
    swap arguments with the same stance, so gold labels never change.
    """

    argument_universe: tuple[Argument, ...]
    gold_slots: dict
    labels: dict
    shift_schedule: tuple = ()

    @property
    def universe_size(self) -> int:
        return len(self.argument_universe)

    def slot_of(self, content_key: str) -> int:
        for i, a in enumerate(self.argument_universe):
            if a.content_key == content_key:
                return i
        raise KeyError(content_key)

    def permutation_at(self, step: int) -> np.ndarray:
        perm = np.arange(self.universe_size)
        for when, p in sorted(self.shift_schedule, key=lambda e: e[0]):
            if step >= when:
                perm = np.asarray(p)[perm]
        return perm

    def gold_at(self, sample_id: str, step: int = 0) -> ArgumentSet:
        perm = self.permutation_at(step)
        return ArgumentSet(tuple(self.argument_universe[perm[j]] for j in self.gold_slots[sample_id]))

    def cues(self, sample_id: str) -> np.ndarray:
        """Presence indicators of the (unshifted) gold slots: what the responses discuss."""
        x = np.zeros(self.universe_size)
        x[list(self.gold_slots[sample_id])] = 1.0
        return x

    def critique_at(self, sample: PreferenceSample, step: int = 0) -> ArgumentSet | None:
        """The human critique as seen at ``step``; None for outcome-only samples."""
        if sample.human_critique is None:
            return None
        if sample.id not in self.gold_slots:
            return sample.human_critique
        return self.gold_at(sample.id, step)


def _make_universe(cfg: GeneratorConfig, rng: np.random.Generator) -> tuple[Argument, ...]:
    universe = []
    for k in range(cfg.universe_size):
        target = "A" if k % 2 == 0 else "B"
        polarity = POLARITIES[int(rng.integers(2))]
        fatal = polarity == "negative" and bool(rng.random() < cfg.fatal_fraction)
        universe.append(Argument(f"k{k}", target, polarity, fatal))
    return tuple(universe)


def _stance_preserving_permutation(universe, rng) -> tuple[int, ...]:
    perm = np.arange(len(universe))
    for stance in (1, -1):
        idx = np.array([i for i, a in enumerate(universe) if a.stance == stance])
        if len(idx) > 1:
            perm[idx] = idx[rng.permutation(len(idx))]
    return tuple(int(p) for p in perm)


def generate_environment(config: GeneratorConfig, seed: int):
    """Build a synthetic environment and its samples deterministically from ``seed``."""
    config.validate()
    rng = np.random.default_rng(seed)
    universe = _make_universe(config, rng)
    freq = rng.uniform(config.min_frequency, config.max_frequency, size=config.universe_size)

    n_with = int(round(config.fraction_with_critique * config.n_samples))
    with_critique = np.zeros(config.n_samples, dtype=bool)
    with_critique[rng.permutation(config.n_samples)[:n_with]] = True

    gold_slots, labels, samples = {}, {}, []
    for i in range(config.n_samples):
        sid = f"s{i}"
        chosen = np.flatnonzero(rng.random(config.universe_size) < freq)
        if len(chosen) == 0:
            chosen = np.array([int(rng.integers(config.universe_size))])
        # at most one fatal argument per gold critique
        fatal = [j for j in chosen if universe[j].fatal]
        chosen = [int(j) for j in chosen if not universe[j].fatal or j == (fatal[0] if fatal else -1)]
        gold = ArgumentSet(tuple(universe[j] for j in chosen))
        label = gold_label(gold)
        gold_slots[sid] = tuple(chosen)
        labels[sid] = label
        mentions_a = ", ".join(a.content_key for a in gold if a.target == "A") or "nothing notable"
        mentions_b = ", ".join(a.content_key for a in gold if a.target == "B") or "nothing notable"
        samples.append(PreferenceSample(
            id=sid,
            query=f"Synthetic query {i}",
            response_a=f"Response A to query {i}; touches on {mentions_a}.",
            response_b=f"Response B to query {i}; touches on {mentions_b}.",
            label=label,
            human_critique=gold if with_critique[i] else None,
            human_critique_text=render_critique(gold) if with_critique[i] else None,
        ))

    schedule = tuple(
        (int(step), _stance_preserving_permutation(universe, rng)) for step in config.shift_steps
    )
    env = EnvironmentSpec(universe, gold_slots, labels, schedule)
    return env, samples
