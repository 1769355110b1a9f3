"""Critique-supervised reward-model training on a synthetic preference environment."""

from .data import (
    Argument, ArgumentSet, EnvironmentSpec, GeneratorConfig, PreferenceSample,
    dump_dataset, generate_environment, load_dataset, split_streams,
)
from .judge import JudgeClient, JudgeResponse, parse_choice, parse_scores
from .metarm import MetaRmModel, cold_start, featurize, online_update, predict
from .policy import ToyPolicy, policy_update, rollout, surrogate_loss
from .prompts import render_prompt
from .report import emit_report
from .rewards import composite_reward, group_advantages, metarm_reward, process_reward
from .similarity import SimilarityScores, compute_similarity
from .tournament import TournamentResult, bon_select, double_elimination, feedback_edit
from .training import TrainConfig, evaluate_policy, run_experiment, training_step

__all__ = [
    "Argument", "ArgumentSet", "EnvironmentSpec", "GeneratorConfig", "PreferenceSample",
    "dump_dataset", "generate_environment", "load_dataset", "split_streams",
    "JudgeClient", "JudgeResponse", "parse_choice", "parse_scores",
    "MetaRmModel", "cold_start", "featurize", "online_update", "predict",
    "ToyPolicy", "policy_update", "rollout", "surrogate_loss",
    "render_prompt", "emit_report",
    "composite_reward", "group_advantages", "metarm_reward", "process_reward",
    "SimilarityScores", "compute_similarity",
    "TournamentResult", "bon_select", "double_elimination", "feedback_edit",
    "TrainConfig", "evaluate_policy", "run_experiment", "training_step",
]
