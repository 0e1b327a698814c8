"""Config-driven steps shared by the CLI and the acceptance suite."""
from __future__ import annotations

from .config import ExperimentConfig
from .experiment import Corpus, ResultsTable, generate_corpus, random_policy_baseline, run_experiment
from .model import RecurrentForwardModel
from .seeding import stream


def build_corpus(cfg: ExperimentConfig, condition: str, seed: int, n: int | None = None) -> Corpus:
    e = cfg.experiment
    return generate_corpus(
        condition, e.n_trajectories if n is None else n, stream(cfg.root_seed, "corpus", seed),
        steps=cfg.episode.walk_steps, geom=cfg.geom, episode=cfg.episode, sampler=cfg.sampler,
        seed=seed, restart_fraction=e.restart_fraction,
        first_segment=tuple(e.first_segment), segment_range=tuple(e.segment_steps),
    )


def fit_model(cfg: ExperimentConfig, corpus: Corpus, seed: int) -> RecurrentForwardModel:
    return RecurrentForwardModel(**cfg.model_params(seed)).fit(corpus)


def evaluate(cfg: ExperimentConfig, models: dict, n_blocks: int | None = None,
             keep_trajectories: bool = True) -> ResultsTable:
    e = cfg.experiment
    return run_experiment(
        models, n_blocks=e.n_blocks if n_blocks is None else n_blocks, n_reaches=e.n_reaches,
        root_seed=cfg.root_seed, cem=cfg.cem.build(), geom=cfg.geom, episode=cfg.episode,
        rotation_deg=e.rotation_deg, n_eval_walks=e.n_eval_walks,
        keep_trajectories=keep_trajectories,
    )


def baseline(cfg: ExperimentConfig, n_episodes: int | None = None):
    n = cfg.experiment.baseline_episodes if n_episodes is None else n_episodes
    return random_policy_baseline(n, stream(cfg.root_seed, "baseline"), geom=cfg.geom,
                                  episode=cfg.episode, rotation_deg=cfg.experiment.rotation_deg)
