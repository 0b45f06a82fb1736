import warnings

import pytest

from koopstab import pipeline
from koopstab.config import ExperimentConfig


@pytest.fixture(scope="session")
def default_cfg():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def paper_run(default_cfg):
    """One full default-config pipeline run, shared by every test that needs it."""
    ws = pipeline.make_workspace(default_cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dataset, collect_stats = pipeline.run_collect(ws)
        model, fig1_errors, edmd_stats = pipeline.run_edmd(ws, dataset)
        bilin, lift_stats = pipeline.run_lift(ws, dataset, model)
        lmap, synth_stats = pipeline.run_synthesize(ws, bilin, dataset)
        loop = pipeline.run_closedloop(ws, bilin, lmap)
    return {
        "ws": ws,
        "dataset": dataset,
        "model": model,
        "fig1_errors": fig1_errors,
        "bilin": bilin,
        "lmap": lmap,
        "loop": loop,
        "stats": {"collect": collect_stats, "edmd": edmd_stats,
                  "lift": lift_stats, "synthesize": synth_stats},
    }
