"""Shared fixtures: profiles and the expensive solved runs.

The continuation runs are session-scoped because the n = 3 solve is the
dominant cost of the whole suite; every consumer works on copies or
read-only views.
"""

import time

import pytest

from warpmin import quarter_cosine_profile, product_profile
from warpmin.pipeline import ContinuationSchedule, continuation_run
from warpmin.solver import SolveConfig


@pytest.fixture(scope="session")
def quarter():
    return quarter_cosine_profile()


@pytest.fixture(scope="session")
def product():
    return product_profile()


@pytest.fixture(scope="session")
def n1_records(quarter):
    """Two-stage continuation (eps 0.3 -> 0.15) for n = 1."""
    sched = ContinuationSchedule(eps0=0.3, halvings=1, rings=24, levels_per_wrap=32)
    records = continuation_run(quarter, 1, sched, SolveConfig())
    assert [r.status for r in records] == ["complete", "complete"]
    return records


@pytest.fixture(scope="session")
def n123_records(quarter):
    """Single-stage runs for n = 1, 2, 3 plus their total wall time."""
    sched = ContinuationSchedule(eps0=0.3, halvings=0, rings=24, levels_per_wrap=32)
    t0 = time.perf_counter()
    out = {}
    for n in (1, 2, 3):
        out[n] = continuation_run(quarter, n, sched, SolveConfig())
    seconds = time.perf_counter() - t0
    for n, recs in out.items():
        assert recs[-1].status == "complete", f"n={n}: {recs[-1].message}"
    return {"records": out, "seconds": seconds}


@pytest.fixture(scope="session")
def product3_records(product):
    sched = ContinuationSchedule(eps0=0.3, halvings=0, rings=24, levels_per_wrap=32)
    records = continuation_run(product, 3, sched, SolveConfig())
    assert records[-1].status == "complete"
    return records


@pytest.fixture(scope="session")
def tiny_run_dir(tmp_path_factory):
    """A completed CLI run directory for the smallest useful config."""
    from warpmin.cli import main

    cfg = tmp_path_factory.mktemp("cfg") / "tiny.cfg"
    cfg.write_text(
        "profile = quarter-cosine\n"
        "n_list = 1\n"
        "eps0 = 0.3\n"
        "halvings = 0\n"
        "rings = 16\n"
        "levels_per_wrap = 16\n"
        "max_iter = 3000\n"
    )
    out = tmp_path_factory.mktemp("run")
    code = main(["run", "--config", str(cfg), "--out", str(out)])
    assert code == 0
    return {"config_path": cfg, "dir": out}
