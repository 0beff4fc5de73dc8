import time

import pytest

from topoasm import fixtures
from topoasm.engine import SynthesisConfig, synthesize
from topoasm.icm import parse_icm
from topoasm.sched import SchedulerPolicy


@pytest.fixture(scope="session")
def toffoli():
    return parse_icm(fixtures.toffoli_text())


@pytest.fixture(scope="session")
def toffoli_unopt():
    return parse_icm(fixtures.toffoli_unopt_text())


def scripted_config(**overrides):
    base = dict(
        policy=SchedulerPolicy(kind="spiral", condition=fixtures.TOFFOLI_CONDITION),
        outcome_script=fixtures.toffoli_outcome_script(),
    )
    base.update(overrides)
    return SynthesisConfig(**base)


@pytest.fixture(scope="session")
def scripted_assembly(toffoli):
    return synthesize(toffoli, scripted_config())


@pytest.fixture(scope="session")
def seed_sweep(toffoli):
    """All three schedulers over ten seeds, shared by the volume and
    non-overlap criteria; records its own wall time."""
    out = {}
    t0 = time.monotonic()
    for kind in ("spiral", "alap", "asap"):
        runs = []
        for seed in range(10):
            cfg = SynthesisConfig(policy=SchedulerPolicy(kind=kind), seed=seed)
            runs.append(synthesize(toffoli, cfg))
        out[kind] = runs
    out["elapsed"] = time.monotonic() - t0
    return out
