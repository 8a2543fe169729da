from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cellval.data import Dataset, synth_gaussian
from cellval.ensemble import EnsembleConfig, train_ensemble

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_ds(X, y, n_classes=2) -> Dataset:
    X = np.asarray(X, dtype=np.float64)
    return Dataset(X, np.asarray(y), tuple(f"f{j}" for j in range(X.shape[1])), n_classes)


@pytest.fixture(scope="session")
def small_instance():
    """n=40, d=6, B=50 ensemble used by several oracle tests."""
    ds = synth_gaussian(40, 6, 1.0, 3)
    rec = train_ensemble(ds, EnsembleConfig(n_learners=50, feature_ratio=0.5, master_seed=3))
    return ds, rec


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for the acceptance summary."""
    def record(label: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        request.config._acceptance_lines.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
