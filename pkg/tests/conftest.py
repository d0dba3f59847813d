from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from oneshot_reserving import Portfolio, SimConfig, Triangle, simulate

settings.register_profile("default", max_examples=50, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"

# Published reference MSEP results on this triangle, per accident period 2..10.
GENINS_RMSEP = {2: 75535, 3: 121699, 4: 133549, 5: 261406, 6: 411010,
                7: 558317, 8: 875328, 9: 971258, 10: 1363155}
GENINS_TOTAL_RESERVE = 18_680_856
GENINS_TOTAL_RMSEP = 2_447_095


def genins_rows() -> list[list[float]]:
    with open(DATA / "genins_triangle.csv", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [[float(x) for x in r[1:] if x != ""] for r in reader]


@pytest.fixture(scope="session")
def genins() -> Triangle:
    return Triangle.from_rows(genins_rows())


def random_portfolio(rng: np.random.Generator, I: int = 6, J: int = 4, n: int = 8,
                     late: bool = True, status: bool = False, zeros: bool = False) -> Portfolio:
    """Small random full-square portfolio with strictly positive development.

    Every accident period has ``n`` claims; with ``late`` some claims are
    reported after their accident period.
    """
    ids, acc, T, paid, stat = [], [], [], [], []
    for i in range(1, I + 1):
        for k in range(n):
            t = int(rng.integers(0, min(2, J) + 1)) if late and k % 3 == 2 else 0
            inc = rng.uniform(1.0, 10.0, J + 1) * np.exp(-0.6 * np.arange(J + 1))
            if zeros and k % 4 == 1:
                inc[t] = 0.0
            inc[:t] = 0.0
            c = np.cumsum(inc)
            ids.append(f"{i:02d}-{k:03d}")
            acc.append(i)
            T.append(t)
            paid.append(c)
            stat.append((np.arange(J + 1) >= t) & (np.arange(J + 1) < J - (k % 2)))
    return Portfolio(ids, acc, T, paid, status_open=np.array(stat, dtype=float) if status else None,
                     I=I, has_lower_triangle=True)


@pytest.fixture(scope="session")
def sim_small():
    return simulate(SimConfig(I=8, J=4, claims_per_period=300,
                              delay_probs=(0.7, 0.2, 0.07, 0.03, 0.0),
                              dev_multipliers=(2.0, 1.3, 1.1, 1.03),
                              closing_hazard=(0.3, 0.35, 0.4, 0.5, 1.0), seed=7))


@pytest.fixture(scope="session")
def sim_default():
    return simulate(SimConfig(seed=11))


# -- acceptance summary ------------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def record_criterion(k: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {k:2d} {title}: {detail}"
    ACCEPTANCE[k] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
