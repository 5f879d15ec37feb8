import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from mflab import phase_space  # noqa: E402

settings.register_profile("mflab", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("mflab")


@pytest.fixture(scope="session")
def grid1():
    return phase_space.Grid(2 * math.pi, 1, 32)


@pytest.fixture(scope="session")
def modes2(grid1):
    return phase_space.make_mode_space(grid1, 2)


@pytest.fixture(scope="session")
def modes3(grid1):
    return phase_space.make_mode_space(grid1, 3)


@pytest.fixture(scope="session")
def soft(grid1):
    return phase_space.PairPotential.soft_coulomb(grid1, 1.0, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_report(pytestconfig):
    """report(k, checks) with checks = [(name, ok, detail)]; returns the failed names."""
    store = pytestconfig.stash.setdefault(ACCEPTANCE, {})

    def report(k, checks):
        failed = [name for name, ok, _ in checks if not ok]
        store[k] = (not failed, checks)
        line = f"CRITERION {k}: {'PASS' if not failed else 'FAIL'}"
        print("\n" + line)
        for name, ok, detail in checks:
            print(f"  [{'ok' if ok else 'FAIL'}] {name}: {detail}")
        return failed

    return report


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(store):
        ok, checks = store[k]
        terminalreporter.write_line(f"CRITERION {k}: {'PASS' if ok else 'FAIL'}")
        for name, passed, detail in checks:
            terminalreporter.write_line(f"    [{'ok' if passed else 'FAIL'}] {name}: {detail}")
