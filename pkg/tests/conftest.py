"""Shared fixtures: built-in nonlinearities, profiles and solved fields (cached per session)."""

import functools

import pytest

from saddlekit.nonlinearity import builtin
from saddlekit.profile1d import build_profile
from saddlekit.solver import discretize, iterate_maximal, iterate_minimal


@functools.lru_cache(maxsize=None)
def spec_and_profile(name):
    spec = builtin(name)
    return spec, build_profile(spec)


@functools.lru_cache(maxsize=None)
def solved(name, m, R, h, kind="maximal", envelope="continuous"):
    from saddlekit.solver import envelope as make_envelope

    spec, prof = spec_and_profile(name)
    disc = _disc(name, m, R, h)
    if kind == "maximal":
        return iterate_maximal(disc, spec, make_envelope(prof, h, envelope))
    return iterate_minimal(disc, spec)


@functools.lru_cache(maxsize=None)
def _disc(name, m, R, h):
    spec, _ = spec_and_profile(name)
    return discretize(m, R, h, -spec.fprime_M)


@pytest.fixture(scope="session")
def ac():
    return spec_and_profile("allen_cahn")


@pytest.fixture(scope="session")
def sine():
    return spec_and_profile("sine")


# acceptance summary, one line per criterion, printed at the end of the run
RESULTS: dict = {}


def record(number, passed, detail):
    RESULTS[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS, key=lambda k: (int(str(k).split(".")[0]), str(k))):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
