import numpy as np
import pytest

from aaklab.hankel import aak_approximant, build_hankel, singular_triples
from aaklab.measure import MeasureSpec, PolarTerm, markov_uniform, moments, three_interval_example
from aaklab.potential import equilibrium_measure


class AAKFamily:
    """Moments, triples and AAK approximants of one measure at one truncation."""

    def __init__(self, spec, N, upto):
        self.spec = spec
        self.moments = moments(spec, N)
        self.triples = singular_triples(build_hankel(self.moments), upto)
        self._cache = {}

    def __getitem__(self, n):
        if n not in self._cache:
            self._cache[n] = aak_approximant(self.moments, self.triples[n])
        return self._cache[n]


@pytest.fixture(scope="session")
def markov():
    return markov_uniform()


@pytest.fixture(scope="session")
def three():
    return three_interval_example()


@pytest.fixture(scope="session")
def simple_pole():
    """A measure whose Cauchy transform is 1/(z - 0.5) up to a tiny interval term."""
    from aaklab.measure import IntervalTerm
    return MeasureSpec((IntervalTerm.from_text(-0.1, 0.1, "1e-9"),), (PolarTerm(0.5, (1,)),))


@pytest.fixture(scope="session")
def markov_aak(markov):
    return AAKFamily(markov, 256, 25)


@pytest.fixture(scope="session")
def three_aak_256(three):
    return AAKFamily(three, 256, 25)


@pytest.fixture(scope="session")
def three_aak_512(three):
    return AAKFamily(three, 512, 25)


@pytest.fixture(scope="session")
def markov_mu():
    return equilibrium_measure([(-0.5, 0.5)], 800)


@pytest.fixture(scope="session")
def three_mu(three):
    return equilibrium_measure(three.support, 1600)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the summary prints them after the run."""
    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
