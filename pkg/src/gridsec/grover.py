"""Desk-scale simulation of the amplitude-amplification search over indexed
reconfigurations.

Candidates are numbered 0..N-1; the simulator works directly on the real
N-vector of amplitudes (phase flip of marked entries, then reflection about
the mean), which reproduces the qubit dynamics exactly for a uniform start
while handling any N without power-of-two padding.

Query accounting follows the grey-box convention: one amplification
iteration costs one oracle query, and every classical verification of a
sampled candidate costs one more.  The classical baseline pays one query
per candidate tested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classical import enumerate_reconfigurations
from .loadflow import ComplianceOracle
from .network import Configuration, Network, Switchover, is_spanning_tree

__all__ = [
    "SearchSpaceError",
    "SearchFailure",
    "SearchSpace",
    "Oracle",
    "index_reconfigurations",
    "make_oracle",
    "uniform_state",
    "grover_iterate",
    "success_probability",
    "optimal_iterations",
    "GroverResult",
    "grover_search",
    "classical_scan",
]


class SearchSpaceError(ValueError):
    """No candidates to search over."""


class SearchFailure(RuntimeError):
    """The unknown-count schedule exhausted its budget without a hit."""


@dataclass(frozen=True)
class SearchSpace:
    """Dense id <-> switchover table for one failing edge."""

    switchovers: tuple[Switchover, ...]
    configurations: tuple[Configuration, ...]
    failing_edge: int | None
    k: int

    @property
    def size(self) -> int:
        return len(self.switchovers)

    def switchover(self, candidate_id: int) -> Switchover:
        return self.switchovers[candidate_id]

    def configuration(self, candidate_id: int) -> Configuration:
        return self.configurations[candidate_id]

    @classmethod
    def synthetic(cls, size: int) -> SearchSpace:
        """Index-only space for query-complexity benchmarks."""
        if size < 1:
            raise SearchSpaceError("synthetic space needs size >= 1")
        empty = Switchover(frozenset(), frozenset())
        blank = Configuration(frozenset())
        return cls((empty,) * size, (blank,) * size, failing_edge=None, k=0)


def index_reconfigurations(network: Network, failing_edge: int, k: int) -> SearchSpace:
    """Candidates deactivating the failing edge, in canonical order."""
    if failing_edge not in network.active_ids:
        raise ValueError(f"failing edge {failing_edge} is not an active edge")
    base = network.initial_configuration()
    entries = enumerate_reconfigurations(
        network, base, k, restrict_to=frozenset({failing_edge})
    )
    if not len(entries):
        raise SearchSpaceError(
            f"no {k}-switchover reconfiguration deactivates edge {failing_edge}"
        )
    switchovers, configurations = zip(*entries)
    return SearchSpace(
        switchovers=tuple(switchovers),
        configurations=tuple(configurations),
        failing_edge=failing_edge,
        k=k,
    )


class Oracle:
    """Validity predicate over candidate ids, with query accounting."""

    def __init__(self, predicate, size: int):
        self._predicate = predicate
        self.size = size
        self.queries = 0
        self._marked: np.ndarray | None = None

    @classmethod
    def from_marked(cls, marked_ids, size: int) -> Oracle:
        marked = frozenset(marked_ids)
        return cls(lambda i: i in marked, size)

    def marked_ids(self) -> np.ndarray:
        """Ids the oracle marks; evaluated once, not counted as queries."""
        if self._marked is None:
            self._marked = np.array(
                [i for i in range(self.size) if self._predicate(i)], dtype=np.int64
            )
        return self._marked

    def count_iteration(self) -> None:
        self.queries += 1

    def classical_check(self, candidate_id: int) -> bool:
        self.queries += 1
        return bool(self._predicate(candidate_id))


def make_oracle(network: Network, space: SearchSpace, tol: float = 1e-9) -> Oracle:
    """Oracle backed by the classical load-flow checker."""
    if space.size < 1:
        raise SearchSpaceError("cannot build an oracle over an empty space")
    checker = ComplianceOracle(network, tol)

    def predicate(candidate_id: int) -> bool:
        cfg = space.configuration(candidate_id)
        return is_spanning_tree(network, cfg) and checker.check(cfg).compliant

    return Oracle(predicate, space.size)


# ---------------------------------------------------------------------------
# amplitude dynamics
# ---------------------------------------------------------------------------

def uniform_state(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("state needs at least one amplitude")
    return np.full(n, 1.0 / math.sqrt(n))


def grover_iterate(state: np.ndarray, marked) -> np.ndarray:
    """One amplification step: flip marked phases, reflect about the mean."""
    amplitudes = np.array(state, dtype=np.float64)
    marked = np.asarray(list(marked) if isinstance(marked, (set, frozenset)) else marked, dtype=np.int64)
    if marked.size:
        amplitudes[marked] *= -1.0
    return 2.0 * amplitudes.mean() - amplitudes


def success_probability(n: int, m: int, t: int) -> float:
    """Closed-form probability of sampling a marked id after t iterations."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= marked <= size, got {m} of {n}")
    if t < 0:
        raise ValueError(f"iterations must be >= 0, got {t}")
    theta = math.asin(math.sqrt(m / n))
    return math.sin((2 * t + 1) * theta) ** 2


def optimal_iterations(n: int, m: int) -> int:
    """round(pi / (4 asin(sqrt(m/n))) - 1/2), clamped to >= 0.

    With halves rounding up this simplifies to floor(pi / (4 theta)).
    """
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= marked <= size, got {m} of {n}")
    theta = math.asin(math.sqrt(m / n))
    return max(0, int(math.floor(math.pi / (4.0 * theta))))


@dataclass(frozen=True)
class GroverResult:
    sampled_id: int
    switchover: Switchover | None
    distribution: np.ndarray
    iterations: int
    queries: int
    rounds: int = 1


def _evolve(n: int, marked: np.ndarray, iterations: int, oracle: Oracle) -> np.ndarray:
    state = uniform_state(n)
    for _ in range(iterations):
        oracle.count_iteration()
        state = grover_iterate(state, marked)
    return state


def grover_search(
    space: SearchSpace,
    oracle: Oracle,
    iterations: int | None = None,
    seed: int = 0,
) -> GroverResult:
    """Sample a candidate id from the amplified distribution.

    With ``iterations`` given, runs exactly that many amplification steps
    and samples once.  Without it, runs the unknown-count schedule: per
    round draw the iteration count uniformly below a bound that grows by
    6/5, sample, and verify classically until a marked id comes up.  The
    expected query overhead stays O(sqrt(N / M)).
    """
    n = space.size
    if n < 1:
        raise SearchSpaceError("cannot search an empty space")
    rng = np.random.Generator(np.random.Philox(key=seed))
    marked = oracle.marked_ids()

    def sample_from(state: np.ndarray) -> int:
        probabilities = state * state
        probabilities = probabilities / probabilities.sum()
        return int(rng.choice(n, p=probabilities))

    if iterations is not None:
        if iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {iterations}")
        state = _evolve(n, marked, iterations, oracle)
        sampled = sample_from(state)
        return GroverResult(
            sampled_id=sampled,
            switchover=space.switchover(sampled),
            distribution=state * state,
            iterations=iterations,
            queries=oracle.queries,
        )

    bound = 1.0
    growth = 6.0 / 5.0
    ceiling = math.sqrt(n)
    budget = int(30.0 * math.sqrt(n)) + 30
    spent = 0
    rounds = 0
    while spent <= budget:
        rounds += 1
        t = int(rng.integers(0, max(1, math.ceil(bound))))
        state = _evolve(n, marked, t, oracle)
        spent += t
        sampled = sample_from(state)
        if oracle.classical_check(sampled):
            return GroverResult(
                sampled_id=sampled,
                switchover=space.switchover(sampled),
                distribution=state * state,
                iterations=t,
                queries=oracle.queries,
                rounds=rounds,
            )
        spent += 1
        bound = min(growth * bound, ceiling)
    raise SearchFailure(
        f"no marked candidate found within {budget} amplification steps"
    )


def classical_scan(space: SearchSpace, oracle: Oracle) -> int | None:
    """Exhaustive baseline: test candidates in id order, one query each."""
    for candidate_id in range(space.size):
        if oracle.classical_check(candidate_id):
            return candidate_id
    return None
