"""Simulated annealing for QUBOs, steepest-descent post-processing, and
feasibility-tagged energy histograms.

The sampler runs independent reads in parallel as rows of a bit matrix:
one sweep proposes a single-bit Metropolis flip for every variable in
index order, with the inverse temperature climbing a geometric ladder
(``sweeps_per_beta`` sweeps per rung).  All randomness flows from one
Philox counter-based generator (numpy implementation), so a fixed seed
reproduces the sample set bit for bit; cross-language ports can match
streams against Philox4x64-10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .n1qubo import decode_solution
from .qubo import Qubo

__all__ = [
    "AnnealSchedule",
    "SampleSet",
    "EnergyHistogram",
    "auto_beta_range",
    "simulated_annealing",
    "steepest_descent",
    "post_process",
    "energy_histogram",
]


@dataclass(frozen=True)
class AnnealSchedule:
    seed: int
    reads: int = 100
    sweeps: int = 10_000
    sweeps_per_beta: int = 20
    beta_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.reads < 1:
            raise ValueError(f"reads must be >= 1, got {self.reads}")
        if not 1 <= self.sweeps_per_beta <= self.sweeps:
            raise ValueError(
                f"need sweeps >= sweeps_per_beta >= 1, got {self.sweeps}/{self.sweeps_per_beta}"
            )
        if self.beta_range is not None:
            lo, hi = self.beta_range
            if not (0 < lo <= hi):
                raise ValueError(f"beta range must satisfy 0 < min <= max, got {self.beta_range}")


@dataclass(frozen=True)
class SampleSet:
    """Aggregated samples, ascending by energy then lexicographic bits."""

    samples: np.ndarray
    energies: np.ndarray
    multiplicities: np.ndarray

    @classmethod
    def from_states(cls, qubo: Qubo, states: np.ndarray) -> SampleSet:
        states = np.ascontiguousarray(states.astype(np.uint8))
        if states.size:
            unique, counts = np.unique(states, axis=0, return_counts=True)
        else:
            unique = states.reshape(0, qubo.n)
            counts = np.zeros(0, dtype=np.int64)
        energies = qubo.energies(unique) if len(unique) else np.zeros(0)
        order = sorted(range(len(unique)), key=lambda i: (energies[i], unique[i].tobytes()))
        return cls(
            samples=unique[order],
            energies=energies[order],
            multiplicities=counts[order],
        )

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        for bits, energy, mult in zip(self.samples, self.energies, self.multiplicities):
            yield bits, float(energy), int(mult)

    @property
    def total_reads(self) -> int:
        return int(self.multiplicities.sum())

    @property
    def first(self) -> tuple[np.ndarray, float]:
        if not len(self.samples):
            raise ValueError("empty sample set")
        return self.samples[0], float(self.energies[0])

    def expand(self) -> np.ndarray:
        """One row per read (multiplicities unrolled)."""
        if not len(self.samples):
            return self.samples.copy()
        return np.repeat(self.samples, self.multiplicities, axis=0)


def _flip_bounds(qubo: Qubo) -> np.ndarray:
    bounds = np.abs(qubo.to_dense())
    return bounds.sum(axis=0) + bounds.sum(axis=1) - np.diag(bounds)


def auto_beta_range(qubo: Qubo) -> tuple[float, float]:
    """Hot end accepts the largest possible flip half the time; cold end
    freezes the smallest coefficient magnitude (the finest energy
    granularity a single flip can produce) down to 1%."""
    bounds = _flip_bounds(qubo)
    nonzero_bounds = bounds[bounds > 0]
    coeffs = np.array([abs(c) for c in qubo.coeffs.values() if c != 0.0])
    if nonzero_bounds.size == 0 or coeffs.size == 0:
        return (0.1, 1.0)
    d_max = float(nonzero_bounds.max())
    d_min = float(coeffs.min())
    return (math.log(2.0) / d_max, math.log(100.0) / d_min)


def simulated_annealing(qubo: Qubo, schedule: AnnealSchedule) -> SampleSet:
    """Single-bit-flip Metropolis annealing, reads vectorized as rows."""
    if qubo.n < 1:
        raise ValueError("QUBO needs at least one variable")
    n = qubo.n
    reads = schedule.reads
    rng = np.random.Generator(np.random.Philox(key=schedule.seed))

    upper = qubo.to_dense()
    diag = np.diag(upper).copy()
    sym = upper + upper.T
    np.fill_diagonal(sym, 0.0)

    beta_lo, beta_hi = schedule.beta_range or auto_beta_range(qubo)
    num_betas = max(1, schedule.sweeps // schedule.sweeps_per_beta)
    betas = np.geomspace(beta_lo, beta_hi, num_betas)

    states = rng.integers(0, 2, size=(reads, n)).astype(np.float64)
    field_ = states @ sym

    for beta in betas:
        for _ in range(schedule.sweeps_per_beta):
            uniforms = rng.random((n, reads))
            for i in range(n):
                column = states[:, i]
                delta_e = (1.0 - 2.0 * column) * (diag[i] + field_[:, i])
                accept = uniforms[i] < np.exp(np.minimum(0.0, -beta * delta_e))
                accepted = int(accept.sum())
                if accepted:
                    flips = np.where(accept, 1.0 - 2.0 * column, 0.0)
                    states[:, i] = column + flips
                    if 2 * accepted > reads:
                        field_ += np.outer(flips, sym[i])
                    else:
                        rows = np.nonzero(accept)[0]
                        field_[rows] += np.outer(flips[rows], sym[i])

    # final descent pass: zero-temperature sweeps until every read is
    # single-flip stable, so no returned sample sits above its own local floor
    changed = True
    while changed:
        changed = False
        for i in range(n):
            column = states[:, i]
            delta_e = (1.0 - 2.0 * column) * (diag[i] + field_[:, i])
            accept = delta_e < 0.0
            accepted = int(accept.sum())
            if accepted:
                changed = True
                flips = np.where(accept, 1.0 - 2.0 * column, 0.0)
                states[:, i] = column + flips
                rows = np.nonzero(accept)[0]
                field_[rows] += np.outer(flips[rows], sym[i])
    return SampleSet.from_states(qubo, states)


def steepest_descent(qubo: Qubo, bits) -> np.ndarray:
    """Greedy single-bit descent: always flip the best-improving bit.

    Ties break on the lowest index; stops at the first local minimum, so
    applying it twice changes nothing.
    """
    state = np.asarray(bits, dtype=np.float64).copy()
    if state.shape != (qubo.n,):
        raise ValueError(f"expected {qubo.n} bits, got shape {state.shape}")
    upper = qubo.to_dense()
    diag = np.diag(upper).copy()
    sym = upper + upper.T
    np.fill_diagonal(sym, 0.0)
    field_ = sym @ state
    while True:
        delta_e = (1.0 - 2.0 * state) * (diag + field_)
        best = int(np.argmin(delta_e))
        if delta_e[best] >= 0.0:
            break
        flip = 1.0 - 2.0 * state[best]
        state[best] += flip
        field_ += flip * sym[best]
    return state.astype(np.uint8)


def post_process(qubo: Qubo, samples: SampleSet) -> SampleSet:
    """Steepest descent applied to every read of a sample set."""
    rows = samples.expand()
    if not len(rows):
        return samples
    descended = np.stack([steepest_descent(qubo, row) for row in rows])
    return SampleSet.from_states(qubo, descended)


@dataclass(frozen=True)
class EnergyHistogram:
    """Per-energy counts split by constraint feasibility."""

    bins: dict[float, tuple[int, int]] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(f + i for f, i in self.bins.values())

    def to_csv(self) -> str:
        lines = ["energy,feasible,infeasible"]
        for energy in sorted(self.bins):
            feasible, infeasible = self.bins[energy]
            lines.append(f"{energy!r},{feasible},{infeasible}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        return {
            "bins": [
                {"energy": e, "feasible": f, "infeasible": i}
                for e, (f, i) in sorted(self.bins.items())
            ]
        }


def energy_histogram(qubo: Qubo, samples: SampleSet, layout) -> EnergyHistogram:
    """Tag every sample through :func:`decode_solution` and bin by energy."""
    bins: dict[float, list[int]] = {}
    for bits, energy, multiplicity in samples:
        feasible = decode_solution(bits, layout).feasible
        key = round(energy, 9)
        slot = bins.setdefault(key, [0, 0])
        slot[0 if feasible else 1] += multiplicity
    return EnergyHistogram({k: (f, i) for k, (f, i) in bins.items()})
