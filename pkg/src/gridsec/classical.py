"""Classical N-1 search: enumerate k-switchover spanning trees through the
fundamental-cycle table, validate them with the load-flow checker, and
assemble a per-edge security verdict.

Step 1 covers every active edge that a single switchover can fix.  Step 2
sweeps the leftovers with growing k; a passing multi-switch tree witnesses
every edge it deactivates, so one load-flow call can clear several edges.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

from .loadflow import ComplianceOracle, ComplianceReport
from .network import Configuration, Network, Switchover, apply_switchover, fundamental_cycles, is_spanning_tree

__all__ = [
    "ReconfigurationList",
    "EdgeVerdict",
    "N1Report",
    "enumerate_reconfigurations",
    "step1_single_switch",
    "step2_multi_switch",
    "check_n1",
    "SECURE_K1",
    "SECURE_KN",
    "INSECURE",
]

SECURE_K1 = "SECURE_K1"
SECURE_KN = "SECURE_KN"
INSECURE = "INSECURE"


@dataclass(frozen=True)
class ReconfigurationList:
    """Deduplicated k-switchover spanning trees reachable from a base tree."""

    entries: tuple[tuple[Switchover, Configuration], ...]
    k: int
    restricted_to: frozenset[int] | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def enumerate_reconfigurations(
    network: Network,
    cfg: Configuration,
    k: int,
    restrict_to: frozenset[int] | None = None,
) -> ReconfigurationList:
    """All spanning trees exactly k switchovers from ``cfg``.

    Every combination of k fundamental-cycle rows proposes the k inactive
    edges to activate; every choice of one cycle edge per row proposes the
    deactivations.  Choices that repeat a deactivation or break the tree
    are dropped, as are duplicates arising from overlapping cycles.  With
    ``restrict_to`` given, only trees deactivating at least one listed edge
    are kept.
    """
    cycles = fundamental_cycles(network, cfg)
    if not 1 <= k <= len(cycles):
        raise ValueError(f"k must be between 1 and {len(cycles)} inactive edges, got {k}")

    rows = sorted(cycles.items())
    seen: set[frozenset[int]] = set()
    entries: list[tuple[Switchover, Configuration]] = []
    for combo in itertools.combinations(rows, k):
        activations = frozenset(x for x, _ in combo)
        for choice in itertools.product(*(sorted(cycle) for _, cycle in combo)):
            deactivations = frozenset(choice)
            if len(deactivations) < k:
                continue
            if restrict_to is not None and not (restrict_to & deactivations):
                continue
            switch = Switchover(activations, deactivations)
            candidate = apply_switchover(cfg, switch)
            if candidate.edges in seen:
                continue
            if not is_spanning_tree(network, candidate):
                continue
            seen.add(candidate.edges)
            entries.append((switch, candidate))
    return ReconfigurationList(tuple(entries), k=k, restricted_to=restrict_to)


def step1_single_switch(
    network: Network, oracle: ComplianceOracle | None = None
) -> dict[int, tuple[Switchover, ComplianceReport]]:
    """First passing single-switchover witness per active edge.

    Every enumerated candidate is load-flow checked (the call count is the
    classical baseline for query comparisons); per failing edge the first
    passing candidate in canonical order wins.
    """
    oracle = oracle or ComplianceOracle(network)
    base = network.initial_configuration()
    witnesses: dict[int, tuple[Switchover, ComplianceReport]] = {}
    if not network.inactive_ids:
        return witnesses
    for switch, candidate in enumerate_reconfigurations(network, base, 1):
        (failing_edge,) = switch.deactivate
        report = oracle.check(candidate)
        if report.compliant and failing_edge not in witnesses:
            witnesses[failing_edge] = (switch, report)
    return witnesses


def step2_multi_switch(
    network: Network,
    remaining: frozenset[int],
    k: int,
    oracle: ComplianceOracle | None = None,
) -> dict[int, tuple[Switchover, ComplianceReport]]:
    """Multi-switchover sweep over the edges step 1 could not clear.

    A passing reconfiguration witnesses every edge it deactivates, and
    already-witnessed edges are skipped on later iterations.
    """
    if k < 2:
        raise ValueError(f"multi-switch step needs k >= 2, got {k}")
    if not remaining <= network.active_ids:
        raise ValueError("remaining edges must be active edges")
    oracle = oracle or ComplianceOracle(network)
    witnesses: dict[int, tuple[Switchover, ComplianceReport]] = {}
    if not remaining:
        return witnesses
    base = network.initial_configuration()
    if k > len(network.inactive_ids):
        return witnesses
    candidates = enumerate_reconfigurations(network, base, k, restrict_to=remaining)
    for failing_edge in sorted(remaining):
        if failing_edge in witnesses:
            continue
        for switch, candidate in candidates:
            if failing_edge not in switch.deactivate:
                continue
            report = oracle.check(candidate)
            if report.compliant:
                for covered in sorted(switch.deactivate):
                    witnesses.setdefault(covered, (switch, report))
                break
    return witnesses


@dataclass(frozen=True)
class EdgeVerdict:
    status: str
    k: int | None
    witness: Switchover | None

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "k": self.k,
            "witness": self.witness.as_dict() if self.witness else None,
        }


@dataclass(frozen=True)
class N1Report:
    per_edge: dict[int, EdgeVerdict]
    overall: bool
    loadflow_calls: int

    @property
    def k_used(self) -> dict[int, int]:
        return {eid: v.k for eid, v in self.per_edge.items() if v.k is not None}

    def as_dict(self) -> dict:
        return {
            "overall": self.overall,
            "loadflow_calls": self.loadflow_calls,
            "per_edge": {str(eid): v.as_dict() for eid, v in sorted(self.per_edge.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def check_n1(network: Network, k_max: int, tol: float = 1e-9) -> N1Report:
    """Full verdict: step 1, then step 2 with k = 2 .. k_max on the rest."""
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    oracle = ComplianceOracle(network, tol)
    witnessed: dict[int, tuple[int, Switchover]] = {}
    for eid, (switch, _) in step1_single_switch(network, oracle).items():
        witnessed[eid] = (1, switch)
    for k in range(2, k_max + 1):
        remaining = network.active_ids - set(witnessed)
        if not remaining:
            break
        for eid, (switch, _) in step2_multi_switch(network, frozenset(remaining), k, oracle).items():
            witnessed.setdefault(eid, (k, switch))

    per_edge: dict[int, EdgeVerdict] = {}
    for eid in sorted(network.active_ids):
        if eid in witnessed:
            k, switch = witnessed[eid]
            status = SECURE_K1 if k == 1 else SECURE_KN
            per_edge[eid] = EdgeVerdict(status=status, k=k, witness=switch)
        else:
            per_edge[eid] = EdgeVerdict(status=INSECURE, k=None, witness=None)
    overall = all(v.status != INSECURE for v in per_edge.values())
    return N1Report(per_edge=per_edge, overall=overall, loadflow_calls=oracle.calls)
