"""Complex linear load flow for a configuration, with bound checking.

MSR node voltages are the unknowns of a dense complex system; OS nodes
carry fixed voltages that move into the right-hand side.  Loads follow a
constant-impedance model: a node with complex power S at nominal voltage
U_nom draws the current ``U * Y`` with admittance ``Y = conj(S) / U_nom^2``,
which keeps the balance equations linear.

Compliance means every node voltage magnitude stays inside its band and
every active cable current stays under its rating.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import Configuration, Network, is_spanning_tree

__all__ = [
    "SingularSystemError",
    "LinearSystem",
    "VoltageSolution",
    "ComplianceReport",
    "admittance",
    "assemble_system",
    "solve_loadflow",
    "check_compliance",
    "evaluate_configuration",
    "problem_edges",
    "ComplianceOracle",
]

DEFAULT_TOLERANCE = 1e-9
CONDITION_LIMIT = 1e12
RESIDUAL_ALARM = 1e-6


class SingularSystemError(Exception):
    """The assembled system is singular or numerically unusable."""


@dataclass(frozen=True)
class LinearSystem:
    """Dense complex system A x = b over the MSR-node voltages."""

    a: np.ndarray
    b: np.ndarray
    unknown_index: dict[int, int]
    fixed: dict[int, complex]


@dataclass(frozen=True)
class VoltageSolution:
    """Voltages for every node, OS nodes at their fixed value."""

    u: dict[int, complex]
    residual: float


@dataclass(frozen=True)
class ComplianceReport:
    compliant: bool
    voltage_violations: tuple[tuple[int, float, float], ...]
    current_violations: tuple[tuple[int, float, float], ...]
    currents: dict[int, complex] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "compliant": self.compliant,
            "voltage_violations": [
                {"node": n, "magnitude": mag, "bound": bound}
                for n, mag, bound in self.voltage_violations
            ],
            "current_violations": [
                {"edge": e, "magnitude": mag, "i_max": bound}
                for e, mag, bound in self.current_violations
            ],
            "currents": {
                str(eid): [i.real, i.imag] for eid, i in sorted(self.currents.items())
            },
        }


def admittance(load: complex, u_nom: float) -> complex:
    """Constant-impedance admittance of a complex power draw."""
    if not u_nom > 0:
        raise ValueError(f"u_nom must be positive, got {u_nom}")
    if load == 0:
        return 0j
    return load.conjugate() / (u_nom * u_nom)


def assemble_system(network: Network, cfg: Configuration) -> LinearSystem:
    """Balance equations over the configuration's edges.

    Row for MSR node n:
        (Y_n + sum_m 1/Z_nm) U_n - sum_{m MSR} U_m / Z_nm = sum_{m OS} U_m / Z_nm
    with m ranging over cfg neighbors of n.
    """
    if not is_spanning_tree(network, cfg):
        raise ValueError("configuration is not a spanning tree")
    unknown_index = {nid: col for col, nid in enumerate(network.msr_ids)}
    fixed = {
        nid: complex(network.node_by_id[nid].u_nom) for nid in network.os_ids
    }
    size = len(unknown_index)
    a = np.zeros((size, size), dtype=complex)
    b = np.zeros(size, dtype=complex)

    for nid, row in unknown_index.items():
        node = network.node_by_id[nid]
        a[row, row] += admittance(node.load, node.u_nom)
    for eid in sorted(cfg.edges):
        edge = network.edge_by_id[eid]
        y = 1.0 / edge.z
        for here, there in ((edge.n, edge.m), (edge.m, edge.n)):
            if here not in unknown_index:
                continue
            row = unknown_index[here]
            a[row, row] += y
            if there in unknown_index:
                a[row, unknown_index[there]] -= y
            else:
                b[row] += y * fixed[there]
    return LinearSystem(a=a, b=b, unknown_index=unknown_index, fixed=fixed)


def solve_loadflow(system: LinearSystem, condition_limit: float = CONDITION_LIMIT) -> VoltageSolution:
    """Direct dense solve (LU with partial pivoting) plus a residual check."""
    if system.a.size:
        cond = np.linalg.cond(system.a)
        if not np.isfinite(cond) or cond > condition_limit:
            raise SingularSystemError(
                f"system condition number {cond:.3e} exceeds {condition_limit:.1e}"
            )
        x = np.linalg.solve(system.a, system.b)
        residual = float(np.abs(system.a @ x - system.b).max())
    else:
        x = np.zeros(0, dtype=complex)
        residual = 0.0
    u = dict(system.fixed)
    for nid, col in system.unknown_index.items():
        u[nid] = complex(x[col])
    return VoltageSolution(u=u, residual=residual)


def check_compliance(
    network: Network,
    cfg: Configuration,
    solution: VoltageSolution,
    tol: float = DEFAULT_TOLERANCE,
) -> ComplianceReport:
    """Inclusive bound checks with relative tolerance ``tol``.

    Edge current is ``(U_m - U_n) / Z_nm`` for every configuration edge;
    voltage magnitudes are checked against each node's band.
    """
    voltage_violations = []
    for node in network.nodes:
        mag = abs(solution.u[node.id])
        if mag < node.u_min * (1.0 - tol):
            voltage_violations.append((node.id, mag, node.u_min))
        elif mag > node.u_max * (1.0 + tol):
            voltage_violations.append((node.id, mag, node.u_max))

    currents: dict[int, complex] = {}
    current_violations = []
    for eid in sorted(cfg.edges):
        edge = network.edge_by_id[eid]
        current = (solution.u[edge.m] - solution.u[edge.n]) / edge.z
        currents[eid] = current
        # zero-rated edges get an absolute floor so float noise on a truly
        # currentless cable does not read as a violation
        limit = edge.i_max * (1.0 + tol) if edge.i_max > 0 else tol
        if abs(current) > limit:
            current_violations.append((eid, abs(current), edge.i_max))

    return ComplianceReport(
        compliant=not voltage_violations and not current_violations,
        voltage_violations=tuple(voltage_violations),
        current_violations=tuple(current_violations),
        currents=currents,
    )


def evaluate_configuration(
    network: Network, cfg: Configuration, tol: float = DEFAULT_TOLERANCE
) -> ComplianceReport:
    """Assemble, solve and check one configuration end to end."""
    solution = solve_loadflow(assemble_system(network, cfg))
    return check_compliance(network, cfg, solution, tol)


def problem_edges(network: Network) -> frozenset[int]:
    """Edges whose current limit can be violated while voltages stay in band.

    An edge is excluded when
        max(Un_max - Um_min, Um_max - Un_min) * |beta|
        + 0.1 (Un_min + Um_min) * |gamma|  <=  I_max
    with beta = Re(1/Z) and gamma = Im(1/Z); within the voltage bands that
    bound is the largest current the edge can ever carry.
    """
    problem = set()
    for edge in network.edges:
        inv_z = 1.0 / edge.z
        beta, gamma = inv_z.real, inv_z.imag
        node_n = network.node_by_id[edge.n]
        node_m = network.node_by_id[edge.m]
        spread = max(node_n.u_max - node_m.u_min, node_m.u_max - node_n.u_min)
        bound = spread * abs(beta) + 0.1 * (node_n.u_min + node_m.u_min) * abs(gamma)
        if bound > edge.i_max:
            problem.add(edge.id)
    return frozenset(problem)


class ComplianceOracle:
    """Load-flow check with call accounting.

    Counts one call per configuration evaluated; the count is the classical
    query unit compared against the amplitude-amplification search.
    """

    def __init__(self, network: Network, tol: float = DEFAULT_TOLERANCE):
        self.network = network
        self.tol = tol
        self.calls = 0

    def check(self, cfg: Configuration) -> ComplianceReport:
        self.calls += 1
        try:
            return evaluate_configuration(self.network, cfg, self.tol)
        except (ValueError, SingularSystemError):
            return ComplianceReport(
                compliant=False,
                voltage_violations=(),
                current_violations=(),
                currents={},
            )
