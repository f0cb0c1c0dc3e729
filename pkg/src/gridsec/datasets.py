"""Access to the bundled example networks.

``sevenbus`` is the seven-node benchmark grid (one OS node, two redundancy
loops, one zero-rated spare cable); the two ``demo_*`` networks are small
search playgrounds for the single- and double-switchover experiments.
"""

from __future__ import annotations

from importlib import resources

from .network import Network, parse_network

__all__ = ["bundled_names", "bundled_path", "load_bundled"]

_NAMES = ("sevenbus", "demo_single_switch", "demo_double_switch")


def bundled_names() -> tuple[str, ...]:
    return _NAMES


def bundled_path(name: str):
    if name not in _NAMES:
        raise ValueError(f"unknown bundled network {name!r}; have {_NAMES}")
    return resources.files(__package__).joinpath("data", f"{name}.json")


def load_bundled(name: str) -> Network:
    return parse_network(bundled_path(name).read_text(encoding="utf-8"))
