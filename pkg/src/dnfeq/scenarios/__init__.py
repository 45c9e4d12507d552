"""Scenario files shipped with the package."""

from importlib import resources
from pathlib import Path

NAMES = ("reference", "decoupled", "relu_divergent", "pi_reference")


def path(name: str) -> Path:
    if name not in NAMES:
        raise KeyError(f"unknown scenario {name!r}; choose from {NAMES}")
    return Path(str(resources.files(__name__).joinpath(f"{name}.ini")))


def load(name: str):
    from ..config import load as _load

    return _load(path(name))
