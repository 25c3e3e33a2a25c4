"""Compactly supported Wendland radial basis functions.

Three representatives are shipped, written in the variable ``t = alpha * r``:

==============  ==========================================
wendland-3-0    (1 - t)_+^2
wendland-3-1    (1 - t)_+^4 (4t + 1)
wendland-3-3    (1 - t)_+^8 (32t^3 + 25t^2 + 8t + 1)
==============  ==========================================

The support radius is ``1 / alpha``. The truncation test runs on ``t`` before
any polynomial arithmetic, so values outside the support are exactly zero.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class Family(enum.Enum):
    """Kernel identity; the value is the name used on the command line."""

    WENDLAND_3_0 = "wendland-3-0"
    WENDLAND_3_1 = "wendland-3-1"
    WENDLAND_3_3 = "wendland-3-3"

    @property
    def code(self) -> int:
        # smoothness index s; also the dispatch code for the compiled core
        return _CODES[self]

    @property
    def smoothness(self) -> int:
        """Order of continuity, C^(2s)."""
        return 2 * self.code

    @classmethod
    def parse(cls, name: "str | Family") -> "Family":
        if isinstance(name, Family):
            return name
        key = name.strip().lower().replace("_", "-")
        for fam in cls:
            if fam.value == key:
                return fam
        names = ", ".join(f.value for f in cls)
        raise ValueError(f"unknown kernel {name!r}; expected one of {names}")


_CODES = {Family.WENDLAND_3_0: 0, Family.WENDLAND_3_1: 1, Family.WENDLAND_3_3: 3}


@dataclass(frozen=True)
class KernelSpec:
    family: Family
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        alpha = float(self.alpha)
        if not (math.isfinite(alpha) and alpha > 0.0):
            raise ValueError(f"shape parameter alpha must be positive and finite, got {self.alpha!r}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def name(self) -> str:
        return self.family.value

    @property
    def support_radius(self) -> float:
        return support_radius(self)

    def __call__(self, r):
        return evaluate(self, r)


def support_radius(kernel: KernelSpec) -> float:
    """Radius beyond which the kernel vanishes, ``1 / alpha``."""
    return 1.0 / kernel.alpha


def _poly(code: int, t: np.ndarray) -> np.ndarray:
    # Horner form in t; the compiled core repeats these operations verbatim so
    # both backends agree bit for bit.
    u = 1.0 - t
    if code == 0:
        return u * u
    u2 = u * u
    u4 = u2 * u2
    if code == 1:
        return u4 * (4.0 * t + 1.0)
    u8 = u4 * u4
    return u8 * (((32.0 * t + 25.0) * t + 8.0) * t + 1.0)


def phi_of_t(code: int, t: np.ndarray) -> np.ndarray:
    """Kernel value as a function of scaled distance ``t >= 0`` (array in, array out)."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    inside = t < 1.0
    out[inside] = _poly(code, t[inside])
    return out


def evaluate(kernel: KernelSpec, r):
    """Evaluate the kernel at distance(s) ``r``.

    Scalars give a Python float, arrays give an array of the same shape.
    Raises ``ValueError`` for negative or non-finite distances.
    """
    arr = np.asarray(r, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("distance must be finite")
    if np.any(arr < 0.0):
        raise ValueError("distance must be non-negative")
    out = phi_of_t(kernel.family.code, kernel.alpha * arr)
    if out.ndim == 0:
        return float(out)
    return out


def kernel_names() -> list[str]:
    return [f.value for f in Family]
