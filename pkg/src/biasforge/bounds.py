"""Closed-form upper bounds on the gadget's logical error rates.

All expressions are polynomial in the physical rates and are evaluated
raw: a bound may exceed 1 at large p (it is an upper bound, not a
probability); callers that care can check ``value > 1`` themselves.

Repetition counts must be odd (majority votes and the m = (r+1)/2
suppression exponent assume it); even values raise OddParityError rather
than interpolating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .noise import NoiseParams


class OddParityError(ValueError):
    """n and the repetition counts must be odd."""


def _check_odd(name: str, value: int) -> None:
    if value < 1 or value % 2 == 0:
        raise OddParityError(f"{name}={value} must be odd and >= 1")


@dataclass(frozen=True)
class BoundInputs:
    n: int
    r_z: int
    r_zz: int
    noise: NoiseParams

    def __post_init__(self):
        _check_odd("n", self.n)
        _check_odd("r_z", self.r_z)
        _check_odd("r_zz", self.r_zz)

    @property
    def m(self) -> int:
        if self.r_z != self.r_zz:
            raise ValueError("m = (r+1)/2 is defined for r_z == r_zz")
        return (self.r_z + 1) // 2


@dataclass(frozen=True)
class BoundBreakdown:
    """Individual failure-channel terms; the x terms nest cumulatively."""

    eps_x3: float
    eps_x_mzz: float
    eps_x2: float
    eps_x_mz: float
    eps_z1: float
    eps_z2: float
    e_xl: float
    e_zl: float


def breakdown(b: BoundInputs) -> BoundBreakdown:
    """Evaluate every channel term, keeping r_z and r_zz distinct.

    eps_x_mz and eps_x2 feed into eps_x_mzz, so e_xl = eps_x3 + eps_x_mzz;
    e_zl = eps_z1 + eps_z2.  With r_z = r_zz = r these recombine exactly
    into e_xl_bound / e_zl_bound.
    """
    n, r_z, r_zz = b.n, b.r_z, b.r_zz
    p_x, p_z, p_zz = b.noise.p_x, b.noise.p_z, b.noise.p_zz
    m_z = (r_z + 1) // 2
    m_zz = (r_zz + 1) // 2
    eps_x_mz = n * (r_z + 1) * p_x + math.comb(r_z, m_z) * ((n + 2) * p_z) ** m_z
    eps_x2 = n * (r_zz + 1) * p_x + eps_x_mz
    eps_x_mzz = math.comb(r_zz, m_zz) * ((2 * n + 2) * p_z) ** m_zz + eps_x2
    eps_x3 = r_zz * n * p_x
    eps_z1 = (((r_z + 3) + (r_zz + 3)) * p_z) ** n + n * (r_z + 2 * r_zz) * p_x
    eps_z2 = n * p_zz + n * ((r_z + 3) * p_z) ** 2
    return BoundBreakdown(
        eps_x3=eps_x3,
        eps_x_mzz=eps_x_mzz,
        eps_x2=eps_x2,
        eps_x_mz=eps_x_mz,
        eps_z1=eps_z1,
        eps_z2=eps_z2,
        e_xl=eps_x3 + eps_x_mzz,
        e_zl=eps_z1 + eps_z2,
    )


def e_xl_bound(n: int, r: int, p_x: float, p_z: float) -> float:
    """n(3r+2) p_x + C(r,m) [(2(n+1))^m + (n+2)^m] p_z^m with m = (r+1)/2."""
    _check_odd("n", n)
    _check_odd("r", r)
    m = (r + 1) // 2
    return n * (3 * r + 2) * p_x + math.comb(r, m) * (
        (2 * (n + 1)) ** m + (n + 2) ** m
    ) * p_z**m


def e_zl_bound(n: int, r: int, p_x: float, p_z: float, p_zz: float) -> float:
    """(2(r+3) p_z)^n + n p_zz + 3 n r p_x + n ((r+3) p_z)^2."""
    _check_odd("n", n)
    _check_odd("r", r)
    return (
        (2 * (r + 3) * p_z) ** n
        + n * p_zz
        + 3 * n * r * p_x
        + n * ((r + 3) * p_z) ** 2
    )


def sweep(
    n: int,
    r: int,
    eta_list=(10.0, 100.0, 1000.0),
    pz_range: tuple[float, float] = (1e-4, 1e-2),
    points: int = 25,
    pzz_rule: str | float = "px",
) -> list[dict]:
    """Bound curves on a log-spaced p_z grid, one series per bias value.

    ``pzz_rule`` is either "px" (p_zz follows p_x, the default) or a fixed
    numeric rate.  Rows are emitted eta-major then p_z-ascending.
    """
    _check_odd("n", n)
    _check_odd("r", r)
    lo, hi = pz_range
    if not 0 < lo <= hi:
        raise ValueError(f"pz_range must be positive and ordered, got {pz_range}")
    if points < 2:
        raise ValueError("points must be >= 2")
    pz_grid = np.geomspace(lo, hi, points)
    rows = []
    for eta in eta_list:
        for p_z in pz_grid:
            p_x = float(p_z) / eta
            p_zz = p_x if pzz_rule == "px" else float(pzz_rule)
            rows.append(
                {
                    "p_z": float(p_z),
                    "eta": float(eta),
                    "e_xl": e_xl_bound(n, r, p_x, float(p_z)),
                    "e_zl": e_zl_bound(n, r, p_x, float(p_z), p_zz),
                }
            )
    return rows
