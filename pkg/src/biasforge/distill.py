"""Exact 15-qubit Reed-Muller error-detection distillation and planning.

Model: Clifford operations inside the distillation round are ideal and
free; the only noise is the independent X / Z channel on the 15 input
copies.  A round post-selects on a trivial syndrome:

* X-error patterns are checked against the 10 Z-type stabilizer
  generators; accepted patterns with trivial syndrome either lie in the
  X-stabilizer group (harmless) or in the logical-X coset (undetected
  logical X flip).
* Z-error patterns are checked against the 4 X-type generators likewise.

Both sides reduce to weight-enumerator polynomials of the four pattern
classes, computed once by exhaustive GF(2) enumeration and evaluated in
extended precision (mpmath), so concatenated output rates far below
double-precision underflow stay meaningful.  Outputs are returned as
floats; values below about 1e-300 underflow to 0.0, which the planner
never reaches for practical targets.

The check matrices are the punctured Reed-Muller construction: X-check
row i marks the columns (1..15) whose bit i is set; the 10 Z-check rows
are those 4 rows plus their 6 pairwise AND products.  The matrices are
committed as a plain-text fixture (see data/rm15_checks.txt and
``write_fixture``); the loader regenerates them and refuses to run if the
file disagrees, so the code stays authoritative.

Overheads count non-Clifford gates only: the n=3 gadget feeding l rounds
costs 4 * 15^l per output state, bare preparation feeding l' rounds costs
15^l'.  The planner's baseline is an unencoded (n=1) gadget preparation
with the same noise parameters.
"""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass

import numpy as np
from mpmath import mp, mpf

from . import bounds as bd
from .noise import NoiseParams

N_PHYS = 15
_MP_DPS = 60
MAX_LAYERS = 6


class ChannelRangeError(ValueError):
    """Channel rates must lie in [0, 1/2)."""


class SaturationError(RuntimeError):
    """Concatenation produced a channel outside [0, 1/2)."""

    def __init__(self, message: str, layer: int):
        super().__init__(message)
        self.layer = layer


class FeasibilityError(RuntimeError):
    """No layer count within the cap reaches the target."""


class FixtureError(RuntimeError):
    """The committed check-matrix fixture disagrees with the generator."""


@dataclass(frozen=True)
class Channel:
    """Independent per-copy marginal rates; Y occurs as the e_x * e_z joint."""

    e_x: float
    e_z: float

    def __post_init__(self):
        for name, v in (("e_x", self.e_x), ("e_z", self.e_z)):
            if not 0.0 <= v < 0.5:
                raise ChannelRangeError(f"{name}={v} outside [0, 0.5)")


@dataclass(frozen=True)
class CssCode:
    n_phys: int
    x_checks: np.ndarray  # (4, 15) uint8
    z_checks: np.ndarray  # (10, 15) uint8
    logical_x: np.ndarray  # (15,) uint8
    logical_z: np.ndarray  # (15,) uint8


@dataclass(frozen=True)
class DistillPlan:
    use_gadget: bool
    n: int
    r: int
    layers: int
    achieved: Channel
    overhead: int


def build_rm15_checks() -> CssCode:
    """Generate the punctured [[15,1,3]] Reed-Muller check matrices."""
    cols = np.arange(1, 16, dtype=np.uint8)
    x_checks = np.array([(cols >> i) & 1 for i in range(4)], dtype=np.uint8)
    products = [
        x_checks[i] & x_checks[j] for i in range(4) for j in range(i + 1, 4)
    ]
    z_checks = np.concatenate([x_checks, np.array(products, dtype=np.uint8)])
    logical_x = np.ones(N_PHYS, dtype=np.uint8)
    logical_z = np.zeros(N_PHYS, dtype=np.uint8)
    logical_z[:3] = 1  # columns 1,2,3 form a closed line: weight-3 representative
    return CssCode(
        n_phys=N_PHYS,
        x_checks=x_checks,
        z_checks=z_checks,
        logical_x=logical_x,
        logical_z=logical_z,
    )


# Fixture format: '#' comment lines; a section header line naming the block
# (x_checks / z_checks / logical_x / logical_z) followed by its rows, each
# row exactly 15 characters of 0/1.

_FIXTURE_SECTIONS = ("x_checks", "z_checks", "logical_x", "logical_z")


def format_fixture(code: CssCode) -> str:
    lines = [
        "# [[15,1,3]] punctured Reed-Muller check fixture.",
        "# Sections: x_checks (4 rows), z_checks (10 rows), logical_x, logical_z.",
        "# Each row is 15 characters of 0/1, qubit 0 leftmost.",
    ]
    blocks = {
        "x_checks": code.x_checks,
        "z_checks": code.z_checks,
        "logical_x": code.logical_x.reshape(1, -1),
        "logical_z": code.logical_z.reshape(1, -1),
    }
    for name in _FIXTURE_SECTIONS:
        lines.append(name)
        for row in blocks[name]:
            lines.append("".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_fixture(text: str) -> CssCode:
    sections: dict[str, list[list[int]]] = {}
    current: str | None = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line in _FIXTURE_SECTIONS:
            current = line
            sections[current] = []
            continue
        if current is None or set(line) - {"0", "1"} or len(line) != N_PHYS:
            raise FixtureError(f"malformed fixture line: {raw!r}")
        sections[current].append([int(c) for c in line])
    try:
        return CssCode(
            n_phys=N_PHYS,
            x_checks=np.array(sections["x_checks"], dtype=np.uint8),
            z_checks=np.array(sections["z_checks"], dtype=np.uint8),
            logical_x=np.array(sections["logical_x"][0], dtype=np.uint8),
            logical_z=np.array(sections["logical_z"][0], dtype=np.uint8),
        )
    except KeyError as missing:
        raise FixtureError(f"fixture missing section {missing}") from None


def write_fixture(path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_fixture(build_rm15_checks()))


_code_cache: CssCode | None = None


def rm15_code() -> CssCode:
    """The committed code fixture, validated against the generator."""
    global _code_cache
    if _code_cache is None:
        text = (
            importlib.resources.files("biasforge")
            .joinpath("data/rm15_checks.txt")
            .read_text(encoding="ascii")
        )
        code = parse_fixture(text)
        generated = build_rm15_checks()
        for field in ("x_checks", "z_checks", "logical_x", "logical_z"):
            if not np.array_equal(getattr(code, field), getattr(generated, field)):
                raise FixtureError(f"fixture {field} disagrees with generator")
        _code_cache = code
    return _code_cache


# ---------------------------------------------------------------------------
# Weight enumerators of the four relevant pattern classes.


def _row_masks(rows: np.ndarray) -> list[int]:
    return [int(sum(1 << j for j in range(N_PHYS) if row[j])) for row in rows]


def _span_weights(generator_masks: list[int], offset: int = 0) -> np.ndarray:
    """Weight histogram of {offset XOR span(generators)} over GF(2)."""
    counts = np.zeros(N_PHYS + 1, dtype=np.int64)
    k = len(generator_masks)
    for bits in range(1 << k):
        v = offset
        for i in range(k):
            if (bits >> i) & 1:
                v ^= generator_masks[i]
        counts[int(v).bit_count()] += 1
    return counts


@dataclass(frozen=True)
class _Enumerators:
    x_stab: np.ndarray  # trivial-syndrome, harmless X patterns
    x_logical: np.ndarray  # trivial-syndrome logical-X coset
    z_stab: np.ndarray
    z_logical: np.ndarray


_enum_cache: dict[int, _Enumerators] = {}


def _enumerators(code: CssCode) -> _Enumerators:
    key = id(code)
    if key not in _enum_cache:
        x_gen = _row_masks(code.x_checks)
        z_gen = _row_masks(code.z_checks)
        lx = _row_masks(code.logical_x.reshape(1, -1))[0]
        lz = _row_masks(code.logical_z.reshape(1, -1))[0]
        _enum_cache[key] = _Enumerators(
            x_stab=_span_weights(x_gen),
            x_logical=_span_weights(x_gen, offset=lx),
            z_stab=_span_weights(z_gen),
            z_logical=_span_weights(z_gen, offset=lz),
        )
    return _enum_cache[key]


def _poly(counts: np.ndarray, e: mpf) -> mpf:
    one = mpf(1)
    total = mpf(0)
    for w in range(N_PHYS + 1):
        c = int(counts[w])
        if c:
            total += c * e**w * (one - e) ** (N_PHYS - w)
    return total


def logical_coset_min_weight(counts: np.ndarray) -> int:
    return int(np.nonzero(counts)[0][0])


def rm15_map(channel: Channel, code: CssCode | None = None) -> tuple[Channel, float]:
    """One error-detection round: post-select trivial syndrome, exact rates.

    Returns the accepted-output channel and the acceptance probability
    (product of the independent X-side and Z-side acceptance factors).
    """
    if code is None:
        code = rm15_code()
    en = _enumerators(code)
    with mp.workdps(_MP_DPS):
        ex, ez = mpf(channel.e_x), mpf(channel.e_z)
        x_stab = _poly(en.x_stab, ex)
        x_log = _poly(en.x_logical, ex)
        z_stab = _poly(en.z_stab, ez)
        z_log = _poly(en.z_logical, ez)
        out_x = x_log / (x_stab + x_log)
        out_z = z_log / (z_stab + z_log)
        p_accept = (x_stab + x_log) * (z_stab + z_log)
        return Channel(e_x=float(out_x), e_z=float(out_z)), float(p_accept)


def concatenate(start: Channel, layers: int, code: CssCode | None = None) -> Channel:
    """Iterate rm15_map ``layers`` times; layers = 0 is the identity."""
    if layers < 0:
        raise ValueError("layers must be >= 0")
    ch = start
    for layer in range(layers):
        try:
            ch, _ = rm15_map(ch, code)
        except ChannelRangeError as exc:
            raise SaturationError(f"channel left [0, 1/2) at layer {layer + 1}: {exc}", layer + 1)
    return ch


def overhead(use_gadget: bool, layers: int) -> int:
    """Average non-Clifford gate count: 4 * 15^l with the gadget, else 15^l."""
    if layers < 0:
        raise ValueError("layers must be >= 0")
    base = 15**layers
    return 4 * base if use_gadget else base


def final_bias(channel: Channel) -> float:
    """e_z / e_x; infinite when the X rate is exactly zero."""
    if channel.e_x == 0.0:
        return math.inf
    return channel.e_z / channel.e_x


def _min_layers(start: Channel, target: float) -> tuple[int, Channel]:
    ch = start
    for layers in range(MAX_LAYERS + 1):
        if max(ch.e_x, ch.e_z) <= target:
            return layers, ch
        if layers < MAX_LAYERS:
            ch, _ = rm15_map(ch)
    raise FeasibilityError(
        f"target {target} not reached within {MAX_LAYERS} layers (best {max(ch.e_x, ch.e_z):.3e})"
    )


def gadget_channel(n: int, r: int, params: NoiseParams) -> Channel:
    """Bound-level output channel of the n-qubit gadget."""
    return Channel(
        e_x=bd.e_xl_bound(n, r, params.p_x, params.p_z),
        e_z=bd.e_zl_bound(n, r, params.p_x, params.p_z, params.p_zz),
    )


def plan(
    target: float,
    p_z: float,
    eta: float,
    p_zz_rule: str | float = "px",
) -> tuple[DistillPlan, DistillPlan]:
    """Cheapest (r, layers) for the n=3 gadget vs the unencoded baseline.

    The gadget searches r in {1, 3} (n is fixed to 3, the overhead-minimal
    choice) for the minimal layer count, tie-broken toward smaller r.  The
    baseline is the n=1 preparation: no repetition encoding, r = 1, unit
    non-Clifford cost, channel given by the same bound formulas at n=1.
    """
    if not 0.0 < target < 1.0:
        raise ValueError(f"target must be in (0, 1), got {target}")
    p_x = p_z / eta
    p_zz = p_x if p_zz_rule == "px" else float(p_zz_rule)
    params = NoiseParams(p_x=p_x, p_z=p_z, p_zz=p_zz)

    best: tuple[int, int, Channel] | None = None  # (layers, r, achieved)
    failure: FeasibilityError | None = None
    for r in (1, 3):
        try:
            layers, achieved = _min_layers(gadget_channel(3, r, params), target)
        except (FeasibilityError, ChannelRangeError) as exc:
            failure = exc if isinstance(exc, FeasibilityError) else FeasibilityError(str(exc))
            continue
        if best is None or (layers, r) < (best[0], best[1]):
            best = (layers, r, achieved)
    if best is None:
        raise failure or FeasibilityError("gadget plan infeasible")
    gadget_plan = DistillPlan(
        use_gadget=True,
        n=3,
        r=best[1],
        layers=best[0],
        achieved=best[2],
        overhead=overhead(True, best[0]),
    )

    try:
        base_layers, base_achieved = _min_layers(gadget_channel(1, 1, params), target)
    except ChannelRangeError as exc:
        raise FeasibilityError(f"baseline channel out of range: {exc}")
    baseline_plan = DistillPlan(
        use_gadget=False,
        n=1,
        r=1,
        layers=base_layers,
        achieved=base_achieved,
        overhead=overhead(False, base_layers),
    )
    return gadget_plan, baseline_plan


def savings_factor(gadget_plan: DistillPlan, baseline_plan: DistillPlan) -> float:
    return baseline_plan.overhead / gadget_plan.overhead
