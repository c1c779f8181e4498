"""Dense state-vector simulation of small qubit registers.

Everything downstream (fault coordinates, decoding tables, frozen test
values) depends on the conventions fixed here:

* Amplitude indexing is little-endian: bit ``p`` of a basis-state index
  holds the computational-basis value of qubit ``p``, so ``|q1 q0> = |11>``
  is amplitude index 3.
* ``apply_cz_theta`` implements ``exp(-i theta/2 * Z_i Z_j)``: basis states
  whose bits agree on the pair pick up ``exp(-i theta/2)``, states whose
  bits differ pick up ``exp(+i theta/2)``.  CPHASE = diag(1, 1, 1, -1).
* A Pauli string acts as ``i**k * (X part) * (Z part)`` where ``k`` is the
  number of qubits carrying both an X and a Z (i.e. Y = iXZ).  Global phase
  is irrelevant to every consumer (states are compared through fidelity)
  but the convention is kept fixed.
* Operations are value-like: public functions return a fresh StateVector
  and never mutate their argument, so independent simulations can share
  states freely across threads.

The register is capped at MAX_QUBITS = 22 (a 64 MiB amplitude array).
Callers that need many ancillas are expected to allocate, measure and drop
them one at a time; helpers for that live at the bottom of the module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 22

_SQRT_HALF = math.sqrt(0.5)


class QubitCountError(ValueError):
    """Register size out of range, or size mismatch between states."""


class AddressingError(ValueError):
    """An operation addressed a qubit that does not exist or a repeated pair."""


class BranchError(ValueError):
    """A forced measurement outcome has (numerically) zero probability."""


@dataclass(frozen=True)
class PauliString:
    """Pauli operator as X/Z support bitmasks (bit p = qubit p)."""

    xs: int = 0
    zs: int = 0

    @classmethod
    def single(cls, qubit: int, axis: str) -> "PauliString":
        bit = 1 << qubit
        if axis == "X":
            return cls(xs=bit)
        if axis == "Z":
            return cls(zs=bit)
        if axis == "Y":
            return cls(xs=bit, zs=bit)
        raise ValueError(f"unknown Pauli axis {axis!r}")

    @classmethod
    def z_on(cls, qubits) -> "PauliString":
        mask = 0
        for q in qubits:
            mask |= 1 << q
        return cls(zs=mask)

    @classmethod
    def x_on(cls, qubits) -> "PauliString":
        mask = 0
        for q in qubits:
            mask |= 1 << q
        return cls(xs=mask)

    def compose(self, other: "PauliString") -> "PauliString":
        """Product up to global phase (supports XOR)."""
        return PauliString(self.xs ^ other.xs, self.zs ^ other.zs)

    def commutes_with(self, other: "PauliString") -> bool:
        overlap = (self.xs & other.zs).bit_count() + (self.zs & other.xs).bit_count()
        return overlap % 2 == 0

    @property
    def is_identity(self) -> bool:
        return self.xs == 0 and self.zs == 0

    @property
    def support(self) -> int:
        return self.xs | self.zs

    @property
    def weight(self) -> int:
        return (self.xs | self.zs).bit_count()

    def qubits(self) -> list[int]:
        mask, out = self.support, []
        while mask:
            low = mask & -mask
            out.append(low.bit_length() - 1)
            mask ^= low
        return out

    def mapped(self, position_of: dict[int, int]) -> "PauliString":
        """Relabel qubits through a {qubit: new_index} mapping."""
        xs = zs = 0
        for q in self.qubits():
            p = position_of[q]
            if (self.xs >> q) & 1:
                xs |= 1 << p
            if (self.zs >> q) & 1:
                zs |= 1 << p
        return PauliString(xs, zs)


@dataclass(frozen=True)
class MeasurementOutcome:
    value: int  # +1 or -1
    probability: float


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _check_qubit(s: StateVector, i: int) -> None:
    if not 0 <= i < s.num_qubits:
        raise AddressingError(f"qubit {i} outside register of {s.num_qubits}")


def _writable_amps(s: StateVector) -> np.ndarray:
    return np.array(s.amplitudes, dtype=np.complex128, copy=True)


def new_plus_state(q: int) -> StateVector:
    """|+>^q: all 2^q amplitudes equal to 2^(-q/2)."""
    if not 1 <= q <= MAX_QUBITS:
        raise QubitCountError(f"qubit count {q} outside [1, {MAX_QUBITS}]")
    amps = np.full(1 << q, 2.0 ** (-q / 2), dtype=np.complex128)
    return StateVector(q, amps)


# ---------------------------------------------------------------------------
# In-place kernels.  These mutate the array they are given; the public
# wrappers copy first.  Qubit p corresponds to axis (L-1-p) after reshaping
# to [2]*L, i.e. to index bit p.


def _pair_view(amps: np.ndarray, num_qubits: int, i: int, j: int) -> np.ndarray:
    """5-d view with axes (high, bit_j, mid, bit_i, low) for i < j."""
    lo, hi = (i, j) if i < j else (j, i)
    return amps.reshape(
        1 << (num_qubits - 1 - hi), 2, 1 << (hi - 1 - lo), 2, 1 << lo
    )


def _kernel_cz_theta(amps: np.ndarray, num_qubits: int, i: int, j: int, theta: float) -> None:
    v = _pair_view(amps, num_qubits, i, j)
    eq = np.exp(-0.5j * theta)
    ne = np.exp(0.5j * theta)
    v[:, 0, :, 0, :] *= eq
    v[:, 1, :, 1, :] *= eq
    v[:, 0, :, 1, :] *= ne
    v[:, 1, :, 0, :] *= ne


def _kernel_cphase(amps: np.ndarray, num_qubits: int, i: int, j: int) -> None:
    v = _pair_view(amps, num_qubits, i, j)
    v[:, 1, :, 1, :] *= -1.0


def _qubit_view(amps: np.ndarray, num_qubits: int, p: int) -> np.ndarray:
    return amps.reshape(1 << (num_qubits - 1 - p), 2, 1 << p)


def _kernel_pauli(amps: np.ndarray, num_qubits: int, pauli: PauliString) -> None:
    for p in pauli.qubits():
        v = _qubit_view(amps, num_qubits, p)
        has_x = (pauli.xs >> p) & 1
        has_z = (pauli.zs >> p) & 1
        if has_z:
            v[:, 1, :] *= -1.0
        if has_x:
            tmp = v[:, 0, :].copy()
            v[:, 0, :] = v[:, 1, :]
            v[:, 1, :] = tmp
        if has_x and has_z:
            amps *= 1j


def _kernel_x_components(amps: np.ndarray, num_qubits: int, p: int):
    """Return unnormalized (plus, minus) component arrays with qubit p removed."""
    v = _qubit_view(amps, num_qubits, p)
    a0 = v[:, 0, :]
    a1 = v[:, 1, :]
    plus = ((a0 + a1) * _SQRT_HALF).reshape(-1)
    minus = ((a0 - a1) * _SQRT_HALF).reshape(-1)
    return plus, minus


# ---------------------------------------------------------------------------
# Public operations.


def apply_cz_theta(s: StateVector, i: int, j: int, theta: float) -> StateVector:
    """exp(-i theta/2 Z_i Z_j); unitary and diagonal, norm preserved."""
    _check_qubit(s, i)
    _check_qubit(s, j)
    if i == j:
        raise AddressingError("cz_theta requires two distinct qubits")
    out = _writable_amps(s)
    _kernel_cz_theta(out, s.num_qubits, i, j, theta)
    return StateVector(s.num_qubits, out)


def apply_cphase(s: StateVector, i: int, j: int) -> StateVector:
    """diag(1,1,1,-1) on the pair: negates amplitudes with both bits set."""
    _check_qubit(s, i)
    _check_qubit(s, j)
    if i == j:
        raise AddressingError("cphase requires two distinct qubits")
    out = _writable_amps(s)
    _kernel_cphase(out, s.num_qubits, i, j)
    return StateVector(s.num_qubits, out)


def apply_pauli(s: StateVector, p: PauliString) -> StateVector:
    if p.support >> s.num_qubits:
        raise AddressingError("Pauli support outside register")
    out = _writable_amps(s)
    _kernel_pauli(out, s.num_qubits, p)
    return StateVector(s.num_qubits, out)


def measure_x(
    s: StateVector,
    i: int,
    forced: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[MeasurementOutcome, StateVector]:
    """Project qubit i onto (I +/- X_i)/2 and renormalize.

    With ``forced`` the named branch is taken deterministically (used to
    enumerate outcome branches); forcing a branch of probability below
    1e-12 raises BranchError.  Without ``forced`` the branch is sampled
    from ``rng`` (a fresh generator if none is given).
    """
    _check_qubit(s, i)
    plus, minus = _kernel_x_components(s.amplitudes, s.num_qubits, i)
    p_plus = float(np.vdot(plus, plus).real)
    p_minus = float(np.vdot(minus, minus).real)
    if forced is not None:
        if forced not in (+1, -1):
            raise ValueError("forced outcome must be +1 or -1")
        value = forced
        prob = p_plus if forced == +1 else p_minus
        if prob <= 1e-12:
            raise BranchError(f"forced X outcome {forced} on qubit {i} has probability {prob:.3e}")
    else:
        if rng is None:
            rng = np.random.default_rng()
        value = +1 if rng.random() < p_plus else -1
        prob = p_plus if value == +1 else p_minus
    comp = plus if value == +1 else minus
    comp = comp.astype(np.complex128) / math.sqrt(prob)
    # Reassemble with qubit i in the observed |+-> eigenstate.
    v = comp.reshape(1 << (s.num_qubits - 1 - i), 1 << i)
    out = np.empty(s.amplitudes.size, dtype=np.complex128).reshape(
        1 << (s.num_qubits - 1 - i), 2, 1 << i
    )
    out[:, 0, :] = v * _SQRT_HALF
    out[:, 1, :] = v * (_SQRT_HALF * value)
    return (
        MeasurementOutcome(value=value, probability=prob),
        StateVector(s.num_qubits, out.reshape(-1)),
    )


def fidelity(s: StateVector, t: StateVector) -> float:
    """|<s|t>|^2."""
    if s.num_qubits != t.num_qubits:
        raise QubitCountError("fidelity requires equal qubit counts")
    return float(abs(np.vdot(s.amplitudes, t.amplitudes)) ** 2)


def append_plus_qubit(s: StateVector) -> StateVector:
    """Grow the register by one qubit in |+>, placed at the top position."""
    if s.num_qubits >= MAX_QUBITS:
        raise QubitCountError(f"cannot grow past {MAX_QUBITS} qubits")
    amps = np.concatenate([s.amplitudes, s.amplitudes]) * _SQRT_HALF
    return StateVector(s.num_qubits + 1, amps)
