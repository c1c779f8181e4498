"""Magic-state preparation on the phase-flip repetition code.

The gadget prepares a logical phase state (|0>_L + e^{i theta}|1>_L)/sqrt(2)
on an n-qubit repetition code (stabilizers X_j X_{j+1}, X_L = X_1,
Z_L = Z^n).  theta = pi/2 gives |+i>_L, theta = pi/4 gives |T>_L.

Circuit structure, in location order (qubit ids in parentheses):

1. PrepX on block 1 (0..n-1) and block 2 (n..2n-1).
2. n CZ(theta) gates pairing block-1 qubit i with block-2 qubit i.
3. r_z rounds of an ancilla-mediated Z-parity measurement of block 1
   (PrepX ancilla, CPHASE ancilla<->each block-1 qubit, MeasX ancilla).
4. MeasX on every block-1 qubit.
5. PrepX on block 3 (2n..3n-1).
6. r_zz rounds of the joint Z-parity measurement of blocks 2 and 3
   (PrepX ancilla, CPHASE to block-2 qubits 0..n-1 then block-3 qubits
   0..n-1, MeasX ancilla).
7. MeasX on every block-2 qubit.

Each parity round gets a fresh ancilla id (3n, 3n+1, ...).  Location count
is 2n + n + r_z(n+2) + n + n + r_zz(2n+2) + n.

Decoding: the r_z (r_zz) ancilla readings are majority-voted into the
block-1 parity and the joint parity bit b; the block-1 and block-2 X
records must be perfectly correlated or perfectly anticorrelated; the
required Pauli correction on block 3 is read from a table keyed on
(parity bit, b, number of +1 block-2 outcomes).  The table is derived
numerically, once per (n, theta), by enumerating every noiseless branch
and finding the logical Pauli that maps its output to the target state;
record keys whose branches admit no such Pauli (e.g. |alpha| in {0, n}
for theta = pi/4) are rejected, which reproduces the
n - |alpha| = |alpha| +/- 1 acceptance rule.

Faults are (location index, PauliString-on-global-ids) pairs, applied
after their location executes, except at MeasX locations where they are
applied before readout.  Fault Paulis may touch any qubit that is live at
that point in the circuit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import statevec as sv
from .statevec import BranchError, PauliString, StateVector

SIM_MAX_N = 7  # live register peaks at 2n+1 qubits; keeps arrays small


class ConfigError(ValueError):
    """Invalid gadget configuration."""


class RecordError(ValueError):
    """Measurement record does not match the circuit layout."""


class Target(enum.Enum):
    PLUS_I = "plusI"
    T = "T"
    CUSTOM = "custom"


class LocationKind(enum.Enum):
    PREP_X = "prep_x"
    MEAS_X = "meas_x"
    CZ_THETA = "cz_theta"
    CPHASE = "cphase"


class LogicalClass(enum.Enum):
    I = "I"
    XL = "XL"
    ZL = "ZL"
    YL = "YL"
    REJECTED = "rejected"


@dataclass(frozen=True)
class GadgetConfig:
    n: int
    theta: float
    r_z: int
    r_zz: int
    target: Target

    def __post_init__(self):
        if self.n < 1 or self.n % 2 == 0:
            raise ConfigError(f"code length n={self.n} must be odd and >= 1")
        for name, r in (("r_z", self.r_z), ("r_zz", self.r_zz)):
            if r < 1 or r % 2 == 0:
                raise ConfigError(f"{name}={r} must be odd and >= 1 (majority votes need odd counts)")
        if self.target is Target.PLUS_I and not math.isclose(self.theta, math.pi / 2):
            raise ConfigError("target plusI requires theta = pi/2")
        if self.target is Target.T and not math.isclose(self.theta, math.pi / 4):
            raise ConfigError("target T requires theta = pi/4")

    @classmethod
    def plus_i(cls, n: int, r: int = 1, r_zz: int | None = None) -> "GadgetConfig":
        return cls(n=n, theta=math.pi / 2, r_z=r, r_zz=r if r_zz is None else r_zz, target=Target.PLUS_I)

    @classmethod
    def t_state(cls, n: int, r: int = 1, r_zz: int | None = None) -> "GadgetConfig":
        return cls(n=n, theta=math.pi / 4, r_z=r, r_zz=r if r_zz is None else r_zz, target=Target.T)

    @classmethod
    def custom(cls, n: int, theta: float, r: int = 1, r_zz: int | None = None) -> "GadgetConfig":
        return cls(n=n, theta=theta, r_z=r, r_zz=r if r_zz is None else r_zz, target=Target.CUSTOM)

    @property
    def num_measurements(self) -> int:
        return self.r_z + self.r_zz + 2 * self.n


@dataclass(frozen=True)
class Location:
    kind: LocationKind
    qubits: tuple[int, ...]
    step: int

    def __post_init__(self):
        want = 2 if self.kind in (LocationKind.CZ_THETA, LocationKind.CPHASE) else 1
        if len(self.qubits) != want or len(set(self.qubits)) != len(self.qubits):
            raise ConfigError(f"{self.kind.value} location needs {want} distinct qubit(s)")


@dataclass(frozen=True)
class Circuit:
    n: int
    r_z: int
    r_zz: int
    locations: tuple[Location, ...]
    block_map: dict[int, str]  # qubit id -> "block1"/"block2"/"block3"/"ancilla<k>"

    @property
    def num_locations(self) -> int:
        return len(self.locations)

    def measurement_locations(self) -> list[int]:
        return [t for t, loc in enumerate(self.locations) if loc.kind is LocationKind.MEAS_X]


def block1_qubits(n: int) -> range:
    return range(0, n)


def block2_qubits(n: int) -> range:
    return range(n, 2 * n)


def block3_qubits(n: int) -> range:
    return range(2 * n, 3 * n)


def build_circuit(cfg: GadgetConfig) -> Circuit:
    n, r_z, r_zz = cfg.n, cfg.r_z, cfg.r_zz
    locs: list[Location] = []
    block_map: dict[int, str] = {}

    def add(kind, qubits):
        locs.append(Location(kind=kind, qubits=tuple(qubits), step=len(locs)))

    for q in block1_qubits(n):
        block_map[q] = "block1"
        add(LocationKind.PREP_X, (q,))
    for q in block2_qubits(n):
        block_map[q] = "block2"
        add(LocationKind.PREP_X, (q,))
    for i in range(n):
        add(LocationKind.CZ_THETA, (i, n + i))

    next_ancilla = 3 * n
    for _ in range(r_z):
        anc = next_ancilla
        next_ancilla += 1
        block_map[anc] = f"ancilla{anc - 3 * n}"
        add(LocationKind.PREP_X, (anc,))
        for q in block1_qubits(n):
            add(LocationKind.CPHASE, (q, anc))
        add(LocationKind.MEAS_X, (anc,))

    for q in block1_qubits(n):
        add(LocationKind.MEAS_X, (q,))
    for q in block3_qubits(n):
        block_map[q] = "block3"
        add(LocationKind.PREP_X, (q,))

    for _ in range(r_zz):
        anc = next_ancilla
        next_ancilla += 1
        block_map[anc] = f"ancilla{anc - 3 * n}"
        add(LocationKind.PREP_X, (anc,))
        for q in block2_qubits(n):
            add(LocationKind.CPHASE, (q, anc))
        for q in block3_qubits(n):
            add(LocationKind.CPHASE, (q, anc))
        add(LocationKind.MEAS_X, (anc,))

    for q in block2_qubits(n):
        add(LocationKind.MEAS_X, (q,))

    expected = 2 * n + n + r_z * (n + 2) + n + n + r_zz * (2 * n + 2) + n
    assert len(locs) == expected, (len(locs), expected)
    return Circuit(n=n, r_z=r_z, r_zz=r_zz, locations=tuple(locs), block_map=block_map)


# ---------------------------------------------------------------------------
# Execution engine: a live register that allocates qubits at PrepX and drops
# them at MeasX, so the array never exceeds 2n+1 qubits.


class _Register:
    __slots__ = ("amps", "order")

    def __init__(self):
        self.amps = np.ones(1, dtype=np.complex128)
        self.order: list[int] = []  # qubit id by position (bit index)

    def copy(self) -> "_Register":
        r = _Register.__new__(_Register)
        r.amps = self.amps.copy()
        r.order = list(self.order)
        return r

    @property
    def num_qubits(self) -> int:
        return len(self.order)

    def position(self, qid: int) -> int:
        return self.order.index(qid)

    def prep_plus(self, qid: int) -> None:
        self.amps = np.concatenate([self.amps, self.amps]) * sv._SQRT_HALF
        self.order.append(qid)

    def cz_theta(self, q1: int, q2: int, theta: float) -> None:
        sv._kernel_cz_theta(self.amps, self.num_qubits, self.position(q1), self.position(q2), theta)

    def cphase(self, q1: int, q2: int) -> None:
        sv._kernel_cphase(self.amps, self.num_qubits, self.position(q1), self.position(q2))

    def pauli(self, p: PauliString) -> None:
        local = p.mapped({q: i for i, q in enumerate(self.order)})
        sv._kernel_pauli(self.amps, self.num_qubits, local)

    def x_branch_probabilities(self, qid: int):
        plus, minus = sv._kernel_x_components(self.amps, self.num_qubits, self.position(qid))
        return plus, minus

    def collapse_drop(self, qid: int, component: np.ndarray, prob: float) -> None:
        """Replace the register with one measurement branch, qubit removed."""
        self.amps = component / math.sqrt(prob)
        self.order.pop(self.position(qid))


@dataclass(frozen=True)
class Branch:
    record: tuple[int, ...]
    probability: float
    state: np.ndarray  # block-3 amplitudes, canonical qubit order

    @property
    def num_qubits(self) -> int:
        return int(round(math.log2(self.state.size)))


_BRANCH_EPS = 1e-12  # outcome probabilities below this are treated as zero


def _faults_by_location(faults) -> dict[int, PauliString]:
    merged: dict[int, PauliString] = {}
    for loc, pauli in faults:
        merged[loc] = merged.get(loc, PauliString()).compose(pauli)
    return merged


def _final_block3(circuit: Circuit, reg: _Register) -> np.ndarray:
    expected = list(block3_qubits(circuit.n))
    if reg.order != expected:
        raise AssertionError(f"unexpected final register order {reg.order} vs {expected}")
    return reg.amps.copy()


def _run_segment(circuit, theta, reg, fault_map, start, meas_index, policy, record, prob, sink):
    """Execute locations from ``start``; recurse at measurements.

    ``policy(meas_index, p_plus, p_minus) -> list[int]`` returns the outcome
    branches to follow (one entry for sampling/forcing, possibly two for
    enumeration).
    """
    locs = circuit.locations
    t = start
    while t < len(locs):
        loc = locs[t]
        fault = fault_map.get(t)
        if loc.kind is LocationKind.PREP_X:
            reg.prep_plus(loc.qubits[0])
        elif loc.kind is LocationKind.CZ_THETA:
            reg.cz_theta(loc.qubits[0], loc.qubits[1], theta)
        elif loc.kind is LocationKind.CPHASE:
            reg.cphase(*loc.qubits)
        else:  # MEAS_X: fault fires before readout
            if fault is not None:
                reg.pauli(fault)
            qid = loc.qubits[0]
            plus, minus = reg.x_branch_probabilities(qid)
            p_plus = float(np.vdot(plus, plus).real)
            p_minus = float(np.vdot(minus, minus).real)
            outcomes = policy(meas_index, p_plus, p_minus)
            for k, value in enumerate(outcomes):
                branch_prob = p_plus if value == +1 else p_minus
                child = reg if k == len(outcomes) - 1 else reg.copy()
                comp = plus if value == +1 else minus
                if child is not reg:
                    comp = comp.copy()
                child.collapse_drop(qid, comp, branch_prob)
                _run_segment(
                    circuit, theta, child, fault_map, t + 1, meas_index + 1, policy,
                    record + [value], prob * branch_prob, sink,
                )
            return
        if fault is not None and loc.kind is not LocationKind.MEAS_X:
            reg.pauli(fault)
        t += 1
    sink(tuple(record), prob, _final_block3(circuit, reg))


def _execute(circuit: Circuit, cfg: GadgetConfig, faults, policy, sink) -> None:
    _run_segment(circuit, cfg.theta, _Register(), _faults_by_location(faults), 0, 0, policy, [], 1.0, sink)


def enumerate_branches(circuit: Circuit, cfg: GadgetConfig, faults=()) -> list[Branch]:
    """All measurement branches with probability > ~1e-12, exactly executed."""
    out: list[Branch] = []

    def policy(_idx, p_plus, p_minus):
        branches = []
        if p_plus > _BRANCH_EPS:
            branches.append(+1)
        if p_minus > _BRANCH_EPS:
            branches.append(-1)
        return branches

    _execute(circuit, cfg, faults, policy, lambda rec, p, st: out.append(Branch(rec, p, st)))
    return out


def _single_path(circuit, cfg, faults, policy):
    result = {}

    def sink(rec, p, st):
        result["branch"] = Branch(rec, p, st)

    _execute(circuit, cfg, faults, policy, sink)
    return result["branch"]


# ---------------------------------------------------------------------------
# Targets, correction tables, decoding, classification.


def target_state(cfg: GadgetConfig) -> np.ndarray:
    """(|0>_L + e^{i theta} |1>_L)/sqrt(2) as a 2^n amplitude array."""
    n = cfg.n
    dim = 1 << n
    plus_l = np.full(dim, 2.0 ** (-n / 2), dtype=np.complex128)
    signs = np.array([(-1) ** (int(z).bit_count()) for z in range(dim)])
    minus_l = plus_l * signs
    zero_l = (plus_l + minus_l) / math.sqrt(2)
    one_l = (plus_l - minus_l) / math.sqrt(2)
    return (zero_l + np.exp(1j * cfg.theta) * one_l) / math.sqrt(2)


def _logical_paulis(n: int) -> dict[LogicalClass, PauliString]:
    return {
        LogicalClass.I: PauliString(),
        LogicalClass.XL: PauliString.x_on([0]),
        LogicalClass.ZL: PauliString.z_on(range(n)),
        LogicalClass.YL: PauliString.x_on([0]).compose(PauliString.z_on(range(n))),
    }


_CLASS_ORDER = (LogicalClass.I, LogicalClass.XL, LogicalClass.ZL, LogicalClass.YL)


def _apply_local_pauli(state: np.ndarray, n: int, p: PauliString) -> np.ndarray:
    out = state.copy()
    sv._kernel_pauli(out, n, p)
    return out


def _state_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.vdot(a, b)) ** 2)


class CorrectionTableError(RuntimeError):
    """The noiseless branch set admits no consistent correction table."""


_table_cache: dict[tuple, dict] = {}


def correction_table(cfg: GadgetConfig) -> dict[tuple[int, int, int], PauliString]:
    """(zl_bit, b, alpha_count) -> block-3 correction, derived numerically.

    Built from the full noiseless branch enumeration at r_z = r_zz = 1
    (repetition count does not change the noiseless branch states).  Keys
    absent from the table are not Pauli-correctable to the target and are
    rejected by the decoder.
    """
    key = (cfg.n, cfg.target, round(cfg.theta, 12))
    if key in _table_cache:
        return _table_cache[key]
    base = GadgetConfig(n=cfg.n, theta=cfg.theta, r_z=1, r_zz=1, target=cfg.target)
    circuit = build_circuit(base)
    target = target_state(base)
    paulis = _logical_paulis(cfg.n)
    table: dict[tuple[int, int, int], PauliString] = {}
    chosen: dict[tuple[int, int, int], LogicalClass] = {}
    for branch in enumerate_branches(circuit, base):
        summary = _record_summary(base, branch.record)
        if not summary.correlated:
            raise CorrectionTableError("noiseless branch with mismatched X records")
        k = (summary.zl_bit, summary.b, summary.alpha)
        found = None
        for cls in _CLASS_ORDER:
            cand = _apply_local_pauli(branch.state, cfg.n, paulis[cls])
            if _state_fidelity(cand, target) > 1 - 1e-9:
                found = cls
                break
        if found is None:
            if k in chosen:
                raise CorrectionTableError(f"branch key {k} is correctable on some branches only")
            continue
        if k in chosen and chosen[k] is not found:
            raise CorrectionTableError(f"inconsistent corrections for key {k}")
        chosen[k] = found
        table[k] = paulis[found]
    if not table:
        raise CorrectionTableError("no branch is Pauli-correctable to the target")
    _table_cache[key] = table
    return table


@dataclass(frozen=True)
class _RecordSummary:
    zl_bit: int
    b: int
    zl_parity_value: int
    b_value: int
    block1_x: tuple[int, ...]
    block2_x: tuple[int, ...]
    correlated: bool
    alpha: int


def _majority(values) -> int:
    return +1 if sum(values) > 0 else -1


def _record_summary(cfg: GadgetConfig, record) -> _RecordSummary:
    n, r_z, r_zz = cfg.n, cfg.r_z, cfg.r_zz
    if len(record) != cfg.num_measurements:
        raise RecordError(f"record length {len(record)} != {cfg.num_measurements}")
    if any(v not in (+1, -1) for v in record):
        raise RecordError("record entries must be +1 or -1")
    zl_readings = record[:r_z]
    block1 = tuple(record[r_z : r_z + n])
    zz_readings = record[r_z + n : r_z + n + r_zz]
    block2 = tuple(record[r_z + n + r_zz :])
    zl_value = _majority(zl_readings)
    b_value = _majority(zz_readings)
    same = all(a == b for a, b in zip(block1, block2))
    opposite = all(a == -b for a, b in zip(block1, block2))
    return _RecordSummary(
        zl_bit=0 if zl_value == +1 else 1,
        b=0 if b_value == +1 else 1,
        zl_parity_value=zl_value,
        b_value=b_value,
        block1_x=block1,
        block2_x=block2,
        correlated=same or opposite,
        alpha=sum(1 for v in block2 if v == +1),
    )


@dataclass
class GadgetOutcome:
    accepted: bool
    b: int
    zl_parity: int
    block1_x: tuple[int, ...]
    block2_x: tuple[int, ...]
    correction: PauliString | None
    logical_class: LogicalClass
    output_state: np.ndarray | None = None
    class_fidelity: float | None = None
    anomaly: bool = False
    probability: float | None = None


def decode(cfg: GadgetConfig, raw_measurements) -> GadgetOutcome:
    """Classical decoding of a complete measurement record.

    Majority-votes the repeated parity readings, applies the block-1/2
    correlation test, and looks up the block-3 correction; records whose
    (parity, b, alpha) key is not correctable are rejected.
    """
    s = _record_summary(cfg, raw_measurements)
    table = correction_table(cfg)
    correction = None
    accepted = False
    if s.correlated:
        local = table.get((s.zl_bit, s.b, s.alpha))
        if local is not None:
            accepted = True
            offset = 2 * cfg.n
            correction = PauliString(xs=local.xs << offset, zs=local.zs << offset)
    return GadgetOutcome(
        accepted=accepted,
        b=s.b,
        zl_parity=s.zl_bit,
        block1_x=s.block1_x,
        block2_x=s.block2_x,
        correction=correction,
        logical_class=LogicalClass.I if accepted else LogicalClass.REJECTED,
    )


_candidate_cache: dict[tuple, list] = {}


def _class_candidates(cfg: GadgetConfig):
    """For each logical class, the target states equivalent up to correctable
    residual Z errors (weight <= (n-1)/2) on the output block."""
    key = (cfg.n, cfg.target, round(cfg.theta, 12))
    if key in _candidate_cache:
        return _candidate_cache[key]
    n = cfg.n
    target = target_state(cfg)
    paulis = _logical_paulis(n)
    max_w = (n - 1) // 2
    z_masks = [m for m in range(1 << n) if int(m).bit_count() <= max_w]
    out = []
    for cls in _CLASS_ORDER:
        base = _apply_local_pauli(target, n, paulis[cls])
        states = [_apply_local_pauli(base, n, PauliString(zs=m)) for m in z_masks]
        out.append((cls, np.stack(states)))
    _candidate_cache[key] = out
    return out


def classify_logical(
    output_state: np.ndarray, correction: PauliString | None, cfg: GadgetConfig
) -> tuple[LogicalClass, float, bool]:
    """Classify an accepted output against {I, XL, ZL, YL} x target.

    The correction (global qubit ids on block 3) is applied first; each
    class is represented by the target hit with that logical Pauli and any
    correctable-weight physical Z pattern, so a stray correctable Z on the
    output block classifies as I rather than ZL.

    Returns (class, fidelity, anomaly).  An accepted state reaching no
    class at fidelity > 0.99 is a wrong-angle output (a logical-Z-axis
    rotation error, e.g. from a correlated ZZ fault shifting the record
    into acceptance); those are booked as ZL with the best fidelity
    recorded, the same convention the analytic Z_L budget uses.  States
    below fidelity 0.5 to every class are flagged as anomalies.
    """
    n = cfg.n
    state = np.asarray(output_state, dtype=np.complex128)
    if state.size != (1 << n):
        raise RecordError(f"output state has {state.size} amplitudes, expected {1 << n}")
    if correction is not None and not correction.is_identity:
        offset = 2 * n
        local = PauliString(xs=correction.xs >> offset, zs=correction.zs >> offset)
        if (local.xs << offset != correction.xs) or (local.zs << offset != correction.zs):
            raise RecordError("correction acts outside block 3")
        state = _apply_local_pauli(state, n, local)
    best_fid = -1.0
    for cls, stack in _class_candidates(cfg):
        fid = float(np.max(np.abs(stack.conj() @ state) ** 2))
        if fid > 0.99:
            return cls, fid, False
        if fid > best_fid:
            best_fid = fid
    if best_fid < 0.5:
        return LogicalClass.ZL, best_fid, True
    return LogicalClass.ZL, best_fid, False


def _finish_outcome(cfg: GadgetConfig, branch: Branch) -> GadgetOutcome:
    outcome = decode(cfg, branch.record)
    outcome.probability = branch.probability
    if outcome.accepted:
        outcome.output_state = branch.state
        cls, fid, anomaly = classify_logical(branch.state, outcome.correction, cfg)
        outcome.logical_class = cls
        outcome.class_fidelity = fid
        outcome.anomaly = anomaly
    return outcome


def run(
    circuit: Circuit,
    cfg: GadgetConfig,
    faults=(),
    forced_outcomes=None,
    rng: np.random.Generator | None = None,
) -> GadgetOutcome:
    """Execute one (possibly faulty) pass of the gadget and decode it.

    ``faults`` is an iterable of (location index, PauliString) pairs.
    ``forced_outcomes`` may fix any subset of the measurement outcomes
    (entries of +1/-1, with None meaning "sample"); forcing an outcome of
    zero branch probability raises BranchError.  ``output_state`` on the
    returned outcome is the raw block-3 state; applying ``correction``
    maps it to the target on accepted noiseless runs.
    """
    n_meas = cfg.num_measurements
    forced: list[int | None]
    if forced_outcomes is None:
        forced = [None] * n_meas
    else:
        forced = list(forced_outcomes)
        if len(forced) != n_meas:
            raise RecordError(f"forced outcome list has length {len(forced)}, expected {n_meas}")
    sampler = rng if rng is not None else np.random.default_rng()

    def policy(meas_index, p_plus, p_minus):
        want = forced[meas_index]
        if want is not None:
            prob = p_plus if want == +1 else p_minus
            if prob <= _BRANCH_EPS:
                raise BranchError(
                    f"forced outcome {want} at measurement {meas_index} has probability {prob:.3e}"
                )
            return [want]
        return [+1 if sampler.random() < p_plus else -1]

    branch = _single_path(circuit, cfg, faults, policy)
    return _finish_outcome(cfg, branch)


def run_all_branches(circuit: Circuit, cfg: GadgetConfig, faults=()) -> list[GadgetOutcome]:
    """Decode + classify every branch of :func:`enumerate_branches`."""
    return [_finish_outcome(cfg, b) for b in enumerate_branches(circuit, cfg, faults)]


def accept_probability_exact(n: int) -> Fraction:
    """Exact acceptance probability 2^(1-n) C(n, (n-1)/2) of the theta=pi/4 gadget."""
    if n < 1 or n % 2 == 0:
        raise ConfigError(f"acceptance probability is defined for odd n, got {n}")
    return Fraction(2 * math.comb(n, (n - 1) // 2), 2**n)
