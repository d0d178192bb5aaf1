"""Complex state-vector engine for the protocol simulator.

States are dense 2^n amplitude vectors with a fixed qubit order.  Every
vector is kept in canonical form: unit norm, and the first amplitude with
magnitude above PHASE_EPS made real and positive, which eliminates the
global phase and makes name interning deterministic.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NormalizationError, OverlapError, UnknownQubitError

NORM_EPS = 1e-9
PHASE_EPS = 1e-9
INTERN_EPS = 1e-6
SCHMIDT_EPS = 1e-7
PROB_EPS = 1e-9


class PureStateVector:
    """Immutable pure state of an ordered set of named qubits."""

    __slots__ = ("qubits", "amps")

    def __init__(self, qubits, amps, check=True):
        qubits = tuple(qubits)
        amps = np.asarray(amps, dtype=np.complex128)
        if amps.shape != (2 ** len(qubits),):
            raise ValueError(
                f"state over {len(qubits)} qubits needs {2 ** len(qubits)} "
                f"amplitudes, got {amps.shape}"
            )
        if len(set(qubits)) != len(qubits):
            raise OverlapError(f"duplicate qubit in {qubits}")
        if check:
            norm = np.linalg.norm(amps)
            if abs(norm - 1.0) > NORM_EPS:
                raise NormalizationError(
                    f"state over {qubits} has squared norm {norm ** 2:.12f}"
                )
        amps = _canonical_phase(amps)
        amps.setflags(write=False)
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "amps", amps)

    def __setattr__(self, name, value):
        raise AttributeError("PureStateVector is immutable")

    @property
    def n_qubits(self):
        return len(self.qubits)

    def index_of(self, q):
        try:
            return self.qubits.index(q)
        except ValueError:
            raise UnknownQubitError(f"qubit {q} not in state over {self.qubits}")

    def reordered(self, new_order):
        """Same state with qubit axes permuted into new_order."""
        if set(new_order) != set(self.qubits) or len(new_order) != self.n_qubits:
            raise ValueError(f"{new_order} is not a permutation of {self.qubits}")
        perm = [self.qubits.index(q) for q in new_order]
        t = self.amps.reshape((2,) * self.n_qubits).transpose(perm)
        return PureStateVector(new_order, t.reshape(-1), check=False)

    def close_to(self, other, tol=INTERN_EPS):
        """Max-norm closeness of canonical amplitude vectors (same size)."""
        return (
            self.amps.shape == other.amps.shape
            and float(np.max(np.abs(self.amps - other.amps))) <= tol
        )

    def __repr__(self):
        return f"PureStateVector({self.qubits}, {np.round(self.amps, 6)})"


def _canonical_phase(amps):
    idx = np.flatnonzero(np.abs(amps) > PHASE_EPS)
    if idx.size == 0:
        return np.array(amps)
    a = amps[idx[0]]
    return np.array(amps * (a.conjugate() / abs(a)))


EMPTY_STATE = PureStateVector((), [1.0])


@dataclass(frozen=True)
class MeasurementOutcome:
    outcome_bit: int
    probability: float
    collapsed_qubit_state: PureStateVector
    residual: PureStateVector | None


def tensor(a, b):
    """Kronecker product in concatenated qubit order."""
    if set(a.qubits) & set(b.qubits):
        raise OverlapError(
            f"tensor factors share qubits {set(a.qubits) & set(b.qubits)}"
        )
    return PureStateVector(a.qubits + b.qubits, np.kron(a.amps, b.amps), check=False)


def _axis_view(state, q):
    """Amplitudes reshaped with the axis of q first: shape (2, rest)."""
    i = state.index_of(q)
    t = state.amps.reshape((2,) * state.n_qubits)
    t = np.moveaxis(t, i, 0)
    return t.reshape(2, -1)


def apply_entangle(state, q, r):
    """Controlled-Z between q and r: negate amplitudes with q = r = 1."""
    if q == r:
        raise UnknownQubitError(f"cannot entangle {q} with itself")
    iq, ir = state.index_of(q), state.index_of(r)
    t = np.array(state.amps).reshape((2,) * state.n_qubits)
    sel = [slice(None)] * state.n_qubits
    sel[iq] = 1
    sel[ir] = 1
    t[tuple(sel)] *= -1
    return PureStateVector(state.qubits, t.reshape(-1), check=False)


def apply_correction(state, q, kind):
    """Pauli X (bit flip) or Z (phase flip) on qubit q."""
    i = state.index_of(q)
    t = np.array(state.amps).reshape((2,) * state.n_qubits)
    if kind == "X":
        t = np.flip(t, axis=i)
    elif kind == "Z":
        sel = [slice(None)] * state.n_qubits
        sel[i] = 1
        t[tuple(sel)] *= -1
    else:
        raise ValueError(f"correction kind must be X or Z, got {kind!r}")
    return PureStateVector(state.qubits, t.reshape(-1), check=False)


def basis_state(alpha, outcome_bit):
    """|+_a> or |-_a> = (|0> +/- e^{i a}|1>)/sqrt(2), canonicalized."""
    sign = 1.0 if outcome_bit == 0 else -1.0
    amps = np.array([1.0, sign * np.exp(1j * alpha)]) / math.sqrt(2.0)
    return PureStateVector(("__basis__",), amps, check=False)


def measure(state, q, alpha):
    """Project q onto the {|+_a>, |-_a>} basis.

    Returns both outcomes; an impossible outcome carries probability ~0 and
    None for its post-measurement states.
    """
    view = _axis_view(state, q)
    rest = tuple(x for x in state.qubits if x != q)
    phase = np.exp(-1j * alpha)
    outcomes = []
    for bit, sign in ((0, 1.0), (1, -1.0)):
        proj = (view[0] + sign * phase * view[1]) / math.sqrt(2.0)
        prob = float(np.vdot(proj, proj).real)
        if prob <= PROB_EPS:
            outcomes.append(MeasurementOutcome(bit, prob, None, None))
            continue
        collapsed = PureStateVector(
            (q,), basis_state(alpha, bit).amps, check=False
        )
        residual = None
        if rest:
            residual = PureStateVector(rest, proj / math.sqrt(prob), check=False)
        outcomes.append(MeasurementOutcome(bit, prob, collapsed, residual))
    return tuple(outcomes)


def effective_angle(alpha, s_val=None, t_val=None):
    """Adaptive angle (-1)^s * alpha + t * pi, reduced to [0, 2*pi)."""
    s = 0 if s_val is None else int(s_val)
    t = 0 if t_val is None else int(t_val)
    return ((-1.0) ** s * alpha + t * math.pi) % (2.0 * math.pi)


# ---------------------------------------------------------------------------
# Factorization into minimal pure substates
# ---------------------------------------------------------------------------

def _rank_one_split(state, subset_mask):
    """Try to split along the bipartition given by subset_mask (bit i set
    means qubit i goes left).  Returns (left, right) states or None."""
    n = state.n_qubits
    left_axes = [i for i in range(n) if subset_mask & (1 << i)]
    right_axes = [i for i in range(n) if not subset_mask & (1 << i)]
    t = state.amps.reshape((2,) * n).transpose(left_axes + right_axes)
    mat = t.reshape(2 ** len(left_axes), 2 ** len(right_axes))
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    if s.size > 1 and s[1] > SCHMIDT_EPS:
        return None
    left = PureStateVector(
        tuple(state.qubits[i] for i in left_axes), u[:, 0], check=False
    )
    right = PureStateVector(
        tuple(state.qubits[i] for i in right_axes), vh[0, :], check=False
    )
    return left, right


def schmidt_rank(state, subset_mask, tol=SCHMIDT_EPS):
    n = state.n_qubits
    left_axes = [i for i in range(n) if subset_mask & (1 << i)]
    right_axes = [i for i in range(n) if not subset_mask & (1 << i)]
    t = state.amps.reshape((2,) * n).transpose(left_axes + right_axes)
    mat = t.reshape(2 ** len(left_axes), 2 ** len(right_axes))
    s = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(s > tol))


def factorize(state):
    """Minimal tensor factors of a pure state.

    Bipartition search: find any Schmidt-rank-1 cut, split, recurse.  Factors
    are returned ordered by the first occurrence of their qubits in the
    input's qubit order.
    """
    if state.n_qubits <= 1:
        return [state]
    n = state.n_qubits
    # only consider cuts keeping qubit 0 on the left, to halve the search
    for mask in range(1, 2 ** n - 1):
        if not mask & 1:
            continue
        split = _rank_one_split(state, mask)
        if split is not None:
            left, right = split
            return factorize(left) + factorize(right)
    return [state]


def factored(state):
    """factorize() with output sorted by original qubit position."""
    order = {q: i for i, q in enumerate(state.qubits)}
    return sorted(factorize(state), key=lambda f: min(order[q] for q in f.qubits))


# ---------------------------------------------------------------------------
# State-name interning
# ---------------------------------------------------------------------------

class StateRegistry:
    """First-encounter-order interning of canonical state vectors.

    Two vectors get the same name iff they have the same dimension and their
    canonical forms are within INTERN_EPS in max-norm.  Names are qs_1,
    qs_2, ... in encounter order.
    """

    def __init__(self):
        self._entries = []  # (name, PureStateVector)
        self._by_dim = {}

    def __len__(self):
        return len(self._entries)

    @property
    def entries(self):
        return list(self._entries)

    def lookup(self, state):
        for name, stored in self._by_dim.get(state.amps.shape[0], []):
            if stored.close_to(state):
                return name
        return None

    def intern(self, state):
        name = self.lookup(state)
        if name is not None:
            return name
        name = f"qs{len(self._entries) + 1}"
        self._entries.append((name, state))
        self._by_dim.setdefault(state.amps.shape[0], []).append((name, state))
        return name

    def state_of(self, name):
        for n, s in self._entries:
            if n == name:
                return s
        raise KeyError(name)

    def names(self):
        return [name for name, _ in self._entries]

    def to_csv(self):
        """Delimited export: name,qubits,amplitudes (9 significant digits)."""
        lines = ["name,qubits,amplitudes"]
        for name, state in self._entries:
            amps = " ".join(_fmt_csv_amp(a) for a in state.amps)
            lines.append(f"{name},{state.n_qubits},{amps}")
        return "\n".join(lines) + "\n"


def _fmt_csv_amp(a):
    re = a.real if a.real != 0 else 0.0  # avoid "-0" in the export
    im = a.imag if a.imag != 0 else 0.0
    return f"{re:.9g}{im:+.9g}i"
