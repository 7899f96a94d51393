"""Planar surface-code geometry, Pauli algebra and dense small-instance oracles.

Geometry: ``Lx x Ly`` plaquettes with rough boundaries left/right and smooth
boundaries top/bottom.  Qubits live on edges:

* horizontal edges ``(y, c)`` with ``y = 0..Ly`` (row) and ``c = 0..Lx-1``,
* vertical edges ``(r, x)`` with ``r = 0..Ly-1`` (plaquette row) and
  ``x = 1..Lx-1`` (interior vertex column),

for ``N = Lx*(Ly+1) + (Lx-1)*Ly`` qubits in total.  Plaquette stabilizers are
Z-type (3-body on the rough columns), star stabilizers are X-type on the
interior vertices ``(x, y)`` (3-body on the smooth rows).  The star count
``(Lx-1)*(Ly+1)`` is fixed by requiring ``N - 1`` independent generators,
which is validated by a symplectic-rank test.  The logical X is a vertical
column of horizontal edges, the logical Z a horizontal row of them.

The dense oracles in this module are deliberately brute force (resource
guarded) and serve as ground truth for the tensor-network code paths.  Class
amplitudes are extracted from the corrupted *Choi state* (code maximally
entangled with one reference qubit), on which the four recovery classes are
mutually orthogonal; the syndrome probability of the Choi state is then
exactly the sum of squared class amplitudes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

MAX_DENSE_QUBITS = 22
MAX_ENUM_QUBITS = 16

# error-model kinds (the CLI spellings are the canonical tokens)
X_ONLY = "x"
X_XX = "x-xx"
GENERAL_XX = "xyz-xx"
MODEL_KINDS = (X_ONLY, X_XX, GENERAL_XX)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


class Lattice:
    """Edge-indexed planar surface code with ``Lx x Ly`` plaquettes."""

    def __init__(self, Lx: int, Ly: int):
        if Lx < 2 or Ly < 1:
            raise ValueError("need Lx >= 2 and Ly >= 1")
        self.Lx = Lx
        self.Ly = Ly
        self.n_h = Lx * (Ly + 1)
        self.n_v = (Lx - 1) * Ly
        self.N = self.n_h + self.n_v

    def h_index(self, y: int, c: int) -> int:
        if not (0 <= y <= self.Ly and 0 <= c < self.Lx):
            raise IndexError(f"horizontal edge ({y},{c}) out of range")
        return y * self.Lx + c

    def v_index(self, r: int, x: int) -> int:
        if not (0 <= r < self.Ly and 1 <= x < self.Lx):
            raise IndexError(f"vertical edge ({r},{x}) out of range")
        return self.n_h + r * (self.Lx - 1) + (x - 1)

    # -- stabilizer supports ------------------------------------------------

    def plaquette_edges(self, r: int, c: int) -> list:
        edges = [self.h_index(r, c), self.h_index(r + 1, c)]
        if c >= 1:
            edges.append(self.v_index(r, c))
        if c + 1 <= self.Lx - 1:
            edges.append(self.v_index(r, c + 1))
        return edges

    def star_edges(self, x: int, y: int) -> list:
        edges = [self.h_index(y, x - 1), self.h_index(y, x)]
        if y >= 1:
            edges.append(self.v_index(y - 1, x))
        if y <= self.Ly - 1:
            edges.append(self.v_index(y, x))
        return edges

    def plaquette_coords(self) -> list:
        return [(r, c) for r in range(self.Ly) for c in range(self.Lx)]

    def star_coords(self) -> list:
        return [(x, y) for y in range(self.Ly + 1) for x in range(1, self.Lx)]

    # -- logicals and error-model supports ----------------------------------

    def logical_x_edges(self) -> list:
        return [self.h_index(y, 0) for y in range(self.Ly + 1)]

    def logical_z_edges(self) -> list:
        return [self.h_index(0, c) for c in range(self.Lx)]

    def xx_pairs(self) -> list:
        """Neighbouring horizontal-edge pairs within each row."""
        return [(self.h_index(y, c), self.h_index(y, c + 1))
                for y in range(self.Ly + 1) for c in range(self.Lx - 1)]

    def __repr__(self):
        return f"Lattice(Lx={self.Lx}, Ly={self.Ly}, N={self.N})"


def build_lattice(Lx: int, Ly: int) -> Lattice:
    return Lattice(Lx, Ly)


# --------------------------------------------------------------------- Pauli


@dataclass(frozen=True)
class PauliString:
    """Pauli operator ``phase * prod_k X_k prod_k Z_k`` (X factors left)."""

    x_sites: frozenset
    z_sites: frozenset
    phase: complex = 1.0

    @classmethod
    def x_string(cls, edges) -> "PauliString":
        return cls(frozenset(edges), frozenset())

    @classmethod
    def z_string(cls, edges) -> "PauliString":
        return cls(frozenset(), frozenset(edges))

    def commutes(self, other: "PauliString") -> bool:
        overlap = len(self.x_sites & other.z_sites) + len(self.z_sites & other.x_sites)
        return overlap % 2 == 0

    def __mul__(self, other: "PauliString") -> "PauliString":
        # (X^a Z^b)(X^c Z^d) = (-1)^{|b & c|} X^{a^c} Z^{b^d}
        sign = (-1) ** (len(self.z_sites & other.x_sites) % 2)
        return PauliString(self.x_sites ^ other.x_sites,
                           self.z_sites ^ other.z_sites,
                           self.phase * other.phase * sign)

    def weight(self) -> int:
        return len(self.x_sites | self.z_sites)


def apply_pauli(state: np.ndarray, p: PauliString) -> np.ndarray:
    """Apply a Pauli string to a dense state (one axis per qubit)."""
    out = state
    if p.z_sites:
        sign = np.zeros((), dtype=np.int8)
        for k in p.z_sites:
            shape = [1] * state.ndim
            shape[k] = 2
            sign = sign ^ np.arange(2, dtype=np.int8).reshape(shape)
        out = out * (1.0 - 2.0 * sign)
    if p.x_sites:
        out = np.flip(out, axis=tuple(p.x_sites))
    if p.phase != 1.0:
        out = out * p.phase
    return np.ascontiguousarray(out)


def stabilizers(lat: Lattice) -> list:
    """All stabilizer generators: plaquettes row-major, then stars row-major."""
    gens = [PauliString.z_string(lat.plaquette_edges(r, c))
            for (r, c) in lat.plaquette_coords()]
    gens += [PauliString.x_string(lat.star_edges(x, y))
             for (x, y) in lat.star_coords()]
    return gens


def logicals(lat: Lattice):
    """Canonical logical pair: vertical X string, horizontal Z string."""
    return (PauliString.x_string(lat.logical_x_edges()),
            PauliString.z_string(lat.logical_z_edges()))


def symplectic_rank(paulis) -> int:
    """GF(2) rank of the (x|z) representation of a list of Pauli strings."""
    sites = sorted(set().union(*[p.x_sites | p.z_sites for p in paulis]))
    pos = {s: i for i, s in enumerate(sites)}
    n = len(sites)
    rows = []
    for p in paulis:
        v = 0
        for s in p.x_sites:
            v |= 1 << pos[s]
        for s in p.z_sites:
            v |= 1 << (n + pos[s])
        rows.append(v)
    rank = 0
    for col in range(2 * n):
        pivot = next((i for i, r in enumerate(rows) if (r >> col) & 1), None)
        if pivot is None:
            continue
        pr = rows.pop(pivot)
        rows = [r ^ pr if (r >> col) & 1 else r for r in rows]
        rank += 1
    return rank


# ------------------------------------------------------------------ syndrome


@dataclass
class Syndrome:
    """Measured stabilizer outcomes; bit 1 means outcome -1."""

    plaquette_bits: np.ndarray  # (Ly, Lx) uint8
    star_bits: np.ndarray       # (Ly+1, Lx-1) uint8

    @classmethod
    def trivial(cls, lat: Lattice) -> "Syndrome":
        return cls(np.zeros((lat.Ly, lat.Lx), dtype=np.uint8),
                   np.zeros((lat.Ly + 1, lat.Lx - 1), dtype=np.uint8))

    def bits(self) -> np.ndarray:
        """Flat bit string: plaquettes row-major, then stars row-major."""
        return np.concatenate([self.plaquette_bits.ravel(), self.star_bits.ravel()])

    def key(self) -> bytes:
        return self.bits().tobytes()

    def to_hex(self) -> str:
        """Bits packed big-endian into bytes, rendered as lowercase hex."""
        return np.packbits(self.bits()).tobytes().hex()

    @classmethod
    def from_hex(cls, lat: Lattice, hx: str) -> "Syndrome":
        n_p = lat.Lx * lat.Ly
        n_s = (lat.Lx - 1) * (lat.Ly + 1)
        bits = np.unpackbits(np.frombuffer(bytes.fromhex(hx), dtype=np.uint8))
        bits = bits[: n_p + n_s]
        return cls(bits[:n_p].reshape(lat.Ly, lat.Lx).astype(np.uint8),
                   bits[n_p:].reshape(lat.Ly + 1, lat.Lx - 1).astype(np.uint8))

    def is_trivial(self) -> bool:
        return not (self.plaquette_bits.any() or self.star_bits.any())

    def __eq__(self, other):
        return (np.array_equal(self.plaquette_bits, other.plaquette_bits)
                and np.array_equal(self.star_bits, other.star_bits))


def syndrome_from_bits(lat: Lattice, bits) -> Syndrome:
    bits = np.asarray(bits, dtype=np.uint8)
    n_p = lat.Lx * lat.Ly
    return Syndrome(bits[:n_p].reshape(lat.Ly, lat.Lx),
                    bits[n_p:].reshape(lat.Ly + 1, lat.Lx - 1))


# --------------------------------------------------------------- error model


@dataclass
class ErrorModel:
    """Uniform unitary error: per-qubit axis-n rotation by ``theta`` plus
    XX rotations by ``phi`` on neighbouring horizontal-edge pairs."""

    kind: str
    theta: float
    phi: float = 0.0
    n: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        n = np.asarray(self.n, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("rotation axis n must be a unit vector")
        if self.kind == X_ONLY and (self.phi != 0.0 or not np.allclose(n, (1, 0, 0))):
            raise ValueError("x model has phi = 0 and n = (1, 0, 0)")
        if self.kind == X_XX and not np.allclose(n, (1, 0, 0)):
            raise ValueError("x-xx model has n = (1, 0, 0)")
        for name, val in (("theta", self.theta), ("phi", self.phi)):
            if not (0.0 <= val <= np.pi / 4 + 1e-12):
                warnings.warn(f"{name} = {val:.4f} outside [0, pi/4]", stacklevel=2)
        object.__setattr__(self, "n", tuple(n))

    @classmethod
    def x_only(cls, theta: float) -> "ErrorModel":
        return cls(X_ONLY, theta)

    @classmethod
    def x_xx(cls, theta: float, phi: float) -> "ErrorModel":
        return cls(X_XX, theta, phi)

    @classmethod
    def general_xx(cls, theta: float, phi: float, n) -> "ErrorModel":
        return cls(GENERAL_XX, theta, phi, tuple(n))

    @classmethod
    def from_xy_angles(cls, theta_x: float, theta_y: float, phi: float) -> "ErrorModel":
        """Rotation ``exp(i(theta_x X + theta_y Y))`` plus XX rotations."""
        theta = float(np.hypot(theta_x, theta_y))
        if theta == 0.0:
            return cls(GENERAL_XX, 0.0, phi, (1.0, 0.0, 0.0))
        return cls(GENERAL_XX, theta, phi, (theta_x / theta, theta_y / theta, 0.0))

    def single_qubit_unitary(self) -> np.ndarray:
        nx, ny, nz = self.n
        axis = nx * PAULI_X + ny * PAULI_Y + nz * PAULI_Z
        return np.cos(self.theta) * np.eye(2) + 1j * np.sin(self.theta) * axis

    @property
    def two_copy(self) -> bool:
        return self.kind == GENERAL_XX


# -------------------------------------------------------------- dense states


def _guard(n_qubits: int, limit: int = MAX_DENSE_QUBITS):
    if n_qubits > limit:
        raise ValueError(f"{n_qubits} qubits exceeds the dense-oracle guard ({limit})")


def zero_state(n: int) -> np.ndarray:
    _guard(n)
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    return psi


def plus_state(n: int) -> np.ndarray:
    _guard(n)
    return np.full((2,) * n, 2.0 ** (-n / 2), dtype=complex)


def exact_logical_state(lat: Lattice, which: str) -> np.ndarray:
    """Dense logical ``|+>`` or ``|0>`` state of the code (unit norm)."""
    _guard(lat.N)
    if which == "plus":
        psi = plus_state(lat.N)
        projs = [PauliString.z_string(lat.plaquette_edges(r, c))
                 for (r, c) in lat.plaquette_coords()]
    elif which == "zero":
        psi = zero_state(lat.N)
        projs = [PauliString.x_string(lat.star_edges(x, y))
                 for (x, y) in lat.star_coords()]
    else:
        raise ValueError("which must be 'plus' or 'zero'")
    for g in projs:
        psi = 0.5 * (psi + apply_pauli(psi, g))
    return psi / np.linalg.norm(psi)


def logical_choi_state(lat: Lattice) -> np.ndarray:
    """Code maximally entangled with one reference qubit (axis ``N``).

    ``(|psi_0>|0> + |psi_1>|1>)/sqrt(2)`` with ``|psi_1> = Xbar |psi_0>``.
    """
    _guard(lat.N + 1)
    psi0 = exact_logical_state(lat, "zero")
    psi1 = apply_pauli(psi0, logicals(lat)[0])
    choi = np.zeros((2,) * (lat.N + 1), dtype=complex)
    choi[..., 0] = psi0 / np.sqrt(2)
    choi[..., 1] = psi1 / np.sqrt(2)
    return choi


def _apply_single_qubit(state: np.ndarray, u: np.ndarray, k: int) -> np.ndarray:
    out = np.tensordot(u, state, axes=(1, k))
    return np.moveaxis(out, 0, k)


def exact_corrupt(state: np.ndarray, lat: Lattice, model: ErrorModel) -> np.ndarray:
    """Apply the error unitary to the first ``N`` axes of a dense state.

    Single-qubit rotations act on every edge first, then XX rotations on
    neighbouring horizontal-edge pairs within each row.
    """
    _guard(lat.N)
    u = model.single_qubit_unitary()
    out = state
    for k in range(lat.N):
        out = _apply_single_qubit(out, u, k)
    if model.kind != X_ONLY and model.phi != 0.0:
        c, s = np.cos(model.phi), 1j * np.sin(model.phi)
        for (k, l) in lat.xx_pairs():
            out = c * out + s * np.flip(out, axis=(k, l))
    return out


# ------------------------------------------------------- syndrome extraction


def _outcome_projected(state: np.ndarray, g: PauliString, bit: int) -> np.ndarray:
    sign = 1.0 if bit == 0 else -1.0
    return 0.5 * (state + sign * apply_pauli(state, g))


def project_syndrome(state: np.ndarray, lat: Lattice, s: Syndrome) -> np.ndarray:
    """Unnormalized projection of a dense state onto syndrome ``s``."""
    out = state
    for g, bit in zip(stabilizers(lat), s.bits()):
        out = _outcome_projected(out, g, int(bit))
    return out


def exact_syndrome_probability(state: np.ndarray, lat: Lattice, s: Syndrome) -> float:
    proj = project_syndrome(state, lat, s)
    return float(np.vdot(proj, proj).real)


def exact_syndrome_distribution(state: np.ndarray, lat: Lattice,
                                cutoff: float = 1e-14) -> dict:
    """Full Born distribution over syndromes, keyed by ``Syndrome.key()``.

    Depth-first over generator outcomes with pruning of zero branches.
    """
    _guard(lat.N, MAX_ENUM_QUBITS)
    gens = stabilizers(lat)
    dist = {}

    def recurse(phi, depth, bits):
        if depth == len(gens):
            p = float(np.vdot(phi, phi).real)
            if p > 0:
                dist[syndrome_from_bits(lat, bits).key()] = p
            return
        for bit in (0, 1):
            nxt = _outcome_projected(phi, gens[depth], bit)
            if float(np.vdot(nxt, nxt).real) > cutoff:
                recurse(nxt, depth + 1, bits + [bit])

    recurse(state, 0, [])
    return dist


def born_sample_syndrome(state: np.ndarray, lat: Lattice, rng) -> tuple:
    """Sample a syndrome from a dense state; returns ``(syndrome, log_prob)``."""
    phi = state
    bits = []
    log_p = 0.0
    for g in stabilizers(lat):
        p0 = _outcome_projected(phi, g, 0)
        w0 = float(np.vdot(p0, p0).real)
        norm = float(np.vdot(phi, phi).real)
        prob0 = min(max(w0 / norm, 0.0), 1.0)
        if rng.random() < prob0:
            bits.append(0)
            phi = p0
            log_p += np.log(max(prob0, 1e-300))
        else:
            bits.append(1)
            phi = phi - p0
            log_p += np.log(max(1.0 - prob0, 1e-300))
    return syndrome_from_bits(lat, bits), float(log_p)


# ------------------------------------------------------------- class oracle


def _check_reference_strings(lat: Lattice, s: Syndrome, rx_edges, rz_edges):
    px = PauliString.x_string(rx_edges)
    pz = PauliString.z_string(rz_edges)
    for (r, c), bit in zip(lat.plaquette_coords(), s.plaquette_bits.ravel()):
        g = PauliString.z_string(lat.plaquette_edges(r, c))
        if px.commutes(g) != (bit == 0):
            raise ValueError(f"Rx inconsistent with plaquette syndrome at {(r, c)}")
    for (x, y), bit in zip(lat.star_coords(), s.star_bits.ravel()):
        g = PauliString.x_string(lat.star_edges(x, y))
        if pz.commutes(g) != (bit == 0):
            raise ValueError(f"Rz inconsistent with star syndrome at {(x, y)}")


def exact_class_amplitudes(state: np.ndarray, lat: Lattice, s: Syndrome,
                           rx_edges, rz_edges) -> dict:
    """All class amplitudes from a corrupted Choi state.

    ``state`` must be the error unitary applied to :func:`logical_choi_state`.
    Returns ``{(a, b): Z_ab}``: the amplitude of recovery class ``(a, b)``
    relative to the reference strings, including the crossing sign of each
    X-error configuration with ``Rz``.  On the Choi state the four classes
    are orthogonal, so ``sum |Z_ab|^2`` equals its syndrome probability.
    """
    if state.ndim != lat.N + 1:
        raise ValueError("state must be a Choi state with one reference qubit")
    _check_reference_strings(lat, s, rx_edges, rz_edges)
    proj = project_syndrome(state, lat, s)
    recovery = PauliString(frozenset(rx_edges), frozenset(rz_edges))
    corrected = apply_pauli(proj, recovery)
    xbar, zbar = logicals(lat)
    out = {}
    choi = logical_choi_state(lat)
    for a in (0, 1):
        for b in (0, 1):
            bra = choi
            if b:
                bra = apply_pauli(bra, zbar)
            if a:
                bra = apply_pauli(bra, xbar)
            out[(a, b)] = complex(np.vdot(bra, corrected))
    return out


def exact_class_amplitude(state: np.ndarray, lat: Lattice, s: Syndrome,
                          rx_edges, rz_edges, a: int, b: int = 0) -> complex:
    """Single class amplitude; see :func:`exact_class_amplitudes`."""
    return exact_class_amplitudes(state, lat, s, rx_edges, rz_edges)[(a, b)]
