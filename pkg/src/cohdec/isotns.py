"""Isometric tensor network for the encoded ``|+>`` state and syndrome sampling.

Every qubit carries one five-leg tensor ``T[p, uL, uR, lL, lR]`` (physical,
upper-left, upper-right, lower-left, lower-right; absent legs have extent 1).
Each tensor is an isometry from (physical + upper) legs onto the lower legs,
with arrows flowing downward, so tracing out all rows above any horizontal
cut yields the identity on the cut bonds.  Running the network bottom-up
therefore acts like a sequential circuit: absorbing a tensor is an isometry
from its lower (cut) bonds to fresh sites for its physical qubit and upper
bonds.

Sampling walks the rows upward.  After the rows supporting a stabilizer are
absorbed, its outcome is drawn from the Born rule on the live MPS, the
matching projector is applied, and qubits whose stabilizers are all measured
are measured out (X basis by default, outcome discarded).  Single-qubit
error rotations are absorbed into the site tensors (they preserve the
isometry); two-qubit XX rotations live within one horizontal row and are
applied as gates right after the row is absorbed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .code import (HADAMARD, MAX_DENSE_QUBITS, PAULI_X, PAULI_Z, ErrorModel,
                   Lattice, Syndrome)
from .mps import MPS, ZeroProbabilityError, pauli_projector_mpo, two_term_mpo

SQ2 = np.sqrt(2.0)

Y_BASIS = np.array([[1.0, -1.0j], [1.0, 1.0j]]) / SQ2
RETIRE_BASES = {"x": HADAMARD, "y": Y_BASIS, "z": np.eye(2)}


def rng_from_key(key) -> np.random.Generator:
    """Counter-based generator from a small tuple of integers.

    The first entry seeds one Philox key word; the remaining entries are
    folded into the second, so distinct (seed, point, sample) tuples give
    independent, reproducible streams regardless of scheduling.
    """
    parts = [int(k) for k in (key if hasattr(key, "__len__") else (key,))]
    k0 = parts[0] % (1 << 64)
    k1 = 0
    for p in parts[1:]:
        k1 = (k1 * 0x9E3779B97F4A7C15 + p + 1) % (1 << 64)
    return np.random.Generator(np.random.Philox(key=np.array([k0, k1], dtype=np.uint64)))


# ----------------------------------------------------------------- tensors


def _build_site_tensor(role: str) -> np.ndarray:
    """Closed-form site tensor for one of the ten boundary/bulk roles."""
    shapes = {
        "top_left_h": (1, 1, 1, 2), "top_h": (1, 1, 2, 1),
        "mid_left_h": (1, 2, 1, 2), "mid_right_h": (2, 1, 2, 1),
        "mid_h": (2, 2, 2, 1),
        "bottom_left_h": (1, 2, 1, 1), "bottom_right_h": (2, 1, 1, 1),
        "bottom_h": (2, 2, 1, 1),
        "left_v": (2, 2, 2, 2), "bulk_v": (1, 2, 2, 2),
    }
    conds = {
        "top_left_h": lambda p, uL, uR, lL, lR: p == lR,
        "top_h": lambda p, uL, uR, lL, lR: p == lL,
        "mid_left_h": lambda p, uL, uR, lL, lR: p == uR and p == lR,
        "mid_right_h": lambda p, uL, uR, lL, lR: p == uL and p == lL,
        "mid_h": lambda p, uL, uR, lL, lR: p == uL ^ uR and p == lL,
        "bottom_left_h": lambda p, uL, uR, lL, lR: p == uR,
        "bottom_right_h": lambda p, uL, uR, lL, lR: p == uL,
        "bottom_h": lambda p, uL, uR, lL, lR: p == uL ^ uR,
        "left_v": lambda p, uL, uR, lL, lR: lL == uL ^ p and lR == p ^ uR,
        "bulk_v": lambda p, uL, uR, lL, lR: p == lL and lR == p ^ uR,
    }
    norms = {
        "mid_h": 1 / SQ2, "left_v": 1 / SQ2,
        "bottom_left_h": 1 / SQ2, "bottom_right_h": 1 / SQ2, "bottom_h": 0.5,
    }
    dims = shapes[role]
    t = np.zeros((2,) + dims, dtype=complex)
    cond = conds[role]
    val = norms.get(role, 1.0)
    for p in range(2):
        for uL in range(dims[0]):
            for uR in range(dims[1]):
                for lL in range(dims[2]):
                    for lR in range(dims[3]):
                        if cond(p, uL, uR, lL, lR):
                            t[p, uL, uR, lL, lR] = val
    return t


def _role_of(lat: Lattice, key) -> str:
    kind = key[0]
    if kind == "v":
        _, r, x = key
        return "left_v" if x == 1 else "bulk_v"
    _, y, c = key
    if y == 0:
        if c == 0:
            return "bottom_left_h"
        return "bottom_right_h" if c == lat.Lx - 1 else "bottom_h"
    if y == lat.Ly:
        return "top_left_h" if c == 0 else "top_h"
    if c == 0:
        return "mid_left_h"
    return "mid_right_h" if c == lat.Lx - 1 else "mid_h"


@dataclass
class IsoTNS:
    lat: Lattice
    tensors: dict
    roles: dict
    model: ErrorModel = None

    def isometry_defect(self, key) -> float:
        """Operator-norm deviation of A A^dag from the identity, where the
        tensor maps (physical + upper) legs onto the lower legs."""
        t = self.tensors[key]
        p, duL, duR, dlL, dlR = t.shape
        a = t.transpose(3, 4, 0, 1, 2).reshape(dlL * dlR, p * duL * duR)
        gram = a @ a.conj().T
        return float(np.linalg.norm(gram - np.eye(dlL * dlR), ord=2))


def build_isotns(lat: Lattice) -> IsoTNS:
    """Exact bond-dimension-2 isometric network for the logical ``|+>``."""
    tensors, roles = {}, {}
    keys = [("h", y, c) for y in range(lat.Ly + 1) for c in range(lat.Lx)]
    keys += [("v", r, x) for r in range(lat.Ly) for x in range(1, lat.Lx)]
    for key in keys:
        role = _role_of(lat, key)
        roles[key] = role
        tensors[key] = _build_site_tensor(role)
    return IsoTNS(lat, tensors, roles)


def apply_errors(tns: IsoTNS, model: ErrorModel) -> IsoTNS:
    """Absorb the single-qubit rotations into the site tensors.

    The rotation is unitary on the physical leg, so every tensor stays
    isometric.  The two-qubit XX rotations are recorded on the model and
    applied as intra-row gates during sampling or dense contraction.
    """
    u = model.single_qubit_unitary()
    tensors = {k: np.tensordot(u, t, axes=(1, 0)) for k, t in tns.tensors.items()}
    return IsoTNS(tns.lat, tensors, dict(tns.roles), model)


def parity_projector_mpo(n: int) -> list:
    """Even-parity enforcing MPO on ``n`` sites (legs ``wl, p_out, p_in, wr``).

    The first tensor copies the physical bit into the virtual leg, interior
    tensors accumulate the running parity, the last compares.  Contracted
    against an all-plus product state it produces the uniform even-parity
    state (up to normalization).
    """
    if n < 2:
        raise ValueError("parity operator needs at least 2 sites")
    tensors = []
    first = np.zeros((1, 2, 2, 2))
    for p in range(2):
        first[0, p, p, p] = 1.0
    tensors.append(first)
    for _ in range(n - 2):
        mid = np.zeros((2, 2, 2, 2))
        for p in range(2):
            for w in range(2):
                mid[w, p, p, w ^ p] = 1.0
        tensors.append(mid)
    last = np.zeros((2, 2, 2, 1))
    for p in range(2):
        last[p, p, p, 0] = 1.0
    tensors.append(last)
    return tensors


# ------------------------------------------------------------- live chain


class _LiveChain:
    """MPS over the live sites: physical qubits ('q', edge index) and open
    network bonds ('b', (tensor key, leg))."""

    def __init__(self, chi_max: int, tol: float):
        self.mps = MPS([], 0, 0.0)
        self.labels = []
        self.chi_max = chi_max
        self.tol = tol
        self.max_discarded = 0.0
        self.max_bond = 1

    def index(self, label) -> int:
        return self.labels.index(label)

    def _note(self, dw: float):
        self.max_discarded = max(self.max_discarded, dw)
        if self.mps.n_sites > 1:
            self.max_bond = max(self.max_bond, self.mps.max_bond())

    def absorb(self, lat: Lattice, key, tensor: np.ndarray):
        """Consume the tensor's lower-bond sites, emit (uL?, qubit, uR?)."""
        p, duL, duR, dlL, dlR = tensor.shape
        edge = lat.h_index(key[1], key[2]) if key[0] == "h" else lat.v_index(key[1], key[2])
        consumed = []
        if dlL == 2:
            other = ("v", key[1] - 1, key[2]) if key[0] == "h" else ("h", key[1], key[2] - 1)
            consumed.append(("b", (other, "uR")))
        if dlR == 2:
            other = ("v", key[1] - 1, key[2] + 1) if key[0] == "h" else ("h", key[1], key[2])
            consumed.append(("b", (other, "uL")))
        emit_labels = []
        if duL == 2:
            emit_labels.append(("b", (key, "uL")))
        emit_labels.append(("q", edge))
        if duR == 2:
            emit_labels.append(("b", (key, "uR")))

        g = tensor.transpose(1, 0, 2, 3, 4).reshape(duL * 2 * duR, dlL * dlR)
        if not consumed:
            pos = self.mps.n_sites
            if pos > 0:
                self.mps.move_center(pos - 1)
            dw = self.mps.apply_window(pos, 0, g.reshape(-1), [2] * len(emit_labels),
                                       self.chi_max, self.tol)
            self.labels[pos:pos] = emit_labels
        elif len(consumed) == 1:
            pos = self.index(consumed[0])
            dw = self.mps.apply_window(pos, 1, g, [2] * len(emit_labels),
                                       self.chi_max, self.tol)
            self.labels[pos:pos + 1] = emit_labels
        else:
            pos_l = self.index(consumed[0])
            pos_r = self.index(consumed[1])
            if pos_l >= pos_r:
                raise AssertionError("lower bonds out of order in live chain")
            passthrough = self.labels[pos_l + 1:pos_r]
            d_pass = 2 ** len(passthrough)
            full = np.kron(g, np.eye(d_pass))
            # rows (uL, p, uR, pass) -> (uL, pass, p, uR)
            full = full.reshape(duL, 2, duR, d_pass, -1).transpose(0, 3, 1, 2, 4)
            # cols (lL, lR, pass) -> (lL, pass, lR)
            full = full.reshape(-1, 2, 2, d_pass).transpose(0, 1, 3, 2)
            n_out = len(emit_labels) + len(passthrough)
            full = full.reshape(duL * 2 * duR * d_pass, 4 * d_pass)
            out_labels = ([emit_labels[0]] if duL == 2 else []) + passthrough \
                + [("q", edge)] + ([emit_labels[-1]] if duR == 2 else [])
            dw = self.mps.apply_window(pos_l, pos_r - pos_l + 1, full,
                                       [2] * n_out, self.chi_max, self.tol)
            self.labels[pos_l:pos_r + 1] = out_labels
        self._note(dw)

    def apply_xx_gate(self, edge_i: int, edge_j: int, phi: float):
        i = self.index(("q", edge_i))
        j = self.index(("q", edge_j))
        mpo = two_term_mpo({i: np.eye(2)}, {i: PAULI_X, j: PAULI_X},
                           np.cos(phi), 1j * np.sin(phi))
        dw = self.mps.apply_mpo(mpo, self.chi_max, self.tol)
        self.mps.renormalize()
        self._note(dw)

    def measure_stabilizer(self, edges, pauli: np.ndarray, rng) -> tuple:
        """Born-sample one stabilizer outcome and project.

        Returns ``(bit, log_weight, resampled)``; ``bit = 1`` means outcome
        -1.  A numerically dead branch (probability below 1e-12, possible
        with truncation noise) is flipped to the surviving branch and
        counted.
        """
        ops = {self.index(("q", e)): pauli for e in edges}
        e = float(np.clip(self.mps.expectation_product(ops).real, -1.0, 1.0))
        p_plus = 0.5 * (1.0 + e)
        bit = 0 if rng.random() < p_plus else 1
        branch = p_plus if bit == 0 else 1.0 - p_plus
        resampled = False
        if branch < 1e-12:
            bit ^= 1
            resampled = True
        mpo = pauli_projector_mpo(ops, +1 if bit == 0 else -1)
        dw = self.mps.apply_mpo(mpo, self.chi_max, self.tol)
        w = self.mps.norm() ** 2
        if w < 1e-14:
            raise ZeroProbabilityError("both stabilizer branches numerically dead")
        self.mps.renormalize()
        self._note(dw)
        return bit, float(np.log(w)), resampled

    def retire(self, edge: int, basis: np.ndarray, rng) -> int:
        pos = self.index(("q", edge))
        outcome = self.mps.measure_out(pos, basis, rng)
        del self.labels[pos]
        return outcome


# ---------------------------------------------------------------- sampling


@dataclass
class SampleRecord:
    syndrome: Syndrome
    log_prob: float
    max_discarded_weight: float
    chi_max_reached: int
    rng_key: tuple
    resample_events: int = 0


def _row_tensors(lat: Lattice, kind: str, row: int) -> list:
    if kind == "h":
        return [("h", row, c) for c in range(lat.Lx)]
    return [("v", row, x) for x in range(1, lat.Lx)]


def _run_rows(tns: IsoTNS, chain: _LiveChain, on_events=None, rng=None,
              retire_basis: str = "x"):
    """Absorb rows bottom-up, optionally measuring and retiring along the way.

    ``on_events`` is the per-sweep measurement callback; with ``None`` the
    whole network is absorbed without measurements (dense contraction mode).
    """
    lat, model = tns.lat, tns.model
    phi = model.phi if model is not None else 0.0
    basis = RETIRE_BASES[retire_basis]

    def absorb_row(kind, row):
        for key in _row_tensors(lat, kind, row):
            chain.absorb(lat, key, tns.tensors[key])
        if kind == "h" and phi != 0.0:
            for c in range(lat.Lx - 1):
                chain.apply_xx_gate(lat.h_index(row, c), lat.h_index(row, c + 1), phi)

    def retire_batch(edges):
        # retirement outcomes are discarded and the measured qubits are
        # mutually disjoint, so sweep in chain order for locality
        for edge in sorted(edges, key=lambda e: chain.index(("q", e))):
            chain.retire(edge, basis, rng)

    absorb_row("h", 0)
    for r in range(lat.Ly):
        absorb_row("v", r)
        absorb_row("h", r + 1)
        if on_events is not None:
            on_events(r)
            batch = [lat.h_index(r, c) for c in range(lat.Lx)]
            if r >= 1:
                batch += [lat.v_index(r - 1, x) for x in range(1, lat.Lx)]
            retire_batch(batch)
    if on_events is not None:
        on_events(lat.Ly)
        retire_batch([lat.v_index(lat.Ly - 1, x) for x in range(1, lat.Lx)]
                     + [lat.h_index(lat.Ly, c) for c in range(lat.Lx)])


def sample_syndrome(tns: IsoTNS, chi_max: int, tol: float, rng_key,
                    retire_basis: str = "x") -> SampleRecord:
    """Draw one full syndrome from the corrupted network.

    Sweep ``r`` measures the plaquettes of row ``r`` left to right, then the
    stars completed by vertical-edge row ``r``; row-``r`` horizontal qubits
    and row-``r-1`` vertical qubits are then measured out.  The final sweep
    handles the top row of stars.
    """
    lat = tns.lat
    rng = rng_from_key(rng_key)
    chain = _LiveChain(chi_max, tol)
    plaq = np.zeros((lat.Ly, lat.Lx), dtype=np.uint8)
    star = np.zeros((lat.Ly + 1, lat.Lx - 1), dtype=np.uint8)
    stats = {"log_prob": 0.0, "resamples": 0}

    def measure(edges, pauli):
        bit, log_w, res = chain.measure_stabilizer(edges, pauli, rng)
        stats["log_prob"] += log_w
        stats["resamples"] += int(res)
        return bit

    def on_events(sweep):
        if sweep < lat.Ly:
            for c in range(lat.Lx):
                plaq[sweep, c] = measure(tns.lat.plaquette_edges(sweep, c), PAULI_Z)
            y = sweep
        else:
            y = lat.Ly
        for x in range(1, lat.Lx):
            star[y, x - 1] = measure(tns.lat.star_edges(x, y), PAULI_X)

    _run_rows(tns, chain, on_events, rng, retire_basis)
    if chain.mps.n_sites != 0:
        raise AssertionError("live chain not empty after sampling")
    return SampleRecord(Syndrome(plaq, star), stats["log_prob"],
                        chain.max_discarded, chain.max_bond,
                        tuple(int(k) for k in (rng_key if hasattr(rng_key, "__len__")
                                               else (rng_key,))),
                        stats["resamples"])


def contract_to_dense(tns: IsoTNS, chi_max: int = 1 << 20,
                      tol: float = 0.0) -> np.ndarray:
    """Contract the (possibly corrupted) network to a dense state.

    Axes are ordered by lattice edge index.  Small instances only.
    """
    lat = tns.lat
    if lat.N > MAX_DENSE_QUBITS:
        raise ValueError("lattice too large for dense contraction")
    chain = _LiveChain(chi_max, tol)
    _run_rows(tns, chain, on_events=None)
    order = [lab[1] for lab in chain.labels]
    psi = chain.mps.to_dense(include_norm=True)
    return np.ascontiguousarray(psi.transpose(np.argsort(order)))
