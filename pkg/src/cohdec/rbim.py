"""Complex-weight stat-mech networks for class amplitudes.

A class amplitude is a sum over error configurations compatible with a
syndrome, restricted to one homology class.  It maps to an Ising-type
partition function with complex bond weights:

* X-sector spins sit on the interior vertex columns (chain width ``Lx-1``),
  with the rough left/right boundary spins pinned to +1.  Horizontal edges
  couple neighbouring vertex spins within a row, vertical edges couple a
  vertex spin between rows.
* Z-sector spins (general model only) sit on the plaquette columns (width
  ``Lx``).  Horizontal edges couple a plaquette spin between rows, with the
  smooth top/bottom boundaries pinned; vertical edges couple neighbouring
  plaquette spins within a row.
* XX rotations introduce one extra binary variable per interior vertex and
  row; it is never materialized as a chain site but rides along row
  applications as a bond-dimension-2 MPO virtual leg.

Reference strings are set up in the "straight gauge": only horizontal edges
carry negative reference bonds, with the X-string running to the top
boundary and the Z-string to the right boundary.  Logical defects flip the
``zeta`` bond variables along a canonical non-contractible path (leftmost
column for X, bottom row for Z).

The network is compiled to primitives directly executable on an
:class:`~cohdec.mps.MPS` over the chain: one-site operators, adjacent
diagonal gates, dense windows (three-site vertical-edge tensors of the
two-copy model) and row MPOs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .code import GENERAL_XX, X_ONLY, X_XX, Lattice, Syndrome
from .code import _check_reference_strings
from .mps import MPO


def _sgn(index: int) -> int:
    """Spin value of a basis index: 0 -> +1, 1 -> -1."""
    return 1 - 2 * index


def coupling_constant(theta: float) -> float:
    """Effective Ising coupling of the single-rotation bond weight.

    Defined for ``0 < theta < pi/2``.  The bond weight is proportional to
    ``exp((J - i pi/4) * sign)`` up to a spin-independent constant, with
    ``J = log(1/tan(theta)) / 2``; see the proportionality test.
    """
    if not (0.0 < theta < np.pi / 2):
        raise ValueError("coupling constant defined for 0 < theta < pi/2")
    return 0.5 * np.log(1.0 / np.tan(theta))


# ------------------------------------------------------------- bond variables


@dataclass
class BondConfig:
    """Signs decorating every lattice edge, split by sector.

    ``eta``/``xi`` mark the X/Z reference strings (-1 on the string),
    ``zeta_x``/``zeta_z`` the logical-defect paths.  Arrays are indexed like
    the lattice edges: ``*_h[y, c]`` and ``*_v[r, x-1]``.
    """

    lat: Lattice
    eta_h: np.ndarray
    eta_v: np.ndarray
    xi_h: np.ndarray
    xi_v: np.ndarray
    zeta_x_h: np.ndarray
    zeta_x_v: np.ndarray
    zeta_z_h: np.ndarray
    zeta_z_v: np.ndarray
    rx_edges: frozenset = frozenset()
    rz_edges: frozenset = frozenset()

    @classmethod
    def trivial(cls, lat: Lattice) -> "BondConfig":
        h = np.ones((lat.Ly + 1, lat.Lx), dtype=np.int8)
        v = np.ones((lat.Ly, lat.Lx - 1), dtype=np.int8)
        return cls(lat, h.copy(), v.copy(), h.copy(), v.copy(),
                   h.copy(), v.copy(), h.copy(), v.copy())

    def copy(self) -> "BondConfig":
        return BondConfig(self.lat, *(a.copy() for a in (
            self.eta_h, self.eta_v, self.xi_h, self.xi_v,
            self.zeta_x_h, self.zeta_x_v, self.zeta_z_h, self.zeta_z_v)),
            rx_edges=self.rx_edges, rz_edges=self.rz_edges)

    def has_z_sector(self) -> bool:
        return bool((self.xi_h < 0).any() or (self.xi_v < 0).any()
                    or (self.zeta_z_h < 0).any() or (self.zeta_z_v < 0).any())


def straight_gauge(lat: Lattice, s: Syndrome):
    """Reference strings on horizontal edges only.

    From every flipped plaquette the X string runs straight up to the top
    boundary; from every flipped star the Z string runs straight right to
    the right boundary.  Returns ``(rx_edges, rz_edges, BondConfig)`` with
    the boundary consistency re-checked.
    """
    rx = np.zeros((lat.Ly + 1, lat.Lx), dtype=np.int8)
    rz = np.zeros((lat.Ly + 1, lat.Lx), dtype=np.int8)
    for (r, c), bit in zip(lat.plaquette_coords(), s.plaquette_bits.ravel()):
        if bit:
            rx[r + 1:, c] ^= 1
    for (x, y), bit in zip(lat.star_coords(), s.star_bits.ravel()):
        if bit:
            rz[y, x:] ^= 1
    rx_edges = frozenset(lat.h_index(y, c) for y in range(lat.Ly + 1)
                         for c in range(lat.Lx) if rx[y, c])
    rz_edges = frozenset(lat.h_index(y, c) for y in range(lat.Ly + 1)
                         for c in range(lat.Lx) if rz[y, c])
    _check_reference_strings(lat, s, rx_edges, rz_edges)
    bonds = BondConfig.trivial(lat)
    bonds.eta_h = (1 - 2 * rx).astype(np.int8)
    bonds.xi_h = (1 - 2 * rz).astype(np.int8)
    bonds.rx_edges = rx_edges
    bonds.rz_edges = rz_edges
    return rx_edges, rz_edges, bonds


def insert_defect(bonds: BondConfig, which: str) -> BondConfig:
    """Flip the logical-defect bonds along the canonical path.

    ``which = "X"`` flips ``zeta_x`` on the leftmost horizontal bond of every
    row; ``which = "Z"`` flips ``zeta_z`` on the bottom row of horizontal
    edges.  Raises on double insertion.
    """
    out = bonds.copy()
    if which == "X":
        if (out.zeta_x_h < 0).any() or (out.zeta_x_v < 0).any():
            raise ValueError("X defect already inserted")
        out.zeta_x_h[:, 0] *= -1
    elif which == "Z":
        if (out.zeta_z_h < 0).any() or (out.zeta_z_v < 0).any():
            raise ValueError("Z defect already inserted")
        out.zeta_z_h[0, :] *= -1
    else:
        raise ValueError("which must be 'X' or 'Z'")
    return out


def _star_bond_flips(lat: Lattice, x: int, y: int):
    """(h-flips, v-flips) incident to the direct-lattice vertex ``(x, y)``."""
    if not (1 <= x <= lat.Lx - 1 and 0 <= y <= lat.Ly):
        raise ValueError(f"not an interior vertex: {(x, y)}")
    h = [(y, x - 1), (y, x)]
    v = [(r, x) for r in (y - 1, y) if 0 <= r < lat.Ly]
    return h, v


def _plaquette_bond_flips(lat: Lattice, r: int, c: int):
    if not (0 <= r < lat.Ly and 0 <= c < lat.Lx):
        raise ValueError(f"not a plaquette: {(r, c)}")
    h = [(r, c), (r + 1, c)]
    v = [(r, x) for x in (c, c + 1) if 1 <= x <= lat.Lx - 1]
    return h, v


def deform_reference(bonds: BondConfig, vertex, sector: str = "x") -> BondConfig:
    """Deform a reference string by one stabilizer boundary (flips eta/xi)."""
    lat = bonds.lat
    out = bonds.copy()
    if sector == "x":
        h, v = _star_bond_flips(lat, *vertex)
        for (y, c) in h:
            out.eta_h[y, c] *= -1
        for (r, x) in v:
            out.eta_v[r, x - 1] *= -1
        out.rx_edges = out.rx_edges ^ frozenset(lat.star_edges(*vertex))
    elif sector == "z":
        h, v = _plaquette_bond_flips(lat, *vertex)
        for (y, c) in h:
            out.xi_h[y, c] *= -1
        for (r, x) in v:
            out.xi_v[r, x - 1] *= -1
        out.rz_edges = out.rz_edges ^ frozenset(lat.plaquette_edges(*vertex))
    else:
        raise ValueError("sector must be 'x' or 'z'")
    return out


def deform_defect(bonds: BondConfig, vertex, sector: str = "x") -> BondConfig:
    """Deform a logical-defect path by one stabilizer boundary (flips zeta)."""
    lat = bonds.lat
    out = bonds.copy()
    if sector == "x":
        h, v = _star_bond_flips(lat, *vertex)
        for (y, c) in h:
            out.zeta_x_h[y, c] *= -1
        for (r, x) in v:
            out.zeta_x_v[r, x - 1] *= -1
    elif sector == "z":
        h, v = _plaquette_bond_flips(lat, *vertex)
        for (y, c) in h:
            out.zeta_z_h[y, c] *= -1
        for (r, x) in v:
            out.zeta_z_v[r, x - 1] *= -1
    else:
        raise ValueError("sector must be 'x' or 'z'")
    return out


def gauge_transform(bonds: BondConfig, vertex, model_kind: str,
                    sector: str = "x") -> BondConfig:
    """The model's gauge move around a vertex (or plaquette for sector 'z').

    For the pure-X models the redundancy acts on the reference bonds; for
    the general model it acts on the logical-defect bonds.  Class amplitudes
    and the per-step contraction entanglement are invariant either way.
    """
    if model_kind in (X_ONLY, X_XX):
        if sector != "x":
            raise ValueError("pure-X models have only an x-sector gauge")
        return deform_reference(bonds, vertex, "x")
    return deform_defect(bonds, vertex, sector)


# ------------------------------------------------------------ network layers


@dataclass
class Primitive:
    """One executable piece of a layer.

    ``kind`` is one of ``site`` (one-site operator at ``pos``), ``gate2``
    (two-site gate on ``(pos, pos+1)``), ``window`` (dense operator matrix on
    ``span`` adjacent sites starting at ``pos``) or ``mpo``.
    """

    kind: str
    pos: int
    data: object
    tag: str
    span: int = 1


@dataclass
class Layer:
    kind: str   # "h" (horizontal-edge row) or "v" (vertical-edge row)
    y: int      # row index
    prims: list


@dataclass
class LayeredNetwork:
    lat: Lattice
    model_kind: str
    n_sites: int
    site_kinds: list          # "sigma" / "tau" per chain site
    layers: list
    ket_vectors: list
    bra_vectors: list
    n_single_rot: int = 0
    n_pair_rot: int = 0

    @property
    def n_h_layers(self) -> int:
        return self.lat.Ly + 1

    def validate(self):
        lat = self.lat
        if self.n_single_rot != lat.N:
            raise AssertionError(
                f"expected {lat.N} single-rotation tensors, built {self.n_single_rot}")
        expected_pairs = 0 if self.model_kind == X_ONLY else (lat.Lx - 1) * (lat.Ly + 1)
        if self.n_pair_rot != expected_pairs:
            raise AssertionError(
                f"expected {expected_pairs} pair-rotation tensors, built {self.n_pair_rot}")

    def dump(self) -> str:
        """Human-readable layer listing for debugging."""
        lines = [f"network: model={self.model_kind} lattice={self.lat!r} "
                 f"chain={self.n_sites} sites ({' '.join(k[0] for k in self.site_kinds)})"]
        for layer in self.layers:
            lines.append(f"layer {layer.kind}{layer.y}:")
            for p in layer.prims:
                lines.append(f"  {p.kind:<6} pos={p.pos:<3} span={p.span} [{p.tag}]")
        return "\n".join(lines)


def _w_single(theta: float, sign: int) -> complex:
    """Weight of a single-rotation bond: aligned -> cos, flipped -> i sin."""
    return np.cos(theta) if sign > 0 else 1j * np.sin(theta)


def _w_pair(phi: float, sign: int) -> complex:
    return np.cos(phi) if sign > 0 else 1j * np.sin(phi)


def _w_general(theta: float, n, xs: int, zs: int) -> complex:
    """Two-sector single-rotation weight (identity/X/Y/Z branches)."""
    nx, ny, nz = n
    if xs > 0 and zs > 0:
        return np.cos(theta)
    if xs < 0 and zs > 0:
        return 1j * nx * np.sin(theta)
    if xs < 0 and zs < 0:
        return -ny * np.sin(theta)
    return 1j * nz * np.sin(theta)


def _crossing_sign(xi: int, err_sign: int) -> float:
    """-1 exactly when the edge is on the Z reference and carries an X error."""
    return -1.0 if (xi < 0 and err_sign < 0) else 1.0


# ----- single-copy (pure X) chain ------------------------------------------


def _build_single_copy(model, bonds: BondConfig, lat: Lattice) -> LayeredNetwork:
    m = lat.Lx - 1
    theta, phi = model.theta, model.phi
    ex_h = bonds.eta_h * bonds.zeta_x_h   # effective X-sector bond signs
    ex_v = bonds.eta_v * bonds.zeta_x_v
    net = LayeredNetwork(lat, model.kind, m, ["sigma"] * m, [],
                         [np.array([1.0, 1.0])] * m, [np.array([1.0, 1.0])] * m)

    for y in range(lat.Ly + 1):
        prims = []
        if model.kind == X_ONLY:
            # diagonal bond weights; chain-end bonds reach the pinned spins
            for c in range(lat.Lx):
                sign = int(ex_h[y, c])
                if c == 0 or c == lat.Lx - 1:
                    pos = 0 if c == 0 else m - 1
                    d = np.diag([_w_single(theta, sign * _sgn(s)) for s in range(2)])
                    prims.append(Primitive("site", pos, d, "single-rot pin"))
                else:
                    g = np.zeros((2, 2, 2, 2), dtype=complex)
                    for s in range(2):
                        for t in range(2):
                            g[s, t, s, t] = _w_single(theta, sign * _sgn(s) * _sgn(t))
                    prims.append(Primitive("gate2", c - 1, g, "single-rot"))
                net.n_single_rot += 1
        else:
            prims.append(Primitive("mpo", 0, _row_mpo_single_copy(
                theta, phi, ex_h[y], m), "single-rot+pair-rot row", span=m))
            net.n_single_rot += lat.Lx
            net.n_pair_rot += m
        net.layers.append(Layer("h", y, prims))

        if y < lat.Ly:
            prims = []
            for x in range(1, lat.Lx):
                sign = int(ex_v[y, x - 1])
                op = np.array([[_w_single(theta, sign * _sgn(si) * _sgn(so))
                                for si in range(2)] for so in range(2)])
                prims.append(Primitive("site", x - 1, op, "single-rot"))
                net.n_single_rot += 1
            net.layers.append(Layer("v", y, prims))
    return net


def _row_mpo_single_copy(theta, phi, row_signs, m) -> MPO:
    """Horizontal-row MPO for the X + XX model.

    The virtual leg carries the XX-dressed row variable; site ``k`` holds the
    bond weight to its left and the pair weight tying the dressed variable to
    the chain spin.  The pinned chain ends are folded into the first and
    last tensors.
    """
    tensors = []
    for k in range(m):
        wl = 1 if k == 0 else 2
        t = np.zeros((wl, 2, 2, 2), dtype=complex)
        for ain in range(wl):
            a_in = 1 if k == 0 else _sgn(ain)
            for aout in range(2):
                for s in range(2):
                    t[ain, s, s, aout] = (
                        _w_single(theta, int(row_signs[k]) * a_in * _sgn(aout))
                        * _w_pair(phi, _sgn(s) * _sgn(aout)))
        if k == m - 1:
            cap = np.array([_w_single(theta, int(row_signs[m]) * _sgn(a))
                            for a in range(2)])
            t = np.tensordot(t, cap, axes=(3, 0))[..., None]
        tensors.append(t)
    return MPO(0, tensors)


# ----- two-copy (general rotation) chain ------------------------------------


def _build_two_copy(model, bonds: BondConfig, lat: Lattice) -> LayeredNetwork:
    Lx = lat.Lx
    n = 2 * Lx - 1
    theta, phi, axis = model.theta, model.phi, model.n
    ex_h = bonds.eta_h * bonds.zeta_x_h
    ex_v = bonds.eta_v * bonds.zeta_x_v
    ez_h = bonds.xi_h * bonds.zeta_z_h
    ez_v = bonds.xi_v * bonds.zeta_z_v
    kinds = ["tau" if i % 2 == 0 else "sigma" for i in range(n)]
    up = np.array([1.0, 0.0])
    free = np.array([1.0, 1.0])
    bound = [up if k == "tau" else free for k in kinds]
    net = LayeredNetwork(lat, model.kind, n, kinds, [], list(bound), list(bound))

    for y in range(lat.Ly + 1):
        prims = [Primitive("mpo", 0, _row_mpo_two_copy(
            theta, phi, axis, ex_h[y], ez_h[y], Lx), "single-rot+pair-rot row", span=n)]
        net.n_single_rot += Lx
        net.n_pair_rot += Lx - 1
        # crossing signs between the X-error content of each horizontal edge
        # and the Z reference string (diagonal on the sigma sites)
        for c in range(Lx):
            if bonds.xi_h[y, c] > 0:
                continue
            xs = int(ex_h[y, c])
            if c == 0 or c == Lx - 1:
                pos = 1 if c == 0 else 2 * Lx - 3
                d = np.diag([_crossing_sign(-1, xs * _sgn(s)) for s in range(2)])
                prims.append(Primitive("site", pos, d, "crossing pin"))
            else:
                d = np.zeros(8)
                for s1 in range(2):
                    for t in range(2):
                        for s2 in range(2):
                            d[4 * s1 + 2 * t + s2] = _crossing_sign(
                                -1, xs * _sgn(s1) * _sgn(s2))
                prims.append(Primitive("window", 2 * c - 1, np.diag(d),
                                       "crossing", span=3))
        net.layers.append(Layer("h", y, prims))

        if y < lat.Ly:
            prims = []
            for x in range(1, Lx):
                op = _vertical_edge_window(theta, axis, int(ex_v[y, x - 1]),
                                           int(ez_v[y, x - 1]), int(bonds.xi_v[y, x - 1]))
                prims.append(Primitive("window", 2 * (x - 1), op, "single-rot", span=3))
                net.n_single_rot += 1
            net.layers.append(Layer("v", y, prims))
    return net


def _row_mpo_two_copy(theta, phi, axis, ex_row, ez_row, Lx) -> MPO:
    """Horizontal-row MPO of the two-copy model.

    tau sites carry the two-sector edge weight (a full map between
    consecutive plaquette rows), sigma sites carry the pair weight; the
    virtual leg is the XX-dressed row variable, pinned at both ends.
    """
    tensors = []
    for i in range(2 * Lx - 1):
        if i % 2 == 0:
            c = i // 2
            wl = 1 if c == 0 else 2
            wr = 1 if c == Lx - 1 else 2
            t = np.zeros((wl, 2, 2, wr), dtype=complex)
            for ain in range(wl):
                a_in = 1 if c == 0 else _sgn(ain)
                for aout in range(wr):
                    a_out = 1 if c == Lx - 1 else _sgn(aout)
                    for ti in range(2):
                        for to in range(2):
                            t[ain, to, ti, aout] = _w_general(
                                theta, axis,
                                int(ex_row[c]) * a_in * a_out,
                                int(ez_row[c]) * _sgn(ti) * _sgn(to))
        else:
            t = np.zeros((2, 2, 2, 2), dtype=complex)
            for a in range(2):
                for s in range(2):
                    t[a, s, s, a] = _w_pair(phi, _sgn(s) * _sgn(a))
        tensors.append(t)
    return MPO(0, tensors)


def _vertical_edge_window(theta, axis, xs_bond: int, zs_bond: int, xi: int) -> np.ndarray:
    """Dense (tau, sigma, tau) operator for one vertical edge.

    Diagonal on the two tau sites (they belong to the same plaquette row);
    a full map on the sigma site between vertex rows.  The X-error branches
    carry the crossing sign with the Z reference on this edge.
    """
    op = np.zeros((2, 2, 2, 2, 2, 2), dtype=complex)  # t1' s' t2' ; t1 s t2
    for t1 in range(2):
        for t2 in range(2):
            zs = zs_bond * _sgn(t1) * _sgn(t2)
            for si in range(2):
                for so in range(2):
                    xs = xs_bond * _sgn(si) * _sgn(so)
                    w = _w_general(theta, axis, xs, zs)
                    if xs < 0:
                        w *= _crossing_sign(xi, -1)
                    op[t1, so, t2, t1, si, t2] = w
    return op.reshape(8, 8)


def build_network(model, bonds: BondConfig, lat: Lattice) -> LayeredNetwork:
    """Compile (error model, bond configuration) into executable layers."""
    if model.kind in (X_ONLY, X_XX):
        if bonds.has_z_sector():
            raise ValueError("Z-sector bonds present for a pure-X model")
        net = _build_single_copy(model, bonds, lat)
    elif model.kind == GENERAL_XX:
        net = _build_two_copy(model, bonds, lat)
    else:
        raise ValueError(f"unknown model kind {model.kind!r}")
    net.validate()
    return net
