"""Finite matrix-product states with a mixed-canonical form.

Site tensors have legs ``(left bond, physical, right bond)``.  Tensors left
of ``center`` are left-isometries, tensors right of it are right-isometries,
so the Frobenius norm of the center tensor is the state norm.  All scalar
factors (norms swept out by :meth:`MPS.renormalize`, projector weights,
amplitudes of fully measured-out states) accumulate in the complex
``log_norm`` field; the tensors themselves stay O(1).

Small matrix-product operators (:class:`MPO`) cover everything that is not a
nearest-neighbour gate: long-range two-body terms, Pauli-string projectors
and the horizontal transfer-matrix rows of the decoder.
"""

from __future__ import annotations

import numpy as np

from .tensors import DEFAULT_TOL, entropy_from_spectrum, svd_truncate


class ZeroProbabilityError(RuntimeError):
    """Projection onto a branch of (numerically) vanishing probability."""


def _as_tensor(x) -> np.ndarray:
    return np.asarray(x, dtype=complex)


class MPO:
    """Operator acting on a contiguous window ``start .. start+len-1``.

    ``tensors[k]`` has legs ``(w_left, p_out, p_in, w_right)`` with
    ``w_left = 1`` on the first and ``w_right = 1`` on the last tensor.
    Sites outside the window are untouched.
    """

    def __init__(self, start: int, tensors: list):
        self.start = start
        self.tensors = [_as_tensor(t) for t in tensors]

    def __len__(self):
        return len(self.tensors)


def two_term_mpo(ops_a: dict, ops_b: dict, coeff_a=1.0, coeff_b=1.0, dims=None) -> MPO:
    """MPO for ``coeff_a * prod(ops_a) + coeff_b * prod(ops_b)``.

    ``ops_a``/``ops_b`` map site index to a single-site operator; sites in
    neither dict act as identity.  The window spans from the smallest to the
    largest mentioned site.  ``dims`` optionally maps site index to its
    physical dimension (default 2).
    """
    involved = sorted(set(ops_a) | set(ops_b))
    if not involved:
        raise ValueError("empty operator")
    start, end = involved[0], involved[-1]
    tensors = []
    for j in range(start, end + 1):
        d = 2 if dims is None else dims.get(j, 2)
        eye = np.eye(d)
        a = _as_tensor(ops_a.get(j, eye))
        b = _as_tensor(ops_b.get(j, eye))
        if j == start:
            a = a * coeff_a
            b = b * coeff_b
        t = np.zeros((2, d, d, 2), dtype=complex)
        t[0, :, :, 0] = a
        t[1, :, :, 1] = b
        if j == start:
            t = t[:1] + t[1:]  # row vector (1, d, d, 2)
        if j == end:
            t = t[..., :1] + t[..., 1:]  # column vector
        tensors.append(t)
    return MPO(start, tensors)


def pauli_projector_mpo(ops: dict, sign: int) -> MPO:
    """MPO for ``(1 + sign * P) / 2`` with ``P`` a product of one-site ops."""
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    return two_term_mpo({min(ops): np.eye(2)}, ops, 0.5, 0.5 * sign)


def product_state(vectors) -> "MPS":
    """Product-state MPS from per-site vectors; see :meth:`MPS.from_product`."""
    return MPS.from_product(vectors)


class MPS:
    """Matrix-product state over an ordered chain of small-dimension sites."""

    def __init__(self, sites: list, center: int = 0, log_norm: complex = 0.0):
        self.sites = sites
        self.center = center
        self.log_norm = complex(log_norm)

    # ------------------------------------------------------------------ build

    @classmethod
    def from_product(cls, vectors) -> "MPS":
        """Product state with one site per vector (bond dimension 1).

        The represented amplitudes are the literal Kronecker product of the
        input vectors; per-site norms are swept into ``log_norm``.
        """
        sites = []
        log_norm = 0.0j
        for v in vectors:
            v = _as_tensor(v)
            nv = np.linalg.norm(v)
            if nv == 0:
                raise ValueError("zero vector in product state")
            sites.append((v / nv).reshape(1, -1, 1))
            log_norm += np.log(nv)
        return cls(sites, center=0, log_norm=log_norm)

    def copy(self) -> "MPS":
        return MPS([t.copy() for t in self.sites], self.center, self.log_norm)

    # ------------------------------------------------------------- properties

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def phys_dims(self) -> list:
        return [t.shape[1] for t in self.sites]

    @property
    def bond_dims(self) -> list:
        return [t.shape[2] for t in self.sites[:-1]]

    def max_bond(self) -> int:
        return max([t.shape[2] for t in self.sites[:-1]], default=1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.sites[self.center]))

    # ------------------------------------------------------ canonical moves

    def _move_right(self):
        c = self.center
        t = self.sites[c]
        l, p, r = t.shape
        q, rr = np.linalg.qr(t.reshape(l * p, r))
        self.sites[c] = q.reshape(l, p, -1)
        nxt = self.sites[c + 1]
        self.sites[c + 1] = (rr @ nxt.reshape(r, -1)).reshape(-1, *nxt.shape[1:])
        self.center = c + 1

    def _move_left(self):
        c = self.center
        t = self.sites[c]
        l, p, r = t.shape
        q, rr = np.linalg.qr(t.reshape(l, p * r).conj().T)
        self.sites[c] = q.conj().T.reshape(-1, p, r)
        prv = self.sites[c - 1]
        l0, p0, _ = prv.shape
        self.sites[c - 1] = (prv.reshape(l0 * p0, l) @ rr.conj().T).reshape(l0, p0, -1)
        self.center = c - 1

    def move_center(self, i: int):
        while self.center < i:
            self._move_right()
        while self.center > i:
            self._move_left()

    def renormalize(self) -> float:
        """Divide out the state norm, adding ``log(norm)`` to ``log_norm``."""
        n = self.norm()
        if n == 0.0:
            raise ZeroProbabilityError("state has zero norm")
        self.sites[self.center] = self.sites[self.center] / n
        self.log_norm += np.log(n)
        return n

    # ------------------------------------------------------------ operations

    def apply_one_site(self, i: int, op) -> None:
        """Apply a one-site operator at ``i`` (never truncates)."""
        op = _as_tensor(op)
        self.move_center(i)
        t = self.sites[i]
        l, p, r = t.shape
        out = (op @ t.transpose(1, 0, 2).reshape(p, l * r))
        self.sites[i] = out.reshape(-1, l, r).transpose(1, 0, 2)

    def apply_two_site(self, i: int, gate, chi_max: int, tol: float = DEFAULT_TOL) -> float:
        """Apply a two-site gate on ``(i, i+1)``; returns discarded weight.

        ``gate`` has legs ``(p_i', p_{i+1}', p_i, p_{i+1})``.  The center ends
        on site ``i + 1``.
        """
        gate = _as_tensor(gate)
        if self.center < i:
            self.move_center(i)
        elif self.center > i + 1:
            self.move_center(i + 1)
        theta = np.tensordot(self.sites[i], self.sites[i + 1], axes=(2, 0))  # l pi pj r
        theta = np.tensordot(gate, theta, axes=((2, 3), (1, 2)))  # pi' pj' l r
        theta = theta.transpose(2, 0, 1, 3)
        res = svd_truncate(theta, split=2, chi_max=chi_max, tol=tol)
        self.sites[i] = res.u
        self.sites[i + 1] = np.tensordot(np.diag(res.s), res.v, axes=(1, 0))
        self.center = i + 1
        return res.discarded_weight

    def apply_window(self, start: int, n_in: int, op, out_dims, chi_max: int,
                     tol: float = DEFAULT_TOL) -> float:
        """Apply a dense operator to ``n_in`` adjacent sites, reshaping the
        window into ``len(out_dims)`` sites.

        ``op`` is a matrix of shape ``(prod(out_dims), prod(window_dims))``.
        With ``n_in == 0`` the operator is a vector and fresh sites are
        spliced in at ``start`` (valid only for product insertion, e.g. the
        fresh bottom-row tensors of the sampler).  Returns the total
        discarded weight of the splitting SVDs; the center ends on the last
        new site.
        """
        op = _as_tensor(op)
        out_dims = list(out_dims)
        d_out = int(np.prod(out_dims)) if out_dims else 1
        if n_in == 0:
            theta = op.reshape(1, d_out, 1)
        else:
            self.move_center(start)
            theta = self.sites[start]
            for k in range(1, n_in):
                theta = np.tensordot(theta, self.sites[start + k], axes=(theta.ndim - 1, 0))
            l = theta.shape[0]
            r = theta.shape[-1]
            theta = theta.reshape(l, -1, r)
            theta = np.tensordot(op, theta, axes=(1, 1)).transpose(1, 0, 2)  # l Dout r
        # split Dout into the individual new sites
        l, _, r = theta.shape
        theta = theta.reshape([l] + out_dims + [r])
        new_sites = []
        dw = 0.0
        work = theta
        for k in range(len(out_dims) - 1):
            res = svd_truncate(work, split=2, chi_max=chi_max, tol=tol)
            dw += res.discarded_weight
            new_sites.append(res.u)
            work = np.tensordot(np.diag(res.s), res.v, axes=(1, 0))
        new_sites.append(work)
        self.sites[start:start + n_in] = new_sites
        self.center = start + len(out_dims) - 1
        return dw

    def apply_mpo(self, mpo: MPO, chi_max: int, tol: float = DEFAULT_TOL) -> float:
        """Apply an MPO with a single truncating zip-up sweep.

        Each window site is contracted with its MPO tensor and immediately
        split, carrying the remainder rightward, so bond dimensions never
        exceed ``2 chi w`` transiently.  Exact for ``tol = 0`` with an
        unbounded ``chi_max``.  Returns the total discarded weight; the
        center ends on the last window site.
        """
        start = mpo.start
        end = start + len(mpo.tensors) - 1
        self.move_center(start)
        dw = 0.0
        # carry has legs (new bond, old bond, mpo bond)
        l0 = self.sites[start].shape[0]
        carry = np.eye(l0, dtype=complex).reshape(l0, l0, 1)
        for k, w in enumerate(mpo.tensors):
            site = self.sites[start + k]
            b, p, r = site.shape
            wl, po, _, wr = w.shape
            c = carry.shape[0]
            # (c b wv) x (b p r) -> (c wv p r), then x (wl po pi wr) -> (c r po wr)
            t = (carry.transpose(0, 2, 1).reshape(c * wl, b) @ site.reshape(b, p * r))
            t = t.reshape(c, wl, p, r).transpose(0, 3, 1, 2).reshape(c * r, wl * p)
            t = t @ w.transpose(0, 2, 1, 3).reshape(wl * p, po * wr)
            t = t.reshape(c, r, po, wr).transpose(0, 2, 1, 3)  # c po r wr
            if k == len(mpo.tensors) - 1:
                self.sites[end] = np.ascontiguousarray(t.reshape(c, po, -1))
                break
            res = svd_truncate(t.reshape(c, po, r * wr), split=2,
                               chi_max=chi_max, tol=tol)
            dw += res.discarded_weight
            self.sites[start + k] = res.u
            sv = res.s[:, None] * res.v
            carry = sv.reshape(len(res.s), r, wr)
        self.center = end
        return dw

    def project_and_renormalize(self, mpo: MPO, chi_max: int,
                                tol: float = DEFAULT_TOL) -> float:
        """Apply a projector MPO and renormalize.

        Returns ``log(weight)`` where ``weight`` is the squared norm after
        projection (the Born probability factor when the input state is
        normalized).  Raises :class:`ZeroProbabilityError` below 1e-14.
        """
        self.apply_mpo(mpo, chi_max=chi_max, tol=tol)
        n = self.norm()
        w = n * n
        if w < 1e-14:
            raise ZeroProbabilityError(f"projector weight {w:.3e} below threshold")
        self.sites[self.center] = self.sites[self.center] / n
        self.log_norm += np.log(n)
        return float(np.log(w))

    # ---------------------------------------------------------- measurement

    def expectation_product(self, ops: dict) -> complex:
        """Expectation value of a product of one-site operators.

        ``ops`` maps site index to a matrix; other sites act as identity.
        Normalization of the state is divided out.
        """
        involved = sorted(ops)
        a, b = involved[0], involved[-1]
        if not (a <= self.center <= b):
            self.move_center(a if self.center < a else b)
        lo = min(a, self.center)
        hi = max(b, self.center)
        env = np.eye(self.sites[lo].shape[0], dtype=complex)
        for j in range(lo, hi + 1):
            t = self.sites[j]
            l, p, r = t.shape
            top = t
            if j in ops:
                m = _as_tensor(ops[j])
                top = (m @ t.transpose(1, 0, 2).reshape(p, l * r)) \
                    .reshape(p, l, r).transpose(1, 0, 2)
            env = (env @ top.reshape(l, p * r)).reshape(l * p, r)
            env = t.conj().reshape(l * p, r).T @ env  # r' x r
        val = np.trace(env)
        n2 = self.norm() ** 2
        return complex(val / n2)

    def measure_out(self, i: int, basis, rng) -> int:
        """Measure site ``i`` in the basis given by a one-site unitary and
        remove it from the chain.

        The outcome ``o`` has Born probability ``|| <o| B psi ||^2`` where
        ``B`` is the basis unitary.  Returns the outcome index.
        """
        self.apply_one_site(i, basis)
        t = self.sites[i]
        probs = np.einsum("lpr,lpr->p", t, t.conj()).real
        probs = np.maximum(probs, 0.0)
        total = probs.sum()
        if total <= 0:
            raise ZeroProbabilityError("measure_out on zero-norm site")
        probs = probs / total
        outcome = int(np.searchsorted(np.cumsum(probs), rng.random()))
        outcome = min(outcome, len(probs) - 1)
        if probs[outcome] < 1e-300:
            raise ZeroProbabilityError("sampled zero-probability outcome")
        collapsed = t[:, outcome, :] / np.sqrt(probs[outcome] * total)
        if self.n_sites == 1:
            amp = complex(collapsed[0, 0])
            self.log_norm += np.log(amp)
            self.sites = []
            self.center = 0
            return outcome
        if i < self.n_sites - 1:
            self.sites[i + 1] = np.tensordot(collapsed, self.sites[i + 1], axes=(1, 0))
            del self.sites[i]
            self.center = i
        else:
            self.sites[i - 1] = np.tensordot(self.sites[i - 1], collapsed, axes=(2, 0))
            del self.sites[i]
            self.center = i - 1
        return outcome

    # ---------------------------------------------------------- entanglement

    def cut_spectrum(self, k: int) -> np.ndarray:
        """Singular values across the bond between sites ``k`` and ``k+1``."""
        self.move_center(k)
        t = self.sites[k]
        res = svd_truncate(t, split=2, chi_max=t.shape[2], tol=0.0)
        return res.s

    def cut_spectra(self) -> list:
        """Spectra at every internal cut (uses a working copy)."""
        w = self.copy()
        w.move_center(0)
        out = []
        for k in range(w.n_sites - 1):
            res = svd_truncate(w.sites[k], split=2, chi_max=w.sites[k].shape[2], tol=0.0)
            out.append(res.s)
            w.sites[k] = res.u
            w.sites[k + 1] = np.tensordot(
                np.tensordot(np.diag(res.s), res.v, axes=(1, 0)),
                w.sites[k + 1], axes=(1, 0))
            w.center = k + 1
        return out

    def cut_entropies(self) -> list:
        """``(cut index, entanglement entropy)`` at every internal cut."""
        return [(k, entropy_from_spectrum(s)) for k, s in enumerate(self.cut_spectra())]

    def mid_cut_entropy(self) -> float:
        """Entropy at the middle bond (0 for a chain without internal cuts)."""
        if self.n_sites < 2:
            return 0.0
        return entropy_from_spectrum(self.cut_spectrum((self.n_sites - 1) // 2))

    # -------------------------------------------------------------- readouts

    def to_dense(self, include_norm: bool = False) -> np.ndarray:
        """Dense coefficient tensor with one axis per site (small chains)."""
        psi = self.sites[0]
        for t in self.sites[1:]:
            psi = np.tensordot(psi, t, axes=(psi.ndim - 1, 0))
        psi = psi.reshape(self.phys_dims)
        if include_norm:
            psi = psi * np.exp(self.log_norm)
        return psi

    def contract_with_product(self, vectors, include_norm: bool = True) -> complex:
        """``sum_s (prod_i v_i[s_i]) psi(s)``.

        No complex conjugation is applied to ``vectors``; for a quantum
        overlap pass conjugated vectors.  With ``include_norm=False`` the
        ``log_norm`` factor is left out (callers working in log space add
        it themselves).
        """
        if len(vectors) != self.n_sites:
            raise ValueError("vector count does not match site count")
        env = np.ones((1,), dtype=complex)
        for v, t in zip(vectors, self.sites):
            env = np.tensordot(env, np.tensordot(_as_tensor(v), t, axes=(0, 1)), axes=(0, 0))
        val = complex(env[0])
        if include_norm:
            val *= np.exp(self.log_norm)
        return val

    def overlap(self, other: "MPS") -> complex:
        """Quantum overlap ``<self|other>`` including both ``log_norm``."""
        env = np.ones((1, 1), dtype=complex)
        for a, b in zip(self.sites, other.sites):
            env = np.tensordot(env, b, axes=(1, 0))
            env = np.tensordot(a.conj(), env, axes=((0, 1), (0, 1)))
        return complex(env[0, 0] * np.exp(np.conj(self.log_norm) + other.log_norm))
