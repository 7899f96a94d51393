"""Batch experiment harness: sweeps, CSV emission, scaling analysis.

A sweep enumerates parameter points (model angles x system sizes), draws
``samples`` syndromes per point with the network sampler, decodes each and
writes one CSV row per (point, sample).  Every sample owns a counter-based
RNG key derived from ``(seed, point index, sample index)``, so the output is
byte-identical regardless of the worker count; timing and the optional full
entropy traces go to a JSON-lines sidecar instead of the main CSV to keep it
deterministic.

``collapse_fit`` implements a standard scaling-collapse quality function:
for candidate ``(theta_c, nu)`` the data are rescaled to
``x = (theta - theta_c) L^(1/nu)`` and each point is compared against the
linear interpolation of the other sizes' points bracketing it, weighted by
the combined errors.  The minimizer is a coarse grid scan refined with
Nelder-Mead.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np
import scipy.optimize

from . import decode as dec
from .code import GENERAL_XX, X_ONLY, ErrorModel, Lattice, MODEL_KINDS
from .isotns import apply_errors, build_isotns, sample_syndrome

CSV_SCHEMA_VERSION = 1

_BLAS_LIMIT = None


def limit_blas_threads(n: int = 1):
    """Pin BLAS pools to ``n`` threads.

    The chain tensors are small enough that OpenBLAS multithreading slows
    factorizations down severalfold; sweep parallelism comes from worker
    processes instead.
    """
    global _BLAS_LIMIT
    try:
        import threadpoolctl
        _BLAS_LIMIT = threadpoolctl.threadpool_limits(limits=n)
    except ImportError:
        pass

CSV_COLUMNS = [
    "schema", "model", "lx", "ly", "theta", "phi", "nx", "ny", "nz",
    "chi_max", "tol", "init", "seed", "point", "sample", "syndrome",
    "sample_log_prob",
    "logz10_00", "argz_00", "logz10_01", "argz_01",
    "logz10_10", "argz_10", "logz10_11", "argz_11",
    "chosen", "df_re", "df_abs", "dfx_re", "dfx_abs", "dfz_re", "dfz_abs",
    "success_prob", "steady_s", "max_discarded", "max_bond",
    "sampler_max_bond", "sampler_resamples", "degenerate",
]


@dataclass
class SweepConfig:
    model: str = "x-xx"
    thetas: list = field(default_factory=lambda: [0.1 * math.pi])
    phis: list = field(default_factory=lambda: [0.0])
    phi_equals_theta: bool = False
    axis: tuple = (1.0, 0.0, 0.0)
    theta_xy: list = None          # list of (theta_x, theta_y); overrides thetas/axis
    sizes: list = field(default_factory=lambda: [2])
    aspect: int = 1                # Ly = aspect * Lx
    chi_max: int = 64
    tol: float = 1e-12
    samples: int = 10
    seed: int = 1
    init: str = "plus"
    workers: int = 1
    out: str = "sweep.csv"
    trace_out: str = None          # JSON-lines sidecar (timings, S(y) traces)

    def validate(self):
        if self.model not in MODEL_KINDS:
            raise ValueError(f"unknown model {self.model!r}")
        if not self.sizes or self.samples < 1 or self.aspect < 1:
            raise ValueError("need nonempty sizes, samples >= 1, aspect >= 1")
        if not self.thetas and not self.theta_xy:
            raise ValueError("empty angle grid")

    def points(self) -> list:
        """Enumerated (point_index, params) in deterministic order."""
        angle_sets = []
        if self.model == GENERAL_XX and self.theta_xy:
            for (tx, ty) in self.theta_xy:
                for phi in self.phis:
                    angle_sets.append({"theta_x": tx, "theta_y": ty, "phi": phi})
        else:
            for theta in self.thetas:
                phis = [theta] if self.phi_equals_theta else self.phis
                if self.model == X_ONLY:
                    phis = [0.0]
                for phi in phis:
                    angle_sets.append({"theta": theta, "phi": phi})
        out = []
        idx = 0
        for ang in angle_sets:
            for L in self.sizes:
                out.append({"point": idx, "lx": L, "ly": self.aspect * L, **ang})
                idx += 1
        return out

    def model_for(self, params: dict) -> ErrorModel:
        if "theta_x" in params:
            return ErrorModel.from_xy_angles(params["theta_x"], params["theta_y"],
                                             params["phi"])
        if self.model == X_ONLY:
            return ErrorModel.x_only(params["theta"])
        if self.model == GENERAL_XX:
            return ErrorModel.general_xx(params["theta"], params["phi"], self.axis)
        return ErrorModel.x_xx(params["theta"], params["phi"])


def parse_config_file(path: str, overrides: dict = None) -> SweepConfig:
    """Flat ``key = value`` file; '#' starts a comment.

    Lists are comma separated; ``pi`` is understood in angle values
    (e.g. ``thetas = 0.05pi, 0.1pi``).  ``theta_xy`` uses ``tx:ty`` pairs.
    """
    raw = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            raw[key.strip()] = val.strip()
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_strings(raw)


def _parse_angle(tok: str) -> float:
    tok = tok.strip().lower()
    if tok.endswith("pi"):
        return float(tok[:-2]) * math.pi
    return float(tok)


def config_from_strings(raw: dict) -> SweepConfig:
    cfg = SweepConfig()
    casts = {
        "model": str, "out": str, "trace_out": str, "init": str,
        "aspect": int, "chi_max": int, "samples": int, "seed": int, "workers": int,
        "tol": float,
        "phi_equals_theta": lambda v: str(v).lower() in ("1", "true", "yes"),
        "thetas": lambda v: [_parse_angle(t) for t in str(v).split(",") if t.strip()],
        "phis": lambda v: [_parse_angle(t) for t in str(v).split(",") if t.strip()],
        "sizes": lambda v: [int(t) for t in str(v).split(",") if t.strip()],
        "axis": lambda v: tuple(float(t) for t in str(v).split(",")),
        "theta_xy": lambda v: [tuple(_parse_angle(u) for u in t.split(":"))
                               for t in str(v).split(",") if t.strip()],
    }
    known = {f.name for f in fields(SweepConfig)}
    for key, val in raw.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        if isinstance(val, str):
            val = casts.get(key, str)(val)
        setattr(cfg, key, val)
    cfg.validate()
    return cfg


# ----------------------------------------------------------------- pipeline


def run_single_sample(model: ErrorModel, lat: Lattice, chi_max: int, tol: float,
                      rng_key, init: str = "plus"):
    """Sample one syndrome and decode it; returns (record, amps, result)."""
    tns = apply_errors(build_isotns(lat), model)
    rec = sample_syndrome(tns, chi_max, tol, rng_key)
    amps = dec.class_amplitudes(model, lat, rec.syndrome, chi_max, tol)
    res = dec.decision_from_amplitudes(amps, lat, init)
    return rec, amps, res


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isinf(x):
            return _fmt(dec.DF_SENTINEL if x > 0 else -dec.DF_SENTINEL)
        return f"{x:.12g}"
    return str(x)


def _log10_arg(z: complex):
    if z.real == -np.inf:
        return float("-inf"), 0.0
    return z.real / math.log(10), z.imag


_WORKER_CFG = None


def _init_worker(cfg):
    global _WORKER_CFG
    _WORKER_CFG = cfg
    limit_blas_threads(1)


def _run_task_safe(task):
    """Per-sample failures become flagged rows; the sweep never aborts."""
    params, sample_idx = task
    try:
        return _run_task(task)
    except Exception as err:
        row = {c: "" for c in CSV_COLUMNS}
        row.update({"schema": CSV_SCHEMA_VERSION, "model": _WORKER_CFG.model,
                    "lx": params["lx"], "ly": params["ly"],
                    "point": params["point"], "sample": sample_idx,
                    "degenerate": 1})
        trace = {"point": params["point"], "sample": sample_idx, "error": repr(err)}
        return params["point"], sample_idx, row, trace


def _run_task(task):
    cfg = _WORKER_CFG
    params, sample_idx = task
    t0 = time.perf_counter()
    lat = Lattice(params["lx"], params["ly"])
    model = cfg.model_for(params)
    key = (cfg.seed, params["point"], sample_idx)
    rec, amps, res = run_single_sample(model, lat, cfg.chi_max, cfg.tol, key, cfg.init)
    wall_ms = (time.perf_counter() - t0) * 1e3

    row = {
        "schema": CSV_SCHEMA_VERSION, "model": cfg.model,
        "lx": params["lx"], "ly": params["ly"],
        "theta": _fmt(model.theta), "phi": _fmt(model.phi),
        "nx": _fmt(model.n[0]), "ny": _fmt(model.n[1]), "nz": _fmt(model.n[2]),
        "chi_max": cfg.chi_max, "tol": _fmt(cfg.tol), "init": cfg.init,
        "seed": cfg.seed, "point": params["point"], "sample": sample_idx,
        "syndrome": rec.syndrome.to_hex(), "sample_log_prob": _fmt(rec.log_prob),
        "chosen": "".join(str(b) for b in (res.chosen_class
                          if isinstance(res.chosen_class, tuple)
                          else (res.chosen_class,))),
        "df_re": _fmt(res.dF_re), "df_abs": _fmt(res.dF),
        "dfx_re": _fmt(res.dF_X_re), "dfx_abs": _fmt(res.dF_X),
        "dfz_re": _fmt(res.dF_Z_re), "dfz_abs": _fmt(res.dF_Z),
        "success_prob": _fmt(res.success_prob_contrib),
        "steady_s": _fmt(res.steady_S),
        "max_discarded": _fmt(res.max_discarded), "max_bond": res.max_bond,
        "sampler_max_bond": rec.chi_max_reached,
        "sampler_resamples": rec.resample_events,
        "degenerate": int(res.degenerate),
    }
    for (a, b) in ((0, 0), (0, 1), (1, 0), (1, 1)):
        label = (a, b) if amps.two_copy else (a if b == 0 else None)
        col = f"{a}{b}"
        if label in amps.log_z:
            l10, arg = _log10_arg(amps.log_z[label])
            row[f"logz10_{col}"] = _fmt(l10)
            row[f"argz_{col}"] = _fmt(arg)
        else:
            row[f"logz10_{col}"] = ""
            row[f"argz_{col}"] = ""
    trace = {
        "point": params["point"], "sample": sample_idx, "wall_ms": wall_ms,
        "s_trace": [round(st.entropy, 12)
                    for st in amps.traces[amps.labels[0]].steps],
        "layers": [st.layer for st in amps.traces[amps.labels[0]].steps],
    }
    return params["point"], sample_idx, row, trace


def run_sweep(cfg: SweepConfig) -> str:
    """Run the sweep and write the CSV; returns the output path.

    Per-sample failures are recorded as flagged rows (all result columns
    empty, ``degenerate = 1``) and never abort the sweep.
    """
    cfg.validate()
    tasks = [(params, k) for params in cfg.points() for k in range(cfg.samples)]
    results = {}
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers, initializer=_init_worker,
                                 initargs=(cfg,)) as pool:
            for point, sample, row, trace in pool.map(_run_task_safe, tasks,
                                                      chunksize=4):
                results[(point, sample)] = (row, trace)
    else:
        _init_worker(cfg)
        for task in tasks:
            point, sample, row, trace = _run_task_safe(task)
            results[(point, sample)] = (row, trace)
    keys = sorted(results)
    with open(cfg.out, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for k in keys:
            row = results[k][0]
            fh.write(",".join(str(row.get(c, "")) for c in CSV_COLUMNS) + "\n")
    if cfg.trace_out:
        with open(cfg.trace_out, "w") as fh:
            for k in keys:
                fh.write(json.dumps(results[k][1]) + "\n")
    return cfg.out


def sweep_summary(csv_path: str) -> list:
    """Per-point means of the headline observables, filtered and unfiltered."""
    rows = read_csv_rows(csv_path)
    by_point = {}
    for r in rows:
        by_point.setdefault(int(r["point"]), []).append(r)
    out = []
    for point in sorted(by_point):
        grp = by_point[point]
        entry = {"point": point, "lx": int(grp[0]["lx"]), "theta": grp[0]["theta"],
                 "phi": grp[0]["phi"], "n_samples": len(grp)}
        for col in ("df_abs", "dfx_abs", "dfz_abs", "steady_s", "success_prob"):
            vals = np.array([float(r[col]) for r in grp if r[col] != ""])
            ok = [float(r[col]) for r in grp
                  if r[col] != "" and r["degenerate"] == "0"]
            entry[col] = float(np.mean(vals)) if len(vals) else math.nan
            entry[col + "_filtered"] = float(np.mean(ok)) if ok else math.nan
        out.append(entry)
    return out


def read_csv_rows(path: str) -> list:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        return [dict(zip(header, line.rstrip("\n").split(",")))
                for line in fh if line.strip()]


# ------------------------------------------------------- scaling analysis


@dataclass
class CollapseFit:
    theta_c: float
    nu: float
    residual: float
    n_points: int
    nu_unidentifiable: bool = False
    grid: list = None


def _collapse_residual(data, theta_c: float, nu: float) -> tuple:
    """Quality of the collapse onto a single master curve.

    ``data`` is an (n, 4) array of (theta, L, value, error).  Each point is
    compared with the interpolation of bracketing points from other sizes.
    """
    theta, L, y, sig = data.T
    x = (theta - theta_c) * L ** (1.0 / nu)
    total, count = 0.0, 0
    for i in range(len(x)):
        mask = L != L[i]
        xo, yo, so = x[mask], y[mask], sig[mask]
        order = np.argsort(xo)
        xo, yo, so = xo[order], yo[order], so[order]
        j = np.searchsorted(xo, x[i])
        if j == 0 or j >= len(xo):
            continue
        w = (x[i] - xo[j - 1]) / (xo[j] - xo[j - 1])
        y_hat = (1 - w) * yo[j - 1] + w * yo[j]
        var = sig[i] ** 2 + ((1 - w) * so[j - 1]) ** 2 + (w * so[j]) ** 2
        total += (y[i] - y_hat) ** 2 / max(var, 1e-30)
        count += 1
    if count == 0:
        return math.inf, 0
    return total / count, count


def collapse_fit(data, theta_box, nu_box, grid_n: int = 41) -> CollapseFit:
    """Fit ``(theta_c, nu)`` by minimizing the collapse residual.

    ``data`` rows are ``(theta, L, value, error)``; at least two distinct
    sizes with a few angles each are required.  Coarse grid scan over the
    search box, then derivative-free local refinement.
    """
    data = np.asarray(data, dtype=float)
    sizes = np.unique(data[:, 1])
    if len(sizes) < 2:
        raise ValueError("collapse fit needs at least two distinct sizes")
    if min(np.sum(data[:, 1] == L) for L in sizes) < 4:
        raise ValueError("collapse fit needs >= 4 angle points per size")
    t_grid = np.linspace(theta_box[0], theta_box[1], grid_n)
    n_grid = np.linspace(nu_box[0], nu_box[1], grid_n)
    best = (math.inf, t_grid[0], n_grid[0])
    res_grid = np.full((grid_n, grid_n), np.nan)
    for i, tc in enumerate(t_grid):
        for j, nu in enumerate(n_grid):
            r, cnt = _collapse_residual(data, tc, nu)
            res_grid[i, j] = r
            if r < best[0]:
                best = (r, tc, nu)
    _, tc0, nu0 = best

    def objective(p):
        tc, nu = p
        if not (theta_box[0] <= tc <= theta_box[1] and nu_box[0] <= nu <= nu_box[1]):
            return math.inf
        return _collapse_residual(data, tc, nu)[0]

    opt = scipy.optimize.minimize(objective, [tc0, nu0], method="Nelder-Mead",
                                  options={"xatol": 1e-5, "fatol": 1e-10})
    tc, nu = opt.x
    resid, count = _collapse_residual(data, tc, nu)
    # nu is unidentifiable when the residual is flat along the nu axis
    # (constant data) or keeps improving toward the box edge (data that does
    # not depend on the size collapses trivially as nu -> infinity)
    i_best = int(np.argmin(np.abs(t_grid - tc)))
    nu_slice = res_grid[i_best]
    finite = nu_slice[np.isfinite(nu_slice)]
    flat = len(finite) > 0 and (finite.max() - finite.min()) <= 1e-3 * max(finite.max(), 1e-30)
    step = (nu_box[1] - nu_box[0]) / (grid_n - 1)
    at_edge = nu >= nu_box[1] - 0.5 * step or nu <= nu_box[0] + 0.5 * step
    return CollapseFit(float(tc), float(nu), float(resid), count,
                       nu_unidentifiable=bool(flat or at_edge),
                       grid=[t_grid.tolist(), n_grid.tolist()])


def crossing_estimate(data, n_interp: int = 400) -> dict:
    """Pairwise crossing angles of value(theta) curves for different sizes.

    ``data`` rows are ``(theta, L, value)``.  Curves are linearly
    interpolated on the overlapping angle window; each sign change of their
    difference yields one crossing.  Pairs without a crossing map to an
    empty list.
    """
    data = np.asarray(data, dtype=float)
    curves = {}
    for L in np.unique(data[:, 1]):
        rows = data[data[:, 1] == L]
        order = np.argsort(rows[:, 0])
        curves[float(L)] = (rows[order, 0], rows[order, 2])
    out = {}
    sizes = sorted(curves)
    for i in range(len(sizes)):
        for j in range(i + 1, len(sizes)):
            t1, y1 = curves[sizes[i]]
            t2, y2 = curves[sizes[j]]
            lo, hi = max(t1[0], t2[0]), min(t1[-1], t2[-1])
            if hi <= lo:
                out[(sizes[i], sizes[j])] = []
                continue
            t = np.linspace(lo, hi, n_interp)
            diff = np.interp(t, t1, y1) - np.interp(t, t2, y2)
            crossings = []
            for k in range(len(t) - 1):
                if diff[k] == 0.0:
                    crossings.append(float(t[k]))
                elif diff[k] * diff[k + 1] < 0:
                    frac = diff[k] / (diff[k] - diff[k + 1])
                    crossings.append(float(t[k] + frac * (t[k + 1] - t[k])))
            out[(sizes[i], sizes[j])] = crossings
    return out


# ------------------------------------------------------------ oracle check


def oracle_check(model_kinds=MODEL_KINDS, lattice_sizes=((2, 1), (2, 2), (3, 2)),
                 instances: int = 5, seed: int = 7, rel_tol: float = 1e-9,
                 verbose: bool = False) -> list:
    """Compare transfer-matrix class amplitudes with the dense oracle.

    For each (model, lattice, instance): draw random angles, Born-sample a
    syndrome from the corrupted Choi state, and check every class amplitude
    (relative, in log space) plus the completeness sum against the exact
    syndrome probability.  Returns one result dict per instance.
    """
    from . import code
    from .isotns import rng_from_key

    results = []
    for kind in model_kinds:
        for (Lx, Ly) in lattice_sizes:
            lat = Lattice(Lx, Ly)
            choi0 = code.logical_choi_state(lat)
            for inst in range(instances):
                kind_id = MODEL_KINDS.index(kind)
                rng = rng_from_key((seed, kind_id, Lx * 16 + Ly, inst))
                theta = rng.uniform(0.03, 0.24) * math.pi
                phi = rng.uniform(0.03, 0.24) * math.pi
                if kind == X_ONLY:
                    model = ErrorModel.x_only(theta)
                elif kind == GENERAL_XX:
                    v = rng.normal(size=3)
                    v /= np.linalg.norm(v)
                    model = ErrorModel.general_xx(theta, phi, tuple(v))
                else:
                    model = ErrorModel.x_xx(theta, phi)
                corrupted = code.exact_corrupt(choi0, lat, model)
                syn, _ = code.born_sample_syndrome(corrupted, lat, rng)
                amps = dec.class_amplitudes(model, lat, syn, chi_max=1 << 20, tol=0.0)
                exact = code.exact_class_amplitudes(corrupted, lat, syn,
                                                    amps.rx_edges, amps.rz_edges)
                p_s = code.exact_syndrome_probability(corrupted, lat, syn)
                scale = max(abs(z) for z in exact.values())
                max_err = 0.0
                for label in amps.labels:
                    ab = (label, 0) if not amps.two_copy else label
                    lz = amps.log_z[label]
                    z_net = 0.0 if lz.real == -np.inf else np.exp(lz)
                    max_err = max(max_err, abs(z_net - exact[ab]) / scale)
                total = sum(math.exp(2 * amps.log_z[l].real)
                            for l in amps.labels if amps.log_z[l].real > -np.inf)
                p_err = abs(total - p_s) / p_s
                ok = max_err < rel_tol and p_err < rel_tol
                results.append({"model": kind, "lx": Lx, "ly": Ly, "instance": inst,
                                "theta": theta, "phi": phi, "max_rel_err": max_err,
                                "prob_rel_err": p_err, "ok": ok})
                if verbose:
                    print(f"[{'ok' if ok else 'FAIL'}] {kind} ({Lx},{Ly}) #{inst} "
                          f"amp_err={max_err:.2e} prob_err={p_err:.2e}")
    return results
