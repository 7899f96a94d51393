"""Command line interface: sample, decode, sweep, collapse, oracle-check."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import fields

import numpy as np

from . import decode as dec
from . import exper
from .code import ErrorModel, Lattice, Syndrome
from .isotns import apply_errors, build_isotns, sample_syndrome
from .rbim import build_network, straight_gauge


def _angle(tok: str) -> float:
    tok = tok.strip().lower()
    return float(tok[:-2]) * math.pi if tok.endswith("pi") else float(tok)


def _add_model_args(p: argparse.ArgumentParser):
    p.add_argument("--model", choices=["x", "x-xx", "xyz-xx"], default="x-xx")
    p.add_argument("--theta", type=_angle, default=0.1 * math.pi)
    p.add_argument("--phi", type=_angle, default=0.0)
    p.add_argument("--nx", type=float, default=None)
    p.add_argument("--ny", type=float, default=None)
    p.add_argument("--nz", type=float, default=None)
    p.add_argument("--theta-x", type=_angle, default=None)
    p.add_argument("--theta-y", type=_angle, default=None)
    p.add_argument("--lx", type=int, default=None)
    p.add_argument("--ly", type=int, default=None)
    p.add_argument("--l", type=int, default=None, help="Lx with Ly = aspect * Lx")
    p.add_argument("--aspect", type=int, default=1)
    p.add_argument("--chi", type=int, default=64)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--init", choices=["plus", "zero"], default="plus")


def _model_from_args(args) -> ErrorModel:
    if args.model == "x":
        return ErrorModel.x_only(args.theta)
    if args.model == "xyz-xx":
        if args.theta_x is not None or args.theta_y is not None:
            return ErrorModel.from_xy_angles(args.theta_x or 0.0, args.theta_y or 0.0,
                                             args.phi)
        n = (args.nx if args.nx is not None else 1.0,
             args.ny if args.ny is not None else 0.0,
             args.nz if args.nz is not None else 0.0)
        return ErrorModel.general_xx(args.theta, args.phi, n)
    return ErrorModel.x_xx(args.theta, args.phi)


def _lattice_from_args(args) -> Lattice:
    if args.l is not None:
        return Lattice(args.l, args.aspect * args.l)
    if args.lx is None or args.ly is None:
        raise SystemExit("specify --lx and --ly, or --l with --aspect")
    return Lattice(args.lx, args.ly)


def cmd_sample(args) -> int:
    lat = _lattice_from_args(args)
    model = _model_from_args(args)
    lines = []
    if args.init == "zero":
        # syndromes of the corrupted Z eigenstate are only available through
        # the dense oracle (the network natively prepares the X eigenstate)
        from . import code
        from .isotns import rng_from_key
        state = code.exact_corrupt(code.exact_logical_state(lat, "zero"),
                                   lat, model)
        for k in range(args.samples):
            syn, log_p = code.born_sample_syndrome(state, lat,
                                                   rng_from_key((args.seed, 0, k)))
            lines.append(f"{syn.to_hex()} log_prob={log_p:.6f} oracle=dense")
    else:
        tns = apply_errors(build_isotns(lat), model)
        for k in range(args.samples):
            rec = sample_syndrome(tns, args.chi, args.tol, (args.seed, 0, k))
            lines.append(f"{rec.syndrome.to_hex()} log_prob={rec.log_prob:.6f} "
                         f"max_chi={rec.chi_max_reached} "
                         f"resamples={rec.resample_events}")
    text = "\n".join(lines)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_decode(args) -> int:
    lat = _lattice_from_args(args)
    model = _model_from_args(args)
    if args.syndrome:
        syn = Syndrome.from_hex(lat, args.syndrome)
    else:
        tns = apply_errors(build_isotns(lat), model)
        rec = sample_syndrome(tns, args.chi, args.tol, (args.seed, 0, 0))
        syn = rec.syndrome
        print(f"sampled syndrome {syn.to_hex()}")
    if args.trace:
        rx, rz, bonds = straight_gauge(lat, syn)
        net = build_network(model, bonds, lat)
        print(net.dump())
    amps = dec.class_amplitudes(model, lat, syn, args.chi, args.tol)
    res = dec.defect_free_energies(amps)
    res.post_coeffs = dec.post_correction_coeffs(amps, args.init)
    for label in amps.labels:
        lz = amps.log_z[label]
        print(f"class {label}: log10|Z|={lz.real / math.log(10):.9g} "
              f"arg={lz.imag:.9g}")
    if amps.two_copy:
        print(f"chosen={res.chosen_class} dF_X={res.dF_X:.6g} dF_Z={res.dF_Z:.6g}")
    else:
        print(f"chosen={res.chosen_class} dF={res.dF:.6g}")
    print(f"success_prob={res.success_prob_contrib:.9g} "
          f"post_coeffs={res.post_coeffs}")
    if args.trace:
        ref = amps.traces[amps.labels[0]]
        print("S(y): " + " ".join(f"{st.layer}:{st.entropy:.4f}" for st in ref.steps))
    return 0


def cmd_sweep(args) -> int:
    overrides = {k: v for k, v in vars(args).items()
                 if k in {f.name for f in fields(exper.SweepConfig)}
                 and v is not None}
    if args.config:
        cfg = exper.parse_config_file(args.config, overrides)
    else:
        cfg = exper.config_from_strings(overrides)
    path = exper.run_sweep(cfg)
    print(f"wrote {path}")
    for entry in exper.sweep_summary(path):
        print(json.dumps(entry))
    return 0


def cmd_collapse(args) -> int:
    rows = exper.read_csv_rows(args.csv)
    col = args.value
    by_key = {}
    for r in rows:
        if r.get(col, "") == "" or r["degenerate"] != "0":
            continue
        key = (float(r["theta"]), int(r["lx"]))
        by_key.setdefault(key, []).append(float(r[col]))
    data = []
    for (theta, L), vals in sorted(by_key.items()):
        vals = np.asarray(vals)
        err = vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else 1.0
        data.append((theta, L, vals.mean(), max(err, 1e-9)))
    fit = exper.collapse_fit(np.array(data), (args.theta_min, args.theta_max),
                             (args.nu_min, args.nu_max))
    print(f"theta_c={fit.theta_c:.6g} ({fit.theta_c / math.pi:.4f} pi) "
          f"nu={fit.nu:.4g} residual={fit.residual:.4g} points={fit.n_points}"
          + (" [nu unidentifiable]" if fit.nu_unidentifiable else ""))
    crossings = exper.crossing_estimate(np.array([(t, L, v) for t, L, v, _ in data]))
    for pair, xs in sorted(crossings.items()):
        lab = ", ".join(f"{x / math.pi:.4f} pi" for x in xs) if xs else "none"
        print(f"crossing L={pair[0]:g}/{pair[1]:g}: {lab}")
    return 0


def cmd_oracle_check(args) -> int:
    sizes = [tuple(int(t) for t in tok.split("x")) for tok in args.sizes.split(",")]
    models = args.models.split(",")
    results = exper.oracle_check(models, sizes, args.instances, args.seed,
                                 verbose=True)
    bad = [r for r in results if not r["ok"]]
    print(f"{len(results) - len(bad)}/{len(results)} instances passed")
    return 1 if bad else 0


def main(argv=None) -> int:
    exper.limit_blas_threads(1)
    parser = argparse.ArgumentParser(
        prog="cohdec",
        description="Surface-code syndrome sampling and maximum-likelihood "
                    "decoding under unitary errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample syndromes from the corrupted code")
    _add_model_args(p)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("decode", help="decode one syndrome")
    _add_model_args(p)
    p.add_argument("--syndrome", type=str, default=None, help="syndrome hex")
    p.add_argument("--trace", action="store_true",
                   help="dump the network layers and the entropy trace")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sweep", help="run a batch sweep")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--model", type=str, default=None)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--trace-out", dest="trace_out", type=str, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--chi-max", dest="chi_max", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--aspect", type=int, default=None)
    p.add_argument("--init", type=str, default=None)
    p.add_argument("--thetas", type=str, default=None)
    p.add_argument("--phis", type=str, default=None)
    p.add_argument("--sizes", type=str, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("collapse", help="scaling collapse of a sweep CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--value", default="df_abs",
                   choices=["df_abs", "df_re", "dfx_abs", "dfz_abs", "steady_s"])
    p.add_argument("--theta-min", type=_angle, default=0.05 * math.pi)
    p.add_argument("--theta-max", type=_angle, default=0.2 * math.pi)
    p.add_argument("--nu-min", type=float, default=0.5)
    p.add_argument("--nu-max", type=float, default=5.0)
    p.set_defaults(func=cmd_collapse)

    p = sub.add_parser("oracle-check", help="compare contraction with the dense oracle")
    p.add_argument("--models", default="x,x-xx,xyz-xx")
    p.add_argument("--sizes", default="2x1,2x2,3x2")
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_oracle_check)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
