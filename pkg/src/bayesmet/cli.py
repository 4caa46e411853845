"""Batch driver: parse a config, dispatch to the modules, emit CSV + manifest.

Every run writes <out>.csv (headered, UTF-8, '.' decimal, scientific notation
with 6 significant digits) and <out>.manifest.json (config echo, library
version, wall time, MC standard-error summary).  Identical config and seed
reproduce byte-identical CSVs regardless of --threads.

Exit codes: 0 success, 2 config error, 3 numerical failure (the failing
invariant is named on stderr).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from . import __version__, bayes_mc, bounds, estimation, networks, probes
from . import measurements as ms
from .fockspace import ModeSpace, MultiModeOperator, NumericalError, number_op, pauli
from .priors import FlatPrior, prior_scan
from .probes import Generator, ProbeState


class ConfigError(ValueError):
    pass


OPTICAL = set(probes.OPTICAL_KINDS)
POMS_1D = ("counting_even", "counting_odd", "quadrature_pi8",
           "undo_count_coherent", "parity", "optimal")


def parse_angle(text) -> float:
    """Tiny arithmetic over numbers and 'pi' (e.g. 'pi/2', '0.25', '3*pi/4')."""
    if isinstance(text, (int, float)):
        return float(text)
    allowed = set("0123456789.+-*/() pi")
    if not text or set(text) - allowed:
        raise ConfigError(f"cannot parse angle {text!r}")
    try:
        return float(eval(text, {"__builtins__": {}}, {"pi": math.pi}))
    except Exception as exc:
        raise ConfigError(f"cannot parse angle {text!r}: {exc}") from None


def fmt(x: float) -> str:
    return f"{x:.5e}"


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def write_manifest(path: str, config: dict, extra: dict, wall: float) -> None:
    payload = {
        "config": config,
        "version": __version__,
        "wall_time_s": round(wall, 3),
    }
    payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _coerce(val: str, default):
    """Config-file value -> the type of the flag's default (int/float for None)."""
    if isinstance(default, bool):
        return val.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(val)
    if isinstance(default, float):
        return float(val)
    if default is None:
        for cast in (int, float):
            try:
                return cast(val)
            except ValueError:
                continue
    return val


def load_config_file(path: str) -> dict:
    """Flat key-value text: 'key = value' or 'key value', one per line."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, val = line.split("=", 1)
            else:
                parts = line.split(None, 1)
                if len(parts) != 2:
                    raise ConfigError(f"cannot parse config line {raw!r}")
                key, val = parts
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def build_probe(args) -> tuple[ProbeState, Generator]:
    """Probe + generators addressed by the catalog names."""
    kind = args.probe
    if kind in OPTICAL:
        probe = probes.make_probe(kind, nbar=getattr(args, "nbar", 2.0),
                                  cutoff=getattr(args, "cutoff", None))
        return probe, probes.mz_generator(probe.space)
    if kind == "qubit_gamma":
        d = getattr(args, "d", 2)
        probe = probes.make_qubit_network(args.gamma, d)
        return probe, probes.qubit_network_generators(d)
    if kind == "imaging_global":
        probe = probes.make_imaging_probe("global_gnoon", args.d, args.nbar,
                                          alpha=getattr(args, "alpha", 1.0))
        return probe, probes.imaging_generators(probe.space)
    if kind == "imaging_local":
        probe = probes.make_imaging_probe("local_product", args.d, args.nbar,
                                          n_local=getattr(args, "n_local", None))
        return probe, probes.imaging_generators(probe.space)
    raise ConfigError(f"unknown probe {args.probe!r}")


def build_pom(name: str, probe: ProbeState, gen: Generator, prior: FlatPrior):
    if name == "optimal":
        if prior.n_params == 1 and probe.space.modes == 2 and probe.pure:
            moments = estimation.prior_moments_interferometer(probe, prior)
        else:
            moments = estimation.prior_moments_generic(probe, gen, prior)
        est = estimation.solve_estimator(moments)
        if prior.n_params == 1:
            return ms.estimator_pom(est, probe.space)
        return ms.joint_estimator_pom(est, probe.space)
    if name == "qubit_local":
        return ms.catalog_pom(name, probe.space)
    if name in ms.CATALOG:
        return ms.catalog_pom(name, probe.space)
    raise ConfigError(f"unknown POM {name!r}")


def mc_config(args, two_dim: bool = False) -> bayes_mc.McConfig:
    if args.seed is None:
        raise ConfigError("MC subcommands need an explicit --seed")
    if two_dim:
        return bayes_mc.McConfig.default_2d(
            seed=args.seed, mu_max=args.mu_max,
            grid_points=args.grid or 100, outer_steps=args.outer or 20,
            mc_samples=args.samples or 200, threads=args.threads)
    return bayes_mc.McConfig(
        seed=args.seed, mu_max=args.mu_max,
        grid_points=args.grid or 1250, outer_steps=args.outer or 125,
        mc_samples=args.samples or 1250, threads=args.threads)


def stderr_summary(curve: bayes_mc.MseCurve) -> dict:
    return {
        "stderr_max": fmt(float(curve.stderr.max())),
        "stderr_mean": fmt(float(curve.stderr.mean())),
    }


# --- subcommand implementations --------------------------------------------

def cmd_mse(args) -> dict:
    probe, gen = build_probe(args)
    if len(gen) != 1:
        raise ConfigError("mse is single-parameter; use mse2d")
    prior = FlatPrior(parse_angle(args.mean), parse_angle(args.width))
    pom = build_pom(args.pom, probe, gen, prior)
    curve = bayes_mc.mse_curve_1d(probe, gen, pom, prior, mc_config(args))
    write_csv(args.out + ".csv", ["mu", "error", "stderr"],
              zip(curve.mu.tolist(), curve.errors.tolist(), curve.stderr.tolist()))
    return stderr_summary(curve)


def cmd_mse2d(args) -> dict:
    if args.probe != "qubit_gamma":
        raise ConfigError("mse2d drives the two-sensor qubit network (qubit_gamma)")
    probe, gen = build_probe(args)
    mean = parse_angle(args.mean)
    width = parse_angle(args.width)
    prior = FlatPrior([mean, mean], [width, width])
    pom = build_pom(args.pom, probe, gen, prior)
    if args.functions:
        cols = [[parse_angle(x) for x in col.split(",")]
                for col in args.functions.split(";")]
        v = np.array(cols, dtype=float).T
        if args.normalize_functions:
            v = v / np.linalg.norm(v, axis=0)
    else:
        v = np.eye(2)
    if args.weights:
        wf = np.array([parse_angle(x) for x in args.weights.split(",")])
    else:
        wf = np.full(v.shape[1], 1.0 / v.shape[1])
    weights = bayes_mc.FunctionWeights(v, wf)
    curve = bayes_mc.mse_curve_2d(probe, gen, pom, prior, weights,
                                  mc_config(args, two_dim=True))
    write_csv(args.out + ".csv", ["mu", "error", "stderr"],
              zip(curve.mu.tolist(), curve.errors.tolist(), curve.stderr.tolist()))
    return stderr_summary(curve)


def cmd_single_shot(args) -> dict:
    probe, gen = build_probe(args)
    d = len(gen)
    mean = parse_angle(args.mean)
    width = parse_angle(args.width)
    prior = FlatPrior([mean] * d, [width] * d)
    if d == 1 and probe.space.modes == 2 and probe.pure and probe.kind in OPTICAL:
        moments = estimation.prior_moments_interferometer(probe, prior)
    else:
        moments = estimation.prior_moments_generic(probe, gen, prior)
    est = estimation.solve_estimator(moments)
    if args.weights:
        w = np.array([parse_angle(x) for x in args.weights.split(",")])
    else:
        w = np.full(d, 1.0 / d)
    bound = estimation.single_shot_bound(moments, est, prior, weights=w)
    rows = []
    for k, s_d in enumerate(est.s_support):
        for val in np.sort(np.linalg.eigvalsh(s_d)):
            rows.append((k, float(val)))
    write_csv(args.out + ".csv", ["parameter", "estimate"], rows)
    extra = {"bound": fmt(bound)}
    if d >= 2:
        extra["commutator_norm"] = fmt(estimation.commutation_check(est))
    if args.projectors_csv:
        if est.projectors is None:
            raise ConfigError("projector CSV is only available for one parameter")
        proj_rows = [
            tuple(float(x) for pair in ((c.real, c.imag) for c in row) for x in pair)
            for row in est.projectors
        ]
        header = []
        for k in range(est.projectors.shape[1]):
            header += [f"re_s{k}", f"im_s{k}"]
        write_csv(args.projectors_csv, header, proj_rows)
    print(f"single-shot bound: {fmt(bound)}")
    return extra


def cmd_prior_scan(args) -> dict:
    probe, gen = build_probe(args)
    d = len(gen)
    mean = parse_angle(args.mean)
    width = parse_angle(args.width)
    prior = FlatPrior([mean] * d, [width] * d)
    pom = build_pom(args.pom, probe, gen, prior)
    theta_true = [parse_angle(x) for x in args.theta_true.split(",")]
    mu_list = [int(x) for x in args.mu_list.split(",")]
    scan = prior_scan(probe, gen, pom, prior, theta_true, mu_list, args.seed)
    files = []
    for mu in sorted(scan.snapshots):
        snap = scan.snapshots[mu]
        path = f"{args.out}_mu{mu}.csv"
        if d == 1:
            write_csv(path, ["theta", "density"],
                      zip(scan.grids[0].tolist(), snap.tolist()))
        else:
            rows = ((float(t1), float(t2), float(snap[i, j]))
                    for i, t1 in enumerate(scan.grids[0])
                    for j, t2 in enumerate(scan.grids[1]))
            write_csv(path, ["theta1", "theta2", "density"], rows)
        files.append(path)
    # the manifest still expects a base CSV; write the last snapshot there too
    write_csv(args.out + ".csv", ["mu", "maxima_count"],
              sorted(scan.maxima_counts.items()))
    return {"maxima_counts": {str(k): v for k, v in scan.maxima_counts.items()},
            "snapshot_files": files}


def cmd_qcrb(args) -> dict:
    probe, gen = build_probe(args)
    if len(gen) == 1:
        curve = bounds.qcrb_curve(bounds.qfi(probe, gen), args.mu_max)
    else:
        curve = bounds.qcrb_curve(bounds.qfim(probe, gen), args.mu_max)
    write_csv(args.out + ".csv", ["mu", "value"],
              zip(range(1, args.mu_max + 1), curve.tolist()))
    return {}


def _profile(args, probe, gen, width):
    return bounds.fidelity_profile(probe, gen, width, points=args.grid or 1000)


def cmd_zzb(args) -> dict:
    probe, gen = build_probe(args)
    width = parse_angle(args.width)
    curve = bounds.qzzb(_profile(args, probe, gen, width), width, args.mu_max)
    write_csv(args.out + ".csv", ["mu", "value"],
              zip(range(1, args.mu_max + 1), curve.tolist()))
    return {}


def cmd_wwb(args) -> dict:
    probe, gen = build_probe(args)
    width = parse_angle(args.width)
    curve = bounds.qwwb(_profile(args, probe, gen, width), width, args.mu_max)
    write_csv(args.out + ".csv", ["mu", "value"],
              zip(range(1, args.mu_max + 1), curve.tolist()))
    return {}


def cmd_mu_tau(args) -> dict:
    probe, gen = build_probe(args)
    prior = FlatPrior(parse_angle(args.mean), parse_angle(args.width))
    pom = build_pom(args.pom, probe, gen, prior)
    curve = bayes_mc.mse_curve_1d(probe, gen, pom, prior, mc_config(args))
    crb = bounds.qcrb_curve(bounds.qfi(probe, gen), args.mu_max)
    rel = np.abs(curve.errors - crb) / curve.errors
    write_csv(args.out + ".csv", ["mu", "value"],
              zip(curve.mu.tolist(), rel.tolist()))
    mu_tau = bounds.saturation_mu(curve.errors, crb, eps_tau=args.eps_tau)
    extra = {"mu_tau": mu_tau if mu_tau is not None else "not reached",
             "eps_tau": args.eps_tau}
    if mu_tau is not None:
        extra["stderr_at_mu_tau"] = fmt(float(curve.stderr[mu_tau - 1]))
    extra.update(stderr_summary(curve))
    print(f"mu_tau: {extra['mu_tau']}")
    return extra


def cmd_network_asym(args) -> dict:
    if args.geometry_range:
        lo, hi, num = args.geometry_range.split(":")
        gs = np.linspace(parse_angle(lo), parse_angle(hi), int(num))
    else:
        gs = np.array([parse_angle(args.geometry)])
    rows = []
    for g in gs:
        j = networks.j_opt(float(g), args.d)
        h = networks.correlation_link(j, float(g), args.d)
        rows.append((float(g), args.d, float(j), float(h), float(h / args.mu)))
    write_csv(args.out + ".csv", ["geometry", "d", "j_opt", "h", "crb"], rows)
    if gs.size == 1:
        print(f"j_opt: {fmt(rows[0][2])}")
    return {}


def cmd_imaging_scaling(args) -> dict:
    rows = []
    for n in range(args.n_min, args.n_max + 1):
        f, bound = networks.imaging_local_scaling(n, args.nbar, args.d)
        rows.append((n, args.d, float(f), float(bound)))
    write_csv(args.out + ".csv", ["N", "d", "f", "local_bound"], rows)
    beta = networks.imaging_global_optimum(args.d)
    return {
        "global_bound_at_beta_opt": fmt(networks.imaging_global_bound(args.nbar, args.d)),
        "beta_opt": fmt(beta),
    }


def _dorner_probe(eta: float):
    """Two-photon probe (c1 = 0) with the largest mixed-state F_q at loss eta."""
    space = ModeSpace(3, 2)
    lam = space.mode_numbers(0)
    delta = lam[:, None] - lam[None, :]

    def fq_of(c0: float) -> float:
        vec = c0 * space.basis_ket([0, 2]) + math.sqrt(1 - c0**2) * space.basis_ket([2, 0])
        p = ProbeState(space=space, nbar=2.0, kind="dorner", vector=vec)
        rho = probes.lossy_encode(p, eta, 0.0).matrix
        return bounds._mixed_qfi(rho, -1j * (delta * rho))

    from scipy.optimize import minimize_scalar

    res = minimize_scalar(lambda c: -fq_of(c), bounds=(0.05, 0.95), method="bounded")
    c0 = float(res.x)
    vec = c0 * space.basis_ket([0, 2]) + math.sqrt(1 - c0**2) * space.basis_ket([2, 0])
    pure = ProbeState(space=space, nbar=2.0, kind="dorner", vector=vec)
    return probes.lossy_encode(pure, eta, 0.0), c0, fq_of(c0)


def cmd_loss_demo(args) -> dict:
    mixed, c0, fq = _dorner_probe(args.eta)
    gen = Generator((number_op(mixed.space, 0),))
    prior = FlatPrior(parse_angle(args.mean), parse_angle(args.width))
    moments = estimation.prior_moments_generic(mixed, gen, prior)
    est = estimation.solve_estimator(moments)
    bound = estimation.single_shot_bound(moments, est, prior)
    pom = ms.estimator_pom(est, mixed.space)
    curve = bayes_mc.mse_curve_1d(mixed, gen, pom, prior, mc_config(args))
    write_csv(args.out + ".csv", ["mu", "error", "stderr"],
              zip(curve.mu.tolist(), curve.errors.tolist(), curve.stderr.tolist()))
    a, b = prior.interval(0)
    grid = np.linspace(a + 0.01, b - 0.01, 301)
    table = ms.likelihood_table(mixed, gen, pom, grid)
    _, fisher = bounds.classical_fisher(table, grid)
    extra = {
        "c0": fmt(c0), "fq_mixed": fmt(fq), "single_shot_bound": fmt(bound),
        "fisher_max_over_min": fmt(float(fisher.max() / fisher.min())),
    }
    extra.update(stderr_summary(curve))
    return extra


def cmd_time_demo(args) -> dict:
    space = ModeSpace(2, 1)
    probe = ProbeState(space=space, nbar=1.0, kind="qubit_time",
                       vector=np.array([1.0, 1.0]) / math.sqrt(2))
    gen = Generator((MultiModeOperator(pauli("z"), space, hermitian=True),))
    width = parse_angle(args.width)
    prior = FlatPrior(width, width)  # [W/2, 3W/2]: boundary at an ambiguity node
    moments = estimation.prior_moments_generic(probe, gen, prior)
    est = estimation.solve_estimator(moments)
    s_exp = (math.pi / 2) * (np.eye(2) - 2 * pauli("y") / math.pi**2)
    dev = float(np.abs(est.matrices[0] - s_exp).max()) if abs(width - math.pi / 2) < 1e-12 else None
    pom = ms.estimator_pom(est, space)
    curve = bayes_mc.mse_curve_1d(probe, gen, pom, prior, mc_config(args))
    write_csv(args.out + ".csv", ["mu", "error", "stderr"],
              zip(curve.mu.tolist(), curve.errors.tolist(), curve.stderr.tolist()))
    extra = {"estimates": [fmt(float(v)) for v in est.estimates]}
    if dev is not None:
        extra["deviation_from_closed_form"] = fmt(dev)
    extra.update(stderr_summary(curve))
    return extra


COMMANDS = {
    "mse": cmd_mse,
    "mse2d": cmd_mse2d,
    "single-shot": cmd_single_shot,
    "prior-scan": cmd_prior_scan,
    "qcrb": cmd_qcrb,
    "zzb": cmd_zzb,
    "wwb": cmd_wwb,
    "mu-tau": cmd_mu_tau,
    "network-asym": cmd_network_asym,
    "imaging-scaling": cmd_imaging_scaling,
    "loss-demo": cmd_loss_demo,
    "time-demo": cmd_time_demo,
}


def _add_probe_args(p, default_probe=None):
    p.add_argument("--probe", default=default_probe,
                   choices=sorted(OPTICAL | {"qubit_gamma", "imaging_global", "imaging_local"}))
    p.add_argument("--nbar", type=float, default=2.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--n-local", type=int, default=None)
    p.add_argument("--cutoff", type=int, default=None,
                   help="override the per-mode Fock cutoff (experts only)")


def _add_mc_args(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mu-max", type=int, default=10)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--outer", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="bayesmet", description=__doc__)
    top.add_argument("--config", default=None, help="flat key=value config file")
    sub = top.add_subparsers(dest="command", required=True)

    for name in ("mse", "mu-tau"):
        p = sub.add_parser(name)
        _add_probe_args(p)
        _add_mc_args(p)
        p.add_argument("--pom", default="counting_even", choices=POMS_1D)
        p.add_argument("--width", default="pi/2")
        p.add_argument("--mean", default="0")
        p.add_argument("--out", default=name.replace("-", "_"))
        if name == "mu-tau":
            p.add_argument("--eps-tau", type=float, default=0.05)

    p = sub.add_parser("mse2d")
    _add_probe_args(p, default_probe="qubit_gamma")
    _add_mc_args(p)
    p.add_argument("--pom", default="qubit_local", choices=("qubit_local", "optimal"))
    p.add_argument("--width", default="pi/2")
    p.add_argument("--mean", default="pi/4")
    p.add_argument("--functions", default=None,
                   help="columns of V: 'a,b;c,d' (f1=(a,b), f2=(c,d))")
    p.add_argument("--normalize-functions", action="store_true")
    p.add_argument("--weights", default=None, help="diagonal of Wf: 'w1,w2'")
    p.add_argument("--out", default="mse2d")

    p = sub.add_parser("single-shot")
    _add_probe_args(p)
    p.add_argument("--width", default="pi/2")
    p.add_argument("--mean", default="0")
    p.add_argument("--weights", default=None)
    p.add_argument("--projectors-csv", default=None)
    p.add_argument("--out", default="single_shot")

    p = sub.add_parser("prior-scan")
    _add_probe_args(p)
    p.add_argument("--pom", default="counting_even",
                   choices=POMS_1D + ("qubit_local",))
    p.add_argument("--width", default="2*pi")
    p.add_argument("--mean", default="pi")
    p.add_argument("--theta-true", default="pi/2")
    p.add_argument("--mu-list", default="1,2,10,100")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="prior_scan")

    for name in ("qcrb", "zzb", "wwb"):
        p = sub.add_parser(name)
        _add_probe_args(p)
        p.add_argument("--mu-max", type=int, default=100)
        p.add_argument("--grid", type=int, default=None)
        if name != "qcrb":
            p.add_argument("--width", default="pi/2")
        p.add_argument("--out", default=name)

    p = sub.add_parser("network-asym")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--geometry", default="0")
    p.add_argument("--geometry-range", default=None, help="lo:hi:num sweep")
    p.add_argument("--mu", type=int, default=1)
    p.add_argument("--out", default="network_asym")

    p = sub.add_parser("imaging-scaling")
    p.add_argument("--nbar", type=float, default=4)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--n-max", type=int, default=20)
    p.add_argument("--out", default="imaging_scaling")

    p = sub.add_parser("loss-demo")
    _add_mc_args(p)
    p.add_argument("--eta", type=float, default=0.9)
    p.add_argument("--width", default="pi/2")
    p.add_argument("--mean", default="pi/4")
    p.add_argument("--out", default="loss_demo")

    p = sub.add_parser("time-demo")
    _add_mc_args(p)
    p.add_argument("--width", default="pi/2")
    p.add_argument("--out", default="time_demo")

    return top


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            overrides = load_config_file(args.config)
        except (OSError, ConfigError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        # config file fills fields the flags left at their defaults; flags win
        defaults = parser.parse_args([args.command])
        for key, val in overrides.items():
            if not hasattr(args, key):
                print(f"config error: unknown key {key!r}", file=sys.stderr)
                return 2
            if getattr(args, key) == getattr(defaults, key, None):
                setattr(args, key, _coerce(val, getattr(defaults, key)))
    start = time.perf_counter()
    try:
        extra = COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    config_echo = {k: v for k, v in sorted(vars(args).items())
                   if k not in ("config",) and v is not None}
    write_manifest(args.out + ".manifest.json", config_echo, extra,
                   time.perf_counter() - start)
    return 0


if __name__ == "__main__":
    sys.exit(main())
