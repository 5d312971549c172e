"""Command line entry point: ``condensation {check,exact,simulate,sweep}``.

Every subcommand writes its results to files and prints one summary line.
Settings come from flags, then an optional ``--config`` file of flat
``key=value`` lines (same keys as the long flags), then defaults.

Exit codes: 0 success, 2 configuration error, 3 size guard, 4 numerical
certification failure.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from itertools import product

from .combinatorics import count_ordered, count_sigma, ENUMERATION_LIMIT
from .ensemble import (
    SWEEP_COLUMNS,
    convergence_sweep,
    fmt_value,
    ordered_cut_canonical,
    write_sweep_csv,
)
from .errors import DivergenceError, SizeGuardError, TailCertificationError
from .weights import parse_family
from .zrp import JumpKernel, condensate_trajectory, estimate_stationary, pool_estimates

EXIT_CONFIG, EXIT_SIZE, EXIT_NUMERIC = 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    families: list = field(default_factory=list)
    m: list = field(default_factory=lambda: [2])
    n: list = field(default_factory=list)
    cap: int | None = None
    nmax: int = 100_000
    t_total: float = 1e5
    t_burn: float | None = None
    seed: int = 0
    replicas: int = 1
    kernel: str = "ring"
    init: str = "condensed"
    stride: int = 1000
    batches: int = 32
    mode: str = "log"
    out: str | None = None
    pmf_out: str | None = None
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)

    @property
    def family(self):
        return self.families[0]

    def validate(self):
        """Fail fast on anything the target operation would reject."""
        if not self.families:
            raise ConfigError("--family is required")
        parsed = []
        for spec in self.families:
            try:
                parsed.append(parse_family(spec))
            except (ValueError, OSError) as exc:
                raise ConfigError(f"bad family {spec!r}: {exc}") from exc
        if self.command != "sweep" and len(self.families) > 1:
            raise ConfigError(f"{self.command} takes a single --family")
        if any(m < 1 for m in self.m):
            raise ConfigError("m must be >= 1")
        if self.command in ("exact", "simulate", "sweep"):
            if any(m < 2 for m in self.m):
                raise ConfigError(f"{self.command} needs m >= 2")
            if not self.n:
                raise ConfigError("--n is required")
            if any(n < 0 for n in self.n):
                raise ConfigError("particle numbers must be >= 0")
        if self.command in ("exact", "sweep"):
            if any(b <= a for a, b in zip(self.n, self.n[1:])):
                raise ConfigError("--n must be strictly increasing")
        if self.command == "check" and self.nmax < max(self.m):
            raise ConfigError("--nmax must be >= m")
        if self.cap is not None and self.cap < 0:
            raise ConfigError("--cap must be >= 0")
        if self.mode not in ("log", "exact-rational"):
            raise ConfigError("--mode must be log or exact-rational")
        if self.command == "simulate":
            if len(self.n) != 1 or len(self.m) != 1:
                raise ConfigError("simulate takes a single m and a single n")
            if not self.t_total > 0:
                raise ConfigError("--t-total must be positive")
            if self.t_burn is not None and not 0 <= self.t_burn < self.t_total:
                raise ConfigError("--t-burn must lie in [0, t_total)")
            if self.kernel not in ("ring", "complete"):
                raise ConfigError("--kernel must be ring or complete")
            if self.init not in ("condensed", "uniform"):
                raise ConfigError("--init must be condensed or uniform")
            if self.replicas < 1 or self.stride < 1 or self.batches < 2:
                raise ConfigError("need replicas >= 1, stride >= 1, batches >= 2")
        if self.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return parsed


_INT_LIST = ("m", "n")
_CASTS = {
    "cap": int,
    "nmax": int,
    "t_total": float,
    "t_burn": float,
    "seed": int,
    "replicas": int,
    "stride": int,
    "batches": int,
    "threads": int,
}


def _int_list(text):
    try:
        return [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def read_config_file(path):
    """Parse flat ``key=value`` lines; ``family`` may repeat."""
    out = {}
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key == "family":
            out.setdefault("families", []).append(value)
        else:
            out[key] = value
    return out


def build_config(command, args):
    known = {f.name for f in fields(ExperimentConfig)}
    settings = {}
    if args.config:
        for key, value in read_config_file(args.config).items():
            if key not in known or key == "command":
                raise ConfigError(f"unknown config key {key!r}")
            settings[key] = value
    for key in known - {"command"}:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    try:
        for key in _INT_LIST:
            if key in settings and not isinstance(settings[key], list):
                settings[key] = _int_list(settings[key])
        for key, cast in _CASTS.items():
            if key in settings and settings[key] is not None:
                settings[key] = cast(settings[key])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(command=command, **settings)


# -- subcommands -------------------------------------------------------------


def cmd_check(cfg):
    (w,) = cfg.validate()
    out = cfg.out or "check_report.txt"
    reports = [w.check_hypotheses(m, cfg.nmax) for m in cfg.m]
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(r.to_text() for r in reports))
    parts = [
        f"m={r.m} C1={r.c1_candidate:.6g} monotone={str(r.monotone).lower()}" for r in reports
    ]
    print(f"check {w.spec()}: " + "; ".join(parts) + f" -> {out}")


def _guard_exact(w, m, n_list, cap):
    if cap is not None and cap > max(n_list):
        raise SizeGuardError(f"cap={cap} exceeds the largest particle number {max(n_list)}")
    eff = cap if cap is not None else max(n_list)
    size = count_ordered(m - 1, min(eff, max(n_list)))
    if size > ENUMERATION_LIMIT:
        raise SizeGuardError(f"{size} ordered configurations exceed {ENUMERATION_LIMIT}")


def cmd_exact(cfg):
    (w,) = cfg.validate()
    if len(cfg.m) != 1:
        raise ConfigError("exact takes a single m")
    m = cfg.m[0]
    _guard_exact(w, m, cfg.n, cfg.cap)
    mode = "exact" if cfg.mode == "exact-rational" else "log"
    rows = convergence_sweep(w, m, cfg.n, cap=cfg.cap, threads=cfg.threads, mode=mode)
    out = cfg.out or "exact.csv"
    write_sweep_csv(rows, out)
    if cfg.pmf_out:
        nu_hat = _cut_law(w, m, cfg.n[-1])
        _write_pmf_csv(cfg.pmf_out, nu_hat.support, nu_hat.prob, None, None)
    last = rows[-1]
    print(f"exact {w.spec()} m={m}: n={last.n} tv={last.tv:.6g} -> {out}")


def _cut_law(w, m, n):
    import warnings

    from .ensemble import CapWarning

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CapWarning)
        return ordered_cut_canonical(w, m, n)


def _write_pmf_csv(path, support, prob, mc_err, exact):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["eta", "prob"]
        if mc_err is not None:
            header += ["mc_err", "exact"]
        writer.writerow(header)
        for i, eta in enumerate(support):
            row = [" ".join(map(str, eta)), fmt_value(float(prob[i]))]
            if mc_err is not None:
                row += [fmt_value(float(mc_err[i])), fmt_value(float(exact[i]))]
            writer.writerow(row)


STATIONARY_COLUMNS = SWEEP_COLUMNS + (
    "tv_mc_err",
    "background_density_mc_err",
    "max_site_fraction_mc_err",
)


def cmd_simulate(cfg):
    (w,) = cfg.validate()
    m, n = cfg.m[0], cfg.n[0]
    states = count_sigma(m, n)
    if states > 2_000_000:
        raise SizeGuardError(f"{states} configurations are too many to histogram")
    kernel = JumpKernel.named(cfg.kernel, m)

    def run(replica):
        return estimate_stationary(
            w, kernel, n, cfg.t_total, cfg.t_burn, seed=cfg.seed, replica=replica,
            n_batches=cfg.batches, init=cfg.init,
        )

    with ThreadPoolExecutor(max_workers=min(cfg.threads, cfg.replicas)) as pool:
        est = pool_estimates(list(pool.map(run, range(cfg.replicas))))
    exact = _cut_law(w, m, n)
    tv, tv_err = est.tv_to(exact)
    background, background_se = est.background_density()
    frac, frac_se = est.max_site_fraction()
    prefix = cfg.out or "zrp"
    with open(f"{prefix}_stationary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STATIONARY_COLUMNS)
        writer.writerow(
            [n] + [fmt_value(v) for v in (tv, 0.0, background, 0.0, frac, tv_err, background_se, frac_se)]
        )
    support, mean, se = est.ordered_cut()
    _write_pmf_csv(f"{prefix}_pmf.csv", support, mean, se, exact.prob)

    traj = condensate_trajectory(w, kernel, n, cfg.t_total, seed=cfg.seed, stride=cfg.stride, init=cfg.init)
    with open(f"{prefix}_trajectory.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "max_occ", "argmax_site"] + [f"occ_{i + 1}" for i in range(m)])
        for t, mx, arg, occ in zip(traj.times, traj.max_occ, traj.argmax_site, traj.occupancies):
            writer.writerow([fmt_value(float(t)), int(mx), int(arg), *map(int, occ)])
    print(
        f"simulate {w.spec()} m={m} n={n}: events={est.events} tv={tv:.4g} "
        f"(mc_err {tv_err:.2g}) -> {prefix}_stationary.csv, {prefix}_trajectory.csv"
    )


def cmd_sweep(cfg):
    families = cfg.validate()
    for w, m in product(families, cfg.m):
        _guard_exact(w, m, cfg.n, cfg.cap)

    def run(job):
        w, m = job
        return w, m, convergence_sweep(w, m, cfg.n, cap=cfg.cap)

    jobs = list(product(families, cfg.m))
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        results = list(pool.map(run, jobs))
    out = cfg.out or "sweep.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("family", "m") + SWEEP_COLUMNS)
        for w, m, rows in results:
            for row in rows:
                writer.writerow([w.spec(), m] + [fmt_value(getattr(row, c)) for c in SWEEP_COLUMNS])
    print(f"sweep: {len(jobs)} (family, m) pairs x {len(cfg.n)} n values -> {out}")


COMMANDS = {"check": cmd_check, "exact": cmd_exact, "simulate": cmd_simulate, "sweep": cmd_sweep}


def _parser():
    parser = argparse.ArgumentParser(prog="condensation", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value file; flags take precedence")
        p.add_argument("--family", dest="families", action="append",
                       help="powerlaw:alpha=A | geompoly:b=B,alpha=A | table:path=FILE")
        p.add_argument("--m", help="number of sites (comma list for sweep)")
        p.add_argument("--out", help="output path (prefix for simulate)")
        p.add_argument("--threads", type=int)

    p = sub.add_parser("check", help="scan the weight hypotheses")
    common(p)
    p.add_argument("--nmax", type=int)

    p = sub.add_parser("exact", help="exact convergence sweep over n")
    common(p)
    p.add_argument("--n", help="comma-separated increasing particle numbers")
    p.add_argument("--cap", type=int)
    p.add_argument("--mode", choices=["log", "exact-rational"])
    p.add_argument("--pmf-out", help="also write the cut canonical law at the last n")

    p = sub.add_parser("simulate", help="zero-range process stationary estimate and trajectory")
    common(p)
    p.add_argument("--n")
    p.add_argument("--t-total", type=float)
    p.add_argument("--t-burn", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--kernel", choices=["ring", "complete"])
    p.add_argument("--init", choices=["condensed", "uniform"])
    p.add_argument("--stride", type=int)
    p.add_argument("--batches", type=int)

    p = sub.add_parser("sweep", help="exact sweeps over families x m x n")
    common(p)
    p.add_argument("--n")
    p.add_argument("--cap", type=int)
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = build_config(args.command, args)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SizeGuardError as exc:
        print(f"size guard: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (TailCertificationError, DivergenceError) as exc:
        print(f"numerical certification failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
