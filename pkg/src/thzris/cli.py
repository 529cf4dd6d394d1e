"""Command-line driver: single evaluations, sweeps and closed-form vs MC checks.

Scenarios are INI files read with :mod:`configparser`.  Every key is
optional; omitted keys take the reference-scenario defaults listed in
``DEFAULTS``.  Units are SI unless the key name says otherwise.

Sections and keys
-----------------
[scenario]      N, L, gamma_th | p, convention
[environment]   f, temperature, pressure, relative_humidity, Cn2,
                absorption (constant | table | simplified), kappa,
                absorption_table (CSV of ``f_hz,kappa_per_m``, relative
                to the config file)
[link]          P_s_dbw, bandwidth, G_s_dbi, G_d_dbi, R,
                receiver_chain (``gain_db:nf_db`` stages in signal order)
[impairments]   kappa_t, kappa_r
[hops]          d, b, w_d, sigma_jitter  (one value for all hops or a
                comma-separated list of N values)
[sweep]         one line per axis, ``axis = v1, v2, ...`` or
                ``axis = start:stop:steps`` (linearly spaced)
[mc]            samples, seed, workers

Sweep axes are ``d_1`` .. ``d_N``, ``sigma_jitter`` (shared by the L
misaligned hops), ``kappa_t``, ``kappa_r`` and ``gamma_ratio`` (the
ratio gamma_s / gamma_th in dB, reached by adjusting the transmit power).
The first axis varies slowest.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import itertools
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .channel import (
    AbsorptionModel,
    AbsorptionRangeError,
    Environment,
    HopSpec,
    Impairments,
    LinkBudget,
    Stage,
    absorption_coeff,
    db_to_lin,
    threshold_from_se,
    transmission_snr,
)
from .closedform import CONVENTIONS, DEFAULT_CONVENTION, ChainSpec, build_chain, outage_probability
from .montecarlo import McConfig, estimate_op
from .specfun import SpecialFunctionError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_VALIDATION = 3

CSV_COLUMNS = ("op_closed", "op_closed_err", "op_mc", "op_mc_stderr", "method_flags")

DEFAULTS = {
    "scenario": {"N": "2", "L": "0", "convention": DEFAULT_CONVENTION},
    "environment": {
        "f": "300e9",
        "temperature": "273",
        "pressure": "101325",
        "relative_humidity": "0.5",
        "Cn2": "1e-9",
        "absorption": "constant",
        "kappa": "0",
        "absorption_table": "",
    },
    "link": {
        "P_s_dbw": "0",
        "bandwidth": "50e9",
        "G_s_dbi": "50",
        "G_d_dbi": "50",
        "R": "1",
        "receiver_chain": "35:1, -5:6, -3:3",
    },
    "impairments": {"kappa_t": "0", "kappa_r": "0"},
    "hops": {"d": "100", "b": "0.05", "w_d": "0.1", "sigma_jitter": "0.04"},
    "mc": {"samples": "1000000", "seed": "1", "workers": "1"},
}
DEFAULT_SE = 2.0

_FIXED_AXES = ("sigma_jitter", "kappa_t", "kappa_r", "gamma_ratio")
_HOP_AXIS = re.compile(r"d_([1-9][0-9]*)$")


class ConfigError(ValueError):
    """Malformed or inconsistent scenario file."""


@dataclass(frozen=True)
class ScenarioConfig:
    env: Environment = field(default_factory=Environment)
    lb: LinkBudget = field(default_factory=LinkBudget)
    imp: Impairments = field(default_factory=Impairments)
    hops: tuple[HopSpec, ...] = ()
    L: int = 0
    gamma_th: float = 3.0
    convention: str = DEFAULT_CONVENTION
    sweep: tuple[tuple[str, tuple[float, ...]], ...] = ()
    mc: McConfig = field(default_factory=McConfig)

    @property
    def N(self) -> int:
        return len(self.hops)


# ---------------------------------------------------------------------------
# config loading
# ---------------------------------------------------------------------------


def _floats(text: str, key: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{key}: expected numbers, got {text!r}") from None


def _per_hop(text: str, key: str, n: int) -> list[float]:
    vals = _floats(text, key)
    if len(vals) == 1:
        return vals * n
    if len(vals) != n:
        raise ConfigError(f"{key}: need 1 or N={n} values, got {len(vals)}")
    return vals


def _axis_values(text: str, key: str) -> tuple[float, ...]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"sweep {key}: range must read start:stop:steps")
        start, stop = _floats(parts[0], key)[0], _floats(parts[1], key)[0]
        try:
            steps = int(parts[2])
        except ValueError:
            raise ConfigError(f"sweep {key}: step count must be an integer") from None
        if steps < 1:
            raise ConfigError(f"sweep {key}: step count must be at least 1")
        # 12 significant digits hide linspace round-off such as 0.049999999999999996
        return tuple(float(f"{v:.12g}") for v in np.linspace(start, stop, steps))
    vals = _floats(text, key)
    if not vals:
        raise ConfigError(f"sweep {key}: no values")
    return tuple(vals)


def _stages(text: str) -> tuple[Stage, ...]:
    stages = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            g, nf = item.split(":")
            stages.append(Stage(float(g), float(nf)))
        except ValueError as exc:
            raise ConfigError(f"receiver_chain: bad stage {item!r} ({exc})") from None
    if not stages:
        raise ConfigError("receiver_chain: at least one stage required")
    return tuple(stages)


def _read_table(path: Path) -> tuple[tuple[float, float], ...]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"absorption_table: cannot read {path} ({exc})") from None
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or row[0].strip().startswith("#"):
            continue
        try:
            rows.append((float(row[0]), float(row[1])))
        except (ValueError, IndexError):
            if lineno == 1:
                continue  # header
            raise ConfigError(f"absorption_table {path}:{lineno}: expected f_hz,kappa") from None
    return tuple(rows)


def parse_config(text: str, base_dir: Path | None = None) -> ScenarioConfig:
    """Parse scenario text; see the module docstring for the schema."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}: no [section] header before {exc.line.strip()!r}") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        line = line.replace("\\n", "")  # configparser stores repr(line)
        raise ConfigError(f"parse error at line {lineno}: {line}") from None
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc.message}") from None
    for section in parser.sections():
        if section not in DEFAULTS and section != "sweep":
            raise ConfigError(f"unknown section [{section}]")
        if section == "sweep":
            continue
        known = set(DEFAULTS[section]) | ({"gamma_th", "p"} if section == "scenario" else set())
        for key in parser[section]:
            if key not in known:
                raise ConfigError(f"[{section}] unknown key {key!r}")

    def get(section: str, key: str) -> str:
        if parser.has_option(section, key):
            return parser[section][key].strip()
        return DEFAULTS[section][key]

    try:
        N = int(get("scenario", "N"))
        L = int(get("scenario", "L"))
    except ValueError:
        raise ConfigError("N and L must be integers") from None
    if N < 1:
        raise ConfigError(f"N must be at least 1, got {N}")
    if not 0 <= L <= N:
        raise ConfigError(f"L must satisfy 0 <= L <= N, got L={L}, N={N}")
    convention = get("scenario", "convention")
    if convention not in CONVENTIONS:
        raise ConfigError(f"convention must be one of {sorted(CONVENTIONS)}, got {convention!r}")

    has_g = parser.has_option("scenario", "gamma_th")
    has_p = parser.has_option("scenario", "p")
    if has_g and has_p:
        raise ConfigError("give exactly one of gamma_th and p")
    if has_g:
        gamma_th = _floats(parser["scenario"]["gamma_th"], "gamma_th")[0]
    else:
        p = _floats(parser["scenario"]["p"], "p")[0] if has_p else DEFAULT_SE
        if not p > 0:
            raise ConfigError(f"p must be positive, got {p}")
        gamma_th = threshold_from_se(p)
    if not gamma_th > 0:
        raise ConfigError(f"gamma_th must be positive, got {gamma_th}")

    try:
        mode = get("environment", "absorption")
        table = ()
        if mode == "table":
            tpath = get("environment", "absorption_table")
            if not tpath:
                raise ConfigError("absorption = table needs absorption_table")
            tpath = Path(tpath)
            if base_dir is not None and not tpath.is_absolute():
                tpath = base_dir / tpath
            table = _read_table(tpath)
        env = Environment(
            f=_floats(get("environment", "f"), "f")[0],
            temperature=_floats(get("environment", "temperature"), "temperature")[0],
            pressure=_floats(get("environment", "pressure"), "pressure")[0],
            relative_humidity=_floats(get("environment", "relative_humidity"), "relative_humidity")[0],
            Cn2=_floats(get("environment", "Cn2"), "Cn2")[0],
            absorption=AbsorptionModel(mode, _floats(get("environment", "kappa"), "kappa")[0], table),
        )
        absorption_coeff(env)

        lb = LinkBudget(
            P_s=db_to_lin(_floats(get("link", "P_s_dbw"), "P_s_dbw")[0]),
            bandwidth=_floats(get("link", "bandwidth"), "bandwidth")[0],
            G_s=db_to_lin(_floats(get("link", "G_s_dbi"), "G_s_dbi")[0]),
            G_d=db_to_lin(_floats(get("link", "G_d_dbi"), "G_d_dbi")[0]),
            R=tuple(_per_hop(get("link", "R"), "R", max(N - 2, 1))),
            receiver_chain=_stages(get("link", "receiver_chain")),
        )
        imp = Impairments(
            _floats(get("impairments", "kappa_t"), "kappa_t")[0],
            _floats(get("impairments", "kappa_r"), "kappa_r")[0],
        )

        d = _per_hop(get("hops", "d"), "d", N)
        b = _per_hop(get("hops", "b"), "b", N)
        w_d = _per_hop(get("hops", "w_d"), "w_d", N)
        sig = _per_hop(get("hops", "sigma_jitter"), "sigma_jitter", N)
        amp = lb.amp_gain_factors(N)
        hops = tuple(
            HopSpec(d[i], b=b[i], w_d=w_d[i], sigma_jitter=sig[i], amp_gain_factor=amp[i],
                    has_misalignment=i < L)
            for i in range(N)
        )

        mc = McConfig(
            samples=int(float(get("mc", "samples"))),
            seed=int(get("mc", "seed")),
            workers=int(get("mc", "workers")),
        )
    except (ValueError, AbsorptionRangeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid scenario: {exc}") from None

    sweep = []
    if parser.has_section("sweep"):
        for key in parser["sweep"]:
            m = _HOP_AXIS.match(key)
            if key not in _FIXED_AXES and not (m and 1 <= int(m.group(1)) <= N):
                raise ConfigError(
                    f"sweep axis {key!r} not in d_1..d_{N}, sigma_jitter, kappa_t, kappa_r, gamma_ratio")
            sweep.append((key, _axis_values(parser["sweep"][key], key)))

    cfg = ScenarioConfig(env, lb, imp, hops, L, gamma_th, convention, tuple(sweep), mc)
    # every grid point must describe a valid chain
    for point in grid_points(cfg):
        try:
            apply_point(cfg, point)
        except ValueError as exc:
            raise ConfigError(f"sweep point {dict(point)}: {exc}") from None
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    """Read and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, path.parent)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def grid_points(cfg: ScenarioConfig) -> list[tuple[tuple[str, float], ...]]:
    """Sweep grid in lexicographic order; one empty point without a sweep."""
    names = [name for name, _ in cfg.sweep]
    return [tuple(zip(names, combo)) for combo in itertools.product(*(v for _, v in cfg.sweep))]


def apply_point(cfg: ScenarioConfig, point: Sequence[tuple[str, float]]) -> ChainSpec:
    """Chain for one grid point."""
    hops = list(cfg.hops)
    imp = cfg.imp
    ratio_db = None
    for name, value in point:
        m = _HOP_AXIS.match(name)
        if m:
            i = int(m.group(1)) - 1
            hops[i] = replace(hops[i], d=value)
        elif name == "sigma_jitter":
            hops = [replace(h, sigma_jitter=value) if h.has_misalignment else h for h in hops]
        elif name == "kappa_t":
            imp = replace(imp, kappa_t=value)
        elif name == "kappa_r":
            imp = replace(imp, kappa_r=value)
        elif name == "gamma_ratio":
            ratio_db = value
    chain = build_chain(hops, cfg.env, cfg.lb, imp, cfg.gamma_th, cfg.convention)
    if ratio_db is not None:
        # transmit power giving gamma_s = ratio * gamma_th
        P_s = db_to_lin(ratio_db) * cfg.gamma_th / transmission_snr(1.0, chain.N_o, chain.gains)
        chain = chain.replace(P_s=P_s)
    return chain


@dataclass(frozen=True)
class PointResult:
    point: tuple[tuple[str, float], ...]
    op_closed: float = math.nan
    op_closed_err: float = math.nan
    op_mc: float = math.nan
    op_mc_stderr: float = math.nan
    flags: tuple[str, ...] = ()

    @property
    def failed(self) -> bool:
        return "closed-error" in self.flags

    def agrees(self, samples: int) -> bool:
        """``|closed - mc| <= 3 stderr``; a zero stderr is floored at 1/samples."""
        if math.isnan(self.op_closed) or math.isnan(self.op_mc):
            return False
        tol = 3.0 * max(self.op_mc_stderr, 1.0 / samples)
        return abs(self.op_closed - self.op_mc) <= tol


def evaluate_point(cfg: ScenarioConfig, point, mode: str) -> PointResult:
    chain = apply_point(cfg, point)
    out = {}
    flags = []
    if mode in ("closed", "both"):
        try:
            r = outage_probability(chain)
            out.update(op_closed=r.p_out, op_closed_err=r.err)
            flags.append("closed")
            if r.saturated:
                flags.append("saturated")
        except (ArithmeticError, SpecialFunctionError) as exc:
            flags.append("closed-error")
            flags.append(type(exc).__name__)
    if mode in ("mc", "both"):
        est = estimate_op(chain, replace(cfg.mc, workers=1))
        out.update(op_mc=est.p_hat, op_mc_stderr=est.stderr)
        flags.append("mc")
    return PointResult(tuple(point), flags=tuple(flags), **out)


def _evaluate_job(args) -> PointResult:
    return evaluate_point(*args)


def run_sweep(cfg: ScenarioConfig, mode: str = "closed", workers: int | None = None) -> list[PointResult]:
    """Evaluate every grid point, returned in grid order.

    All points share the MC seed, so neighbouring points use common random
    numbers.  Output does not depend on ``workers``.
    """
    if mode not in ("closed", "mc", "both"):
        raise ValueError(f"mode must be closed, mc or both, got {mode!r}")
    workers = cfg.mc.workers if workers is None else workers
    jobs = [(cfg, point, mode) for point in grid_points(cfg)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_evaluate_job, jobs))
    return [_evaluate_job(j) for j in jobs]


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def format_csv(cfg: ScenarioConfig, results: Sequence[PointResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([name for name, _ in cfg.sweep] + list(CSV_COLUMNS))
    for r in results:
        w.writerow([_fmt(v) for _, v in r.point]
                   + [_fmt(r.op_closed), _fmt(r.op_closed_err), _fmt(r.op_mc), _fmt(r.op_mc_stderr),
                      ";".join(r.flags)])
    return buf.getvalue()


def absorption_table(env: Environment, f_min: float, f_max: float, steps: int) -> list[tuple[float, float]]:
    return [(float(f), absorption_coeff(replace(env, f=float(f))))
            for f in np.linspace(f_min, f_max, steps)]


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="thzris", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, sweep=True):
        p.add_argument("--config", help="scenario INI file (defaults apply when omitted)")
        p.add_argument("--out", help="CSV output path (stdout when omitted)")
        if sweep:
            p.add_argument("--mode", choices=("closed", "mc", "both"), default="closed")
            p.add_argument("--samples", type=int, help="MC sample count")
            p.add_argument("--seed", type=int, help="MC seed")
            p.add_argument("--workers", type=int, help="parallel worker processes")

    common(sub.add_parser("compute", help="outage probability of a single scenario"))
    common(sub.add_parser("sweep", help="outage probability over the sweep grid"))
    v = sub.add_parser("validate", help="closed form vs Monte Carlo on the sweep grid")
    common(v)
    v.set_defaults(mode="both")
    a = sub.add_parser("absorption", help="absorption coefficient over a frequency band")
    common(a, sweep=False)
    a.add_argument("--f-min", type=float, default=275e9)
    a.add_argument("--f-max", type=float, default=400e9)
    a.add_argument("--steps", type=int, default=26)
    return ap


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = load_config(args.config) if args.config else parse_config("")
        if args.command != "absorption":
            mc = cfg.mc
            try:
                if args.samples is not None:
                    mc = replace(mc, samples=args.samples)
                if args.seed is not None:
                    mc = replace(mc, seed=args.seed)
                if args.workers is not None:
                    mc = replace(mc, workers=args.workers)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            cfg = replace(cfg, mc=mc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "absorption":
        try:
            rows = absorption_table(cfg.env, args.f_min, args.f_max, args.steps)
        except (ValueError, AbsorptionRangeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["f_hz", "kappa_per_m"])
        w.writerows([[_fmt(f), _fmt(k)] for f, k in rows])
        _write(buf.getvalue(), args.out)
        return EXIT_OK

    if args.command == "compute":
        cfg = replace(cfg, sweep=())
    mode = "both" if args.command == "validate" else args.mode
    results = run_sweep(cfg, mode)
    _write(format_csv(cfg, results), args.out)
    if any(r.failed for r in results):
        print("numeric failure at one or more points (see method_flags)", file=sys.stderr)
        return EXIT_NUMERIC
    if args.command == "validate":
        bad = [r for r in results if not r.agrees(cfg.mc.samples)]
        for r in bad:
            print(f"mismatch at {dict(r.point)}: closed={r.op_closed:.6g} "
                  f"mc={r.op_mc:.6g} stderr={r.op_mc_stderr:.3g}", file=sys.stderr)
        return EXIT_VALIDATION if bad else EXIT_OK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
