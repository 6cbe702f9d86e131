"""Command-line front end.

Every run writes ``<out>/<command>.csv`` (data) and ``<out>/<command>.json``
(one flat summary object).  Exit status: 0 success, 2 suite failure, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import coupling, harris, memoryloss, renewal, tails
from .config import build_model, envelope, load_config, parse_floats, parse_grid, parse_int
from .errors import ConfigError, DivergentNormWarning, RenewalMemlossError
from .renewal import format_float

COMMANDS = ("tails-check", "renewal", "tv-curve", "verify", "couple", "harris")
#: n grid for ``couple`` when none is given
COUPLE_GRID = "2^4..2^10"
SUITE_NAMES = {s.lower(): s for s in memoryloss.SUITES}

# option name -> (type, default); every option is also a config-file key
OPTIONS = {
    "model": (str, None),
    "alpha": (str, None),
    "c": (str, None),
    "q": (str, None),
    "p": (str, None),
    "lfamily": (str, None),
    "gamma": (str, None),
    "a": (str, None),
    "rv_alpha": (str, None),
    "rv_lfamily": (str, None),
    "rv_gamma": (str, None),
    "rv_c": (str, None),
    "n": (str, None),
    "ell": (str, None),
    "suite": (str, None),
    "method": (str, "auto"),
    "ceiling": (float, None),
    "tol_dfr": (float, tails.TOL_DFR),
    "oracle": (bool, False),
    "trials": (int, 100_000),
    "seed": (int, 0),
    "horizon": (int, None),
    "A": (int, None),
    "example": (str, None),
    "edges": (str, None),
    "small_set": (str, None),
    "epsilon": (float, None),
    "beta": (str, None),
    "mu": (int, 0),
    "mu_prime": (int, 1),
    "g_power": (float, None),
    "out": (str, "."),
    "threads": (int, None),
}


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def get(self, key):
        return self.values.get(key, OPTIONS[key][1])

    def require(self, key):
        v = self.get(key)
        if v is None:
            raise ConfigError(f"{self.command} needs --{key.replace('_', '-')}", field=key)
        return v

    @property
    def threads(self):
        t = self.get("threads")
        if t is None:
            env = os.environ.get("RENEWAL_MEMLOSS_THREADS")
            t = int(env) if env and env.isdigit() else 1
        return max(1, int(t))


def _coerce(key, raw, line=None):
    kind = OPTIONS[key][0]
    try:
        if kind is bool:
            if isinstance(raw, bool):
                return raw
            low = str(raw).lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return low in ("true", "1", "yes")
        if kind is int:
            return parse_int(raw, key)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r}", line=line, field=key) from None


def build_parser():
    ap = argparse.ArgumentParser(prog="renewal-memloss", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="key = value file; command-line flags take precedence")
    for key, (kind, _default) in OPTIONS.items():
        flag = "--" + key.replace("_", "-")
        if kind is bool:
            ap.add_argument(flag, dest=key, action="store_const", const=True, default=argparse.SUPPRESS)
        else:
            ap.add_argument(flag, dest=key, default=argparse.SUPPRESS)
    return ap


def parse_args(argv):
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    cfg_path = ns.pop("config", None)
    values = {}
    if cfg_path:
        for key, (raw, line) in load_config(cfg_path).items():
            if key == "command":
                continue
            if key not in OPTIONS:
                raise ConfigError(f"unknown key in {cfg_path}", line=line, field=key)
            values[key] = _coerce(key, raw, line)
    for key, raw in ns.items():
        values[key] = _coerce(key, raw)
    return RunConfig(command, values)


# -- output helpers -----------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return format_float(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(v):
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def _write_json(path, summary):
    with open(path, "w") as fh:
        json.dump({k: _jsonable(v) for k, v in summary.items()}, fh, sort_keys=True)
        fh.write("\n")


def _paths(cfg):
    out = cfg.get("out")
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, cfg.command + ".csv"), os.path.join(out, cfg.command + ".json")


def _model(cfg):
    spec = {k: cfg.get(k) for k in OPTIONS if OPTIONS[k][0] is str}
    if spec.get("model") is None:
        raise ConfigError("--model is required", field="model")
    model = build_model(spec)
    return model, envelope(spec, model), spec


def _grid(cfg, key):
    return parse_grid(cfg.require(key), key)


def _pairs(cfg):
    return [(n, ell) for n in _grid(cfg, "n") for ell in _grid(cfg, "ell")]


# -- commands -------------------------------------------------------------------


def cmd_tails_check(cfg):
    model, f, _ = _model(cfg)
    n_max = max(_grid(cfg, "n"))
    if model.cutoff is not None:
        n_max = min(n_max, model.cutoff)
    p = model.p_array(n_max)
    z = model.z_array(n_max)
    q = model.hazard_array(n_max)
    rows = [(n, p[n], z[n], q[n - 1] if n >= 1 else None) for n in range(n_max + 1)]
    dfr_ok, dfr_first = (True, None) if n_max < 2 else tails.check_dfr(model, n_max, cfg.get("tol_dfr"))
    summary = {
        "command": cfg.command,
        "model": repr(model),
        "n_max": n_max,
        "mass_defect": abs(math.fsum(np.append(p[1:], [z[n_max], -1.0]))),
        "dfr": dfr_ok,
        "dfr_first_violation": dfr_first,
        "aperiodic": tails.check_aperiodic(model, 1e-300, n_max) if n_max >= 1 else None,
    }
    if f is not None and f.alpha > 0:
        pr = memoryloss.check_p_reg(model, f, 1.0, n_max)
        summary["p_reg_worst_ratio"] = pr.worst_ratio
    return ["n", "p", "z", "hazard"], rows, summary, 0


def cmd_renewal(cfg):
    model, f, _ = _model(cfg)
    n_max = max(_grid(cfg, "n"))
    seq = renewal.compute_u(model, n_max, method=cfg.get("method"))
    report = renewal.validate(seq, model)
    ok, first = seq.monotone
    summary = {"command": cfg.command, "model": repr(model), "n_max": n_max, "method": seq.method}
    summary.update(report)
    summary.update({"monotone": ok, "monotone_first_violation": first})
    diag_grid = [1 << k for k in range(n_max.bit_length()) if 1 << k <= n_max]
    if diag_grid:
        diag = renewal.asymptotic_diagnostic(seq, f, model, diag_grid)
        last = diag[-1]
        summary.update({"diagnostic_quantity": last.quantity, "diagnostic_n": last.n,
                        "diagnostic_value": last.value, "diagnostic_target": last.target})
        _write_csv(os.path.join(cfg.get("out"), "renewal_diagnostic.csv"),
                   ["n", "u", "quantity", "value", "target"],
                   [(r.n, r.u, r.quantity, r.value, r.target) for r in diag])
    rows = [(n, seq.u[n]) for n in range(n_max + 1)]
    return ["n", "u"], rows, summary, 0


def cmd_tv_curve(cfg):
    model, _, _ = _model(cfg)
    pairs = _pairs(cfg)
    seq = renewal.compute_u(model, max(n + e for n, e in pairs), method=cfg.get("method"))
    oracle = cfg.get("oracle")
    rows, gap = [], 0.0
    for n, ell in pairs:
        pt = memoryloss.tv_exact(seq, model, n, ell)
        row = [n, ell, pt.head, pt.tail, pt.tv, memoryloss.tv_lower(seq, model, n, ell)]
        if oracle:
            bf = memoryloss.tv_bruteforce(model, n, ell)
            gap = max(gap, abs(bf - pt.tv))
            row.append(bf)
        rows.append(row)
    header = ["n", "ell", "head", "tail", "tv", "lower"] + (["tv_bruteforce"] if oracle else [])
    summary = {"command": cfg.command, "model": repr(model), "points": len(rows)}
    if oracle:
        summary["oracle_max_gap"] = gap
    return header, rows, summary, 0


def cmd_verify(cfg):
    model, f, _ = _model(cfg)
    name = cfg.require("suite").lower()
    if name not in SUITE_NAMES:
        raise ConfigError(f"unknown suite {name!r}; choose from {sorted(SUITE_NAMES)}", field="suite")
    suite = SUITE_NAMES[name]
    if f is None and suite not in ("Lower", "DFR"):
        raise ConfigError(f"suite {suite} needs a regularly varying envelope (--rv-alpha)", field="rv_alpha")
    pairs = _pairs(cfg)
    seq = renewal.compute_u(model, max(n + e for n, e in pairs), method=cfg.get("method"))
    rep = memoryloss.run_suite(suite, model, f, pairs, seq=seq, ceiling=cfg.get("ceiling"), threads=cfg.threads)
    header = ["n", "ell", "head", "tail", "tv", "bound", "ratio", "admissible"]
    summary = rep.summary()
    summary["ceiling"] = rep.ceiling
    return header, list(rep.rows()), summary, 0 if rep.passed else 2


def cmd_couple(cfg):
    model, _, _ = _model(cfg)
    conf = coupling.CouplingConfig(
        model=model,
        ell=parse_int(cfg.require("ell"), "ell"),
        n_grid=parse_grid(cfg.get("n") or COUPLE_GRID, "n"),
        trials=cfg.get("trials"),
        seed=cfg.get("seed"),
        A=cfg.get("A"),
        horizon=cfg.get("horizon"),
        threads=cfg.threads,
    )
    est = coupling.estimate(conf)
    rows = [(n, ph, se, b, est.censored) for n, ph, se, b in zip(est.n_grid, est.p_hat, est.stderr, est.bound)]
    summary = {
        "command": cfg.command,
        "model": repr(model),
        "A": est.A,
        "trials": est.trials,
        "seed": conf.seed,
        "censored_frac": est.censored,
        "walk_plus": est.walk_plus,
        "walk_minus": est.walk_minus,
    }
    return ["n", "p_hat", "stderr", "bound", "censored_frac"], rows, summary, 0


def _harris_model(cfg):
    if cfg.get("edges"):
        small = [parse_int(s, "small_set") for s in cfg.require("small_set").split(",")]
        beta = parse_floats(cfg.get("beta"), "beta") if cfg.get("beta") else None
        return harris.load_edge_list(cfg.get("edges"), small, cfg.get("epsilon"), beta)
    name = cfg.get("example") or "lazy-walk"
    if name not in harris.EXAMPLES:
        raise ConfigError(f"unknown example {name!r}; choose from {sorted(harris.EXAMPLES)}", field="example")
    return harris.EXAMPLES[name]()


def cmd_harris(cfg):
    hm = _harris_model(cfg)
    hm.check_minorization()
    grid = _grid(cfg, "n")
    n_top = max(grid)
    mu = np.zeros(hm.n_states)
    mu[cfg.get("mu")] = 1.0
    mu_p = np.zeros(hm.n_states)
    mu_p[cfg.get("mu_prime")] = 1.0
    atomic = harris.split(hm) if hm.epsilon < 1 else hm
    lift = (lambda v: harris.lift(hm, v)) if hm.epsilon < 1 else (lambda v: v)
    b = harris.make_b_table(atomic, n_top)
    rows = []
    for n in grid:
        rows.append((
            n,
            harris.direct_tv(hm, mu, mu_p, n),
            harris.cor_har_bound(atomic, lift(mu), lift(mu_p), b, n),
            harris.gen1_check(atomic, lift(mu), n),
            harris.split_marginal_gap(hm, mu, n),
        ))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rtd = harris.return_time_dist(hm, n_top)
    summary = {
        "command": cfg.command,
        "model": hm.name,
        "epsilon": hm.epsilon,
        "return_tail_mass": rtd.tail_mass,
        "truncation_leak": rtd.leak,
        "dp_conservation": harris.dp_conservation(hm, n_top),
        "max_gen1_gap": max(r[3] for r in rows),
        "max_split_gap": max(r[4] for r in rows),
        "dominates": all(r[2] >= r[1] - 1e-10 for r in rows),
    }
    if cfg.get("g_power") is not None:
        gp = cfg.get("g_power")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DivergentNormWarning)
            gn = harris.g_norm(atomic, lift(mu), lift(mu_p), lambda x: x**gp, max(4096, 4 * n_top))
        summary.update({"g_norm": gn.value, "g_norm_infinite": gn.infinite})
    header = ["n", "direct_tv", "cor_har_bound", "gen1_gap", "split_gap"]
    return header, rows, summary, 0 if summary["dominates"] else 2


HANDLERS = {
    "tails-check": cmd_tails_check,
    "renewal": cmd_renewal,
    "tv-curve": cmd_tv_curve,
    "verify": cmd_verify,
    "couple": cmd_couple,
    "harris": cmd_harris,
}


def run(cfg: RunConfig) -> int:
    csv_path, json_path = _paths(cfg)
    header, rows, summary, code = HANDLERS[cfg.command](cfg)
    _write_csv(csv_path, header, rows)
    _write_json(json_path, summary)
    return code


def main(argv=None):
    try:
        cfg = parse_args(sys.argv[1:] if argv is None else argv)
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (RenewalMemlossError, ValueError, OSError, IndexError, MemoryError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
