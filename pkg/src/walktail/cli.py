"""Command-line pipeline: ``certify``, ``simulate``, ``bounds``, ``diagnose``.

Commands communicate through files under ``--out``::

    certificates/cert_<kind>_eps<eps>.json   margins_<kind>_eps<eps>.csv
    simulate/lindley.csv  mtau.csv  tau_stats.json  cycles.bin  drift_<kind>.csv
    bounds/bounds.csv  provenance.json
    diagnose/sstar.csv  subexp.csv  longtail.csv

Primary outputs are byte-identical across reruns; run metadata (timestamps,
wall time, thread count) goes to ``<command>/meta.json``.

Exit codes: 0 ok, 2 configuration or missing input, 3 certification failure,
4 statistical-check failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import bounds as bd
from . import potential as pt
from . import sim
from .errors import (CertificationFailed, ConfigError, DependencyError, ModelError,
                     NoExponentError, SearchFailed, StatisticalCheckFailed)
from .models import model_from_dict

log = logging.getLogger("walktail")

EXIT_OK, EXIT_CONFIG, EXIT_CERT, EXIT_STAT = 0, 2, 3, 4


# -- config --------------------------------------------------------------------


def load_config(path, seed=None):
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if seed is not None:
        cfg["seed"] = int(seed)
    validate_config(cfg)
    return cfg


def _increasing(name, xs):
    xs = list(xs)
    if not xs:
        raise ConfigError(f"{name} is empty")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ConfigError(f"{name} must be strictly increasing")


def validate_config(cfg):
    if "model" not in cfg:
        raise ConfigError("config needs a 'model' block")
    try:
        model = model_from_dict(cfg["model"])
    except ModelError as exc:
        raise ConfigError(f"bad model: {exc}") from None
    a = model.tail_moments().a
    cert = cfg.get("certify")
    if cert is not None:
        eps = cert.get("epsilons", [])
        if not eps or any(not e > 0 for e in eps):
            raise ConfigError("certify.epsilons must be a nonempty list of positive numbers")
        if cert.get("super", True) and any(e >= a for e in eps):
            raise ConfigError(f"super certification needs epsilon < a = {a:g}")
    simc = cfg.get("simulate")
    if simc is not None:
        if "seed" not in cfg:
            raise ConfigError("a seed is required when a simulate block is present")
        if int(simc.get("replicas", 0)) < 2:
            raise ConfigError("simulate.replicas must be at least 2")
        if int(simc.get("steps", 0)) <= int(simc.get("burn_in", 0)):
            raise ConfigError("simulate.steps must exceed simulate.burn_in")
        _increasing("simulate.x_grid", simc.get("x_grid", []))
    bnd = cfg.get("bounds")
    if bnd is not None:
        _increasing("bounds.x_grid", bnd.get("x_grid", []))
    diag = cfg.get("diagnose")
    if diag is not None:
        _increasing("diagnose.t_grid", diag.get("t_grid", []))
        if any(t <= 0 for t in diag["t_grid"]):
            raise ConfigError("diagnose.t_grid must be positive")
    return model


# -- output helpers ----------------------------------------------------------------


def _f(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_f(v) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path, obj):
    Path(path).write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _meta(outdir, command, started, threads):
    write_json(Path(outdir) / "meta.json", {
        "command": command, "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "wall_seconds": round(time.time() - started, 3), "threads": threads,
    })


def _eps_tag(eps):
    return f"{float(eps):g}"


def cert_path(out, kind, eps):
    return Path(out) / "certificates" / f"cert_{kind}_eps{_eps_tag(eps)}.json"


def _grid(cfg):
    g = dict(cfg.get("certify", {}).get("grid", {}))
    return pt.VerificationGrid(**g)


# -- commands ------------------------------------------------------------------


def cmd_certify(cfg, out, threads=1):
    model = validate_config(cfg)
    block = cfg.get("certify") or {}
    if not block:
        raise ConfigError("config has no certify block")
    d = Path(out) / "certificates"
    d.mkdir(parents=True, exist_ok=True)
    grid = _grid(cfg)
    tol = float(block.get("tolerance", 1e-9))
    kinds = [pt.SUB] + ([pt.SUPER] if block.get("super", True) else [])
    failed = []
    for eps in block["epsilons"]:
        for kind in kinds:
            fn = pt.certify_sub if kind == pt.SUB else pt.certify_super
            stem = f"{kind}_eps{_eps_tag(eps)}"
            try:
                cert = fn(eps, model, grid, tolerance=tol)
            except CertificationFailed as exc:
                failed.append(stem)
                if exc.curve is not None:
                    write_csv(d / f"failed_{stem}.csv", ("t", "value"), zip(*exc.curve))
                write_json(d / f"failed_{stem}.json",
                           {"kind": kind, "epsilon": eps, "error": str(exc),
                            "t": exc.t, "margin": exc.margin})
                log.error("certification %s failed: %s", stem, exc)
                continue
            write_json(d / f"cert_{stem}.json", cert.to_dict())
            write_csv(d / f"margins_{stem}.csv", ("t", "margin"),
                      zip(cert.grid_t, cert.margins))
    return EXIT_CERT if failed else EXIT_OK


def _load_certs(out, eps):
    certs = {}
    for kind in (pt.SUB, pt.SUPER):
        p = cert_path(out, kind, eps)
        if p.exists():
            certs[kind] = pt.MartingaleCertificate.from_dict(json.loads(p.read_text()))
    return certs


def cmd_simulate(cfg, out, threads=1):
    model = validate_config(cfg)
    block = cfg.get("simulate")
    if not block:
        raise ConfigError("config has no simulate block")
    seed = int(cfg["seed"])
    d = Path(out) / "simulate"
    d.mkdir(parents=True, exist_ok=True)
    level = float(block.get("ci_level", 0.99))
    checks = {}

    lind = sim.lindley_tail(model, block["x_grid"], int(block["steps"]),
                            int(block["burn_in"]), int(block["replicas"]), seed,
                            threads=threads, level=level)
    write_csv(d / "lindley.csv", ("x", "p_hat", "ci_halfwidth", "std_err"),
              zip(lind.x_grid, lind.p_hat, lind.ci_halfwidth, lind.std_err))
    meta = {"steps": lind.steps_per_replica, "burn_in": lind.burn_in,
            "replicas": lind.replicas, "level": level, "seed": seed}

    cycles = sim.simulate_cycles(model, int(block.get("cycles", 10**6)), seed,
                                 n_cap=int(block.get("n_cap", sim.DEFAULT_N_CAP)),
                                 threads=threads)
    sim.write_cycles(d / "cycles.bin", cycles)
    frac = cycles.truncated_fraction
    checks["truncation"] = frac <= sim.MAX_TRUNCATED_FRACTION
    ts = sim.tau_stats(cycles, model, level)
    checks["wald"] = ts.wald_residual <= ts.wald_ci
    write_json(d / "tau_stats.json", {**ts.__dict__, "truncated_fraction": frac,
                                      "lindley": meta})
    write_csv(d / "mtau.csv", ("x", "p_hat", "ci_halfwidth"),
              [(x, *sim.mtau_tail(cycles, x, level)) for x in lind.x_grid])

    dc = block.get("drift_check", {})
    if dc.get("enabled", True):
        eps = float(dc.get("epsilon", (cfg.get("certify") or {}).get("epsilons", [0.5])[0]))
        certs = _load_certs(out, eps)
        for kind, fn in ((pt.SUB, pt.certify_sub), (pt.SUPER, pt.certify_super)):
            if kind not in certs:
                try:
                    certs[kind] = fn(eps, model, _grid(cfg))
                except (CertificationFailed, ValueError) as exc:
                    log.warning("no %s certificate for drift check: %s", kind, exc)
                    continue
            rep = sim.empirical_drift_check(
                model, certs[kind], int(dc.get("n_states", 100)),
                int(dc.get("n_draws", 10**5)), seed)
            write_csv(d / f"drift_{kind}.csv", ("t", "mc_margin", "std_err", "quad_margin"),
                      zip(rep.states, rep.mc_margin, rep.std_err, rep.quad_margin))
            checks[f"drift_{kind}"] = rep.passed
    write_json(d / "checks.json", checks)
    failed = [k for k, ok in checks.items() if not ok]
    if failed:
        log.error("statistical checks failed: %s", ", ".join(failed))
        return EXIT_STAT
    return EXIT_OK


def _require(path):
    if not Path(path).exists():
        raise DependencyError(f"missing artifact: {path}")
    return path


def cmd_bounds(cfg, out, threads=1):
    model = validate_config(cfg)
    block = cfg.get("bounds")
    if not block:
        raise ConfigError("config has no bounds block")
    eps = float(block.get("epsilon", (cfg.get("certify") or {}).get("epsilons", [0.5])[0]))
    level = float(block.get("ci_level", 0.999))
    sub_p = _require(cert_path(out, pt.SUB, eps))
    sup_p = cert_path(out, pt.SUPER, eps)
    failed_p = sup_p.parent / f"failed_{pt.SUPER}_eps{_eps_tag(eps)}.json"
    super_skipped = (cfg.get("certify") or {}).get("super", True) is False
    if not sup_p.exists():
        if not (failed_p.exists() or super_skipped):
            _require(sup_p)
        sup_p = None
    sd = Path(out) / "simulate"
    lind_rows = read_csv(_require(sd / "lindley.csv"))
    tau_js = json.loads(Path(_require(sd / "tau_stats.json")).read_text())
    cycles = sim.read_cycles(_require(sd / "cycles.bin")).complete()

    sub = pt.MartingaleCertificate.from_dict(json.loads(Path(sub_p).read_text()))
    sup = None if sup_p is None else \
        pt.MartingaleCertificate.from_dict(json.loads(Path(sup_p).read_text()))
    for c in (sub, sup):
        if c is not None and model_from_dict(c.model) != model:
            raise ConfigError(f"{c.kind} certificate was issued for a different model")
    lind = sim.LindleyEstimate(
        np.array([float(r["x"]) for r in lind_rows]),
        np.array([float(r["p_hat"]) for r in lind_rows]),
        np.array([float(r["ci_halfwidth"]) for r in lind_rows]),
        np.array([float(r["std_err"]) for r in lind_rows]),
        tau_js["lindley"]["steps"], tau_js["lindley"]["burn_in"],
        tau_js["lindley"]["replicas"], tau_js["lindley"]["level"],
    )
    r = None
    if sup is not None:
        try:
            r = bd.choose_r(sup, lind.upper_envelope(level), model,
                            r_grid=[x for x in lind.x_grid if x >= 0])
        except SearchFailed as exc:
            log.warning("upper bounds left empty: %s", exc)
    # the tau CI in tau_stats.json is at the simulate level; rescale to ours
    z_ratio = sim._z(level) / sim._z(tau_js["level"])
    tau_half = tau_js["tau_ci"] * z_ratio
    tau_interval = (tau_js["tau_mean"] - tau_half, tau_js["tau_mean"] + tau_half)
    try:
        lb = bd.lundberg(model, cycles)
    except NoExponentError:
        lb = None
    prov = {
        "epsilon": eps, "R_sub": sub.R, "R_super": None if sup is None else sup.R, "r": r,
        "r_source": f"Lindley one-sided {level:g} upper bound "
                    f"({lind.replicas} replicas x {lind.steps_per_replica} steps)",
        "tau_interval": list(tau_interval), "tau_mean": tau_js["tau_mean"],
        "n_cycles": len(cycles), "model": model.to_dict(),
        "certificates": [Path(p).name for p in (sub_p, sup_p) if p is not None],
    }
    if lb is not None:
        prov["lundberg"] = {"h0": lb.h0, "residual": lb.residual,
                            "exp_moment_Stau": lb.exp_moment_Stau,
                            "local_prefactor": lb.local_prefactor}
    table = bd.build_bound_table(model, block["x_grid"], sub, sup, r, tau_interval,
                                 tau_js["tau_mean"], cycles.s_tau, lb, prov)
    d = Path(out) / "bounds"
    d.mkdir(parents=True, exist_ok=True)
    table.write_csv(d / "bounds.csv")
    bad = table.violations()
    prov["violations"] = bad
    write_json(d / "provenance.json", prov)
    if bad:
        log.error("bound table has lower > upper in %d cells", len(bad))
        return EXIT_STAT
    return EXIT_OK


def cmd_diagnose(cfg, out, threads=1):
    model = validate_config(cfg)
    block = cfg.get("diagnose")
    if not block:
        raise ConfigError("config has no diagnose block")
    ts = [float(t) for t in block["t_grid"]]
    keep = [t for t in ts if float(model.tail(t)) > 1e-250]
    if len(keep) < len(ts):
        log.warning("dropped %d t values where the tail underflows", len(ts) - len(keep))
    y = float(block.get("longtail_y", 1.0))
    a_plus = model.tail_moments().a_plus
    d = Path(out) / "diagnose"
    d.mkdir(parents=True, exist_ok=True)
    write_csv(d / "sstar.csv", ("t", "value", "reference"),
              [(t, pt.sstar_ratio(t, model), 2 * a_plus) for t in keep])
    write_csv(d / "subexp.csv", ("t", "value", "reference", "reference_alt"),
              [(t, pt.subexp_ratio(t, model), 1.0, 2.0) for t in keep])
    write_csv(d / "longtail.csv", ("t", "value", "reference"),
              [(t, pt.longtail_ratio(t, y, model), 1.0) for t in keep])
    return EXIT_OK


COMMANDS = {"certify": cmd_certify, "bounds": cmd_bounds,
            "simulate": cmd_simulate, "diagnose": cmd_diagnose}


def main(argv=None):
    p = argparse.ArgumentParser(prog="walktail", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    try:
        cfg = load_config(args.config, args.seed)
        Path(args.out).mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.command](cfg, args.out, max(1, args.threads))
    except (ConfigError, DependencyError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except StatisticalCheckFailed as exc:
        log.error("%s", exc)
        return EXIT_STAT
    sub = Path(args.out) / ("certificates" if args.command == "certify" else args.command)
    if sub.is_dir():
        _meta(sub, args.command, started, args.threads)
    return code


if __name__ == "__main__":
    sys.exit(main())
