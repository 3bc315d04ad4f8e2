"""Batch front-end: ``orbitmachine <command> --config cfg.json --out dir``.

Every command validates its JSON config against a closed schema, runs, and
writes ``<command>.csv`` plus a ``<command>.json`` sidecar into the output
directory.  Exit status: 0 when every check passed, 1 when a check failed,
2 for config or build errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import sys
from decimal import Context, Decimal
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .carousel import CarouselParams, PNorm, as_fraction, estimate_constant_L_pow, verify_estimates
from .jordan import IllConditionedError, OrbitClass, classify, decompose, orbit_oracle
from .machine import (
    MachineConfig, build_machine, divergence_trace, near_return, orbit, window_times,
)
from .schedule import Variant, check_invariants
from .sphere import SymmetricSet, build_net, covering_misses
from . import symbasis as sb

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

_DEC = Context(prec=15)

# -- schemas ---------------------------------------------------------------

_rational = {"oneOf": [{"type": "number"}, {"type": "string", "pattern": r"^-?\d+(/\d+)?$|^-?\d*\.\d+$"}]}
_pvalue = {"enum": [1, 2, "1", "2", "inf", "INF"]}
_vector = {"type": "array", "items": {"type": "number"}, "minItems": 2}

_target = {
    "type": "array", "minItems": 1,
    "items": {
        "type": "object", "additionalProperties": False, "required": ["type", "center"],
        "properties": {"type": {"enum": ["pair", "cap"]}, "center": _vector,
                       "radius": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}},
    },
}

_machine = {
    "type": "object", "additionalProperties": False, "required": ["d", "p", "E", "N"],
    "properties": {
        "d": {"type": "integer", "minimum": 2}, "p": _pvalue, "E": _target,
        "N": {"type": "integer", "minimum": 1, "maximum": 8},
        "K": {"type": "integer", "minimum": 1},
        "k_max": {"type": "integer", "minimum": 1},
        "variant": {"enum": ["paper", "toy"]},
        "factor": {"type": "integer", "minimum": 5},
    },
}

_x_entries = {
    "type": "array",
    "items": {"type": "object", "additionalProperties": False, "required": ["copy", "slot", "value"],
              "properties": {"copy": {"type": "integer", "minimum": 1},
                             "slot": {"type": "integer", "minimum": 1}, "value": _rational}},
}


def _closed(props: dict, required=()) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props, "required": list(required)}


SCHEMAS = {
    "verify-carousel": _closed({"carousel": _closed({
        "p": {"type": "array", "items": _pvalue, "minItems": 1},
        "m_range": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
        "T_factor_range": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
        "cases": {"type": "array", "items": _closed({"T": {"type": "integer", "minimum": 1},
                                                     "m": {"type": "integer", "minimum": 1}}, ["T", "m"])},
        "eps": _rational,
        "amplitudes": {"type": "array", "items": _rational, "minItems": 1},
    })}, ["carousel"]),
    "build-net": _closed({"net": _closed({
        "d": {"type": "integer", "minimum": 2}, "E": _target,
        "N": {"type": "integer", "minimum": 1, "maximum": 8},
        "covering_samples": {"type": "integer", "minimum": 0},
    }, ["d", "E", "N"])}, ["net"]),
    "build-schedule": _closed({"machine": _machine}, ["machine"]),
    "run-orbit": _closed({"machine": _machine, "orbit": _closed({
        "u": _vector, "x": _x_entries,
        "times": {"oneOf": [{"const": "proof"},
                            {"type": "array", "items": {"type": "integer", "minimum": 0}}]},
        "samples": {"type": "integer", "minimum": 0},
    }, ["u"])}, ["machine", "orbit"]),
    "near-return": _closed({"machine": _machine, "near_return": _closed({
        "u": _vector, "stages": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
    }, ["u", "stages"])}, ["machine", "near_return"]),
    "classify": _closed({"jordan": _closed({
        "matrix": {"type": "array", "minItems": 1,
                   "items": {"type": "array", "items": {"type": "number"}, "minItems": 1}},
        "vectors": {"type": "array", "minItems": 1,
                    "items": {"type": "array", "items": {"type": "number"}, "minItems": 1}},
        "steps": {"type": "integer", "minimum": 50},
    }, ["matrix", "vectors"])}, ["jordan"]),
    "verify-symbasis": _closed({"symbasis": _closed({
        "unit_max_n": {"type": "integer", "minimum": 1, "maximum": 256},
        "case1_max_n": {"type": "integer", "minimum": 1, "maximum": 32},
        "case1_m": {"type": "integer", "minimum": 1},
        "case3_max_n": {"type": "integer", "minimum": 1, "maximum": 12},
        "orthogonality_max_n": {"type": "integer", "minimum": 1, "maximum": 12},
        "trials": {"type": "integer", "minimum": 1},
    })}, ["symbasis"]),
}


# -- formatting ------------------------------------------------------------

def fmt(v) -> str:
    """Decimal rendering: integers in full, everything else to 15 significant digits."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        d = _DEC.divide(Decimal(v.numerator), Decimal(v.denominator))
        return _plain(d)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
        return format(v, ".15g")
    return str(v)


def _plain(d: Decimal) -> str:
    s = format(d.normalize(_DEC), "g").replace("E", "e")
    return "0" if s.startswith(("0e", "-0")) and d.is_zero() else s


def exact(v) -> str:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, int):
        return f"{v}/1"
    return ""


def _write_csv(path: Path, header: list, rows: list):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in r])


def _write_sidecar(path: Path, command: str, config: dict, seed: int, meta: dict, status: int):
    doc = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": config,
        "status": status,
        "meta": meta,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


class ConfigError(ValueError):
    pass


# -- config helpers ----------------------------------------------------------

def _machine_config(sec: dict) -> MachineConfig:
    kind = sec.get("variant", "toy")
    if kind == "toy":
        variant = Variant.toy(sec.get("factor", 5))
    else:
        if "factor" in sec:
            raise ConfigError("the paper variant takes no factor")
        variant = Variant()
    E = SymmetricSet.from_json(sec["E"])
    return MachineConfig(sec["d"], PNorm.parse(sec["p"]), E, sec["N"], variant, sec.get("K"), sec.get("k_max"))


def _x_map(entries) -> dict:
    return {(e["copy"], e["slot"]): as_fraction(e["value"]) for e in entries or ()}


def _schedule_meta(machine) -> list:
    return [{"k": e.k, "n": e.n, "m": str(e.m), "T": str(e.T), "eps": fmt(e.eps(machine.p))}
            for e in machine.schedule.entries[:machine.k_max]]


def _net_meta(nets) -> list:
    return [{"stage": n.stage, "points": len(n), "mesh": str(n.mesh), "filter": str(n.filter_threshold)}
            for n in nets]


# -- commands ------------------------------------------------------------------

def cmd_verify_carousel(cfg: dict, seed: int, out: Path):
    sec = cfg["carousel"]
    ps = [PNorm.parse(p) for p in sec.get("p", [1, 2, "inf"])]
    eps = as_fraction(sec.get("eps", 1))
    amps = [as_fraction(a) for a in sec.get("amplitudes", [1, -3, "1/2"])]
    if eps <= 0:
        raise ConfigError("eps must be positive")
    if any(a == 0 for a in amps):
        raise ConfigError("amplitudes must be nonzero")
    if "cases" in sec:
        cases = [(c["T"], c["m"]) for c in sec["cases"]]
    else:
        m_lo, m_hi = sec.get("m_range", [1, 16])
        f_lo, f_hi = sec.get("T_factor_range", [4, 8])
        if m_lo > m_hi or f_lo > f_hi:
            raise ConfigError("empty range in carousel grid")
        cases = [(T, m) for m in range(m_lo, m_hi + 1) for T in range(f_lo * m, f_hi * m + 1)]
    bad = [(T, m) for T, m in cases if 4 * m > T]
    if bad:
        raise ConfigError(f"grid violates 4m <= T at (T, m) = {bad[0]}")

    kinds = ("lower", "uniform", "small_time")
    rows, violations = [], 0
    first = None
    for p in ps:
        for T, m in cases:
            params = CarouselParams(T, m, eps, p)
            for a in amps:
                by_t: dict = {}
                for r in verify_estimates(params, a).records:
                    by_t.setdefault(r.t, {})[r.kind] = r
                    if not r.satisfied:
                        violations += 1
                        first = first or (p.value, m, T, a, r.t, r.kind)
                for t, recs in sorted(by_t.items()):
                    any_r = next(iter(recs.values()))
                    row = [str(p.value), m, T, eps, a, t, any_r.norm, any_r.norm_pow, exact(any_r.norm_pow)]
                    for kind in kinds:
                        r = recs.get(kind)
                        row += [r.bound, exact(r.bound_pow)] if r else ["", ""]
                    row.append(all(r.satisfied for r in recs.values()))
                    rows.append(row)
    header = ["p", "m", "T", "eps", "a", "t", "norm", "norm_pow", "norm_pow_exact"]
    for kind in kinds:
        header += [kind, f"{kind}_pow_exact"]
    header.append("satisfied")
    _write_csv(out / "verify-carousel.csv", header, rows)
    meta = {"rows": len(rows), "violations": violations,
            "L_pow": {str(p.value): str(estimate_constant_L_pow(p)) for p in ps}}
    if first:
        meta["first_violation"] = [str(v) for v in first]
        print(f"violation: p={first[0]} m={first[1]} T={first[2]} a={first[3]} t={first[4]} ({first[5]})",
              file=sys.stderr)
    return (EXIT_FAIL if violations else EXIT_OK), meta


def cmd_build_net(cfg: dict, seed: int, out: Path):
    sec = cfg["net"]
    E = SymmetricSet.from_json(sec["E"])
    if E.d != sec["d"]:
        raise ConfigError(f"target set has dimension {E.d}, expected {sec['d']}")
    nets = [build_net(sec["d"], n, E) for n in range(1, sec["N"] + 1)]
    rows = []
    for net in nets:
        dist = E.distance(net.points)
        for i, (pt, r) in enumerate(zip(net.points, np.atleast_1d(dist))):
            rows.append([net.stage, i + 1, *[float(c) for c in pt], float(r)])
    header = ["stage", "index", *[f"x{i + 1}" for i in range(sec["d"])], "rho_E"]
    _write_csv(out / "build-net.csv", header, rows)
    meta = {"nets": _net_meta(nets)}
    status = EXIT_OK
    samples = sec.get("covering_samples", 0)
    if samples:
        rng = np.random.default_rng(seed)
        cover = []
        for net in nets:
            misses, draws, worst = covering_misses(net, E, samples, rng)
            cover.append({"stage": net.stage, "misses": misses, "draws": draws, "worst": fmt(worst)})
            if misses:
                status = EXIT_FAIL
        meta["covering"] = cover
    if any(len(n) == 0 for n in nets):
        status = EXIT_FAIL
    return status, meta


def cmd_build_schedule(cfg: dict, seed: int, out: Path):
    machine = build_machine(_machine_config(cfg["machine"]))
    s = machine.schedule
    rows = []
    for e in s.entries[:machine.k_max]:
        ep = e.eps_pow(s.p)
        rows.append([e.k, e.n, e.m, e.T, e.eps(s.p), ep, exact(ep)])
    _write_csv(out / "build-schedule.csv", ["k", "n", "m", "T", "eps", "eps_pow", "eps_pow_exact"], rows)
    report = check_invariants(s)
    meta = {"schedule": _schedule_meta(machine), "nets": _net_meta(machine.nets),
            "C": list(machine.feeds.C), "K": machine.K, "horizon": machine.horizon,
            "invariants": {c.name: c.status for c in report.checks}}
    return (EXIT_OK if report.ok else EXIT_FAIL), meta


def _proof_times(machine, samples: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    times = {0}
    for n in range(1, machine.config.N + 1):
        k = machine.feeds.stage_range(n)[0]
        if k <= machine.k_max:
            times.update(window_times(machine.block(k), rng, samples))
    for b in machine.blocks[:machine.k_max]:
        times.update((b.T, b.T - 1))
    return sorted(times)


def cmd_run_orbit(cfg: dict, seed: int, out: Path):
    machine = build_machine(_machine_config(cfg["machine"]))
    sec = cfg["orbit"]
    u = np.asarray(sec["u"], dtype=float)
    if u.size != machine.d:
        raise ConfigError(f"u has {u.size} coordinates, machine has d={machine.d}")
    x = _x_map(sec.get("x"))
    spec = sec.get("times", "proof")
    times = _proof_times(machine, sec.get("samples", 4), seed) if spec == "proof" else sorted(set(spec))
    recs = orbit(machine, u, x, times)
    rows = []
    for r in recs:
        sq = r.total_sq.rational if r.total_sq.is_rational else None
        rows.append([r.t, r.stage, r.total, r.shift_part, r.perturb_part, r.tail_bound,
                     exact(sq) if sq is not None else ""])
    _write_csv(out / "run-orbit.csv",
               ["t", "stage", "total", "shift_part", "perturb_part", "tail_bound", "total_sq_exact"], rows)
    meta = {"schedule": _schedule_meta(machine), "nets": _net_meta(machine.nets),
            "C": list(machine.feeds.C), "K": machine.K, "k_max": machine.k_max,
            "rho_u_E": fmt(machine.config.E.distance(u)), "times": len(times)}
    status = EXIT_OK
    if machine.config.E.distance(u) <= 1e-12 and np.any(u):
        traces = divergence_trace(machine, u, range(1, machine.config.N + 1), seed=seed, samples=sec.get("samples", 4))
        meta["divergence"] = [{"n": t.n, "k": t.k, "min_total": fmt(t.min_total),
                               "stage_bound": fmt(t.stage_bound), "slack": fmt(t.slack), "ok": t.ok}
                              for t in traces]
        if not all(t.ok for t in traces):
            status = EXIT_FAIL
    return status, meta


def cmd_near_return(cfg: dict, seed: int, out: Path):
    machine = build_machine(_machine_config(cfg["machine"]))
    sec = cfg["near_return"]
    u = np.asarray(sec["u"], dtype=float)
    if u.size != machine.d:
        raise ConfigError(f"u has {u.size} coordinates, machine has d={machine.d}")
    results = [near_return(machine, u, n) for n in sec["stages"]]
    rows = [[r.n, r.n0, r.k_n, r.t, r.delta_norm, r.deficit, r.tail, r.bound, r.envelope,
             r.earlier_blocks_zero, r.ok] for r in results]
    _write_csv(out / "near-return.csv",
               ["n", "n0", "k_n", "t", "delta_norm", "deficit", "tail", "bound", "envelope",
                "earlier_blocks_zero", "ok"], rows)
    deficits = [r.deficit for r in results]
    meta = {"schedule": _schedule_meta(machine), "nets": _net_meta(machine.nets), "K": machine.K,
            "deficits": [fmt(v) for v in deficits],
            "monotone": all(b <= a for a, b in zip(deficits, deficits[1:]))}
    ok = all(r.ok and math.isfinite(r.deficit) for r in results)
    return (EXIT_OK if ok else EXIT_FAIL), meta


def cmd_classify(cfg: dict, seed: int, out: Path):
    sec = cfg["jordan"]
    T = np.asarray(sec["matrix"], dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ConfigError("matrix must be square")
    steps = sec.get("steps", 400)
    verdicts = []
    try:
        dec = decompose(T)
        dec_error = None
    except IllConditionedError as exc:
        dec, dec_error = None, str(exc)
    for i, v in enumerate(sec["vectors"]):
        x = np.asarray(v, dtype=float)
        if x.shape != (T.shape[0],):
            raise ConfigError(f"vector {i} has the wrong length")
        entry = {"index": i, "class": None, "empirical_class": None, "agree": False,
                 "status": "OK", "empirical_M": None}
        emp = orbit_oracle(T, x, steps)
        entry["empirical_class"] = emp.cls.value
        entry["empirical_M"] = emp.M
        if dec is None:
            entry["status"] = "ILL_CONDITIONED"
            entry["detail"] = dec_error
        else:
            try:
                ver = classify(T, x, dec)
                entry["class"] = ver.cls.value
                entry["dist_Y"], entry["dist_Z"] = ver.dist_Y, ver.dist_Z
                entry["agree"] = ver.cls is emp.cls
            except IllConditionedError as exc:
                entry["status"] = "ILL_CONDITIONED"
                entry["detail"] = str(exc)
        verdicts.append(entry)
    rows = [[e["index"], e["class"] or "", e["empirical_class"], e["agree"], e["status"],
             e.get("dist_Y"), e.get("dist_Z"), e["empirical_M"]] for e in verdicts]
    _write_csv(out / "classify.csv",
               ["index", "class", "empirical_class", "agree", "status", "dist_Y", "dist_Z", "empirical_M"], rows)
    (out / "classify-verdicts.json").write_text(json.dumps(verdicts, indent=2, sort_keys=True) + "\n")
    meta = {"eigenvalues": [[fmt(z.real), fmt(z.imag)] for z in (dec.eigenvalues if dec else [])],
            "dim_Y": None if dec is None else int(dec.Y.shape[1]),
            "dim_Z": None if dec is None else int(dec.Z.shape[1]),
            "alpha": None if dec is None else fmt(dec.alpha)}
    return (EXIT_OK if all(e["agree"] for e in verdicts) else EXIT_FAIL), meta


def cmd_verify_symbasis(cfg: dict, seed: int, out: Path):
    sec = cfg["symbasis"]
    unit_max = sec.get("unit_max_n", 64)
    c1_max = sec.get("case1_max_n", 8)
    c1_m = sec.get("case1_m", 2)
    c3_max = sec.get("case3_max_n", 8)
    orth_max = sec.get("orthogonality_max_n", 10)
    trials = sec.get("trials", 16)
    c0 = sb.LpNorm(PNorm.INF)
    l2 = sb.LpNorm(PNorm.TWO)
    rows, ok = [], True

    def record(name, system, norm, orth=""):
        nonlocal ok
        shift = sb.shift_simulation_check(system)
        order = system.order()
        est = sb.equivalence_estimate(system, norm, trials, seed=seed) if norm is not None else None
        good = shift and order == system.n and orth in ("", True)
        ok = ok and good
        rows.append([name, system.n, system.m or "", shift, order, order == system.n, orth,
                     est.lower if est else "", est.upper if est else "", good])

    for n in range(1, unit_max + 1):
        record("unit", sb.unit_system(n, range(1, n + 1)), l2)
    for n in range(1, c1_max + 1):
        record("case1_c0", sb.case1_system(n, c1_m, c0), c0)
    for n in range(1, max(c3_max, orth_max) + 1):
        s = sb.case3_system(n)
        g = s.pattern @ s.pattern.T
        orth = bool(np.array_equal(g, (2 ** n) * np.eye(n, dtype=g.dtype))) if n <= orth_max else ""
        record("case3_walsh", s, l2 if n <= c3_max else None, orth)
    _write_csv(out / "verify-symbasis.csv",
               ["system", "n", "m", "shift_simulation", "order", "order_ok", "orthogonal",
                "lower", "upper", "ok"], rows)
    return (EXIT_OK if ok else EXIT_FAIL), {"systems": len(rows)}


COMMANDS = {
    "verify-carousel": cmd_verify_carousel,
    "build-net": cmd_build_net,
    "build-schedule": cmd_build_schedule,
    "run-orbit": cmd_run_orbit,
    "near-return": cmd_near_return,
    "classify": cmd_classify,
    "verify-symbasis": cmd_verify_symbasis,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orbitmachine", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path, help="JSON experiment config")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
    return ap


def load_config(command: str, path: Path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    return cfg


def run(command: str, cfg: dict, seed: int = 0, out: Path = Path(".")) -> int:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    status, meta = COMMANDS[command](cfg, seed, out)
    _write_sidecar(out / f"{command}.json", command, cfg, seed, meta, status)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config)
        return run(args.command, cfg, args.seed, args.out)
    except (ConfigError, ValueError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
