"""Command-line entry point: one subcommand per computation, CSV + JSON output."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import random
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__, density, expsums, intlat, lattice, petersson, satake, specfun
from .intlat import QuadForm2

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3


class ValidationError(ValueError):
    def __init__(self, param: str, message: str):
        super().__init__(f"--{param}: {message}")
        self.param = param


@dataclasses.dataclass
class RunConfig:
    command: str
    parameters: dict[str, Any]


@dataclasses.dataclass
class RunOutput:
    header: list[str]
    rows: list[list[Any]]
    results: dict[str, Any]
    budgets: dict[str, Any] = dataclasses.field(default_factory=dict)
    work: dict[str, Any] = dataclasses.field(default_factory=dict)


# --------------------------------------------------------------------------
# parameter parsing and validation


def _form(text: str) -> QuadForm2:
    parts = [int(x) for x in str(text).split(",")]
    if len(parts) == 1:
        return QuadForm2.scalar(parts[0])
    if len(parts) != 3:
        raise ValueError("a form is 'n' (for nI) or 'a,b,c' with matrix [[a, b/2], [b/2, c]]")
    return QuadForm2(*parts)


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",")]


def _fraction_list(text) -> list[Fraction]:
    if isinstance(text, (list, tuple)):
        return [Fraction(str(x)) for x in text]
    return [Fraction(x) for x in str(text).split(",")]


def _require(cond: bool, param: str, message: str) -> None:
    if not cond:
        raise ValidationError(param, message)


def _positive_form(p: dict, name: str) -> QuadForm2:
    try:
        f = _form(p[name])
    except (ValueError, TypeError) as exc:
        raise ValidationError(name, str(exc)) from None
    return f


def _even_weight(p: dict, name: str = "k", lo: int = 6) -> int:
    k = int(p[name])
    _require(k >= lo and k % 2 == 0, name, f"must be even and >= {lo}")
    return k


def _tol(p: dict) -> float:
    t = float(p["tol"])
    _require(t > 0, "tol", "must be positive")
    return t


def _fejer(p: dict, limit: float, strict: bool = True) -> density.TestFunctionPair:
    v = float(p["v"])
    _require(0 < v <= 1, "v", "must lie in (0, 1]")
    if strict:
        _require(v < limit, "v", f"support must lie inside (-{limit:g}, {limit:g})")
    return density.fejer_pair(Fraction(str(p["v"])))


def _bool(x) -> bool:
    if isinstance(x, bool):
        return x
    s = str(x).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {x!r}")


# --------------------------------------------------------------------------
# subcommands; each returns (plan, run) where plan is the dry-run description


def cmd_kloosterman(p: dict):
    q = _positive_form(p, "q")
    t = _positive_form(p, "t")
    cmax = int(p["cmax"])
    _require(1 <= cmax <= 6, "cmax", "must lie in [1, 6]")
    rng = range(-cmax, cmax + 1)
    mats = [(a, b, c, d) for a in rng for b in rng for c in rng for d in rng if a * d - b * c != 0]
    plan = {"matrices": len(mats)}

    def run() -> RunOutput:
        rows = []
        worst = 0.0
        for cm in mats:
            val = expsums.sym_kloosterman(q, t, cm)
            dc = abs(intlat.det(cm))
            bound = dc ** 1.5
            worst = max(worst, abs(val.value) / bound)
            rows.append([*cm, intlat.det(cm), val.value.real, val.value.imag, abs(val.value), bound,
                         int(abs(val.value) <= bound * (1 + 1e-12)), val.terms])
        return RunOutput(["c11", "c12", "c21", "c22", "det", "re", "im", "abs", "bound", "bound_ok", "terms"],
                         rows, {"matrices": len(rows), "max_ratio_to_bound": worst})

    return plan, run


def cmd_hsum(p: dict):
    pf = _positive_form(p, "p")
    sf = _positive_form(p, "s")
    cmax = int(p["cmax"])
    _require(1 <= cmax <= 500, "cmax", "must lie in [1, 500]")
    plan = {"moduli": cmax, "terms": sum(c * c for c in range(1, cmax + 1))}

    def run() -> RunOutput:
        rows = []
        for c in range(1, cmax + 1):
            for sg in (1, -1):
                h = expsums.h_sum(pf, sf, c, sg)
                rows.append([c, sg, h.value.real, h.value.imag, abs(h.value), c * c,
                             int(abs(h.value) <= c * c * (1 + 1e-12))])
        return RunOutput(["c", "sign", "re", "im", "abs", "bound", "bound_ok"], rows,
                         {"all_within_bound": all(r[-1] for r in rows)})

    return plan, run


def cmd_bessel_check(p: dict):
    numax = float(p["numax"])
    xmax = float(p["xmax"])
    _require(4.5 <= numax <= 400.5, "numax", "must lie in [4.5, 400.5]")
    _require(0 < xmax <= 1e4, "xmax", "must lie in (0, 1e4]")
    nus = np.arange(4.5, numax + 0.5, 1.0)
    xs = np.linspace(xmax / 64, xmax, 64)
    plan = {"orders": int(nus.size), "points": int(xs.size)}

    def run() -> RunOutput:
        rows = []
        ok_all = True
        for nu in nus.tolist():
            vals = specfun.bessel_j_half_array(nu, xs)
            env = np.exp(specfun.bessel_envelope_log(nu, xs))
            for x, val, e in zip(xs.tolist(), vals.tolist(), env.tolist()):
                ok = abs(val) <= min(1.0, e) * (1 + 1e-12) + 1e-300
                ok_all &= ok
                rows.append([nu, x, val, e, int(ok)])
        return RunOutput(["nu", "x", "value", "envelope", "bounds_ok"], rows, {"all_bounds_ok": ok_all})

    return plan, run


PRODUCT_TRIPLES = [(v, z, w) for v in (4.5, 8.5) for z, w in ((1.0, 1.0), (3.0, 7.0), (10.0, 2.0))] + [
    (0.5, math.pi, math.pi), (2.5, 5.0, 5.0), (12.5, 20.0, 9.0)]


def cmd_product_formula_check(p: dict):
    plan = {"triples": len(PRODUCT_TRIPLES)}

    def run() -> RunOutput:
        rows = []
        worst = 0.0
        for v, z, w in PRODUCT_TRIPLES:
            lhs = float(specfun.bessel_j_half_array(v, np.array([z]))[0]
                        * specfun.bessel_j_half_array(v, np.array([w]))[0])
            rhs = specfun.bessel_product_rhs(v, z, w)
            worst = max(worst, abs(lhs - rhs.value))
            rows.append([v, z, w, lhs, rhs.value, abs(lhs - rhs.value), rhs.nodes])
        return RunOutput(["v", "z", "zeta", "lhs", "rhs", "residual", "nodes"], rows,
                         {"max_residual": worst})

    return plan, run


def cmd_neumann_check(p: dict):
    K = float(p["K"])
    _require(8 <= K <= 256, "K", "must lie in [8, 256]")
    xis = np.unique(np.round(np.geomspace(1.0, K * K, int(p["points"])), 6))
    plan = {"xi_points": int(xis.size)}

    def run() -> RunOutput:
        c3 = specfun.c3_constant(K)
        rows = []
        kappa = 0.0
        for xi in xis.tolist():
            lhs = specfun.neumann_sum(K, xi)
            g = float(specfun.bump_g1(K)(np.array([xi]))[0])
            h = specfun.h_transform(K, xi)
            res = abs(lhs - g - h)
            kappa = max(kappa, res / (xi * c3))
            rows.append([xi, lhs, g, h, res, xi * c3])
        return RunOutput(["xi", "neumann_sum", "g1", "h", "residual", "xi_c3"], rows,
                         {"c3": c3, "c3_times_K3": c3 * K ** 3, "kappa": kappa})

    return plan, run


def _breakdown_dict(d: petersson.DeltaBreakdown) -> dict:
    out = dataclasses.asdict(d)
    out["tail_bound"] = d.tail_bound
    return out


def cmd_delta(p: dict):
    m, n = int(p["m"]), int(p["n"])
    _require(m >= 1, "m", "must be >= 1")
    _require(n >= 1, "n", "must be >= 1")
    k = _even_weight(p)
    tol = _tol(p)
    env = petersson.Rank2Envelope(m * n, k - 1.5)
    d0, radius, tail, capped = env.choose_region(0.5 * tol, float(p["budget"]))
    plan = {"rank2_region": {"max_abs_det": d0, "radius": radius, "capped": capped,
                             "matrices_estimate": petersson.count_ball(radius)}}

    def run() -> RunOutput:
        d = petersson.delta_k(m, n, k, tol, budget=float(p["budget"]))
        row = [m, n, k, d.diagonal, d.rank1, d.rank2, d.rank1_tail_bound, d.rank2_tail_bound, d.total]
        return RunOutput(["m", "n", "k", "diagonal", "rank1", "rank2", "rank1_tail", "rank2_tail", "total"],
                         [row], _breakdown_dict(d), {"tail_bound": d.tail_bound},
                         {"exact_matrices": d.exact_matrices})

    return plan, run


def cmd_delta_avg(p: dict):
    m, n = int(p["m"]), int(p["n"])
    _require(m >= 1, "m", "must be >= 1")
    _require(n >= 1, "n", "must be >= 1")
    K = float(p["K"])
    _require(K >= 12, "K", "must be >= 12")
    tol = _tol(p)
    ks, ws = petersson.weight_grid(K)
    plan = {"weights": ks}

    def run() -> RunOutput:
        rep = petersson.averaged_delta(m, n, K, tol, float(p["budget"]))
        rows = [[k, w, v] for k, w, v in zip(rep.k_grid, rep.weights, rep.per_k)]
        return RunOutput(["k", "weight", "delta"], rows, dataclasses.asdict(rep),
                         {"tail_bound": rep.tail_bound, "reference_error_budget": rep.reference_error_budget})

    return plan, run


def cmd_u_identity_check(p: dict):
    draws = int(p["draws"])
    _require(draws >= 1, "draws", "must be >= 1")
    try:
        ps = [int(x) for x in str(p["primes"]).split(",")]
    except ValueError:
        raise ValidationError("primes", "comma-separated integers expected") from None
    for q in ps:
        _require(expsums.is_prime(q), "primes", f"{q} is not prime")
    seed = int(p.get("seed", 0))
    plan = {"draws": draws * len(ps) * 2}

    def run() -> RunOutput:
        rng = random.Random(seed)
        rows = []
        worst = 0.0
        for q in ps:
            for model in ("tempered", "sk"):
                for i in range(draws):
                    lp = satake.tempered(q, rng) if model == "tempered" else satake.saito_kurokawa(q, rng)
                    res = satake.verify_u_identities(lp) + satake.elementary_relations_check(lp)
                    worst = max(worst, *res)
                    rows.append([q, model, i, *res])
        return RunOutput(["p", "model", "draw", "c1", "c2", "tau2", "tau4", "elem1", "elem2"], rows,
                         {"max_residual": worst})

    return plan, run


def _report_output(rep: density.DensityReport) -> RunOutput:
    row = [rep.k, rep.gamma_term, rep.m1_sum, rep.m2_sum, rep.total, rep.target,
           rep.omitted_tail_budget, rep.omitted_pole_budget, rep.delta_tail_total]
    budgets = {"omitted_tail_budget": rep.omitted_tail_budget, "omitted_pole_budget": rep.omitted_pole_budget,
               "delta_tail_total": rep.delta_tail_total, "gamma_error": rep.gamma_error}
    return RunOutput(["k", "gamma_term", "m1_sum", "m2_sum", "total", "target", "tail_budget",
                      "pole_budget", "delta_tail"], [row], dataclasses.asdict(rep), budgets)


def _density_plan(L: float, alpha: float) -> dict:
    x1, x2 = math.exp(alpha * L), math.exp(alpha * L / 2)
    return {"m1_prime_cutoff": x1, "m2_prime_cutoff": x2,
            "m1_primes": len(density._primes_below(x1)), "m2_primes": len(density._primes_below(x2))}


def cmd_density_spin(p: dict):
    k = _even_weight(p, lo=10)
    pair = _fejer(p, 1.0)
    tol = _tol(p)
    diag = _bool(p["diag_only"])
    plan = _density_plan(math.log(k * k), pair.support_radius)
    return plan, lambda: _report_output(density.weighted_density_spin(k, pair, tol, diag, float(p["budget"])))


def cmd_density_std(p: dict):
    k = _even_weight(p, lo=10)
    pair = _fejer(p, 0.25)
    tol = _tol(p)
    diag = _bool(p["diag_only"])
    plan = _density_plan(4 * math.log(k), pair.support_radius)
    return plan, lambda: _report_output(density.weighted_density_std(k, pair, tol, diag, float(p["budget"])))


def cmd_density_std_avg(p: dict):
    K = float(p["K"])
    _require(K >= 12, "K", "must be >= 12")
    pair = _fejer(p, 5 / 18)
    tol = _tol(p)
    diag = _bool(p["diag_only"])
    plan = _density_plan(4 * math.log(K), pair.support_radius)
    plan["weights"] = petersson.weight_grid(K)[0]
    return plan, lambda: _report_output(density.averaged_density_std(K, pair, tol, diag, budget=float(p["budget"])))


def cmd_lattice_count(p: dict):
    dmax = int(p["dmax"])
    _require(1 <= dmax <= 200, "dmax", "must lie in [1, 200]")
    Xs = _float_list(p["X"])
    for X in Xs:
        _require(0 <= X <= 1e5, "X", "values must lie in [0, 1e5]")
    plan = {"counts": 2 * dmax * len(Xs)}

    def run() -> RunOutput:
        rows = []
        kappa = 0.0
        for d in range(1, dmax + 1):
            for X in Xs:
                c = lattice.count_pd(d, X)
                cneg = lattice.count_pd(-d, X)
                main = lattice.pd_main_term(d, X)
                err = abs(c - main) / (d ** (1 / 3) * X ** (2 / 3)) if X > 0 else 0.0
                kappa = max(kappa, err)
                rows.append([d, X, c, cneg, main, err])
        return RunOutput(["d", "X", "count", "count_neg", "main_term", "kappa"], rows, {"kappa": kappa})

    return plan, run


def cmd_plancherel(p: dict):
    vs = _float_list(p["v"])
    for v in vs:
        _require(0 < v <= 1, "v", "values must lie in (0, 1]")
    plan = {"checks": len(vs) * len(density.SymmetryType)}

    def run() -> RunOutput:
        rows = []
        worst = 0.0
        for v in vs:
            pair = density.fejer_pair(v)
            for kind in density.SymmetryType:
                lhs, rhs = density.plancherel_check(pair, kind)
                worst = max(worst, abs(lhs - rhs))
                rows.append([kind.value, v, lhs, rhs, abs(lhs - rhs)])
        return RunOutput(["type", "v", "lhs", "rhs", "residual"], rows, {"max_residual": worst})

    return plan, run


def cmd_nonvanishing(p: dict):
    vs = _fraction_list(p["v"])
    for v in vs:
        _require(0 < v < 1, "v", "values must lie in (0, 1)")
    plan = {"values": len(vs)}

    def run() -> RunOutput:
        rows = [[str(v), str(density.nonvanishing_bound(v)), float(density.nonvanishing_bound(v))] for v in vs]
        return RunOutput(["v", "bound", "bound_float"], rows,
                         {"limit_v_to_1": str(density.nonvanishing_limit()),
                          "root": str(density.nonvanishing_root())})

    return plan, run


COMMANDS: dict[str, tuple[Callable, dict[str, Any]]] = {
    "kloosterman": (cmd_kloosterman, {"q": "1", "t": "1", "cmax": 2}),
    "hsum": (cmd_hsum, {"p": "1", "s": "1", "cmax": 12}),
    "bessel-check": (cmd_bessel_check, {"numax": 49.5, "xmax": 200.0}),
    "product-formula-check": (cmd_product_formula_check, {}),
    "neumann-check": (cmd_neumann_check, {"K": 64.0, "points": 16}),
    "delta": (cmd_delta, {"m": 1, "n": 1, "k": 12, "tol": 1e-8, "budget": 3e7}),
    "delta-avg": (cmd_delta_avg, {"m": 1, "n": 1, "K": 16.0, "tol": 1e-6, "budget": 3e7}),
    "lemma21-check": (cmd_u_identity_check, {"draws": 100, "primes": "2,3,5,7,13,97"}),
    "density-spin": (cmd_density_spin, {"k": 16, "v": "0.4", "tol": 1e-6, "diag_only": "false", "budget": 3e7}),
    "density-std": (cmd_density_std, {"k": 10, "v": "0.2", "tol": 1e-6, "diag_only": "false", "budget": 2e6}),
    "density-std-avg": (cmd_density_std_avg, {"K": 24.0, "v": "0.2", "tol": 1e-6, "diag_only": "false",
                                              "budget": 3e7}),
    "lattice-count": (cmd_lattice_count, {"dmax": 20, "X": "1000,10000"}),
    "plancherel": (cmd_plancherel, {"v": "0.3,0.5,0.9"}),
    "nonvanishing": (cmd_nonvanishing, {"v": "2/5,1/2,9/10,99/100"}),
}


# --------------------------------------------------------------------------
# output


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, complex):
        return [_jsonable(x.real), _jsonable(x.imag)]
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _csv_text(out: RunOutput) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(out.header)
    for row in out.rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def write_outputs(config: RunConfig, out: RunOutput, prefix: Path) -> tuple[Path, Path]:
    prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path = prefix.with_suffix(".csv")
    json_path = prefix.with_suffix(".json")
    csv_path.write_text(_csv_text(out), encoding="utf-8")
    # timings holds deterministic work counters only, so reruns are byte-identical
    doc = {"config": {"command": config.command, "parameters": config.parameters},
           "results": out.results, "budgets": out.budgets, "timings": out.work, "version": __version__}
    json_path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path, json_path


# --------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="siegel-lowlying", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, defaults) in COMMANDS.items():
        sp = sub.add_parser(name)
        for key, default in defaults.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                            help=f"default: {default}")
        sp.add_argument("--config", default=None, help="JSON file of parameters; explicit flags win")
        sp.add_argument("--out", default=None, help="output prefix (writes PREFIX.csv and PREFIX.json)")
        sp.add_argument("--threads", type=int, default=None, help="worker cap (default: available cores)")
        sp.add_argument("--seed", type=int, default=None, help="seed recorded in the config")
        sp.add_argument("--dry-run", action="store_true", help="validate and print the work plan only")
    return parser


def _coerce(key: str, val: Any, default: Any) -> Any:
    """Give flag and config values the type of the default, so the recorded config is typed."""
    try:
        if isinstance(default, bool) or isinstance(default, str):
            return str(val).lower() if isinstance(val, bool) else str(val)
        if isinstance(default, int):
            if isinstance(val, float) and not val.is_integer():
                raise ValueError(val)
            return int(val)
        if isinstance(default, float):
            return float(val)
    except (TypeError, ValueError):
        raise ValidationError(key, f"cannot read {val!r} as {type(default).__name__}") from None
    return val


def resolve_config(args: argparse.Namespace) -> RunConfig:
    _, defaults = COMMANDS[args.command]
    params: dict[str, Any] = dict(defaults)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError("config", str(exc)) from None
        if not isinstance(loaded, dict):
            raise ValidationError("config", "must hold a JSON object")
        loaded = loaded.get("parameters", loaded)
        for key, val in loaded.items():
            if key not in defaults and key not in ("threads", "seed", "out"):
                raise ValidationError("config", f"unknown parameter {key!r}")
            params[key] = _coerce(key, val, defaults[key]) if key in defaults else val
    for key in defaults:
        val = getattr(args, key)
        if val is not None:
            params[key] = _coerce(key, val, defaults[key])
    threads = args.threads if args.threads is not None else params.get("threads", os.cpu_count() or 1)
    if int(threads) < 1:
        raise ValidationError("threads", "must be >= 1")
    params["threads"] = int(threads)
    if args.seed is not None:
        params["seed"] = args.seed
    params["out"] = args.out if args.out is not None else params.get("out", f"results/{args.command}")
    return RunConfig(args.command, params)


def run(config: RunConfig, dry_run: bool = False, stdout=None) -> int:
    stdout = stdout or sys.stdout
    func, _ = COMMANDS[config.command]
    try:
        plan, job = func(config.parameters)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, TypeError, KeyError) as exc:
        print(f"error: invalid parameter for {config.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if dry_run:
        print(json.dumps(_jsonable({"command": config.command, "parameters": config.parameters, "plan": plan}),
                         indent=2, sort_keys=True), file=stdout)
        return EXIT_OK
    # every kernel is serial, so the thread cap is honoured trivially and results do not
    # depend on it; the value is still validated and recorded in the config
    try:
        out = job()
    except specfun.ConvergenceError as exc:
        print(f"error: non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    csv_path, json_path = write_outputs(config, out, Path(config.parameters["out"]))
    print(f"wrote {csv_path} and {json_path}", file=stdout)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return run(config, args.dry_run)


if __name__ == "__main__":
    sys.exit(main())
