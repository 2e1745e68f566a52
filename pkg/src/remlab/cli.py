"""Command-line driver: ``remlab <subcommand> [flags]``.

Every run writes ``<out>/<experiment-id>/summary.json`` plus CSV tables.  The
experiment id is a prefix of the hash of the resolved configuration, and each
file starts with a commented header carrying the hash, the seed ledger and
the sign-convention note.  Only the ``# generated`` header line changes
between identical runs.

Exit status: 0 on success, 1 on errors (with a JSON error on stdout), 2 when
an exact audit fails, or any audit fails under ``--strict``.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import io
import json
import logging
import math
import os
import sys

import numpy as np

from . import spectral, verification
from ._rng import derive_key
from .dynamics import RateModel, correlation, simulate
from .environment import Environment
from .errors import DomainError, RemlabError
from .landscape import lemma21_report, top_sets, write_vertex_csv
from .scales import SIGN_NOTE, TOP_RULES, ScaleSet, scale_report

log = logging.getLogger("remlab")

SUBCOMMANDS = ("scales", "landscape", "simulate", "correlation", "spectral", "verify", "sweep")
SUITES = ("a0", "b1", "b2", "b3", "bn", "aging", "subordinator")
SWEEP_AXES = ("n", "beta", "epsilon", "theta_n")

DEFAULTS = {
    "n": 12,
    "beta": None,
    "beta_ratio": 1.5,
    "epsilon": 0.4,
    "c_star": 2.5,
    "theta_n": 1.0,
    "seed": 0,
    "replicas": 10_000,
    "top_rule": None,
    "strict": False,
    "override": False,
    "threads": None,
    "out": "out",
    "panel": 1,
    "t": 1.0,
    "s": 1.0,
    "start": 0,
    "horizon": 10.0,
    "mode": "exploration",
    "suite": "all",
    "u_grid": list(verification.DEFAULT_U_GRID),
    "lambda_grid": list(verification.DEFAULT_LAMBDAS),
    "pairs": [[1.0, 1.0], [2.0, 2.0]],
    "eps_grid": [0.05, 0.1, 0.2, 0.5],
    "slack": 2.0,
    "axis": None,
    "values": None,
    "command": "scales",
}


class UsageError(RemlabError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _csv_floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _csv_ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="remlab", description="Aging experiments for Metropolis dynamics of the REM.")
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON file; flags override its entries")
    p.add_argument("--n", type=_csv_ints, help="dimension (comma list for verify)")
    p.add_argument("--beta", type=float, help="inverse temperature")
    p.add_argument("--beta-ratio", type=float, dest="beta_ratio",
                   help="beta as a multiple of beta_c(epsilon) when --beta is absent")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--c-star", type=float, dest="c_star")
    p.add_argument("--theta", type=float, dest="theta_n", help="block length theta_n")
    p.add_argument("--top-rule", choices=TOP_RULES, dest="top_rule")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--panel", type=int, help="independent environments per point")
    p.add_argument("--strict", action="store_true", default=None)
    p.add_argument("--override", action="store_true", default=None,
                   help="run outside the valid regime (outputs carry a warning)")
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.add_argument("--t", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--start", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--mode", choices=("metropolis", "exploration"))
    p.add_argument("--suite", choices=SUITES + ("all",))
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--values", type=_csv_floats)
    p.add_argument("--sweep-command", dest="command_sweep",
                   choices=("scales", "landscape", "spectral", "verify"))
    return p


def resolve_config(argv) -> dict:
    args = build_parser().parse_args(argv)
    cfg = dict(DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            cfg.update(json.load(fh))
    for k, v in vars(args).items():
        if k in ("config", "command", "command_sweep") or v is None:
            continue
        cfg[k] = v
    cfg["subcommand"] = args.command
    if args.command_sweep:
        cfg["command"] = args.command_sweep
    if isinstance(cfg["n"], int):
        cfg["n"] = [cfg["n"]]
    return cfg


def config_hash(cfg: dict) -> str:
    body = {k: v for k, v in cfg.items() if k not in ("out", "threads")}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def _beta(cfg, epsilon=None) -> float:
    from .scales import beta_c

    if cfg.get("beta") is not None:
        return float(cfg["beta"])
    return float(cfg["beta_ratio"]) * beta_c(epsilon if epsilon is not None else cfg["epsilon"])


def build_scales(cfg: dict, n: int) -> ScaleSet:
    rule = cfg.get("top_rule") or "eps_n"
    s = ScaleSet.build(n, _beta(cfg), cfg["epsilon"], cfg["c_star"], cfg["theta_n"], rule)
    if not s.valid and not cfg["override"]:
        raise DomainError(
            f"invalid regime at n={n}: {'; '.join(s.warnings)}; rerun with --override")
    return s


class Run:
    """Output directory, seed ledger and audit bookkeeping for one invocation."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.hash = config_hash(cfg)
        self.dir = os.path.join(cfg["out"], self.hash[:12])
        self.streams: dict = {}
        self.audits: list = []
        self.banner = []

    def stream(self, label: str) -> str:
        key = f"{derive_key(self.cfg['seed'], label):016x}"
        self.streams[label] = key
        return label

    def audit(self, name: str, passed: bool, kind: str = "asymptotic", **detail):
        self.audits.append({"name": name, "pass": bool(passed), "kind": kind, **detail})

    def header(self) -> list[str]:
        ledger = json.dumps({"seed": self.cfg["seed"], "streams": self.streams}, sort_keys=True)
        lines = [f"# config_hash={self.hash}", f"# seed_ledger={ledger}", f"# note={SIGN_NOTE}"]
        lines += [f"# warning={b}" for b in self.banner]
        lines.append(f"# generated={datetime.datetime.now(datetime.timezone.utc).isoformat()}")
        return lines

    def write_csv(self, name: str, columns, rows) -> str:
        os.makedirs(self.dir, exist_ok=True)
        path = os.path.join(self.dir, name)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        with open(path, "w") as fh:
            fh.write("\n".join(self.header()) + "\n")
            fh.write(buf.getvalue())
        return path

    def status(self) -> int:
        bad = [a for a in self.audits if not a["pass"]]
        if any(a["kind"] == "exact" for a in bad):
            return 2
        if bad and self.cfg["strict"]:
            return 2
        for a in bad:
            log.warning("audit %s failed (lenient)", a["name"])
        return 0

    def finish(self, summary: dict) -> int:
        code = self.status()
        doc = {
            "config_hash": self.hash,
            "config": self.cfg,
            "seed_ledger": {"seed": self.cfg["seed"], "streams": self.streams},
            "note": SIGN_NOTE,
            "warnings": self.banner,
            "audits": self.audits,
            "exit_status": code,
            "result": summary,
        }
        os.makedirs(self.dir, exist_ok=True)
        with open(os.path.join(self.dir, "summary.json"), "w") as fh:
            json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        print(json.dumps({"summary": os.path.join(self.dir, "summary.json"),
                          "exit_status": code}))
        return code


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else None
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def _scale_gate(run: Run, s: ScaleSet):
    if not s.valid:
        run.banner.append(f"n={s.n}: {'; '.join(s.warnings)} (override in effect)")


def _environment(cfg, s: ScaleSet, k: int = 0) -> Environment:
    return Environment(s.n, s.beta, seed=cfg["seed"] + k)


# --------------------------------------------------------------------------- subcommands


def cmd_scales(run: Run) -> dict:
    cfg = run.cfg
    out = {}
    rows = []
    for n in cfg["n"]:
        rule = cfg.get("top_rule") or "eps_n"
        s = ScaleSet.build(n, _beta(cfg), cfg["epsilon"], cfg["c_star"], cfg["theta_n"], rule)
        rep = scale_report(s)
        run.audit(f"n={n}:threshold_residuals", max(rep["residuals"].values()) <= 1e-9, "exact")
        run.audit(f"n={n}:delta_identity", rep["delta_identity_rel_gap"] <= 1e-12, "exact")
        run.audit(f"n={n}:theta_window", rep["theta_validation"]["pass"])
        _scale_gate(run, s)
        out[str(n)] = rep
        for k, v in s.as_dict().items():
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                rows.append((n, k, v))
    run.write_csv("scales.csv", ["n", "quantity", "value"], rows)
    return out


def cmd_landscape(run: Run) -> dict:
    cfg = run.cfg
    out = {}
    for n in cfg["n"]:
        s = build_scales(cfg, n)
        _scale_gate(run, s)
        env = _environment(cfg, s)
        top = top_sets(env, s, allow_invalid=cfg["override"])
        rep = lemma21_report(env, s, top)
        chain = (set(top.i_star) <= set(top.t_circ) <= set(top.t_n)
                 <= set(top.v_star.members.tolist()))
        run.audit(f"n={n}:inclusion_chain", chain, "exact")
        run.audit(f"n={n}:hills_avoid_maxima", rep["sizes"]["V_bar_star_and_M"]["observed"] == 0)
        os.makedirs(run.dir, exist_ok=True)
        write_vertex_csv(os.path.join(run.dir, f"vertices_n{n}.csv"), env, top)
        out[str(n)] = rep
        run.write_csv(f"landscape_n{n}.csv", ["set", "observed", "predicted", "ratio"],
                      [(k, v["observed"], v["predicted"], v["ratio"])
                       for k, v in rep["sizes"].items()])
    return out


def cmd_simulate(run: Run) -> dict:
    cfg = run.cfg
    n = cfg["n"][0]
    s = build_scales(cfg, n)
    _scale_gate(run, s)
    env = _environment(cfg, s)
    model = RateModel(env, s.eta, cfg["mode"])
    key = derive_key(cfg["seed"], run.stream("simulate"))
    traj = simulate(model, cfg["start"], cfg["horizon"], key)
    clock = traj.clock(np.array([traj.t_end]))[0] if cfg["mode"] == "exploration" else None
    run.write_csv("trajectory.csv", ["state", "hold"], zip(traj.states, traj.holds))
    lt_err = abs(sum(traj.local_times.values()) - traj.t_end) / traj.t_end
    run.audit("local_time_closure", lt_err <= 1e-9, "exact", value=lt_err)
    return {"events": traj.events, "t_end": traj.t_end, "clock_end": clock,
            "distinct_states": len(traj.local_times)}


def cmd_correlation(run: Run) -> dict:
    cfg = run.cfg
    out = {}
    for n in cfg["n"]:
        s = build_scales(cfg, n)
        _scale_gate(run, s)
        models = [RateModel(_environment(cfg, s, k), s.eta) for k in range(cfg["panel"])]
        rows = []
        for k, m in enumerate(models):
            e = correlation(m, s.c_n, cfg["t"], cfg["s"], cfg["replicas"], cfg["seed"],
                            label=run.stream(f"aging:{k}"), threads=cfg["threads"])
            rows.append((k, e.estimate, e.ci[0], e.ci[1], e.completed, e.censored))
        run.write_csv(f"correlation_n{n}.csv",
                      ["environment", "estimate", "ci_low", "ci_high", "completed", "censored"],
                      rows)
        limit = verification.arcsine_cdf(s.alpha, cfg["t"] / (cfg["t"] + cfg["s"])) \
            if s.aging_regime else None
        out[str(n)] = {"estimates": [r[1] for r in rows], "mean": float(np.mean([r[1] for r in rows])),
                       "limit": limit}
    return out


def cmd_spectral(run: Run) -> dict:
    cfg = run.cfg
    out = {}
    for n in cfg["n"]:
        s = build_scales(cfg, n)
        _scale_gate(run, s)
        env = _environment(cfg, s)
        model = RateModel(env, s.eta)
        gen = spectral.build_generator(model, s.nu_bar)
        gap = spectral.spectral_gap(gen)
        pb = spectral.poincare_bound(gen, spectral.canonical_paths(model))
        run.audit(f"n={n}:row_sums", gen.row_sum_residual() <= 1e-12, "exact")
        run.audit(f"n={n}:reversibility", gen.reversibility_residual() <= 1e-12, "exact")
        run.audit(f"n={n}:poincare_valid", pb.bound >= (1 - 1e-9) / gap, "exact")
        run.audit(f"n={n}:gap_vs_kappa_tilde", 1 / gap <= 4 * s.kappa_tilde)
        run.audit(f"n={n}:paths_good", pb.all_good)
        rep = {"gap": gap, "inverse_gap": 1 / gap, "poincare_bound": pb.bound,
               "argmax_edge": list(pb.edge), "bad_paths": pb.bad_paths, "rules": pb.rules,
               "kappa_tilde": s.kappa_tilde}
        if n <= 10:
            mix = spectral.mixing_check(gen, [0.0, s.kappa_n])
            rep["mixing"] = mix
            run.audit(f"n={n}:mixing_tv", all(r["pass"] for r in mix["rows"]), "exact")
            top = top_sets(env, s, allow_invalid=cfg["override"])
            a = top.t_circ if len(top.t_circ) else top.t_n
            audit = spectral.bound_audit(gen, a, s.r_star, s.kappa_tilde, s.kappa_n,
                                         np.linspace(0, 4 * s.kappa_tilde, 9), s.alpha_n,
                                         slack=cfg["slack"])
            rep["bound_audit"] = audit
            run.audit(f"n={n}:mean_upper", audit["mean_upper"]["pass"])
            run.audit(f"n={n}:mean_lower", audit["mean_lower"]["pass"])
            start = int(np.argmin(np.where(np.isin(np.arange(env.size), a), np.inf, env.taus)))
            grid = np.linspace(0, 2 * spectral.hitting_mean(gen, a, start), 41)
            law = spectral.hitting_density(gen, a, start, grid)
            run.write_csv(f"density_n{n}.csv", ["t", "h", "cdf"],
                          zip(law.t, law.density, law.cdf))
        out[str(n)] = rep
    return out


def _verify_point(run: Run, n: int, suites) -> dict:
    cfg = run.cfg
    s = build_scales(cfg, n)
    _scale_gate(run, s)
    rep: dict = {"n": n, "theta_n": s.theta_n, "alpha_n": s.alpha_n, "alpha": s.alpha}
    R = cfg["replicas"]
    per_env = []
    for k in range(cfg["panel"]):
        env = _environment(cfg, s, k)
        model = RateModel(env, s.eta)
        top = top_sets(env, s, allow_invalid=cfg["override"])
        seed = cfg["seed"] + k
        sample = verification.sample_windows(model, s, R, seed, run.stream(f"windows:{k}"),
                                             top=top, threads=cfg["threads"])
        bn = verification.bn_estimator(model, s, top, sample=sample)
        sk = s.with_bn(bn.b_n)
        e = {"b_n": bn.b_n, "b_n_circ": bn.b_n_circ, "k_n": sk.k_n(cfg["t"])}
        if "bn" in suites:
            e["corridor"] = verification.bn_corridor(sk, bn.b_n)
            e["ordered"] = bn.b_n >= bn.b_n_circ
        if suites & {"b1", "b2"}:
            nu = verification.nu_estimator(model, sk, cfg["t"], cfg["u_grid"], sample=sample)
            e["nu"] = nu
        if "b2" in suites:
            e["sigma"] = verification.sigma_estimator(model, sk, cfg["t"], cfg["u_grid"],
                                                      first=sample, seed=seed,
                                                      threads=cfg["threads"])
        if "b3" in suites:
            e["truncated"] = verification.truncated_mean(model, sk, cfg["t"], cfg["eps_grid"],
                                                         sample=sample)
        if "a0" in suites:
            e["a0"] = verification.a0_check(model, sk, cfg["u_grid"], R, seed,
                                            threads=cfg["threads"])
        if "subordinator" in suites:
            e["blocked"] = verification.blocked_sums(model, sk, cfg["t"], R, seed,
                                                     threads=cfg["threads"])
        e["model"] = model
        per_env.append(e)
    rep["b_n"] = float(np.mean([e["b_n"] for e in per_env]))
    rep["b_n_circ"] = float(np.mean([e["b_n_circ"] for e in per_env]))
    if "bn" in suites:
        rep["bn"] = [{"b_n": e["b_n"], "b_n_circ": e["b_n_circ"], "corridor": e["corridor"]}
                     for e in per_env]
        run.audit(f"n={n}:bn_corridor", all(e["corridor"]["pass"] for e in per_env))
        run.audit(f"n={n}:bn_ordered", all(e["ordered"] for e in per_env))
    u = np.sort(np.asarray(cfg["u_grid"], dtype=float))

    def panel(key, attr="raw"):
        return np.mean([getattr(e[key], attr) for e in per_env], axis=0)

    if "b1" in suites or "b2" in suites:
        nu = panel("nu")
        rep["nu"] = {"u": u, "value": nu}
        if "b1" in suites:
            m = (u >= 0.5) & (u <= 4) & (nu > 0)
            slope = float(np.polyfit(np.log(u[m]), np.log(nu[m]), 1)[0]) if m.sum() > 1 else math.nan
            rep["b1_slope"] = slope
            run.audit(f"n={n}:b1_slope", abs(slope + s.alpha_n) <= 0.25, slope=slope)
            run.write_csv(f"nu_n{n}.csv", ["u", "value", "target"],
                          zip(u, nu, cfg["t"] * u ** -s.alpha))
    if "b2" in suites:
        sig = panel("sigma")
        rep["sigma"] = {"u": u, "value": sig}
        run.audit(f"n={n}:sigma_below_nu", bool(np.all(sig <= rep["nu"]["value"] + 1e-15)),
                  "exact")
        i1 = int(np.argmin(np.abs(u - 1.0)))
        rep["sigma_over_nu_at_1"] = float(sig[i1] / rep["nu"]["value"][i1]) \
            if rep["nu"]["value"][i1] > 0 else math.nan
        run.write_csv(f"sigma_n{n}.csv", ["u", "value"], zip(u, sig))
    if "b3" in suites:
        tm = panel("truncated")
        rep["truncated"] = {"eps": sorted(cfg["eps_grid"]), "value": tm}
        run.write_csv(f"truncated_n{n}.csv", ["eps", "value"], zip(sorted(cfg["eps_grid"]), tm))
    if "a0" in suites:
        a0 = panel("a0")
        rep["a0"] = {"u": u, "value": a0}
        run.write_csv(f"a0_n{n}.csv", ["u", "value"], zip(u, a0))
    if "subordinator" in suites:
        if s.aging_regime:
            devs = [verification.subordinator_marginal_check(e["blocked"], s.alpha, cfg["t"],
                                                             cfg["lambda_grid"], seed=cfg["seed"])
                    for e in per_env]
            rep["subordinator"] = {"lambda": cfg["lambda_grid"],
                                   "deviation": np.mean([d["deviation"] for d in devs], axis=0),
                                   "per_environment": devs}
        else:
            rep["subordinator"] = {"skipped": "alpha >= 1"}
    if "aging" in suites:
        if s.aging_regime:
            rep["aging"] = verification.aging_report([e["model"] for e in per_env], s.c_n,
                                                     s.alpha, cfg["pairs"], R, cfg["seed"],
                                                     threads=cfg["threads"])
            for r in rep["aging"]["ratio_consistency"]:
                run.audit(f"n={n}:aging_ratio", r["pass"], difference=r["difference"])
        else:
            rep["aging"] = {"skipped": "alpha >= 1"}
    return rep


def _trend(run: Run, reps: list, name: str, getter):
    vals = [getter(r) for r in reps]
    ok = verification.trend_decreasing(vals)
    run.audit(f"trend:{name}", ok, values=vals)
    return {"values": vals, "decreasing": ok}


def cmd_verify(run: Run) -> dict:
    cfg = run.cfg
    suites = set(SUITES) if cfg["suite"] == "all" else {cfg["suite"]}
    reps = [_verify_point(run, n, suites) for n in cfg["n"]]
    trends = {}
    if len(reps) > 1:
        if "b2" in suites:
            trends["sigma_over_nu"] = _trend(run, reps, "sigma_over_nu",
                                             lambda r: r["sigma_over_nu_at_1"])
        if "b3" in suites:
            trends["truncated_mean"] = _trend(
                run, reps, "truncated_mean",
                lambda r: float(np.interp(0.1, r["truncated"]["eps"], r["truncated"]["value"])))
        if "a0" in suites:
            trends["a0"] = _trend(run, reps, "a0", lambda r: float(
                np.interp(1.0, r["a0"]["u"], r["a0"]["value"])))
        if "aging" in suites and all("rows" in r.get("aging", {}) for r in reps):
            trends["aging"] = _trend(run, reps, "aging", lambda r: r["aging"]["rows"][0]["deviation"])
        if "subordinator" in suites and all("deviation" in r.get("subordinator", {}) for r in reps):
            trends["subordinator"] = _trend(run, reps, "subordinator",
                                            lambda r: float(np.max(r["subordinator"]["deviation"])))
    rows = []
    for r in reps:
        for k in ("b_n", "b_n_circ", "b1_slope", "sigma_over_nu_at_1"):
            if k in r:
                rows.append((r["n"], k, r[k]))
    run.write_csv("verify.csv", ["n", "metric", "value"], rows)
    return {"points": reps, "trends": trends}


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, (bool, np.bool_)):
        out.append((prefix, int(obj)))
    elif isinstance(obj, (int, float, np.integer, np.floating)):
        out.append((prefix, obj))


def cmd_sweep(run: Run) -> dict:
    cfg = run.cfg
    axis, values = cfg["axis"], cfg["values"]
    if not axis:
        raise UsageError("sweep needs --axis")
    if not values:
        raise UsageError("sweep needs a nonempty --values list")
    rows, points = [], []
    for v in values:
        sub = dict(cfg)
        sub["subcommand"] = cfg["command"]
        if axis == "n":
            sub["n"] = [int(v)]
        else:
            sub[axis] = float(v)
            if axis == "beta":
                sub["beta"] = float(v)
        child = Run.__new__(Run)
        child.cfg, child.hash, child.dir = sub, run.hash, run.dir
        child.streams, child.audits, child.banner = run.streams, [], run.banner
        try:
            res = COMMANDS[cfg["command"]](child)
            flat = []
            _flatten("", _jsonable(res), flat)
            rows += [(v, k, x) for k, x in flat]
            points.append({"value": v, "ok": True, "audits": child.audits})
        except RemlabError as exc:
            points.append({"value": v, "ok": False, "error": f"{type(exc).__name__}: {exc}"})
            rows.append((v, "error", str(exc)))
    run.write_csv(f"sweep_{axis}.csv", [axis, "metric", "value"], rows)
    return {"axis": axis, "points": points}


COMMANDS = {
    "scales": cmd_scales,
    "landscape": cmd_landscape,
    "simulate": cmd_simulate,
    "correlation": cmd_correlation,
    "spectral": cmd_spectral,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def _strip(rep):
    """Drop non-serializable helpers before writing the summary."""
    if isinstance(rep, dict):
        return {k: _strip(v) for k, v in rep.items() if k != "model"}
    if isinstance(rep, list):
        return [_strip(v) for v in rep]
    if isinstance(rep, verification.TailEstimate):
        return {"grid": rep.grid, "raw": rep.raw, "value": rep.values, "ci": rep.ci_half_widths}
    return rep


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(sys.argv[1:] if argv is None else argv)
        if cfg.get("threads"):
            os.environ["REM_LAB_THREADS"] = str(cfg["threads"])
        run = Run(cfg)
        result = COMMANDS[cfg["subcommand"]](run)
        return run.finish(_strip(result))
    except (RemlabError, OSError, ValueError, OverflowError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 1


if __name__ == "__main__":
    sys.exit(main())
