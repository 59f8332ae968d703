"""Command-line entry point.

    hfsemi simulate --n 23400 model=heston jumps=5 --out run1
    hfsemi estimate --input run1/obs.csv estimator=all
    hfsemi test --input run1/obs.csv test=sequential --exit-on-reject
    hfsemi rough --input vol.csv L=100
    hfsemi mc study=limit_laws --reps 100000

Parameters come from built-in defaults, then ``--config`` (flat key=value
lines), then the command line (flags and trailing ``key=value`` pairs).
Unknown keys are rejected. Every run writes a JSON report echoing the full
resolved configuration.

Exit codes: 0 success, 1 error, 2 test rejection under ``--exit-on-reject``.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

from . import io as hio
from . import mc_harness as mc
from .distributions import DistributionError, DistributionId
from .jump_tests import (
    exp_gap_test,
    gumbel_test,
    lomn_gumbel_test,
    normalize_increments,
    renyi_test,
    sequential_detect,
)
from .process_sim import (
    GridSpec,
    HestonParams,
    JumpSpec,
    NoiseSpec,
    add_jumps,
    observe,
    simulate_diffusion,
    simulate_fractional_logvol,
    simulate_heston,
)
from .rng import DEFAULT_SEED, SeedSpec
from .rough_vol import VolSeries, hurst_estimate
from .vol_estimators import (
    TruncationSpec,
    block_minima,
    choose_hn,
    lomn_block_spot,
    lomn_spot_vol,
    lomn_truncated_spot_vol,
    realized_volatility,
    spot_vol,
    truncated_rv,
    truncated_spot_vol,
)

__all__ = ["main", "RunConfig", "ConfigError", "build_parser", "resolve_config"]

EXIT_OK, EXIT_ERROR, EXIT_REJECT = 0, 1, 2


class ConfigError(ValueError):
    pass


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s):
    return None if s in (None, "", "none", "None") else float(s)


def _opt_int(s):
    return None if s in (None, "", "none", "None") else int(s)


def _floats(s):
    if isinstance(s, (list, tuple)):
        return [float(x) for x in s]
    return [float(x) for x in str(s).split(",") if x.strip()]


COMMON = {
    "seed": (int, DEFAULT_SEED),
    "n": (_opt_int, None),
    "reps": (_opt_int, None),
    "full": (_bool, False),
    "alpha": (float, 0.05),
    "out": (str, "."),
    "exit_on_reject": (_bool, False),
    "input": (str, None),
}

SCHEMAS = {
    "simulate": {
        "model": (str, "bm"), "T": (float, 1.0), "sigma": (float, 1.0), "mu": (float, 0.0),
        "kappa": (float, 5.0), "theta": (float, 0.04), "xi": (float, 0.5), "rho": (float, -0.5),
        "v0": (float, 0.04), "jumps": (int, 0), "intensity": (float, 0.0),
        "jump_scale": (float, 0.05), "jump_size": (_opt_float, None),
        "noise": (str, "none"), "eta": (float, 10.0), "H": (float, 0.16), "nu": (float, 0.3),
    },
    "estimate": {
        "estimator": (str, "all"), "s": (float, 0.5), "spot_alpha": (float, 0.5),
        "side": (str, "right"), "tau": (float, 0.49), "c_u": (float, 4.0),
        "mode": (str, "balanced"), "K_n": (_opt_int, None), "eta": (_opt_float, None),
        "psi_paths": (int, 10_000),
    },
    "test": {
        "test": (str, "gumbel"), "norm_alpha": (float, 1.0), "r": (int, 1),
        "tail": (str, "upper"), "base": (str, "gumbel"), "guard": (_bool, True),
        "tau": (float, 0.49), "c_u": (float, 4.0),
    },
    "rough": {
        "q_grid": (_floats, "0.5,1,1.5,2,3"), "L": (int, 100), "delta": (float, 1.0),
        "squared": (_bool, False), "H": (float, 0.16), "nu": (float, 0.3),
    },
    "mc": {
        "study": (str, "limit_laws"), "statistic": (str, "all"), "pipeline": (_bool, False),
        "test_id": (str, "gumbel"), "jump_grid": (_floats, "0,0.05,0.1"),
        "x": (_floats, "-0.5,-3"), "y": (float, 0.0), "steps": (int, 10_000),
        "h_n": (float, 0.1), "sigma": (float, 1.0), "eta": (float, 10.0),
        "theta": (float, 5.0), "workers": (int, 1), "chunk": (_opt_int, None),
    },
}

DEFAULT_N = {"simulate": 23_400, "mc": 3_600, "rough": 7_021}


@dataclass
class RunConfig:
    subcommand: str
    values: dict

    def __getitem__(self, k):
        return self.values[k]

    @property
    def seed(self) -> SeedSpec:
        return SeedSpec(self.values["seed"])

    def report_header(self) -> dict:
        return {"subcommand": self.subcommand, "config": dict(self.values)}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hfsemi", description="High-frequency semimartingale toolkit")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name, schema in SCHEMAS.items():
        keys = ", ".join(f"{k}={d}" for k, (_, d) in schema.items())
        sp = sub.add_parser(name, epilog=f"keys (default): {keys}")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--n", type=int)
        sp.add_argument("--reps", type=int)
        sp.add_argument("--full", action="store_true", default=None)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--config")
        sp.add_argument("--out")
        sp.add_argument("--exit-on-reject", action="store_true", default=None)
        sp.add_argument("--input")
        sp.add_argument("overrides", nargs="*", metavar="key=value")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    sc = args.subcommand
    schema = {**COMMON, **SCHEMAS[sc]}
    raw = {k: d for k, (_, d) in schema.items()}
    layers = []
    if args.config:
        layers.append(("config file", hio.read_config(args.config)))
    kv = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        kv[k.strip().replace("-", "_")] = v.strip()
    flags = {k: getattr(args, k) for k in COMMON if getattr(args, k, None) is not None}
    layers += [("command line", kv), ("command line", flags)]
    for origin, layer in layers:
        for k, v in layer.items():
            if k not in schema:
                raise ConfigError(f"unknown parameter {k!r} ({origin}); "
                                  f"valid for {sc}: {', '.join(sorted(schema))}")
            raw[k] = v
    vals = {}
    for k, (conv, _) in schema.items():
        v = raw[k]
        try:
            vals[k] = None if v is None else conv(v)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad value for {k}: {v!r} ({e})") from None
    if vals["n"] is None and sc in DEFAULT_N:
        vals["n"] = DEFAULT_N[sc]
    return RunConfig(sc, vals)


def _out(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg["out"], name)


def _load_obs(cfg: RunConfig):
    if not cfg["input"]:
        raise ConfigError("--input is required")
    tbl = hio.read_series_csv(cfg["input"])
    return hio.to_observations(tbl, cfg["input"])


# ---------------------------------------------------------------------------
# Subcommands


def cmd_simulate(cfg: RunConfig) -> int:
    seed = cfg.seed
    n, T = cfg["n"], cfg["T"]
    model = cfg["model"]
    if model == "fbm_logvol":
        vol = simulate_fractional_logvol(n, cfg["H"], cfg["nu"], seed=seed.child(0))
        path = _out(cfg, "vol.csv")
        os.makedirs(cfg["out"], exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("index,vol\n")
            for j, v in enumerate(vol):
                fh.write(f"{j},{hio.fmt(v)}\n")
        hio.write_json(_out(cfg, "simulate.json"), {**cfg.report_header(), "files": {"vol": path}})
        print(f"wrote {path} ({len(vol)} rows)")
        return EXIT_OK
    grid = GridSpec(n, T)
    if model == "bm":
        p = simulate_diffusion(grid, cfg["mu"], cfg["sigma"], seed.child(0))
    elif model == "heston":
        hp = HestonParams(cfg["kappa"], cfg["theta"], cfg["xi"], cfg["rho"], cfg["v0"], cfg["mu"])
        p = simulate_heston(grid, hp, seed.child(0))
    else:
        raise ConfigError(f"unknown model {model!r} (bm, heston, fbm_logvol)")
    if cfg["jumps"] or cfg["intensity"]:
        if cfg["jump_size"] is not None:
            # fixed magnitude, random sign and uniform times
            rng = seed.child(1).generator()
            k = cfg["jumps"] or int(rng.poisson(cfg["intensity"] * T))
            times = rng.uniform(0.0, T, size=k)
            signs = rng.choice([-1.0, 1.0], size=k)
            js = JumpSpec(fixed_jumps=tuple(zip(times, signs * cfg["jump_size"])))
        else:
            js = JumpSpec(cfg["intensity"], DistributionId.laplace(cfg["jump_scale"]),
                          count=cfg["jumps"] or None)
        p = add_jumps(p, js, seed.child(1))
    if cfg["noise"] == "none":
        obs = p.as_observations()
    elif cfg["noise"] == "lomn":
        obs = observe(p, NoiseSpec.lomn_exponential(cfg["eta"]), seed.child(2))
    else:
        raise ConfigError(f"unknown noise {cfg['noise']!r} (none, lomn)")
    files = {"path": _out(cfg, "path.csv"), "obs": _out(cfg, "obs.csv"),
             "jumps": _out(cfg, "jumps.csv")}
    hio.write_path_csv(files["path"], p)
    hio.write_observations_csv(files["obs"], obs)
    hio.write_jump_ledger(files["jumps"], p.jumps)
    rep = {**cfg.report_header(), "files": files, "seed_lineage": seed.lineage(),
           "integrated_variance": p.integrated_variance(),
           "jump_ledger": [{"time": t, "size": b} for t, b in p.jumps]}
    hio.write_json(_out(cfg, "simulate.json"), rep)
    print(f"wrote {files['path']} and {files['obs']} ({n + 1} rows)")
    print(f"integrated variance {p.integrated_variance():.6g}; {len(p.jumps)} jumps")
    for t, b in p.jumps:
        print(f"  jump t={t:.6f} size={b:+.6f}")
    return EXIT_OK


def _record(name, value, obs, params, cfg, **extra):
    return {"estimator": name, "value": value, "n": obs.n, "params": params,
            "seed_lineage": cfg.seed.lineage(), **extra}


def cmd_estimate(cfg: RunConfig) -> int:
    obs = _load_obs(cfg)
    which = cfg["estimator"]
    names = ["rv", "trv", "spot", "trspot"] if which == "all" else [which]
    trunc = TruncationSpec(cfg["tau"], cfg["c_u"])
    recs = []
    for nm in names:
        if nm == "rv":
            recs.append(_record("rv", realized_volatility(obs), obs, {}, cfg))
        elif nm == "trv":
            recs.append(_record("trv", truncated_rv(obs, trunc), obs,
                                {"tau": trunc.tau, "c_u": trunc.c_u}, cfg))
        elif nm in ("spot", "trspot"):
            if nm == "spot":
                e = spot_vol(obs, cfg["s"], cfg["spot_alpha"], cfg["side"])
            else:
                e = truncated_spot_vol(obs, cfg["s"], cfg["spot_alpha"], trunc, cfg["side"])
            recs.append(_record(nm, e.value, obs, {"s": e.s, "alpha": e.alpha_used, "k_n": e.k_n,
                                                   "side": cfg["side"]}, cfg))
        elif nm in ("lomn", "lomn_trunc"):
            h = choose_hn(obs.n, cfg["mode"])
            bm = block_minima(obs, h)
            psi = None
            if cfg["eta"] is not None:
                psi = NoiseSpec.lomn_exponential(cfg["eta"])
            K = cfg["K_n"]
            if nm == "lomn":
                e = lomn_spot_vol(bm, cfg["s"], K, psi)
            else:
                e = lomn_truncated_spot_vol(bm, cfg["s"], K, psi, trunc)
            recs.append(_record(nm, e.value, obs, {"tau": cfg["s"], "K_n": e.k_n, "h_n": h,
                                                   "corrected": psi is not None}, cfg, raw=e.raw))
        else:
            raise ConfigError(f"unknown estimator {nm!r}")
    path = _out(cfg, "estimate.json")
    hio.write_json(path, {**cfg.report_header(), "estimates": recs})
    for r in recs:
        print(f"{r['estimator']}: {r['value']:.10g}")
    print(f"report: {path}")
    return EXIT_OK


def cmd_test(cfg: RunConfig) -> int:
    obs = _load_obs(cfg)
    t = cfg["test"]
    a = cfg["alpha"]
    trunc = TruncationSpec(cfg["tau"], cfg["c_u"])
    if t == "lomn_gumbel":
        h = choose_hn(obs.n, "test")
        bm = block_minima(obs, h)
        rep = lomn_gumbel_test(bm, lomn_block_spot(bm, trunc=trunc), a).to_dict()
        reject = rep["reject"]
    else:
        ni = normalize_increments(obs, cfg["norm_alpha"], cfg["guard"], trunc)
        if t == "gumbel":
            rep = gumbel_test(ni, a).to_dict()
        elif t == "renyi":
            rep = renyi_test(ni, a).to_dict()
        elif t == "exp_gap":
            rep = exp_gap_test(ni, a, cfg["r"], cfg["tail"]).to_dict()
        elif t == "sequential":
            det = sequential_detect(ni, a, cfg["base"])
            rep = {"test_id": f"sequential_{cfg['base']}", "alpha": a, "reject": bool(det),
                   "detected": det}
        else:
            raise ConfigError(f"unknown test {t!r}")
        reject = rep["reject"]
    path = _out(cfg, "test.json")
    hio.write_json(path, {**cfg.report_header(), "report": rep})
    word = "REJECT" if reject else "accept"
    extra = f", {len(rep['detected'])} detections" if rep.get("detected") else ""
    stat = f" stat={rep['statistic']:.4f} crit={rep['critical_value']:.4f}" if "statistic" in rep else ""
    print(f"{rep['test_id']}: {word} H0 at alpha={a:g}{stat}{extra}; report: {path}")
    return EXIT_REJECT if (reject and cfg["exit_on_reject"]) else EXIT_OK


def cmd_rough(cfg: RunConfig) -> int:
    if cfg["input"]:
        tbl = hio.read_series_csv(cfg["input"], numeric_time=False)
        if tbl.labels is None:
            hio.check_equidistant(tbl.times)
        vs = VolSeries(tbl.values, cfg["delta"], cfg["squared"])
        source = cfg["input"]
    else:
        vol = simulate_fractional_logvol(cfg["n"], cfg["H"], cfg["nu"], seed=cfg.seed.child(0))
        vs = VolSeries(vol, cfg["delta"])
        source = "simulated fBm log-volatility"
    fit = hurst_estimate(vs, cfg["q_grid"], cfg["L"])
    os.makedirs(cfg["out"], exist_ok=True)
    mpath, zpath = _out(cfg, "rough_m.csv"), _out(cfg, "rough_zeta.csv")
    with open(mpath, "w", encoding="utf-8") as fh:
        fh.write("q,lag,log_lag_delta,m,log_m\n")
        for q, l, ll, m, lm in fit.m_rows():
            fh.write(f"{hio.fmt(q)},{l},{hio.fmt(ll)},{hio.fmt(m)},{hio.fmt(lm)}\n")
    with open(zpath, "w", encoding="utf-8") as fh:
        fh.write("q,zeta,intercept,r2\n")
        for q, z, c, r in zip(fit.q_grid, fit.zeta, fit.intercepts, fit.r2):
            fh.write(f"{hio.fmt(q)},{hio.fmt(z)},{hio.fmt(c)},{hio.fmt(r)}\n")
    path = _out(cfg, "rough.json")
    hio.write_json(path, {**cfg.report_header(), "source": source, "fit": fit.to_dict(),
                          "files": {"m_table": mpath, "zeta": zpath}})
    print(f"H_hat = {fit.H_hat:.4f} (series length {vs.n + 1}); report: {path}")
    return EXIT_OK


def cmd_mc(cfg: RunConfig) -> int:
    study = cfg["study"]
    seed = cfg.seed
    full = cfg["full"]
    w = cfg["workers"]
    reps = cfg["reps"]
    out = cfg["out"]
    written = []

    def R(default):
        return reps if reps is not None else (mc.FULL_R if full else default)

    if study == "limit_laws":
        stats = mc.STATISTICS if cfg["statistic"] == "all" else tuple(cfg["statistic"].split(","))
        spec = mc.ExperimentSpec("limit_laws", cfg["n"], R(mc.DESK_R), seed,
                                 {"pipeline": cfg["pipeline"]}, chunk=cfg["chunk"] or 1000)
        res = mc.run_statistic_studies(spec, stats, w)
        for s, summ in res.items():
            written.append(summ.write(out, f"limit_laws_{s}")["json"])
            print(f"{s}: max |empirical - theoretical| over 90..99% = {summ.max_abs_deviation:.4f}")
    elif study == "size_power":
        spec = mc.ExperimentSpec("size_power", cfg["n"], R(10_000), seed,
                                 {"eta": cfg["eta"]}, chunk=cfg["chunk"] or 500)
        tab = mc.run_size_power(spec, cfg["test_id"], cfg["jump_grid"], cfg["alpha"], w)
        p = os.path.join(out, "size_power.json")
        hio.write_json(p, {**cfg.report_header(), **tab.to_dict()})
        written.append(p)
        for row in tab.rows():
            print(f"jump {row['jump']:.4g}: rate {row['rate']:.4f} "
                  f"[{row['wilson_low']:.4f}, {row['wilson_high']:.4f}]")
    else:
        if study == "reflection":
            summ = mc.check_reflection(R(100_000), cfg["x"], seed, cfg["y"], cfg["steps"], workers=w)
        elif study == "halfnormal":
            summ = mc.check_mixed_halfnormal(R(1000), cfg["n"], cfg["h_n"], cfg["sigma"],
                                             NoiseSpec.lomn_exponential(cfg["eta"]), seed, workers=w)
        elif study == "rv_clt":
            summ = mc.check_rv_clt(R(10_000), cfg["n"], cfg["sigma"], seed, workers=w)
        elif study == "taxi":
            summ = mc.run_taxi(R(10_000), cfg["theta"], cfg["n"], seed, workers=w)
        elif study == "lomn_clt":
            summ = mc.check_lomn_clt(R(10_000), cfg["n"], cfg["eta"], None, seed, workers=w)
        else:
            raise ConfigError(f"unknown study {study!r}")
        paths = summ.write(out, study)
        written.append(paths["json"])
        for k, v in summ.moments.items():
            print(f"{k}: {v}")
    hio.write_json(os.path.join(out, "mc_config.json"), {**cfg.report_header(), "reports": written})
    print("reports: " + ", ".join(written))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "test": cmd_test,
            "rough": cmd_rough, "mc": cmd_mc}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.subcommand](cfg)
    except (ConfigError, hio.SchemaError, hio.GridError, DistributionError, ArithmeticError) as e:
        print(f"hfsemi {args.subcommand}: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"hfsemi {args.subcommand}: I/O error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
