"""Command-line driver: every stage of the pipeline as a subcommand writing CSV files.

Parameters come from an INI file (--config) whose sections match the subcommand
names plus [scenario] and [mac]; command-line flags override them.
"""
import argparse
import configparser
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import analytic, calibration, campaign, griddata, macsim, planner
from .macconfig import MacConfig

log = logging.getLogger("gridcsma")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


def _ints(text):
    return [int(x) for x in str(text).replace(",", " ").split()]


def _floats(text):
    return [float(x) for x in str(text).replace(",", " ").split()]


def load_config(path):
    cp = configparser.ConfigParser()
    if path is not None:
        if not Path(path).is_file():
            raise UsageError(f"config file {path} not found")
        cp.read(path, encoding="utf-8")
    return cp


def _section(cp, name):
    return cp[name] if cp.has_section(name) else {}


def mac_from_config(cp):
    sec = _section(cp, "mac")
    kw = {}
    for key in ("sf0", "nb", "priority", "t_p", "t_ack", "l_ack", "t_ack_timeout", "bo_max"):
        if key in sec:
            kw[key] = int(sec[key])
    bo = tuple(_ints(sec.get("bo", "4 4 4")))
    return MacConfig(k_tau=len(bo), bo=bo, p_s=float(sec.get("p_s", 0.4)), **kw)


def scenario_from_config(cp, n_s, seed):
    sec = _section(cp, "scenario")
    over = griddata.preset_from_section({k: v for k, v in sec.items() if k not in ("layout_seed",)})
    return griddata.default_scenario(n_s, seed=seed, layout_seed=int(sec.get("layout_seed", 0)), **over)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    log.info("wrote %s", path)


def write_record(path, record):
    """Result record as `key = value` lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for k, v in record.items():
            f.write(f"{k} = {v}\n")


def _get(args, sec, name, default, cast=str):
    """Flag value if given, else config value, else default."""
    val = getattr(args, name, None)
    if val is not None:
        return val
    if name in sec:
        return cast(sec[name])
    return default


# ------------------------------------------------------------------ commands

def cmd_synth(args, cp):
    sec = _section(cp, "synth")
    n_s = _get(args, sec, "n_s", 64, int)
    n_t = _get(args, sec, "n_t", 64, int)
    z = griddata.generate_field(scenario_from_config(cp, n_s, args.seed), n_t)
    write_csv(Path(args.out) / "field.csv", ("node", "ri", "value"),
              ((i, j, f"{z[i, j]:.10g}") for i in range(n_s) for j in range(n_t)))
    return EXIT_OK


def cmd_calibrate(args, cp):
    sec = _section(cp, "calibrate")
    n_s = _get(args, sec, "n_s", 64, int)
    n_t = _get(args, sec, "n_t", 64, int)
    cfg = calibration.CalibrationConfig(
        n_s, n_t,
        target_mse=float(sec.get("target_mse", 0.05)),
        target_success_prob=_get(args, sec, "target_success_prob", 0.95, float),
        trials=args.trials if args.trials is not None else int(sec.get("trials", 200)),
        seed=args.seed)
    source = calibration.ScenarioSource(scenario_from_config(cp, n_s, 0), n_t, seed=args.seed + 1)
    try:
        res = calibration.calibrate(cfg, source)
    except (calibration.UnreachableTarget, calibration.InfeasibleSplit) as exc:
        log.error("%s", exc)
        return EXIT_FAIL
    rows = [(mode, m, f"{p:.6f}") for mode, curve in res.success_curves.items() for m, p in curve]
    write_csv(Path(args.out) / "calibration.csv", ("mode", "M", "success_prob"), rows)
    write_record(Path(args.out) / "calibration.txt", {
        "n_S": n_s, "n_T": n_t, "trials": cfg.trials, "seed": args.seed,
        "M_S_thresh": res.m_s_thresh, "M_T_thresh": res.m_t_thresh, "M_thresh": res.m_thresh,
        "m_S": res.m_s, "m_T": res.m_t, "ratio": f"{res.ratio:.6f}"})
    return EXIT_OK


def _grid(sec, args, name, default, parse):
    raw = getattr(args, name, None)
    if raw is None:
        raw = sec.get(name, default)
    vals = parse(raw)
    if not vals:
        raise UsageError(f"empty grid for {name}")
    return vals


def cmd_evaluate(args, cp):
    sec = _section(cp, "evaluate")
    base = mac_from_config(cp)
    n_s = _get(args, sec, "n_s", 64, int)
    m_s = _get(args, sec, "m_s", 16, int)
    p_grid = _grid(sec, args, "p_s", "0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8 0.9", _floats)
    bo_grid = _grid(sec, args, "bo", "4", _ints)
    k_grid = _grid(sec, args, "k_tau", "3", _ints)
    reps = args.trials if args.trials is not None else int(sec.get("replications", 10000))
    modes = ("analytic", "sim") if args.mode is None else (args.mode,)
    rows = []
    for k in k_grid:
        for bo in bo_grid:
            cfg = base.with_profile((bo,) * k)
            for p in p_grid:
                c = cfg.with_profile(cfg.bo, p)
                # frame moments at the expected number of contenders
                h = max(1, int(round(n_s * p)))
                stats = analytic.frame_stats(analytic.solve_slot_fixed_point(h, c, sf_length=c.sf_length(0)), c)
                for mode in modes:
                    if mode == "analytic":
                        prob = analytic.sufficiency_probability(n_s, m_s, c).prob_sufficient
                    else:
                        prob, _ = macsim.sufficiency_estimate(n_s, m_s, c, reps, args.seed)
                    rows.append((f"{p:.2f}", k, "-".join(map(str, c.bo)), f"{prob:.6f}",
                                 f"{stats.t_bar:.4f}", f"{stats.sigma2:.4f}", mode))
    write_csv(Path(args.out) / "sufficiency.csv",
              ("p_s", "K_tau", "bo_profile", "prob_sufficient", "t_bar", "sigma2", "mode"), rows)
    return EXIT_OK


def cmd_simulate(args, cp):
    sec = _section(cp, "simulate")
    cfg = mac_from_config(cp)
    n_s = _get(args, sec, "n_s", 64, int)
    ris = args.trials if args.trials is not None else int(sec.get("ris", 1))
    summary = []
    for i, s in enumerate(macsim.replication_seeds(args.seed, ris)):
        res = macsim.simulate_ri(n_s, cfg, int(s), trace=True)
        summary.append((i, len(res.contenders), res.k_succ_total,
                        ";".join(map(str, res.k_succ_per_sf)), res.elapsed))
        write_csv(Path(args.out) / f"trace_{i:04d}.csv",
                  ("sf_index", "start_slot", "frame_type", "length", "node_ids"), res.trace.frame_rows())
    write_csv(Path(args.out) / "simulate.csv", ("ri", "contenders", "k_succ", "k_succ_per_sf", "elapsed_slots"),
              summary)
    return EXIT_OK


def _opt_spec(sec, cp, n_s, m_s):
    kw = {}
    if "p_suff" in sec:
        kw["p_suff"] = float(sec["p_suff"])
    for key in ("k_tau_max", "bo_max", "bo_min"):
        if key in sec:
            kw[key] = int(sec[key])
    if "bo_profile_mode" in sec:
        kw["bo_profile_mode"] = sec["bo_profile_mode"]
    if "p_s_step" in sec:
        kw["p_s_grid"] = planner.default_p_s_grid(float(sec["p_s_step"]))
    return planner.OptimizationSpec(n_s, m_s, base=mac_from_config(cp), **kw)


def _evaluator(mode, args):
    if mode == "sim":
        reps = args.trials if args.trials is not None else 2000
        return lambda n, m, c: analytic.sufficiency_probability(n, m, c, mode=analytic.SIM_CALIBRATED,
                                                                reps=reps, seed=args.seed).prob_sufficient
    return planner.analytic_evaluator


def cmd_optimize(args, cp):
    sec = _section(cp, "optimize")
    n_s = _get(args, sec, "n_s", 64, int)
    m_s = _get(args, sec, "m_s", 16, int)
    m_t = _get(args, sec, "m_t", 96, int)
    n_t = _get(args, sec, "n_t", 256, int)
    schemes = sec.get("schemes", "CSMA_CS").replace(",", " ").split()
    spec = _opt_spec(sec, cp, n_s, m_s)
    ev = _evaluator(args.mode, args)
    rows, status = [], EXIT_OK
    for scheme in schemes:
        try:
            d = planner.baseline_delay(scheme, n_s, m_s, m_t, n_t, spec, ev)
        except planner.Infeasible as exc:
            log.error("%s: %s", scheme, exc)
            rows.append((scheme, n_s, m_s, "", "", "", "inf", f"{exc.best_probability:.6f}"))
            status = EXIT_FAIL
            continue
        if d.result is None:
            rows.append((scheme, n_s, m_s, "", "", "", f"{d.per_ri:g}", "1.000000"))
        else:
            rows.append(d.result.row(scheme, n_s, m_s))
    write_csv(Path(args.out) / "optimize.csv",
              ("scheme", "n_S", "m_S", "k_tau", "bo_profile", "p_s", "delay_slots", "prob"), rows)
    return status


def cmd_plan(args, cp):
    sec = _section(cp, "plan")
    n_nodes = _grid(sec, args, "nodes", "2048 8192", _ints)
    d_max = _grid(sec, args, "d_max", "400 750", _floats)
    schemes = sec.get("schemes", "TDMA CSMA_CS").replace(",", " ").split()
    m_frac = float(sec.get("m_s_fraction", 0.367))
    t_frac = float(sec.get("time_fraction", 0.375))
    spec_sec = _section(cp, "optimize")
    rows, status = [], EXIT_OK
    for d in d_max:
        for n in n_nodes:
            try:
                spec = _opt_spec(spec_sec, cp, 1, 1)
                plans = planner.channel_plan(n, d, schemes, m_s_of=lambda g: max(1, int(np.ceil(m_frac * g))),
                                             time_fraction=t_frac, spec=spec, evaluator=_evaluator(args.mode, args))
            except planner.Infeasible as exc:
                log.error("%s", exc)
                status = EXIT_FAIL
                continue
            rows.extend(p.row() for p in plans)
    write_csv(Path(args.out) / "plan.csv", ("scheme", "N", "d_max", "group_size", "channels"), rows)
    return status


def cmd_campaign(args, cp):
    sec = _section(cp, "campaign")
    n_s = _get(args, sec, "n_s", 128, int)
    n_t = _get(args, sec, "n_t", 256, int)
    m_s = _get(args, sec, "m_s", 47, int)
    m_t = _get(args, sec, "m_t", 96, int)
    cfg = mac_from_config(cp)
    if sec.get("optimize", "no").lower() in ("yes", "true", "1"):
        res = planner.optimize(_opt_spec(_section(cp, "optimize"), cp, n_s, m_s), _evaluator(args.mode, args))
        cfg = res.config
    if args.p_s is not None:
        cfg = cfg.with_profile(cfg.bo, args.p_s)
    z = griddata.generate_field(scenario_from_config(cp, n_s, args.seed), n_t)
    camp, _, err = campaign.campaign_reconstruction(z, m_s, m_t, cfg, args.seed)
    write_csv(Path(args.out) / "campaign.csv", ("ri", "delivered_nodes", "elapsed_slots"), camp.rows())
    write_record(Path(args.out) / "campaign.txt", {
        "n_S": n_s, "n_T": n_t, "m_S": m_s, "m_T": m_t, "seed": args.seed,
        "k_tau": cfg.k_tau, "bo_profile": "-".join(map(str, cfg.bo)), "p_s": f"{cfg.p_s:.2f}",
        "delay_slots": camp.delay, "shortfall_ris": len(camp.shortfalls),
        "sufficient": camp.sufficient, "mse": "nan" if err is None else f"{err:.6g}"})
    return EXIT_OK if camp.sufficient else EXIT_FAIL


COMMANDS = {
    "synth": cmd_synth, "calibrate": cmd_calibrate, "evaluate": cmd_evaluate, "simulate": cmd_simulate,
    "optimize": cmd_optimize, "plan": cmd_plan, "campaign": cmd_campaign,
}


def build_parser():
    p = argparse.ArgumentParser(prog="gridcsma", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", default=None)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out", default=".")
        s.add_argument("--trials", type=int, default=None)
        s.add_argument("--mode", choices=("analytic", "sim"), default=None)
        if name in ("synth", "calibrate", "evaluate", "simulate", "optimize", "campaign"):
            s.add_argument("--n-s", dest="n_s", type=int, default=None)
        if name in ("synth", "calibrate", "optimize", "campaign"):
            s.add_argument("--n-t", dest="n_t", type=int, default=None)
        if name in ("evaluate", "optimize", "campaign"):
            s.add_argument("--m-s", dest="m_s", type=int, default=None)
        if name in ("optimize", "campaign"):
            s.add_argument("--m-t", dest="m_t", type=int, default=None)
        if name == "campaign":
            s.add_argument("--p-s", dest="p_s", type=float, default=None)
        if name == "calibrate":
            s.add_argument("--target-success-prob", dest="target_success_prob", type=float, default=None)
        if name == "evaluate":
            s.add_argument("--p-s", dest="p_s", default=None, help="space- or comma-separated grid")
            s.add_argument("--bo", default=None)
            s.add_argument("--k-tau", dest="k_tau", default=None)
        if name == "plan":
            s.add_argument("--nodes", default=None)
            s.add_argument("--d-max", dest="d_max", default=None)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cp = load_config(args.config)
        return COMMANDS[args.command](args, cp)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, analytic.FixedPointError, analytic.ModelInconsistency) as exc:
        log.error("%s", exc)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
