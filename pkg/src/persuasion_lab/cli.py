"""Command-line front end: ``persuasion-lab <command> ...``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 on bad input.
Every command that writes files also writes ``manifest.json`` beside them.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

from .deviation_lab import (
    Copula,
    DeviationReport,
    copula_robustness,
    epsilon_gain,
    marginal_preserving_deviation,
    obedience_residuals,
    reports_csv,
)
from .dynamic_engine import (
    build_canonical_profile,
    build_scripted_profile,
    make_block_config,
    outcome_from_sim,
    simulate,
)
from .envelopes import cav_u, quasicav_u
from .game_model import (
    ScenarioError,
    br_breakpoints,
    bundled_scenario,
    default_prior,
    indirect_utility,
    load_scenario,
    validate_scenario,
)
from .lp_core import to_fraction
from .static_pc import (
    EnumerationCapError,
    Outcome,
    PosteriorFamily,
    ResponseRule,
    enumerate_equilibria,
    lambda_sweep,
    payoff_hull,
)

PURE_NOTE = "note: response rules are restricted to pure actions per message"


class InputError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers


def resolve_scenario(ref: str):
    path = Path(ref)
    if path.exists():
        s = load_scenario(path)
    else:
        try:
            s = bundled_scenario(ref)
        except FileNotFoundError:
            raise InputError(f"no scenario file or bundled scenario named {ref!r}") from None
    return s, validate_scenario(s)


def parse_lambda(s, text: str) -> tuple[Fraction, ...]:
    try:
        parts = [to_fraction(p.strip()) for p in text.split(",")]
    except (TypeError, ValueError, ZeroDivisionError):
        raise InputError(f"cannot parse message distribution {text!r}") from None
    if len(parts) == 1 and s.n_messages == 2:
        parts.append(1 - parts[0])
    if len(parts) != s.n_messages or any(p < 0 for p in parts) or sum(parts) != 1:
        raise InputError(f"{text!r} is not a distribution over {s.n_messages} messages")
    return tuple(parts)


def lam_label(lam) -> str:
    return str(lam[0]) if len(lam) == 2 else ";".join(str(v) for v in lam)


def kappa_label(s, rec) -> str:
    return ";".join("-" if w == 0 else s.actions[rec.kappa.actions[m]]
                    for m, w in enumerate(rec.lam))


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def write_manifest(out: Path, command: str, scenario: str, params: dict, outputs, summary):
    doc = {
        "command": command,
        "scenario": scenario,
        "parameters": params,
        "outputs": sorted(str(p) for p in outputs),
        "summary": summary,
    }
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _frac_matrix(rows):
    return [[str(v) for v in r] for r in rows]


def outcome_doc(s, nu: Outcome, *, estimated=False, family=None, kappa=None) -> dict:
    doc = {"states": list(s.states), "actions": list(s.actions), "estimated": estimated,
           "nu": [[float(v) for v in r] for r in nu.nu] if estimated else _frac_matrix(nu.nu)}
    if family is not None:
        doc["lambda"] = [str(v) for v in family.lam]
        doc["posteriors"] = [None if p is None else [str(v) for v in p]
                             for p in family.posteriors]
        doc["kappa"] = [None if a is None else s.actions[a] for a in kappa.actions]
    return doc


def read_outcome(s, path: Path):
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read outcome file {path}: {exc}") from None
    nu = doc.get("nu")
    if (not isinstance(nu, list) or len(nu) != s.n_states
            or any(not isinstance(r, list) or len(r) != s.n_actions for r in nu)):
        raise InputError(f"outcome 'nu' must be a {s.n_states}x{s.n_actions} matrix")
    estimated = bool(doc.get("estimated", False))
    try:
        rows = [[to_fraction(v) for v in r] for r in nu]
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InputError(f"bad outcome entry: {exc}") from None
    family = kappa = None
    if "lambda" in doc and "posteriors" in doc and "kappa" in doc:
        lam = [to_fraction(v) for v in doc["lambda"]]
        posts = [None if p is None else tuple(to_fraction(v) for v in p) for p in doc["posteriors"]]
        family = PosteriorFamily(tuple(sum(r) for r in rows), tuple(lam), tuple(posts))
        kappa = ResponseRule(actions=tuple(None if a is None else s.action_index(a)
                                           for a in doc["kappa"]))
    return Outcome(tuple(tuple(r) for r in rows)), estimated, family, kappa


def build_profile(s, cf, sim: dict):
    if sim["profile"] == "canonical":
        lam = parse_lambda(s, sim["lambda"])
        recs = enumerate_equilibria(s, cf.mu, lam)
        if sim.get("kappa"):
            want = sim["kappa"].split(",")
            recs = [r for r in recs if kappa_label(s, r).split(";") == want]
            if not recs:
                raise InputError(f"no equilibrium with response rule {sim['kappa']!r} at {lam}")
        rec = max(recs, key=lambda r: (r.sender_value, r.receiver_range[1]))
        cfg = make_block_config([(1, rec)], sim["N"])
        return build_canonical_profile(s, cf, cfg), rec
    kind, _, script = sim["profile"].partition(":")
    if kind != "scripted" or not script:
        raise InputError(f"unknown profile {sim['profile']!r}; use canonical or scripted:NAME")
    return build_scripted_profile(s, script), None


# --------------------------------------------------------------------------
# commands


def cmd_analyze(args) -> int:
    s, cf = resolve_scenario(args.scenario)
    pi = default_prior(s, cf)
    lines = [
        f"scenario: {s.name}",
        "mu: (" + ", ".join(str(v) for v in cf.mu) + ")",
        f"alpha: {cf.alpha}",
        f"B: {cf.B}",
        f"pseudo-renewal: {'yes' if cf.is_pseudo_renewal else 'no'}",
        "prior: (" + ", ".join(str(v) for v in pi) + ")",
        f"u_S at prior: {indirect_utility(s, pi)}",
    ]
    summary = {"mu": [str(v) for v in cf.mu], "alpha": str(cf.alpha), "B": str(cf.B)}
    if s.n_states == 2:
        bps = br_breakpoints(s)
        cav = cav_u(s, pi)
        qc = quasicav_u(s, pi)
        lines.append("breakpoints: {" + ", ".join(str(b) for b in bps) + "}")
        lines.append(f"Cav: {cav.value}")
        lines.append(f"Quasicav: {qc}")
        summary.update(breakpoints=[str(b) for b in bps], cav=str(cav.value), quasicav=str(qc))
    else:
        cav = cav_u(s, pi)
        lines.append(f"Cav (grid lower bound): {cav.value}")
        summary.update(cav=str(cav.value))
    print("\n".join(lines))
    if args.out:
        out = _out_dir(args)
        write_manifest(out, "analyze", args.scenario, {}, [], summary)
    return 0


def cmd_solve_static(args) -> int:
    s, cf = resolve_scenario(args.scenario)
    pi = default_prior(s, cf)
    out = _out_dir(args)
    if args.grid is not None:
        if args.grid < 1:
            raise InputError("--grid must be a positive integer")
        sweep = lambda_sweep(s, pi, args.grid)
    else:
        sweep = lambda_sweep(s, pi, lambdas=[parse_lambda(s, args.lambda_)])
    rows, sweep_rows, outputs = [], [], [out / "static.csv", out / "sweep.csv"]
    for p in sweep:
        sweep_rows.append([lam_label(p.lam), str(p.sender_value)])
        for rec in p.records:
            rows.append([lam_label(p.lam), kappa_label(s, rec), str(rec.sender_value),
                         str(rec.receiver_range[0]), str(rec.receiver_range[1])])
    write_csv(out / "static.csv",
              ["lambda", "kappa", "sender_value", "receiver_min", "receiver_max"], rows)
    write_csv(out / "sweep.csv", ["lambda", "sender_value"], sweep_rows)
    if args.grid is None:
        for i, rec in enumerate(sweep[0].records):
            path = out / f"outcome_{i}.json"
            nu = Outcome.from_family(s, rec.witness, rec.kappa)
            path.write_text(json.dumps(outcome_doc(s, nu, family=rec.witness, kappa=rec.kappa),
                                       indent=2) + "\n")
            outputs.append(path)
    for r in sweep_rows:
        print(f"lambda={r[0]}  e*_S={r[1]}")
    print(PURE_NOTE)
    params = {"grid": args.grid, "lambda": args.lambda_}
    write_manifest(out, "solve-static", args.scenario, params, outputs,
                   {"records": len(rows), "pure_response_rules_only": True})
    return 0


def cmd_hull(args) -> int:
    s, cf = resolve_scenario(args.scenario)
    pi = default_prior(s, cf)
    if args.grid < 1:
        raise InputError("--grid must be a positive integer")
    out = _out_dir(args)
    hull = payoff_hull(s, pi, args.grid)
    write_csv(out / "hull.csv", ["sender", "receiver"], [[str(a), str(b)] for a, b in hull])
    top = max(a for a, _ in hull)
    for a, b in hull:
        print(f"({a}, {b})")
    print(f"max sender value: {top}")
    print(PURE_NOTE)
    write_manifest(out, "hull", args.scenario, {"grid": args.grid}, [out / "hull.csv"],
                   {"vertices": len(hull), "max_sender": str(top)})
    return 0


def _sim_params(args) -> dict:
    if args.profile == "canonical" and not args.lambda_:
        raise InputError("--profile canonical needs --lambda")
    return {"profile": args.profile, "lambda": args.lambda_, "kappa": args.kappa, "N": args.N,
            "delta": args.delta, "horizon": args.horizon, "reps": args.reps, "seed": args.seed,
            "tail_tol": args.tail_tol}


def cmd_simulate(args) -> int:
    s, cf = resolve_scenario(args.scenario)
    sim = _sim_params(args)
    profile, rec = build_profile(s, cf, sim)
    rep = simulate(s, cf, profile, args.delta, args.horizon, args.reps, args.seed,
                   tail_tol=args.tail_tol)
    out = _out_dir(args)
    (out / "payoffs.csv").write_text(rep.payoff_csv())
    (out / "frequencies.csv").write_text(rep.frequency_csv(s))
    nu = outcome_from_sim(rep, s)
    (out / "outcome.json").write_text(json.dumps(outcome_doc(s, nu, estimated=True), indent=2) + "\n")
    print(f"sender   {rep.sender_mean:.6f} +/- {rep.sender_se:.6f}")
    print(f"receiver {rep.receiver_mean:.6f} +/- {rep.receiver_se:.6f}")
    print(f"tail bound {rep.tail_bound:.3g}")
    summary = {"sender_mean": rep.sender_mean, "sender_se": rep.sender_se,
               "receiver_mean": rep.receiver_mean, "receiver_se": rep.receiver_se,
               "tail_bound": rep.tail_bound}
    if rec is not None:
        summary.update(block_length=rep.block_length, quota_exact=True,
                       replacement_fraction=rep.replacement_fraction)
        print(f"block length {rep.block_length}; quotas filled exactly in {len(rep.usage)} sub-blocks")
    write_manifest(out, "simulate", args.scenario, sim,
                   [out / "payoffs.csv", out / "frequencies.csv", out / "outcome.json"], summary)
    return 0


def _named_copula(name: str, pi) -> Copula:
    table = {"swap": Copula.swap, "identity": Copula.identity,
             "independence": Copula.independence}
    if name not in table:
        raise InputError(f"unknown copula {name!r}; use one of {sorted(table)}")
    return table[name](pi)


def cmd_check_deviations(args) -> int:
    s, cf = resolve_scenario(args.scenario)
    sim = None
    if args.from_sim:
        mpath = Path(args.from_sim)
        try:
            manifest = json.loads(mpath.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read manifest {mpath}: {exc}") from None
        if manifest.get("command") != "simulate":
            raise InputError("--from-sim needs the manifest of a simulate run")
        sim = manifest["parameters"]
        opath = mpath.parent / "outcome.json"
    else:
        opath = Path(args.outcome)
    nu, estimated, family, kappa = read_outcome(s, opath)
    reports: list[DeviationReport] = []
    failed = False
    tol = args.tol
    for dev in [d.strip() for d in args.deviations.split(",") if d.strip()]:
        if dev == "obedience":
            worst, table = obedience_residuals(s, nu)
            pair = min(table, key=table.get) if table else None
            wit = "" if pair is None else f"{s.actions[pair[0]]}->{s.actions[pair[1]]}"
            rep = DeviationReport("obedience", 0, worst, worst, witness=wit)
        elif dev == "copula":
            rep, cop = copula_robustness(s, nu)
            if estimated:
                wit = "[" + ";".join(" ".join(f"{float(v):.4f}" for v in r) for r in cop.c) + "]"
                rep = DeviationReport(rep.deviation, rep.baseline, rep.best, rep.gain,
                                      witness=wit)
        elif dev == "marginal":
            if family is None:
                raise InputError("marginal deviation needs an outcome with lambda/posteriors/kappa")
            rep = marginal_preserving_deviation(s, family.prior, family, kappa)
        else:
            if sim is None:
                raise InputError(f"simulated deviation {dev!r} needs --from-sim")
            profile, _ = build_profile(s, cf, sim)
            kw = dict(delta=sim["delta"], horizon=sim["horizon"], reps=sim["reps"],
                      seed=sim["seed"])
            if dev.startswith("copula:"):
                rep = epsilon_gain(s, cf, profile, "copula",
                                   copula=_named_copula(dev.partition(":")[2], cf.mu), **kw)
            else:
                try:
                    rep = epsilon_gain(s, cf, profile, dev, **kw)
                except ValueError as exc:
                    raise InputError(str(exc)) from None
            failed |= rep.gain > tol
            reports.append(rep)
            continue
        if estimated:
            rep = DeviationReport(rep.deviation, float(rep.baseline), float(rep.best),
                                  float(rep.gain), stderr=math.nan, witness=rep.witness)
            failed |= rep.gain > tol
        else:
            failed |= rep.gain > 0
        reports.append(rep)
    out = _out_dir(args)
    text = reports_csv(reports)
    (out / "deviations.csv").write_text(text)
    sys.stdout.write(text)
    print("note: obedience and copula robustness are necessary conditions only; passing "
          "them does not certify an equilibrium outcome")
    params = {"outcome": str(opath), "deviations": args.deviations, "tol": tol}
    write_manifest(out, "check-deviations", args.scenario, params, [out / "deviations.csv"],
                   {"passed": not failed})
    return 1 if failed else 0


def cmd_examples(args) -> int:
    from .reproduce import Session, run_examples

    checks = run_examples(args.which, Session(seed=args.seed))
    width = max(len(c.label) for c in checks)
    print(f"{'crit':<5}{'check':<{width + 2}}{'expected':<22}{'computed':<34}{'tag':<15}result")
    for c in checks:
        print(f"C{c.criterion:<4}{c.label:<{width + 2}}{c.expected:<22}{c.computed:<34}"
              f"{c.tag:<15}{'pass' if c.passed else 'FAIL'}")
    bad = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(bad)}/{len(checks)} checks passed")
    return 1 if bad else 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="persuasion-lab",
                                description="Persuasion with partial commitment: static and dynamic analysis.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="chain facts, breakpoints and envelope values")
    a.add_argument("scenario")
    a.add_argument("--out", default=None)
    a.set_defaults(fn=cmd_analyze)

    st = sub.add_parser("solve-static", help="equilibria of the static game")
    st.add_argument("scenario")
    g = st.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", dest="lambda_", metavar="P/Q")
    g.add_argument("--grid", type=int, metavar="D")
    st.add_argument("--out", default="out")
    st.set_defaults(fn=cmd_solve_static)

    h = sub.add_parser("hull", help="convex hull of equilibrium payoffs over a lambda grid")
    h.add_argument("scenario")
    h.add_argument("--grid", type=int, required=True, metavar="D")
    h.add_argument("--out", default="out")
    h.set_defaults(fn=cmd_hull)

    sm = sub.add_parser("simulate", help="Monte Carlo of a dynamic profile")
    sm.add_argument("scenario")
    sm.add_argument("--profile", default="canonical",
                    help="canonical or scripted:NAME_OR_FILE")
    sm.add_argument("--lambda", dest="lambda_", metavar="P/Q")
    sm.add_argument("--kappa", default=None, help="comma-separated actions per message")
    sm.add_argument("--N", type=int, default=600, help="minimum block length")
    sm.add_argument("--delta", type=float, default=0.999)
    sm.add_argument("--horizon", type=int, default=10_000)
    sm.add_argument("--reps", type=int, default=2000)
    sm.add_argument("--seed", type=int, default=0)
    sm.add_argument("--tail-tol", type=float, default=1e-4)
    sm.add_argument("--out", default="out")
    sm.set_defaults(fn=cmd_simulate)

    cd = sub.add_parser("check-deviations", help="obedience, copula and simulated deviation gains")
    cd.add_argument("scenario")
    src = cd.add_mutually_exclusive_group(required=True)
    src.add_argument("--outcome", metavar="FILE")
    src.add_argument("--from-sim", metavar="MANIFEST")
    cd.add_argument("--deviations", default="obedience,copula",
                    help="comma list of obedience, copula, marginal, greedy, "
                         "myopic_receiver, copula:NAME, scripted:NAME")
    cd.add_argument("--tol", type=float, default=0.02, help="tolerance for estimated gains")
    cd.add_argument("--out", default="out")
    cd.set_defaults(fn=cmd_check_deviations)

    ex = sub.add_parser("examples", help="reproduce the bundled example checks")
    ex.add_argument("which", choices=["example1", "example2", "all"])
    ex.add_argument("--seed", type=int, default=20240611)
    ex.set_defaults(fn=cmd_examples)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InputError, ScenarioError, EnumerationCapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
