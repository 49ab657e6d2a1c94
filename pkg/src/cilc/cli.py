"""Command-line entry point: ``cilc <scenario> [options]``.

Every scenario writes CSV tables (and an SVG chart next to each plotted CSV)
into ``--out``.  Exit status: 0 on success, 1 when a built-in self-check
fails, 2 on configuration errors, 3 when a simulated robot falls over.
"""
import argparse
import logging
import math
import os
import sys

import numpy as np

from . import report
from .collective import Collective, certify_collective, contraction_locus, run_cilc
from .config import default_document, load_document, resolve, subset
from .consensus import complete, diameter, parse_topology_file, ring, run_distributed_cilc
from .errors import CilcError, ConfigError, NotStronglyConnected, NumericalBlowup
from .lifted import run_isolated_ilc
from .perf import certify_well_performing, predict_best_performers
from .sampling import random_laws, random_plant

log = logging.getLogger("cilc")

SCENARIOS = ("appendix-a", "twipr", "certify", "perf-eval", "consensus")


def _topology(path, M):
    if path is None:
        return ring(M) if M > 1 else complete(1)
    try:
        t = parse_topology_file(path, M)
    except OSError as exc:
        raise ConfigError("topology", f"cannot read {path}: {exc.strerror}") from None
    except NotStronglyConnected as exc:
        raise ConfigError("topology", f"{exc} (no path {exc.witness[0]} -> {exc.witness[1]})") from None
    except ValueError as exc:
        raise ConfigError("topology", str(exc)) from None
    return t


def _run_collective(scn, laws, truth, trials):
    collective = Collective(scn.plant, laws, scn.r)
    if scn.distributed_election:
        t = _topology(scn.topology, collective.M)
        history, _ = run_distributed_cilc(t, collective, trials=trials,
                                          hold_on_no_improvement=scn.hold_on_no_improvement,
                                          truth=truth)
    else:
        history = run_cilc(collective, trials=trials,
                           hold_on_no_improvement=scn.hold_on_no_improvement, truth=truth)
    return collective, history


def _norm_chart(path, series, title, hlines=()):
    positive = all(np.all(np.asarray(ys) > 0) for _, _, ys in series)
    report.line_chart(path, series, title, logy=positive, hlines=hlines)


def _isolated(scn, out, stem="isolated_norms"):
    runs = {}
    series = []
    for k, law in enumerate(scn.laws):
        truth = None if scn.truth is None else scn.truth[k]
        recs = run_isolated_ilc(scn.plant, law, scn.r, trials=scn.trials, truth=truth)
        runs[law.id] = recs
        series.append((scn.names[k], [r.j for r in recs], [r.e_norm for r in recs]))
    report.write_csv(os.path.join(out, f"{stem}.csv"), report.NORM_COLUMNS, report.isolated_rows(runs))
    _norm_chart(os.path.join(out, f"{stem}.svg"), series, "isolated agents")
    return runs


def _cilc_outputs(history, out, stem, title, names, hlines=()):
    report.write_csv(os.path.join(out, f"{stem}.csv"), report.NORM_COLUMNS, report.cilc_rows(history))
    xs = list(range(len(history)))
    series = [("collective", xs, list(history.e_bar_norms))]
    for m, name in enumerate(names, 1):
        series.append((f"{name} (in collective)", xs, list(history.agent_norms(m))))
    _norm_chart(os.path.join(out, f"{stem}.svg"), series, title, hlines=hlines)


def _certificate_lines(collective, rep, names):
    lines = []
    for name, a in zip(names, rep.agents):
        lines.append(
            f"{name}: rho={a.rho!r} gamma={a.gamma!r} kappa={report.fmt(a.kappa)} "
            f"asymptotically_stable={'yes' if a.asymptotically_stable else 'no'} "
            f"monotone_above_threshold={'yes' if a.monotone_above_threshold else 'no'}")
    cert = "n/a" if rep.gamma_bar_certified is None else repr(rep.gamma_bar_certified)
    lines.append(f"gamma_bar: lower={rep.gamma_bar_lower!r} upper={rep.gamma_bar_upper!r} certified={cert}")
    lines.append(f"kappa_bar={report.fmt(rep.kappa_bar)} ({rep.kappa_bar_source})")
    lines.append(f"[collective-rate] {rep.rate_certificate}")
    lines.append(f"[monotone-agent] {rep.monotone_certificate}")
    lines.append(f"[zero-residual-agent] {rep.stability_certificate}")
    return lines


def _write_certificate(collective, scn, out, names):
    rep = certify_collective(collective, sampling_budget=scn.sampling_budget, seed=scn.seed,
                             grid_spacing=scn.grid_spacing)
    rows = [(m, a.rho, a.gamma, a.kappa, a.asymptotically_stable, a.monotone_above_threshold)
            for m, a in enumerate(rep.agents, 1)]
    report.write_csv(os.path.join(out, "certificate.csv"),
                     ("agent_id", "rho", "gamma", "kappa", "asymptotically_stable",
                      "monotone_above_threshold"), rows)
    doc = {
        "agents": [{"name": n, "rho": a.rho, "gamma": a.gamma, "kappa": report.fmt(a.kappa),
                    "asymptotically_stable": a.asymptotically_stable,
                    "monotone_above_threshold": a.monotone_above_threshold}
                   for n, a in zip(names, rep.agents)],
        "gamma_bar": {"lower": rep.gamma_bar_lower, "upper": rep.gamma_bar_upper,
                      "certified": rep.gamma_bar_certified},
        "kappa_bar": report.fmt(rep.kappa_bar),
        "kappa_bar_source": rep.kappa_bar_source,
        "collective_rate": rep.rate_certificate,
        "monotone_agent": rep.monotone_certificate,
        "zero_residual_agent": rep.stability_certificate,
    }
    report.write_json(os.path.join(out, "certificate.json"), doc)
    lines = _certificate_lines(collective, rep, names)
    with open(os.path.join(out, "certificate.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return rep, lines


def cmd_appendix_a(scn, out):
    collective = Collective(scn.plant, scn.laws, scn.r)
    omegas = collective.omegas()
    if scn.plant.N == 2:
        agents, coll = contraction_locus(omegas, directions=720)
        rows, series = [], []
        theta = np.arange(720) * (2 * math.pi / 720)
        circle = np.column_stack([np.cos(theta), np.sin(theta)])
        curves = [(name, pts) for name, pts in zip(scn.names, agents)]
        curves += [("collective", coll), ("unit circle", circle)]
        for name, pts in curves:
            for k, (x, y) in enumerate(pts):
                rows.append((name, k, float(x), float(y)))
            closed = np.vstack([pts, pts[:1]])
            series.append((name, list(closed[:, 0]), list(closed[:, 1])))
        report.write_csv(os.path.join(out, "loci.csv"), ("curve", "index", "x", "y"), rows)
        report.line_chart(os.path.join(out, "loci.svg"), series, "contraction loci",
                          xlabel="v1", ylabel="v2", equal_aspect=True)
    _isolated(scn, out)
    rep, lines = _write_certificate(collective, scn, out, scn.names)
    _, history = _run_collective(scn, scn.laws, scn.truth, scn.trials)
    hl = [(rep.kappa_bar, "kappa_bar")] if math.isfinite(rep.kappa_bar) and rep.kappa_bar > 0 else []
    _cilc_outputs(history, out, "cilc_norms", "collective", scn.names, hlines=hl)
    for line in lines:
        print(line)
    print(f"final collective error norm {float(history.e_bar_norms[-1])!r}")
    return 0


def cmd_twipr(scn, out):
    runs = _isolated(scn, out)
    summary = []
    for name, law in zip(scn.names, scn.laws):
        norms = [r.e_norm for r in runs[law.id]]
        summary.append(f"isolated {name}: first {norms[0]!r} min {min(norms)!r} final {norms[-1]!r}")
    for group in scn.collectives:
        laws, truth = subset(scn, group)
        _, history = _run_collective(scn, laws, truth, scn.trials)
        stem = "cilc_" + "".join(group) if all(len(g) == 1 for g in group) else "cilc_" + "_".join(group)
        _cilc_outputs(history, out, stem, "collective " + "+".join(group), group)
        held = sum(s.held for s in history.steps)
        seq = " ".join(group[b - 1] for b in history.best_performers)
        summary.append(f"collective {'+'.join(group)}: final {float(history.e_bar_norms[-1])!r} "
                       f"held {held} best performers {seq}")
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(summary) + "\n")
    for line in summary:
        print(line)
    return 0


def cmd_certify(scn, out):
    collective = Collective(scn.plant, scn.laws, scn.r)
    _, lines = _write_certificate(collective, scn, out, scn.names)
    for line in lines:
        print(line)
    return 0


def cmd_perf_eval(scn, out):
    collective = Collective(scn.plant, scn.laws, scn.r)
    omegas, psis = collective.omegas(), collective.psis()
    rd = collective.rd
    horizon = scn.trials
    verdict = certify_well_performing(omegas, psis, rd, rd, horizon)
    rows = [(j, m + 1, float(verdict.scores[j, m]))
            for j in range(horizon + 1) for m in range(collective.M)]
    report.write_csv(os.path.join(out, "scores.csv"), ("trial", "agent_id", "score"), rows)
    xs = list(range(horizon + 1))
    report.line_chart(os.path.join(out, "scores.svg"),
                      [(n, xs, list(verdict.scores[:, m])) for m, n in enumerate(scn.names)],
                      "collective minus isolated squared error norm", ylabel="score")
    pred = predict_best_performers(omegas, psis, rd, rd, horizon + 1)
    history = run_cilc(collective, trials=horizon + 1)
    near = set(pred.near_ties)
    seq_rows = [(j, p, s, j in near) for j, (p, s) in enumerate(zip(pred.f, history.best_performers))]
    report.write_csv(os.path.join(out, "best_performers.csv"),
                     ("trial", "predicted", "simulated", "near_tie"), seq_rows)
    mismatches = [j for j, p, s, t in seq_rows if p != s and not t]
    doc = {"verdict": verdict.verdict, "horizon": horizon,
           "violation": None if verdict.violation is None else list(verdict.violation),
           "worst_score": verdict.worst_score, "near_ties": sorted(near),
           "prediction_mismatches": mismatches}
    report.write_json(os.path.join(out, "verdict.json"), doc)
    line = f"well-performing: {verdict.verdict} (horizon {horizon})"
    if verdict.violation is not None:
        line += f", first violation at trial {verdict.violation[0]} agent {verdict.violation[1]}"
    print(line)
    print(f"predicted best performers match simulation: {'yes' if not mismatches else 'no'}")
    return 0 if not mismatches else 1


def _histories_identical(a, b):
    if len(a) != len(b):
        return False
    for sa, sb in zip(a.steps, b.steps):
        if sa.best_performer != sb.best_performer or sa.held != sb.held:
            return False
        if not (np.array_equal(sa.u_bar, sb.u_bar) and np.array_equal(sa.e_bar, sb.e_bar)):
            return False
        for ra, rb in zip(sa.records, sb.records):
            if not (np.array_equal(ra.u, rb.u) and np.array_equal(ra.e, rb.e) and ra.e_norm == rb.e_norm):
                return False
    return True


def cmd_consensus(scn, out, has_plant):
    if has_plant:
        t = _topology(scn.topology, len(scn.laws))
        if t.M != len(scn.laws):
            raise ConfigError("topology", f"has {t.M} agents, configuration has {len(scn.laws)}")
        collective = Collective(scn.plant, scn.laws, scn.r)
    else:
        t = _topology(scn.topology, None) if scn.topology else ring(5)
        rng = np.random.default_rng(scn.seed)
        plant = random_plant(rng, 4)
        collective = Collective(plant, random_laws(rng, plant, t.M, scale=0.2), rng.normal(size=4))
    central = run_cilc(collective, trials=scn.trials, hold_on_no_improvement=scn.hold_on_no_improvement)
    dist, elector = run_distributed_cilc(t, collective, trials=scn.trials,
                                         hold_on_no_improvement=scn.hold_on_no_improvement)
    same = _histories_identical(central, dist)
    rows = []
    for j, election in enumerate(elector.elections):
        for k, state in enumerate(election.trace):
            for v, (norm, aid) in enumerate(state, 1):
                rows.append((j, k, v, aid, norm))
    report.write_csv(os.path.join(out, "election_trace.csv"),
                     ("election", "round", "agent_id", "held_id", "held_norm"), rows)
    _cilc_outputs(dist, out, "cilc_norms", "distributed collective",
                  [f"agent {m}" for m in range(1, collective.M + 1)])
    rounds = sorted({e.rounds_used for e in elector.elections})
    doc = {"agents": t.M, "diameter": diameter(t), "rounds_used": rounds,
           "unanimous": all(e.unanimous for e in elector.elections),
           "identical_to_centralized": same, "trials": scn.trials}
    report.write_json(os.path.join(out, "consensus.json"), doc)
    print(f"agents {t.M}, diameter {diameter(t)}, rounds used {rounds}")
    print(f"distributed history identical to centralized: {'pass' if same else 'FAIL'}")
    return 0 if same else 1


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario configuration (JSON)")
    common.add_argument("--seed", type=int, help="seed for all randomized sampling")
    common.add_argument("--out", default="results", help="output directory (default: results)")
    common.add_argument("--trials", type=int, help="number of trials")
    common.add_argument("--hold", action="store_true",
                        help="freeze inputs when no agent would improve the elected error")
    common.add_argument("--distributed", action="store_true",
                        help="elect best performers by flooding over a topology")
    common.add_argument("--topology", help="edge-list file, one 'from to' pair per line")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="cilc", description="Collective iterative learning control runs.")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        doc = load_document(args.config) if args.config else default_document(args.scenario)
        has_plant = "plant" in doc
        if args.scenario == "consensus" and not has_plant:
            doc = dict(doc, plant={"source": "appendix-a"})
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.trials is not None:
            doc["trials"] = args.trials
        if args.hold:
            doc["hold_on_no_improvement"] = True
        if args.distributed:
            doc["distributed_election"] = True
        if args.topology:
            doc["topology"] = args.topology
        scn = resolve(doc)
        os.makedirs(args.out, exist_ok=True)
        if args.scenario == "appendix-a":
            return cmd_appendix_a(scn, args.out)
        if args.scenario == "twipr":
            return cmd_twipr(scn, args.out)
        if args.scenario == "certify":
            return cmd_certify(scn, args.out)
        if args.scenario == "perf-eval":
            return cmd_perf_eval(scn, args.out)
        return cmd_consensus(scn, args.out, has_plant)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalBlowup as exc:
        print(f"numerical blowup: {exc}", file=sys.stderr)
        return 3
    except CilcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
