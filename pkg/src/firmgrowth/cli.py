"""Command-line entry point: ``firmgrowth <command> [flags]``.

Each command turns its flags into a parameter dict, runs a function of
those parameters and emits a :class:`ResultEnvelope` as CSV or JSON.  The
same dict is stored in the envelope, so :func:`rerun` can regenerate the
tables from it.

Exit codes: 0 success, 1 configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Any, Callable

import numpy as np

from . import analytics, experiments as ex
from .core import KDistribution, LognormalParams, sample_k
from .errors import ConfigurationError, DataError
from .estimators import bin_sigma_by_size, effective_beta, fit_global_beta, hill_tail_exponent
from .panel import compute_observations, empirical_k, estimate_lognormal_params, ingest_panel, unit_growth_factors
from .results import ResultEnvelope, export_results, render, row

Tables = dict[str, list[dict[str, Any]]]

K_DIST_CHOICES = ("fixed", "exp", "yule", "powerlaw", "empirical")
U64_MAX = 2**64 - 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


# ---------------------------------------------------------------------------
# Parameter helpers
# ---------------------------------------------------------------------------


def kdist_from(p: dict[str, Any]) -> KDistribution:
    kind = p["k_dist"]
    if kind == "fixed":
        return KDistribution.fixed(int(p["k0"]))
    if kind == "exp":
        return KDistribution.exponential(p["k0"])
    if kind == "yule":
        return KDistribution.yule(p["b"])
    if kind == "powerlaw":
        return KDistribution.power_law(p["phi"], int(p["kmax"]))
    if kind == "empirical":
        if p.get("k_table"):
            with open(p["k_table"], encoding="utf-8") as fh:
                values = [int(float(line)) for line in fh if line.strip()]
            return KDistribution.empirical(values)
        if p.get("input"):
            return empirical_k(ingest_panel(p["input"]), p.get("level") or "firm")
        raise ConfigurationError("--k-dist empirical needs --k-table or --input")
    raise ConfigurationError(f"unknown K distribution {kind!r}")


def xi_from(p) -> LognormalParams:
    return LognormalParams(p["mxi"], p["vxi"])


def eta_from(p) -> LognormalParams:
    return LognormalParams(p["meta"], p["veta"])


def spec_from(p, kdist: KDistribution | None = None) -> ex.ExperimentSpec:
    return ex.ExperimentSpec(
        kdist or kdist_from(p), xi_from(p), eta_from(p), p["firms"], p["replicas"], p["seed"],
        p["min_count"], p["window"],
    )


def k_values_from(p) -> np.ndarray:
    if p.get("k_list"):
        return np.unique(np.asarray(_ints(p["k_list"]), dtype=np.int64))
    return ex.k_grid(p["k_top"], 4)


def _sigma_rows(binned) -> list[dict]:
    return [row(b.center, b.sigma, b.count, b.stderr) for b in binned]


def _scalar(value, stderr=None, count=None) -> list[dict]:
    return [row(None, value, count, stderr)]


# ---------------------------------------------------------------------------
# Commands (parameter dict -> tables)
# ---------------------------------------------------------------------------


def cmd_simulate_pk(p) -> Tables:
    kd = kdist_from(p)
    ks = sample_k(kd, p["firms"], p["seed"])
    lo = 2 ** np.floor(np.log2(ks)).astype(np.int64)
    edges, counts = np.unique(lo, return_counts=True)
    rows = [row(e * math.sqrt(2.0), c / (len(ks) * e), c) for e, c in zip(edges, counts)]
    tables: Tables = {"pk": rows, "mean_k": _scalar(float(ks.mean()), count=len(ks))}
    try:
        tables["hill_exponent"] = _scalar(float(hill_tail_exponent(ks, p["tail_fraction"])))
    except DataError:
        pass
    return tables


def cmd_sigma_s(p) -> Tables:
    res = ex.run_sigma_s(spec_from(p))
    ov = res.overlays
    tables: Tables = {
        "sigma": _sigma_rows(res.binned),
        "beta": [row(x, b) for x, b in res.beta],
        "ke": [row(b.center, b.mean_Ke, b.count) for b in res.binned],
        "sigma_large": [row(b.center, s) for b, s in zip(res.binned, ov["sigma_large"])],
        "sigma_small": _scalar(ov["sigma_small"]),
        "beta_max": [row(res.beta_max_at, res.beta_max)],
        "global_beta": _scalar(res.global_beta.exponent, res.global_beta.stderr, res.global_beta.n),
    }
    if "S_star" in ov:
        tables["S_star"] = _scalar(ov["S_star"])
        tables["S1"] = _scalar(ov["S1"])
    return tables


def cmd_sigma_k(p) -> Tables:
    res = ex.run_sigma_k(spec_from(p, KDistribution.fixed(1)), k_values_from(p))
    coeffs = analytics.series_coefficients(xi_from(p), eta_from(p))
    return {
        "sigma2": [row(k, s, n, e) for k, s, n, e in zip(res.K, res.sigma2, res.counts, res.stderr)],
        "beta": [row(k, b) for k, b in ex.beta_of_k(res, p["window"])] if len(res.K) >= 3 else [],
        "series_order2": [row(k, analytics.truncated_series_sigma2(k, coeffs, 2)) for k in res.K],
    }


def _grid(p) -> list[tuple[float, float]]:
    cells = []
    for item in p["grid"].split(","):
        a, b = item.split(":")
        cells.append((float(a), float(b)))
    return cells


def cmd_collapse(p) -> Tables:
    run = ex.run_collapse(_grid(p), k_values_from(p), p["firms"], p["seed"], p["replicas"],
                          p["mxi"], p["meta"], p["window"])
    col = run.collapse
    tables: Tables = {}
    for (vx, ve), (z, y) in zip(col.params, col.curves):
        tables[f"collapsed[vxi={vx:g},veta={ve:g}]"] = [row(a, b) for a, b in zip(z, y)]
    for (vx, ve), f, r in zip(col.params, col.shifts, col.rms):
        tables.setdefault(f"shift[veta={ve:g}]", []).append(row(vx, f, None, r))
    tables["master"] = [row(a, b) for a, b in zip(*col.master)]
    tables["beta_z"] = [row(a, b) for a, b in col.beta_of_z]
    tables["f_xi"] = [row(k, v) for k, v in sorted(run.f_xi.items())]
    tables["f_eta"] = [row(k, v) for k, v in sorted(run.f_eta.items())]
    tables["spread"] = _scalar(col.spread)
    tables["beta_min"] = [row(col.argmin_z, col.beta_min)]
    return tables


def cmd_beta_min(p) -> Tables:
    sweep = ex.run_beta_min_sweep(_floats(p["vxi_list"]), _floats(p["veta_list"]), p["firms"],
                                  k_values_from(p), p["seed"], p["replicas"], p["window"])
    tables: Tables = {}
    for c in sweep.cells:
        tables.setdefault(f"beta_min[veta={c.eta_V:g}]", []).append(row(c.xi_V, c.beta_min))
    tables["fit_p"] = _scalar(sweep.p)
    tables["fit_q"] = _scalar(sweep.q)
    tables["eta_spread"] = _scalar(sweep.eta_spread)
    return tables


def cmd_predict(p) -> Tables:
    xi, eta = xi_from(p), eta_from(p)
    cp = analytics.crossover_size(xi, eta)
    return {
        "S_star": _scalar(cp.S_star),
        "S1": _scalar(cp.S1),
        "K_star": _scalar(cp.K_star),
        "S_star_small_eta": _scalar(cp.S_star_small_eta),
        "feasible_exponential": _scalar(float(analytics.crossover_feasible_exponential(xi.V, p["k0"]))),
        "feasible_powerlaw": _scalar(float(analytics.crossover_feasible_powerlaw(p["phi"]))),
    }


def cmd_pgsk(p) -> Tables:
    res = ex.run_conditional_pgsk(p["vxi"], p["veta"], p["mxi"], p["meta"], p["k"], p["firms"], p["seed"])
    return {
        "sigma": _sigma_rows(res.binned),
        "ke": [row(b.center, b.mean_Ke, b.count) for b in res.binned],
        "modal": [row(res.modal.center, res.modal.sigma, res.modal.count, res.modal.stderr)],
        "abnormal": [row(res.abnormal.center, res.abnormal.sigma, res.abnormal.count, res.abnormal.stderr)],
        "ke_ratio": _scalar(res.ke_ratio),
    }


def cmd_vxi_sweep(p) -> Tables:
    level = p.get("level") or "firm"
    out = ex.run_vxi_sweep({level: kdist_from(p)}, p["mxi"], _floats(p["vxi_list"]), eta_from(p), p["firms"],
                           p["seed"], p["replicas"], p["min_count"], p["window"])
    return {f"beta[{lv}]": [row(v, b) for v, b in rows] for lv, rows in out.items()}


def _require_input(p) -> str:
    if not p.get("input"):
        raise ConfigurationError("--input is required")
    return p["input"]


def cmd_ingest(p) -> Tables:
    panel = ingest_panel(_require_input(p))
    per = []
    for t in panel.periods:
        m = panel.period == t
        per.append(row(int(t), float(panel.sales[m].sum()), int(m.sum())))
    return {
        "records": _scalar(float(len(panel)), count=len(panel)),
        "sales_by_period": per,
        "firms": _scalar(float(len(panel.firm_labels))),
        "products": _scalar(float(len(panel.product_labels))),
    }


def cmd_observe(p) -> Tables:
    panel = ingest_panel(_require_input(p))
    pair = tuple(_ints(p["period_pair"])) if p.get("period_pair") else None
    obs = compute_observations(panel, p["level"], pair)
    binned = bin_sigma_by_size(obs, "S", p["min_count"])
    tables: Tables = {"sigma": _sigma_rows(binned), "observations": _scalar(float(len(obs)), count=len(obs))}
    if len(binned) >= 3:
        fit = fit_global_beta(binned)
        tables["beta"] = [row(x, b) for x, b in effective_beta(binned, p["window"])]
        tables["global_beta"] = _scalar(fit.exponent, fit.stderr, fit.n)
    xi = estimate_lognormal_params(panel.sales)
    eta = estimate_lognormal_params(unit_growth_factors(panel))
    tables["m_xi"], tables["V_xi"] = _scalar(xi.m), _scalar(xi.V)
    tables["m_eta"], tables["V_eta"] = _scalar(eta.m), _scalar(eta.V)
    return tables


def cmd_reassign(p) -> Tables:
    panel = ingest_panel(_require_input(p))
    levels = [lv.strip() for lv in p["levels"].split(",") if lv.strip()]
    before = ex.observed_beta(panel, levels, p["min_count"])
    xi = LognormalParams(p["mxi"], p["vxi"]) if p.get("override_xi") else None
    res = ex.run_reassignment(panel, p["mode"], levels, p["seed"], p["min_count"], xi=xi)
    tables: Tables = {}
    for lv in levels:
        tables[f"beta_observed[{lv}]"] = _scalar(before[lv])
        tables[f"beta_star[{lv}]"] = _scalar(res.beta[lv], count=len(res.observations[lv]))
    return tables


def cmd_series(p) -> Tables:
    c = analytics.series_coefficients(xi_from(p), eta_from(p))
    ks = k_values_from(p)
    return {
        "a": _scalar(c.a),
        "b": _scalar(c.b_series),
        "C": _scalar(c.C),
        "m0": _scalar(c.m0),
        "m1": _scalar(c.m1),
        "V1": _scalar(c.V1),
        "V2": _scalar(c.V2),
        "sigma2_order1": [row(k, analytics.truncated_series_sigma2(k, c, 1)) for k in ks],
        "sigma2_order2": [row(k, analytics.truncated_series_sigma2(k, c, 2)) for k in ks],
    }


COMMANDS: dict[str, tuple[Callable[[dict], Tables], str]] = {
    "simulate-pk": (cmd_simulate_pk, "sample P(K) and report its log-binned density and tail exponent"),
    "sigma-s": (cmd_sigma_s, "sigma(S) and beta(S) for firms drawn from P(K)"),
    "sigma-k": (cmd_sigma_k, "Var(g) for firms of fixed unit count K"),
    "collapse": (cmd_collapse, "collapse sigma^2(K) curves of a (V_xi, V_eta) grid"),
    "beta-min": (cmd_beta_min, "minimum of beta(K) over a V_xi x V_eta grid"),
    "predict": (cmd_predict, "closed-form crossover sizes and feasibility"),
    "pgsk": (cmd_pgsk, "growth dispersion per size bin at fixed K"),
    "vxi-sweep": (cmd_vxi_sweep, "global beta against V_xi for a fixed P(K)"),
    "ingest": (cmd_ingest, "validate a panel CSV and summarise it"),
    "observe": (cmd_observe, "growth observations and sigma(S) of a panel"),
    "reassign": (cmd_reassign, "beta after reassigning panel units"),
    "series": (cmd_series, "large-K series coefficients and truncated sigma^2(K)"),
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global")
    g.add_argument("--seed", type=_u64, default=0)
    g.add_argument("--replicas", type=int, default=1)
    g.add_argument("--out", default=None, help="output path (default: stdout)")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    m = common.add_argument_group("model")
    m.add_argument("--k-dist", choices=K_DIST_CHOICES, default="fixed")
    m.add_argument("--k0", type=float, default=100.0, help="fixed K or exponential mean")
    m.add_argument("--b", type=float, default=0.5, help="urn entry probability")
    m.add_argument("--phi", type=float, default=2.0, help="power-law exponent")
    m.add_argument("--kmax", type=int, default=10_000_000, help="power-law cutoff")
    m.add_argument("--mxi", type=float, default=0.0)
    m.add_argument("--vxi", type=float, default=1.0)
    m.add_argument("--meta", type=float, default=0.0)
    m.add_argument("--veta", type=float, default=0.36)
    m.add_argument("--firms", type=int, default=10_000)
    m.add_argument("--k-table", default=None, help="file with one unit count per line")
    e = common.add_argument_group("estimator")
    e.add_argument("--min-count", type=int, default=10)
    e.add_argument("--window", type=int, default=5)

    parser = _Parser(prog="firmgrowth", description="Proportional-growth firm model experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name in ("sigma-k", "collapse", "beta-min", "series"):
            sp.add_argument("--k-list", default=None, help="comma-separated K values")
            sp.add_argument("--k-top", type=int, default=1024, help="largest K of the default quarter-octave grid")
        if name == "simulate-pk":
            sp.add_argument("--tail-fraction", type=float, default=0.1)
        if name == "collapse":
            sp.add_argument("--grid", default="1:0.5,2:0.5,1:1,2:1", help="V_xi:V_eta cells, comma-separated")
        if name == "beta-min":
            sp.add_argument("--vxi-list", default="4,6,8")
            sp.add_argument("--veta-list", default="1")
        if name == "pgsk":
            sp.add_argument("--k", type=int, default=2**15, help="units per firm")
        if name == "vxi-sweep":
            sp.add_argument("--vxi-list", default="0,1,2,4,8,12,16,20,25")
            sp.add_argument("--level", default="firm", help="level of the --input panel for empirical P(K)")
            sp.add_argument("--input", default=None, help="panel CSV for empirical P(K)")
        if name in ("ingest", "observe", "reassign"):
            sp.add_argument("--input", default=None, help="panel CSV path")
        if name == "observe":
            sp.add_argument("--level", choices=("market", "firm", "product"), default="firm")
            sp.add_argument("--period-pair", default=None, help="t,t1 (default: pool all consecutive pairs)")
        if name == "reassign":
            sp.add_argument("--mode", choices=("keep_eta", "shuffle_eta", "synthetic"), default="keep_eta")
            sp.add_argument("--levels", default="firm")
            sp.add_argument("--override-xi", action="store_true",
                            help="synthetic mode: use --mxi/--vxi instead of panel estimates")
    return parser


def params_of(args: argparse.Namespace) -> dict[str, Any]:
    p = dict(vars(args))
    for k in ("out", "format"):
        p.pop(k, None)
    return p


def run_command(params: dict[str, Any]) -> ResultEnvelope:
    name = params["command"]
    if name not in COMMANDS:
        raise ConfigurationError(f"unknown command {name!r}")
    tables = COMMANDS[name][0](params)
    return ResultEnvelope(name, params, params.get("seed"), tables)


def rerun(envelope: ResultEnvelope) -> ResultEnvelope:
    """Regenerate an envelope from its stored parameters and seed."""
    return run_command(dict(envelope.spec))


def _predict_text(env: ResultEnvelope) -> str:
    t = {k: v[0]["y"] for k, v in env.tables.items()}
    yes = lambda v: "yes" if v else "no"  # noqa: E731
    return (
        f"S* = {t['S_star']:.6g}\n"
        f"S1 = {t['S1']:.6g}\n"
        f"K* = {t['K_star']:.6g}\n"
        f"crossover feasible (exponential P(K), K0={env.spec['k0']:g}): {yes(t['feasible_exponential'])}\n"
        f"crossover feasible (power-law P(K), phi={env.spec['phi']:g}): {yes(t['feasible_powerlaw'])}\n"
    )


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        env = run_command(params_of(args))
        if args.command == "predict":
            sys.stdout.write(_predict_text(env))
            if args.out:
                export_results(env, args.format, args.out)
        elif args.out:
            export_results(env, args.format, args.out)
        else:
            sys.stdout.write(render(env, args.format))
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
