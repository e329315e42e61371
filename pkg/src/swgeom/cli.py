"""Command-line front end.

Every subcommand reads its parameters from an optional JSON config file
(``--config``) and from flags; flags win.  Unknown config keys are
rejected.  Exit codes: 0 success, 1 bad input, 2 numerical failure,
3 acceptance failure (``verify`` only).
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import re
import sys
import tempfile

import numpy as np

from . import acceptance, flows, pde
from .errors import InvalidModel, NumericalFailure, ValidationError
from .mixtures import ComponentFamily, MixtureModel, SimplexPoint
from .wim import (
    InhomogeneousSpec,
    delta2_asymptotic_ratio,
    fisher_limit,
    fisher_matrix_numeric,
    g2_integral,
    g_integral,
    g_prime_at_1,
    inhomogeneous_limit,
    matching_point,
    matching_point_expansion,
    perturbation_lemma_check,
    second_order_limit,
    wasserstein_limit,
    wasserstein_matrix_numeric,
)
from .wim.matrices import MetricMatrix, scaling_factor

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 1, 2, 3

GLOBAL_DEFAULTS = {"out": "out", "format": "csv,json,svg", "seed": 0, "quiet": False, "timestamp": False}
FORMATS = {"csv", "json", "svg"}


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ------------------------------------------------------------------ helpers


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _words(text) -> list[str]:
    if isinstance(text, (list, tuple)):
        return [str(x) for x in text]
    return [w.strip() for w in str(text).split(",") if w.strip()]


def _fmt(x) -> str:
    return format(float(x), ".17g")


_FLOAT_TOKEN = re.compile(r'"__f17__([^"]*)"')


def _mark_floats(obj):
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return "__f17__" + _fmt(x)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _mark_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_mark_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _mark_floats(obj.tolist())
    return obj


def dumps(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    return _FLOAT_TOKEN.sub(r"\1", json.dumps(_mark_floats(obj), indent=2)) + "\n"


class Output:
    """Writes result files into the output directory and remembers them."""

    def __init__(self, cfg):
        self.dir = cfg["out"]
        self.formats = set(_words(cfg["format"]))
        bad = self.formats - FORMATS
        if bad:
            raise UsageError(f"unknown output formats {sorted(bad)}; choose from {sorted(FORMATS)}")
        self.quiet = cfg["quiet"]
        self.stamp = cfg["timestamp"]
        self.written: list[str] = []
        try:
            os.makedirs(self.dir, exist_ok=True)
            with tempfile.NamedTemporaryFile(dir=self.dir):
                pass
        except OSError as exc:
            raise UsageError(f"output directory {self.dir!r} is not writable: {exc}") from exc

    def path(self, name):
        return os.path.join(self.dir, name)

    def wants(self, fmt):
        return fmt in self.formats

    def _header(self):
        if self.stamp:
            return f"# generated {datetime.datetime.now(datetime.timezone.utc).isoformat()}\n"
        return ""

    def json(self, name, obj):
        if not self.wants("json"):
            return
        with open(self.path(name), "w") as fh:
            fh.write(dumps(obj))
        self.written.append(name)

    def csv(self, name, header, rows):
        if not self.wants("csv"):
            return
        with open(self.path(name), "w") as fh:
            fh.write(self._header())
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")
        self.written.append(name)

    def csv_with(self, name, writer):
        if not self.wants("csv"):
            return
        with open(self.path(name), "w") as fh:
            fh.write(self._header())
            writer(fh)
        self.written.append(name)

    def svg(self, name, draw):
        if not self.wants("svg"):
            return
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        plt.rcParams["svg.hashsalt"] = "swgeom"
        fig = draw(plt)
        fig.savefig(self.path(name), format="svg", metadata={"Date": None})
        plt.close(fig)
        self.written.append(name)

    def say(self, text):
        if not self.quiet:
            print(text)


def _metric_json(m: MetricMatrix):
    return m.to_dict()


def _model_from_cfg(cfg) -> MixtureModel:
    if cfg.get("model"):
        try:
            with open(cfg["model"]) as fh:
                return MixtureModel.from_json(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read model file: {exc}") from exc
    weights = _floats(cfg["weights"])
    return MixtureModel.homogeneous(weights, cfg["sigma"], gap=cfg["gap"], family=cfg["family"])


# ------------------------------------------------------------------ commands


def cmd_wim(cfg, out: Output):
    model = _model_from_cfg(cfg)
    fam = model.family
    limits = _words(cfg["limits"])
    unknown = set(limits) - {"fisher", "wasserstein", "second-order", "inhomogeneous"}
    if unknown:
        raise UsageError(f"unknown limits {sorted(unknown)}")
    if cfg["second_order"] and "second-order" not in limits:
        limits.append("second-order")

    if not cfg["sweep_sigma"]:
        fisher = fisher_matrix_numeric(model)
        wass = wasserstein_matrix_numeric(model)
        out.json("fisher_numeric.json", _metric_json(fisher))
        out.json("wasserstein_numeric.json", _metric_json(wass))
        gaps = model.gaps
        homogeneous = np.allclose(gaps, gaps[0], rtol=1e-9) and np.allclose(model.scales, model.scales[0], rtol=1e-9)
        ratios = {}
        if homogeneous:
            K = scaling_factor(fam, float(model.scales[0]), float(gaps[0]))
            ratios["homogeneous"] = {"log_K": K.log_magnitude, "G_over_K": wass.divided_by(K)}
        for name in limits:
            if name == "fisher":
                m = fisher_limit(model.weights)
            elif name == "wasserstein":
                m = wasserstein_limit(model.weights)
            elif name == "second-order":
                if not homogeneous:
                    raise InvalidModel("the second-order limit needs equal gaps and scales")
                m = second_order_limit(model.weights, float(model.scales[0]), float(gaps[0]))
            else:
                ispec = InhomogeneousSpec.from_model(model)
                m = inhomogeneous_limit(model.weights, ispec)
                K = ispec.scaling()
                ratios["inhomogeneous"] = {"log_K": K.log_magnitude, "G_over_K": wass.divided_by(K)}
            out.json(f"limit_{name.replace('-', '_')}.json", _metric_json(m))
        out.json("ratios.json", ratios)
        out.say(f"numeric Fisher:\n{fisher.entries}")
        if ratios:
            key = "homogeneous" if "homogeneous" in ratios else "inhomogeneous"
            out.say(f"Wasserstein / K ({key}):\n{np.asarray(ratios[key]['G_over_K'])}")
        return EXIT_OK

    # sigma sweep on a homogeneous model built from weights/gap
    sigmas = _floats(cfg["sweep_sigma"])
    p = SimplexPoint(_floats(cfg["weights"])) if not cfg.get("model") else model.weights
    d = cfg["gap"] if not cfg.get("model") else float(model.gaps[0])
    lim = np.diag(wasserstein_limit(p).entries)
    rows = []
    for s in sigmas:
        m = MixtureModel.homogeneous(p, s, gap=d, family=fam)
        w = wasserstein_matrix_numeric(m)
        K = scaling_factor(fam, s, d)
        devs = [abs(w.log_entry(i, i).log_magnitude - K.log_magnitude - math.log(lim[i])) for i in range(lim.size)]
        rows.append([s] + devs)
    header = ["sigma"] + [f"abs_log_dev_{i + 1}" for i in range(lim.size)]
    out.csv("sweep.csv", header, rows)
    monotone = all(all(b < a for a, b in zip(col, col[1:])) for col in zip(*[r[1:] for r in rows]))
    out.say("sigma      |log G_ii - log K - log limit_ii|")
    for r in rows:
        out.say(f"{r[0]:<10g} " + " ".join(f"{v:.6e}" for v in r[1:]))
    out.say(f"monotone decrease: {monotone}")

    def draw(plt):
        fig, ax = plt.subplots(figsize=(5, 4))
        for i in range(lim.size):
            ax.loglog([r[0] for r in rows], [r[1 + i] for r in rows], "o-", label=f"entry {i + 1}")
        ax.set_xlabel("sigma")
        ax.set_ylabel("|log G/K - log limit|")
        ax.legend()
        return fig

    out.svg("sweep.svg", draw)
    return EXIT_OK


def cmd_asymptotics(cfg, out: Output):
    ks = _floats(cfg["k"])
    rows = []
    for k in ks:
        a = (k + 1) / k
        closed = math.pi / (a * math.sin(math.pi / a))
        g = g_integral(k)
        rows.append([k, g, closed, abs(g - closed), g2_integral(k)])
    out.csv("g.csv", ["k", "g", "g_closed_form", "abs_error", "g2"], rows)
    gp = g_prime_at_1()
    out.json("constants.json", {
        "g(1)": g_integral(1.0), "g2(1)": g2_integral(1.0), "g_prime(1)": gp,
        "pi/2": math.pi / 2, "pi^3/8": math.pi ** 3 / 8, "pi/4": math.pi / 4,
    })
    out.say("k          g(k)                    closed form             g2(k)")
    for r in rows:
        out.say(f"{r[0]:<10g} {r[1]:<23.17g} {r[2]:<23.17g} {r[4]:.17g}")
    out.say(f"g'(1) = {gp:.17g}  (pi/4 = {math.pi / 4:.17g})")

    sigmas = _floats(cfg["sigmas"])
    pi_, pn = _floats(cfg["weights"])[:2]
    mrows, drows = [], []
    for fam in ("gaussian", "laplace"):
        for k in _floats(cfg["delta2_k"]):
            for s in sigmas:
                try:
                    l = matching_point(fam, pi_, pn, k, s, 1.0)
                except NumericalFailure:
                    continue
                exp_l = matching_point_expansion(pi_, pn, k, s, 1.0) if fam == "gaussian" else l
                mrows.append([fam, k, s, l, exp_l])
                ratio = delta2_asymptotic_ratio(fam, pi_, pn, k, s, 1.0)
                drows.append([fam, k, s, ratio, g_integral(k), ratio / g_integral(k) - 1.0])
    out.csv("matching.csv", ["family", "k", "sigma", "l", "l_expansion"], mrows)
    out.csv("delta2.csv", ["family", "k", "sigma", "ratio", "g_k", "rel_dev"], drows)
    prow = []
    target = g2_integral(1.0)
    for t in _floats(cfg["t"]):
        D = perturbation_lemma_check(1.0, 1.0, t)
        scaled = D * 2.0 * t ** 3
        prow.append([t, D, scaled, scaled / target - 1.0])
    out.csv("perturbation.csv", ["t", "D", "D_scaled", "rel_dev"], prow)
    return EXIT_OK


def _energy_from_cfg(cfg, n):
    kind = cfg["energy"]
    if kind == "entropy":
        return flows.Internal.entropy()
    if kind == "potential":
        v = _floats(cfg["potential"]) if cfg["potential"] is not None else [0.0] * n
        return flows.Potential(v)
    if kind == "interaction":
        w = cfg["kernel"]
        if isinstance(w, str):
            try:
                w = json.loads(w)
            except json.JSONDecodeError as exc:
                raise UsageError(f"kernel must be a JSON matrix: {exc}") from exc
        if w is None:
            w = np.eye(n).tolist()
        return flows.Interaction(np.array(w, dtype=float))
    raise UsageError(f"unknown energy {kind!r}; choose entropy, potential or interaction")


def cmd_flow(cfg, out: Output):
    p0 = SimplexPoint(_floats(cfg["p0"]))
    energy = _energy_from_cfg(cfg, p0.n)
    spec = flows.IntegratorSpec(cfg["method"], cfg["dt"])
    states = flows.integrate_flow(energy, p0, spec, cfg["t_end"], stride=cfg["stride"])
    out.csv_with("trajectory.csv", lambda fh: flows.write_trajectory_csv(states, fh))
    final = states[-1]
    out.json("final.json", {"t": final.t, "p": final.p.p, "energy": energy.energy(final.p.p)})
    out.say(f"t={final.t:g} p={np.array2string(final.p.p, precision=10)}")

    def draw(plt):
        fig, ax = plt.subplots(figsize=(6, 4))
        t = [s.t for s in states]
        P = np.array([s.p.p for s in states])
        for i in range(P.shape[1]):
            ax.plot(t, P[:, i], label=f"p_{i + 1}")
        ax.set_xlabel("t")
        ax.set_ylabel("p_i(t)")
        ax.legend()
        return fig

    out.svg("trajectory.svg", draw)
    return EXIT_OK


def _heat(cfg, out: Output, two_d: bool):
    g1 = pde.Grid1D.from_spacing(cfg["x_min"], cfg["x_max"], cfg["dx"])
    steps = int(round(cfg["t_end"] / cfg["dt"]))
    if steps < 1 or abs(steps * cfg["dt"] - cfg["t_end"]) > 1e-9 * cfg["t_end"]:
        raise UsageError("t_end must be a positive multiple of dt")
    if two_d:
        grid = pde.Grid2D(g1, g1)
        f0 = pde.Field.from_density(lambda X, Y: np.exp(-(X * X + Y * Y) / 2) / (2 * math.pi), grid)
        rhs, cell = pde.heat2d_rhs, grid.cell_area
    else:
        grid = g1
        f0 = pde.Field.from_density(lambda x: np.exp(-x * x / 2) / math.sqrt(2 * math.pi), grid)
        rhs, cell = pde.heat1d_rhs, g1.dx
    scheme = pde.run_scheme(rhs, f0, grid, cfg["dt"], steps, cfg["method"], stride=cfg["stride"])
    ref = pde.cn_trajectory(f0, grid, cfg["dt"], steps, stride=cfg["stride"])
    # compare densities, as plotted
    scheme_d = pde.Trajectory(scheme.times, scheme.fields / cell)
    ref_d = pde.Trajectory(ref.times, ref.fields / cell)
    rows = pde.error_report(scheme_d, ref_d)
    out.csv_with("error.csv", lambda fh: pde.write_error_csv(rows, fh))
    out.csv_with("scheme_final.csv", lambda fh: pde.write_field_csv(scheme_d.final, grid, fh))
    out.csv_with("reference_final.csv", lambda fh: pde.write_field_csv(ref_d.final, grid, fh))
    if cfg["trajectory"]:
        out.csv_with("scheme_trajectory.csv", lambda fh: pde.write_trajectory_csv(scheme_d, grid, fh))
        out.csv_with("reference_trajectory.csv", lambda fh: pde.write_trajectory_csv(ref_d, grid, fh))
    peak = float(np.max(ref_d.final))
    rel = rows[-1].max_abs / peak
    summary = {"t_end": float(scheme.times[-1]), "max_abs_final": rows[-1].max_abs, "relative_to_peak": rel,
               "mass_scheme": float(np.sum(scheme.final)), "mass_reference": float(np.sum(ref.final))}
    out.json("summary.json", summary)
    out.say(f"max |scheme - CN| at t={summary['t_end']:g}: {rows[-1].max_abs:.3e} ({rel:.3e} of peak)")

    def draw(plt):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
        if two_d:
            mid = grid.shape[1] // 2
            a1.plot(g1.x, scheme_d.final[:, mid], label="scaling Wasserstein scheme")
            a1.plot(g1.x, ref_d.final[:, mid], "--", label="Crank-Nicolson")
            a1.set_title("slice y = 0")
        else:
            for k in range(0, len(scheme_d), max(1, len(scheme_d) // 5)):
                a1.plot(g1.x, scheme_d.fields[k], color="C0")
                a1.plot(g1.x, ref_d.fields[k], "--", color="C1")
            a1.plot([], [], color="C0", label="scaling Wasserstein scheme")
            a1.plot([], [], "--", color="C1", label="Crank-Nicolson")
        a1.set_xlabel("x")
        a1.legend()
        a2.semilogy([r.t for r in rows[1:]], [max(r.max_abs, 1e-300) for r in rows[1:]])
        a2.set_xlabel("t")
        a2.set_ylabel("max |difference|")
        return fig

    out.svg("heat.svg", draw)
    return EXIT_OK


def cmd_heat1d(cfg, out):
    return _heat(cfg, out, False)


def cmd_heat2d(cfg, out):
    return _heat(cfg, out, True)


_POTENTIALS = {
    "sin": (np.sin, np.cos),
    "quadratic": (lambda x: 0.5 * x * x, lambda x: x),
    "constant": (lambda x: np.zeros_like(x), lambda x: np.zeros_like(x)),
}


def cmd_extended(cfg, out: Output):
    if cfg["potential"] not in _POTENTIALS:
        raise UsageError(f"unknown potential {cfg['potential']!r}; choose from {sorted(_POTENTIALS)}")
    V, dV = _POTENTIALS[cfg["potential"]]
    weights = np.array(_floats(cfg["weights"]))
    s0 = flows.ExtendedFlowState(weights, _floats(cfg["means"]), 0.0, cfg["sigma"])
    spec = flows.IntegratorSpec(cfg["method"], cfg["dt"])
    states = flows.integrate_extended_flow(s0, flows.Potential(V=V, dV=dV), spec, cfg["steps"] * cfg["dt"],
                                           stride=cfg["stride"])
    merges = [{"t": t, "index": i, "mean": m} for s in states for (t, i, m) in s.merges]
    final = states[-1]
    out.csv_with("trajectory.csv", lambda fh: flows.write_trajectory_csv(states, fh))
    out.json("final.json", {"t": final.t, "p": final.p, "mu": final.mu, "merges": merges})
    for m in merges:
        out.say(f"merge at t={m['t']:.6g}: components {m['index']} and {m['index'] + 1} -> mean {m['mean']:.10g}")
    out.say(f"final means {np.array2string(final.mu, precision=10)} weights {np.array2string(final.p, precision=10)}")

    def draw(plt):
        fig, ax = plt.subplots(figsize=(6, 4))
        n0 = s0.n
        t = np.array([s.t for s in states])
        for i in range(n0):
            ys = [s.mu[i] if i < s.n else np.nan for s in states]
            ax.plot(t, ys, label=f"mu_{i + 1}")
        ax.set_xlabel("t")
        ax.set_ylabel("mu_i(t)")
        ax.legend()
        return fig

    out.svg("means.svg", draw)
    return EXIT_OK


def cmd_verify(cfg, out: Output):
    overrides = {}
    for item in cfg["tolerance"] or []:
        if "=" not in item:
            raise UsageError(f"tolerance override must look like key=value, got {item!r}")
        k, v = item.split("=", 1)
        if k not in acceptance.DEFAULT_TOLERANCES:
            raise UsageError(f"unknown tolerance key {k!r}")
        try:
            overrides[k] = float(v)
        except ValueError:
            raise UsageError(f"tolerance value for {k} is not a number: {v!r}") from None
    only = [int(x) for x in _floats(cfg["only"])] if cfg["only"] else None
    if only and any(n not in acceptance.CRITERIA for n in only):
        raise UsageError(f"criteria are numbered 1..{len(acceptance.CRITERIA)}")
    results = acceptance.run_all(overrides, seed=cfg["seed"], only=only)
    report = {
        "passed": all(r.passed for r in results),
        "overridden_tolerances": overrides,
        "criteria": [r.to_dict() for r in results],
    }
    out.json("verify.json", report)
    for r in results:
        out.say(r.summary())
    if not out.quiet:
        sys.stdout.write(dumps(report) if cfg["json_stdout"] else "")
    return EXIT_OK if report["passed"] else EXIT_ACCEPTANCE


# ------------------------------------------------------------------ parser

COMMANDS = {
    "wim": (cmd_wim, "information matrices and their limits", {
        "model": None, "weights": "0.3,0.7", "sigma": 0.1, "gap": 1.0, "family": "gaussian",
        "limits": "fisher,wasserstein", "sweep_sigma": None, "second_order": False,
    }),
    "asymptotics": (cmd_asymptotics, "limit integrals, matching points, Laplace-method ratios", {
        "k": "0.5,1,2,3,10", "sigmas": "0.1,0.07,0.05,0.03,0.02", "delta2_k": "1,3",
        "weights": "0.5,0.5", "t": "10,20,40,80",
    }),
    "flow": (cmd_flow, "gradient flow of an energy on the simplex", {
        "energy": "entropy", "p0": "0.2,0.5,0.3", "potential": None, "kernel": None,
        "dt": 0.01, "t_end": 50.0, "method": "euler", "stride": 1,
    }),
    "heat1d": (cmd_heat1d, "1D parametric heat scheme against Crank-Nicolson", {
        "x_min": -5.0, "x_max": 5.0, "dx": 0.1, "dt": 0.001, "t_end": 1.0, "method": "euler",
        "stride": 100, "trajectory": False,
    }),
    "heat2d": (cmd_heat2d, "2D parametric heat scheme against split Crank-Nicolson", {
        "x_min": -5.0, "x_max": 5.0, "dx": 0.1, "dt": 0.001, "t_end": 1.0, "method": "euler",
        "stride": 100, "trajectory": False,
    }),
    "extended": (cmd_extended, "potential flow of weights and means", {
        "weights": "0.2,0.5,0.3", "means": "-1,0,3", "sigma": 0.1, "potential": "sin",
        "dt": 0.01, "steps": 5000, "method": "euler", "stride": 10,
    }),
    "verify": (cmd_verify, "run the acceptance suite", {
        "only": None, "tolerance": None, "json_stdout": False,
    }),
}

_TYPES = {
    "sigma": float, "gap": float, "dt": float, "t_end": float, "x_min": float, "x_max": float, "dx": float,
    "stride": int, "steps": int, "seed": int,
}
_FLAGS = {"second_order", "trajectory", "json_stdout", "quiet", "timestamp"}


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = _Parser(add_help=False)
    common.add_argument("--config", default=S, help="JSON file with parameters (flags win)")
    common.add_argument("--out", default=S, help="output directory (default ./out)")
    common.add_argument("--format", default=S, help="comma-separated subset of csv,json,svg")
    common.add_argument("--seed", type=int, default=S, help="seed for randomised checks")
    common.add_argument("--quiet", action="store_true", default=S, help="suppress console output")
    common.add_argument("--timestamp", action="store_true", default=S, help="add a generated-at header to CSV files")
    parser = _Parser(prog="swgeom", description="Scaling Wasserstein geometry of 1D mixture models.",
                     parents=[common])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, (_, help_text, defaults) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, parents=[common])
        for key, default in defaults.items():
            flag = "--" + key.replace("_", "-")
            if key in _FLAGS:
                sp.add_argument(flag, dest=key, action="store_true", default=S)
            elif key == "tolerance":
                sp.add_argument(flag, dest=key, action="append", default=S, metavar="KEY=VALUE")
            else:
                sp.add_argument(flag, dest=key, type=_TYPES.get(key, str), default=S,
                                help=f"default: {default}")
    return parser


def resolve_config(command: str, explicit: dict) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    defaults = dict(GLOBAL_DEFAULTS)
    defaults.update(COMMANDS[command][2])
    cfg = dict(defaults)
    path = explicit.pop("config", None)
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path!r}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(data) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys for {command!r}: {sorted(unknown)}")
        for key, value in data.items():
            cast = _TYPES.get(key)
            cfg[key] = cast(value) if cast and value is not None else value
    cfg.update(explicit)
    return cfg


_NEGATIVE_LIST = re.compile(r"^-[\d.]")


def _glue_negative_values(argv):
    # argparse reads "-1,0,3" as an option; rewrite "--means -1,0,3" as "--means=-1,0,3"
    out = []
    for tok in argv:
        if out and _NEGATIVE_LIST.match(tok) and out[-1].startswith("--") and "=" not in out[-1]:
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _glue_negative_values(sys.argv[1:] if argv is None else list(argv))
    try:
        ns = parser.parse_args(argv)
        explicit = {k: v for k, v in vars(ns).items() if k != "command"}
        if ns.command is None:
            parser.print_help()
            return EXIT_INPUT
        cfg = resolve_config(ns.command, explicit)
        cfg["family"] = ComponentFamily.parse(cfg["family"]).value if "family" in cfg else None
        out = Output(cfg)
        return COMMANDS[ns.command][0](cfg, out)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:  # includes every ValidationError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
