"""Command-line interface: ``gnmcal {gen,fit,predict,eval,sweep}``.

Every command writes its files into ``--out``. Outputs are staged in memory
and only written (atomically, file by file) once the whole command has
succeeded; on failure nothing new is left behind.
"""
import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from .calibrate import (GPConfig, PFCFitError, PFCModel, ResponseEvaluator, fit_surrogate,
                        gnm_fit, pfc_fit, predict_response)
from .dataset import (MODEL_HEADER, PHYSICAL_HEADER, CSVFormatError, generate_synthetic,
                      get_truth, load_model, load_physical)
from .evaluate import (DEFAULT_SIZES, REPORT_HEADER, SWEEP_HEADER, ExperimentConfig, rows_to_csv,
                       run_experiment, select_lambda, sweep_lambda)
from .gp import GPConditioningError
from .graph import EmptyClusterError

COMMANDS = ("gen", "fit", "predict", "eval", "sweep")

# defaults for every RunConfig field; the config file may set any of them
DEFAULTS = {
    "dataset": None,
    "physical": None,
    "model": None,
    "m": None,
    "n": None,
    "seed": 0,
    "lambda": "cv",
    "grid": "0:0.05:1",
    "methods": "gnm,pfc",
    "method": "gnm",
    "terminal_response": False,
    "gp_optimize": True,
    "out": None,
    "xs": None,
    "queries": None,
}

TRUTH_FORMULAS = {
    "sd1": {"physical": "exp(x/10) sin(x)",
            "model": "exp(x/10) sin(x) x / (2 theta)",
            "theta": "x / 2"},
    "sd2": {"physical": "cos(2x) sin(x/2)",
            "model": "cos(2x) sin(x/2) sin(pi theta / (2 d)) cos(2 pi theta / d) "
                     "exp(theta / (2 d) - 1/2), d = (x - 2)^2 + 1",
            "theta": "(x - 2)^2 + 1"},
}


class UsageError(Exception):
    pass


# -- parsing ---------------------------------------------------------------

def parse_float(token, what):
    try:
        v = float(token)
    except ValueError:
        raise ValueError(f"{what}: cannot parse {token!r} as a number") from None
    if not math.isfinite(v):
        raise ValueError(f"{what}: {token!r} is not finite")
    return v


def parse_grid(text):
    """``lo:step:hi`` (inclusive), a comma-separated list, or a list of numbers."""
    if isinstance(text, (list, tuple)):
        text = ",".join(str(v) for v in text)
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"--grid: expected lo:step:hi, got {text!r}")
        lo, step, hi = (parse_float(p, "--grid") for p in parts)
        if step <= 0 or hi < lo:
            raise ValueError(f"--grid: need step > 0 and hi >= lo, got {text!r}")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        grid = tuple(round(lo + k * step, 12) for k in range(count))
    else:
        grid = tuple(parse_float(t, "--grid") for t in text.split(",") if t.strip())
    if not grid:
        raise ValueError("--grid is empty")
    if any(v < 0 for v in grid):
        raise ValueError(f"--grid values must be >= 0, got {text!r}")
    return grid


def parse_lambda(value):
    if isinstance(value, str) and value.strip().lower() == "cv":
        return "cv"
    v = parse_float(value, "--lambda") if isinstance(value, str) else float(value)
    if v < 0:
        raise ValueError(f"--lambda must be >= 0 or 'cv', got {value!r}")
    return v


def parse_methods(text):
    methods = tuple(t.strip() for t in str(text).split(",") if t.strip())
    for mth in methods:
        if mth not in ("gnm", "pfc"):
            raise ValueError(f"--methods: unknown method {mth!r} (expected gnm or pfc)")
    if not methods:
        raise ValueError("--methods is empty")
    return methods


def parse_queries(xs, path):
    values = []
    if xs is not None:
        values.extend(parse_float(t.strip(), "--xs") for t in str(xs).split(",") if t.strip())
    if path is not None:
        with open(path, newline="") as fh:
            for lineno, line in enumerate(fh, start=1):
                tok = line.strip()
                if not tok or (lineno == 1 and tok == "x"):
                    continue
                values.append(parse_float(tok, f"{path}:{lineno}"))
    return np.array(values, dtype=np.float64)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gnmcal", description="Functional calibration by graph non-isometric matching.")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    sub.required = True
    S = argparse.SUPPRESS
    for name in COMMANDS:
        p = sub.add_parser(name, argument_default=S)
        p.add_argument("--config", help="flat JSON file of defaults; flags win")
        p.add_argument("--out", help="output directory (required)")
        p.add_argument("--seed", type=int)
        p.add_argument("--dataset", help="builtin benchmark: sd1 or sd2")
        p.add_argument("--m", type=int, help="number of physical points")
        p.add_argument("--n", type=int, help="number of model points")
        if name != "gen":
            p.add_argument("--physical", help="physical CSV (x,y)")
            p.add_argument("--model", help="model CSV (x,theta,y)")
            p.add_argument("--terminal-response", dest="terminal_response",
                           action="store_true",
                           help="add the last layer's response mismatch to sink edges")
            p.add_argument("--gp-optimize", dest="gp_optimize",
                           action=argparse.BooleanOptionalAction,
                           help="learn GP hyperparameters (default) or use the heuristic")
            p.add_argument("--grid", help="lambda grid, lo:step:hi or a comma list")
        if name in ("fit", "predict", "eval"):
            p.add_argument("--lambda", dest="lambda", help="smoothness weight or 'cv'")
        if name == "eval":
            p.add_argument("--methods", help="comma list of gnm,pfc")
        if name == "predict":
            p.add_argument("--method", choices=("gnm", "pfc"))
            p.add_argument("--xs", help="comma-separated query inputs")
            p.add_argument("--queries", help="file with one query x per line")
    return parser


def resolve_config(args):
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    given = vars(args)
    path = given.pop("config", None)
    if path is not None:
        try:
            with open(path) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path!r}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError(f"config {path!r} must hold a JSON object")
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise UsageError(f"config {path!r}: unknown keys {unknown}")
        cfg.update(loaded)
    # a data source given on the command line replaces the file's
    if "dataset" in given:
        cfg["physical"] = cfg["model"] = None
    if "physical" in given or "model" in given:
        cfg["dataset"] = None
    cfg.update(given)
    if cfg["out"] is None:
        raise UsageError("the following arguments are required: --out")
    if cfg["dataset"] is not None and (cfg["physical"] or cfg["model"]):
        raise UsageError("give either --dataset or --physical/--model, not both")
    if bool(cfg["physical"]) != bool(cfg["model"]):
        raise UsageError("--physical and --model must be given together")
    if cfg["dataset"] is None and not cfg["physical"]:
        cfg["dataset"] = "sd1"
    return cfg


# -- output staging --------------------------------------------------------

class Outputs:
    """Files staged in memory, written only when the command succeeded."""

    def __init__(self, directory):
        self.directory = directory
        self.files = {}

    def add(self, name, text):
        self.files[name] = text

    def commit(self):
        os.makedirs(self.directory, exist_ok=True)
        written = []
        try:
            for name in sorted(self.files):
                target = os.path.join(self.directory, name)
                fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=self.directory)
                try:
                    with os.fdopen(fd, "w", newline="") as fh:
                        fh.write(self.files[name])
                    os.replace(tmp, target)
                except BaseException:
                    if os.path.exists(tmp):
                        os.remove(tmp)
                    raise
                written.append(target)
        except BaseException:
            for path in written:
                os.remove(path)
            raise
        return written


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- data ------------------------------------------------------------------

def load_data(cfg):
    """(physical, model, truth or None) from CSVs or a builtin benchmark."""
    if cfg["physical"]:
        return load_physical(cfg["physical"]), load_model(cfg["model"]), None
    truth = get_truth(cfg["dataset"])
    m = DEFAULT_SIZES["train"][0] if cfg["m"] is None else cfg["m"]
    n = DEFAULT_SIZES["train"][1] if cfg["n"] is None else cfg["n"]
    physical, model = generate_synthetic(truth, m, n, seed=cfg["seed"])
    return physical, model, truth


def gp_config(cfg):
    return GPConfig(optimize=bool(cfg["gp_optimize"]), seed=int(cfg["seed"]))


def evaluator_for(model, truth, gpc):
    return ResponseEvaluator.analytic(truth) if truth is not None else fit_surrogate(model, gpc)


def choose_lambda(cfg, physical, model, evaluator, gpc, out):
    lam = parse_lambda(cfg["lambda"])
    if lam != "cv":
        return lam
    sel = select_lambda(physical, model, parse_grid(cfg["grid"]), gpc, int(cfg["seed"]),
                        evaluator, bool(cfg["terminal_response"]))
    rows = [(l, s, *fs) for l, s, fs in zip(sel.grid, sel.scores, sel.fold_scores)]
    out.add("lambda_selection.csv",
            rows_to_csv(("lambda", "mean_rmse", "fold0_rmse", "fold1_rmse"), rows))
    return sel.lambda_star


# -- commands --------------------------------------------------------------

def cmd_gen(cfg, out):
    if cfg["physical"] or cfg["model"]:
        raise UsageError("gen only generates builtin datasets")
    physical, model, truth = load_data(cfg)
    out.add("physical.csv", rows_to_csv(PHYSICAL_HEADER, zip(physical.x, physical.y)))
    out.add("model.csv", rows_to_csv(MODEL_HEADER, zip(model.x, model.theta, model.y)))
    out.add("truth.json", _json({
        "dataset": truth.name, "m": len(physical), "n": len(model), "seed": int(cfg["seed"]),
        "x_range": list(truth.x_range), "theta_range": list(truth.theta_range),
        "formulas": TRUTH_FORMULAS.get(truth.name, {}),
        "true_theta_at_physical_x": [float(v) for v in truth.true_theta(physical.x)],
    }))


def _fit_gnm(cfg, out):
    physical, model, truth = load_data(cfg)
    gpc = gp_config(cfg)
    evaluator = evaluator_for(model, truth, gpc)
    lam = choose_lambda(cfg, physical, model, evaluator, gpc, out)
    cal = gnm_fit(physical, model, lam, gpc, bool(cfg["terminal_response"]), evaluator=evaluator)
    return physical, model, truth, cal


def cmd_fit(cfg, out):
    physical, model, truth, cal = _fit_gnm(cfg, out)
    rows = zip(cal.anchor_x, cal.anchor_theta, cal.anchor_y, range(len(physical)))
    out.add("anchors.csv", rows_to_csv(("x", "theta", "y", "cluster"),
                                       ([x, t, y, str(j)] for x, t, y, j in rows)))
    h = cal.calib_fn.hyper
    out.add("summary.json", _json({
        "source": truth.name if truth is not None else "csv",
        "m": len(physical), "n": len(model), "seed": int(cfg["seed"]),
        "lambda": cal.lam, "lambda_mode": "cv" if parse_lambda(cfg["lambda"]) == "cv" else "fixed",
        "terminal_response": bool(cfg["terminal_response"]),
        "path_cost": cal.anchors.total_cost,
        "model_indices": [int(i) for i in cal.anchor_index],
        "evaluator": cal.evaluator.kind,
        "calibration_gp": {"signal_variance": h.signal_variance,
                           "length_scales": list(h.length_scales),
                           "noise_variance": h.noise_variance,
                           "log_likelihood": cal.calib_fn.log_likelihood},
    }))


def cmd_predict(cfg, out):
    if cfg["xs"] is None and cfg["queries"] is None:
        raise UsageError("predict needs --xs and/or --queries")
    xs = parse_queries(cfg["xs"], cfg["queries"])
    if cfg["method"] == "pfc":
        physical, model, truth = load_data(cfg)
        gpc = gp_config(cfg)
        surrogate = fit_surrogate(model, gpc)
        pf = pfc_fit(physical, surrogate, seed=int(cfg["seed"]))
        ev = ResponseEvaluator.analytic(truth) if truth is not None else surrogate
        fitted = PFCModel(pf.alpha, pf.beta, ev, pf.objective, pf.start_objectives)
    else:
        fitted = _fit_gnm(cfg, out)[3]
    if xs.size:
        theta = np.atleast_1d(fitted.predict_theta(xs))
        y = np.atleast_1d(predict_response(fitted, xs))
    else:
        theta = y = xs
    out.add("predictions.csv", rows_to_csv(("x", "theta_hat", "y_hat"), zip(xs, theta, y)))


def cmd_eval(cfg, out):
    methods = parse_methods(cfg["methods"])
    common = dict(methods=methods, lam=parse_lambda(cfg["lambda"]), grid=parse_grid(cfg["grid"]),
                  gp=gp_config(cfg), terminal_response=bool(cfg["terminal_response"]),
                  seed=int(cfg["seed"]))
    if cfg["physical"]:
        ec = ExperimentConfig(physical=load_physical(cfg["physical"]),
                              model=load_model(cfg["model"]), **common)
    else:
        sizes = {}
        if cfg["m"] is not None or cfg["n"] is not None:
            m = cfg["m"] or DEFAULT_SIZES["train"][0]
            n = cfg["n"] or DEFAULT_SIZES["train"][1]
            # the test phase keeps the default twice-as-large design
            sizes = dict(train_size=(m, n), test_size=(2 * m, 2 * n))
        ec = ExperimentConfig(dataset=cfg["dataset"], **sizes, **common)
    rep = run_experiment(ec)
    out.add("report.csv", rows_to_csv(REPORT_HEADER, rep.rows))
    out.add("report_conventional.csv", rows_to_csv(REPORT_HEADER, rep.conventional_rows))
    out.add("lambdas.csv", rows_to_csv(("phase", "fold", "lambda"),
                                       ([ph, str(f), lam] for (ph, f), lam in
                                        sorted(rep.lambdas.items()))))


def cmd_sweep(cfg, out):
    physical, model, truth = load_data(cfg)
    gpc = gp_config(cfg)
    evaluator = evaluator_for(model, truth, gpc)
    sw = sweep_lambda(physical, model, parse_grid(cfg["grid"]), seed=int(cfg["seed"]),
                      gp_config=gpc, evaluator=evaluator,
                      terminal_response=bool(cfg["terminal_response"]))
    out.add("sweep.csv", rows_to_csv(SWEEP_HEADER, sw.rows))


HANDLERS = {"gen": cmd_gen, "fit": cmd_fit, "predict": cmd_predict, "eval": cmd_eval,
            "sweep": cmd_sweep}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    del args.command
    try:
        cfg = resolve_config(args)
        out = Outputs(cfg["out"])
        HANDLERS[command](cfg, out)
        out.commit()
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, CSVFormatError, EmptyClusterError, GPConditioningError, PFCFitError,
            RuntimeError, OSError) as exc:
        print(f"gnmcal {command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
