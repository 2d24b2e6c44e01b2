"""Batch command-line front end.

One command per process; every run writes ``report.json`` (deterministic:
sorted keys, no timestamps), ``meta.json`` (wall-clock and versions),
``effective_config.json`` (all defaults made explicit), and the command's
CSV / binary artifacts into the output directory.

Exit codes: 0 success, 2 computed-but-verdict-false, 1 error.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from . import grid as _g
from . import spaces as _sp
from . import symbols as _sy
from . import oscint as _oi
from . import operators as _op
from . import characterize as _ch

COMMANDS = ("norm", "seminorm", "apply", "oscint", "commutator",
            "membership", "recover", "compose", "blowup", "selftest")

_FUNCTION_SPEC = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["gaussian", "cos", "mode", "weierstrass", "constant"]},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "center": {"type": "number"},
        "xi0": {"type": "number"},
        "k": {"type": "number"},
        "tau": {"type": "number"},
        "J": {"type": "integer", "minimum": 1},
        "value": {"type": "number"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_SYMBOL_SPEC = {
    "type": "object",
    "properties": {
        "name": {"enum": ["bracket_power", "mode", "sin_coeff",
                          "weierstrass_times_bracket"]},
        "m": {"type": "number"},
        "k": {"type": "number"},
        "tau": {"type": "number"},
        "J": {"type": "integer", "minimum": 1},
    },
    "required": ["name"],
    "additionalProperties": False,
}

_OPERATOR_SPEC = {"$ref": "#/$defs/operator"}

_OPERATOR_DEF = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["quantize", "order_reducer", "multiplication",
                          "compose"]},
        "symbol": _SYMBOL_SPEC,
        "m": {"type": "number"},
        "coefficient": _FUNCTION_SPEC,
        "parts": {"type": "array", "minItems": 1,
                  "items": {"$ref": "#/$defs/operator"}},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"operator": _OPERATOR_DEF},
    "type": "object",
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "grid": {
            "type": "object",
            "properties": {
                "dim": {"enum": [1, 2]},
                "n": {"type": "integer", "minimum": 8},
                "half_length_pi": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
        "norm": {
            "type": "object",
            "properties": {
                "space": {"enum": ["zygmund", "hoelder", "bessel"]},
                "tau": {"type": "number"},
                "m": {"type": "integer", "minimum": 0},
                "s": {"type": "number"},
                "q": {"type": "number"},
                "f": _FUNCTION_SPEC,
            },
            "required": ["space", "f"],
            "additionalProperties": False,
        },
        "seminorm": {
            "type": "object",
            "properties": {
                "symbol": _SYMBOL_SPEC,
                "k": {"type": "integer", "minimum": 0, "maximum": 4},
                "m": {"type": "number"},
                "rho": {"enum": [0, 1]},
                "tau": {"type": "number"},
                "M": {"type": "integer", "minimum": 0, "maximum": 4},
                "table": {"type": "boolean"},
            },
            "required": ["symbol"],
            "additionalProperties": False,
        },
        "apply": {
            "type": "object",
            "properties": {
                "operator": _OPERATOR_SPEC,
                "input": _FUNCTION_SPEC,
            },
            "required": ["operator", "input"],
            "additionalProperties": False,
        },
        "oscint": {
            "type": "object",
            "properties": {
                "amplitude": {"enum": ["gaussian", "one", "window"]},
                "evaluator": {"enum": ["regularized", "ibp", "both"]},
                "chi": {"enum": ["gaussian", "compact"]},
                "schedule": {"type": "array", "items": {"type": "number"}},
                "l": {"type": "integer", "minimum": 0},
                "l_prime": {"type": "integer", "minimum": 0},
            },
            "required": ["amplitude"],
            "additionalProperties": False,
        },
        "commutator": {
            "type": "object",
            "properties": {
                "operator": _OPERATOR_SPEC,
                "alpha": {"type": "integer", "minimum": 0},
                "beta": {"type": "integer", "minimum": 0},
                "s_from": {"type": "number"},
                "q": {"type": "number"},
            },
            "required": ["operator"],
            "additionalProperties": False,
        },
        "membership": {
            "type": "object",
            "properties": {
                "operator": _OPERATOR_SPEC,
                "m": {"type": "number"},
                "rho": {"enum": [0, 1]},
                "m_tilde": {"type": "integer", "minimum": 0, "maximum": 2},
                "M": {"type": "integer", "minimum": 0, "maximum": 3},
                "q": {"type": "number"},
            },
            "required": ["operator", "m"],
            "additionalProperties": False,
        },
        "recover": {
            "type": "object",
            "properties": {
                "operator": _OPERATOR_SPEC,
                "m": {"type": "number"},
                "eps": {"type": "number", "exclusiveMinimum": 0},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "classify": {
                    "type": "object",
                    "properties": {
                        "tau": {"type": "number"},
                        "rho": {"enum": [0, 1]},
                        "M": {"type": "integer", "minimum": 0, "maximum": 4},
                    },
                    "additionalProperties": False,
                },
            },
            "required": ["operator"],
            "additionalProperties": False,
        },
        "compose": {
            "type": "object",
            "properties": {
                "p1": _SYMBOL_SPEC,
                "p2": _SYMBOL_SPEC,
                "m_tilde": {"type": "integer", "minimum": 1},
                "M": {"type": "integer", "minimum": 1},
                "q": {"type": "number"},
                "tau": {"type": "number"},
            },
            "required": ["p1", "p2"],
            "additionalProperties": False,
        },
        "blowup": {
            "type": "object",
            "properties": {
                "coefficient": {"enum": ["weierstrass", "sin"]},
                "tau": {"type": "number"},
                "order": {"type": "number"},
                "grids": {"type": "array", "items": {"type": "integer"}},
            },
            "required": ["coefficient", "tau"],
            "additionalProperties": False,
        },
    },
    "required": ["command"],
    "additionalProperties": False,
}

_DEFAULT_GRID = {"dim": 1, "n": 128, "half_length_pi": 1.0}


def _build_grid(cfg):
    gc = dict(_DEFAULT_GRID)
    gc.update(cfg.get("grid", {}))
    return _g.Grid(gc["dim"], gc["n"], gc["half_length_pi"] * np.pi), gc


def _build_function(spec, grid):
    kind = spec["kind"]
    if kind == "gaussian":
        return _g.gaussian(grid, width=spec.get("width", 1.0),
                           center=spec.get("center", 0.0),
                           xi0=spec.get("xi0"))
    if kind == "cos":
        k = spec.get("k", 1.0)
        return _g.from_callable(grid, lambda x: np.cos(k * x))
    if kind == "mode":
        k = spec.get("k", 1.0)
        return _g.from_callable(grid, lambda x: np.exp(1j * k * x))
    if kind == "weierstrass":
        w = _sy.weierstrass(spec.get("tau", 0.5),
                            spec.get("J", _sy.max_weierstrass_depth(grid)))
        return _g.from_callable(grid, w)
    if kind == "constant":
        c = spec.get("value", 1.0)
        return _g.from_callable(grid, lambda x: c + 0.0 * x)
    raise ValueError(kind)


def _build_symbol(spec):
    params = {k: v for k, v in spec.items() if k != "name"}
    return _sy.builtin(spec["name"], **params)


def _build_operator(spec, grid):
    kind = spec["kind"]
    if kind == "quantize":
        return _op.quantize(_build_symbol(spec["symbol"]), grid)
    if kind == "order_reducer":
        return _op.order_reducer(grid, spec.get("m", 1.0))
    if kind == "multiplication":
        return _op.multiplication(grid, _build_function(spec["coefficient"], grid).values)
    if kind == "compose":
        parts = [_build_operator(s, grid) for s in spec["parts"]]
        out = parts[0]
        for p in parts[1:]:
            out = _op.compose(out, p)
        return out
    raise ValueError(kind)


# -- artifact emission -----------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    if isinstance(obj, np.complexfloating):
        return _jsonable(complex(obj))
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")


def emit_plotdata(report, outdir):
    """Flat CSV exports of whatever tables the report carries."""
    written = []
    if "trace" in report:
        path = os.path.join(outdir, "eps_trace.csv")
        _write_csv(path, "epsilon,value_re,value_im,delta",
                   [(t["epsilon"], t["value_re"], t["value_im"], t["delta"])
                    for t in report["trace"]])
        written.append(path)
    if "bands" in report and report["bands"]:
        path = os.path.join(outdir, "band_table.csv")
        _write_csv(path, "j,sup,weighted",
                   [(b["j"], b["sup"], b["weighted"]) for b in report["bands"]])
        written.append(path)
    if "membership_rows" in report:
        path = os.path.join(outdir, "membership_matrix.csv")
        _write_csv(path, "alpha,beta,norm,stable",
                   [("|".join(map(str, r["alpha"])), "|".join(map(str, r["beta"])),
                     r["norm"], r["stable"]) for r in report["membership_rows"]])
        written.append(path)
    if "refinement_rows" in report:
        path = os.path.join(outdir, "refinement_trace.csv")
        _write_csv(path, "n,value",
                   [(r["n"], r["norm"] if "norm" in r else r["value"])
                    for r in report["refinement_rows"]])
        written.append(path)
    if "class_rows" in report:
        path = os.path.join(outdir, "class_table.csv")
        _write_csv(path, "alpha,value,fitted_exponent,target_exponent",
                   [(r["alpha"], r["value"], r["fitted_exponent"],
                     r["target_exponent"]) for r in report["class_rows"]])
        written.append(path)
    return written


def _save_symbol_table(path, table, grid):
    header = {"kind": "symbol-table", "n": grid.n,
              "half_length": grid.half_length, "dim": grid.dim}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("ascii"))
        # one x-slab per xi node
        cols = np.ascontiguousarray(table.T)
        pairs = np.empty(2 * cols.size, dtype="<f8")
        pairs[0::2] = cols.real.ravel()
        pairs[1::2] = cols.imag.ravel()
        fh.write(pairs.tobytes())


# -- command implementations -------------------------------------------------------

def _cmd_norm(cfg, grid, outdir, rng):
    block = cfg["norm"]
    f = _build_function(block["f"], grid)
    space = block["space"]
    if space == "zygmund":
        rep = _sp.zygmund_norm(f, block.get("tau", 0.5))
    elif space == "hoelder":
        rep = _sp.hoelder_norm(f, block.get("m", 0), block.get("s", 0.5))
    else:
        rep = _sp.bessel_norm(f, block.get("s", 0.0), block.get("q", 2.0))
    report = rep.as_dict()
    return report, None


def _cmd_seminorm(cfg, grid, outdir, rng):
    block = cfg["seminorm"]
    p = _build_symbol(block["symbol"])
    if block.get("table", True):
        t = _sy.hoelder_class_table(
            p, block.get("tau", p.tau if p.tau < 0.99 else 0.5),
            block.get("m", p.m), block.get("rho", p.rho),
            block.get("M", 2), grid=grid)
        return {"class_rows": t.rows(), "verdict": t.verdict,
                "params": t.params}, t.verdict
    val = _sy.smooth_seminorm(p, block.get("k", 1), block.get("m", p.m),
                              block.get("rho", p.rho), grid=grid)
    return {"value": val, "k": block.get("k", 1)}, None


def _cmd_apply(cfg, grid, outdir, rng):
    block = cfg["apply"]
    T = _build_operator(block["operator"], grid)
    u = _build_function(block["input"], grid)
    v = T(u)
    path = os.path.join(outdir, "output.gfn")
    _g.save_gridfunction(v, path)
    return {"output_file": os.path.basename(path),
            "input_l2": _g.lp_norm(u, 2), "output_l2": _g.lp_norm(v, 2),
            "linearity_defect": T.linearity_defect()}, None


def _cmd_oscint(cfg, grid, outdir, rng):
    block = cfg["oscint"]
    kind = block["amplitude"]
    if kind == "gaussian":
        a = _oi.Amplitude(lambda y, e: np.exp(-(y ** 2 + e ** 2) / 2.0))
        exact = 2.0 ** -0.5
    elif kind == "one":
        a = _oi.Amplitude(lambda y, e: np.ones(
            np.broadcast_shapes(np.shape(y), np.shape(e))))
        exact = 1.0
    else:
        a = _oi.Amplitude(lambda y, e: np.exp(-y ** 2 / 2.0) * np.ones(
            np.broadcast_shapes(np.shape(y), np.shape(e))))
        exact = 1.0
    schedule = tuple(block.get("schedule", _oi.DEFAULT_SCHEDULE))
    chi = (_oi.compact_regularizer(schedule) if block.get("chi") == "compact"
           else _oi.gaussian_regularizer(schedule))
    evaluator = block.get("evaluator", "both")
    report = {"amplitude": kind, "reference_value": exact}
    value = None
    if evaluator in ("regularized", "both"):
        r = _oi.oscint_regularized(a, chi)
        report["regularized"] = {"value": r.value, "converged": r.converged}
        report["trace"] = r.trace_rows()
        value = r.value
    if evaluator in ("ibp", "both"):
        r = _oi.oscint_ibp(a, block.get("l", 2), block.get("l_prime", 2))
        report["ibp"] = {"value": r.value}
        value = r.value
    report["abs_error_vs_reference"] = abs(value - exact)
    return report, None


def _cmd_commutator(cfg, grid, outdir, rng):
    block = cfg["commutator"]
    T = _build_operator(block["operator"], grid)
    alpha = block.get("alpha", 1)
    beta = block.get("beta", 0)
    C = _op.total_commutator(T, alpha, beta)
    val, method = _op.op_norm(C, s_from=block.get("s_from", 0.0),
                              q=block.get("q", 2.0))
    return {"alpha": alpha, "beta": beta, "norm": val, "method": method}, None


def _cmd_membership(cfg, grid, outdir, rng):
    block = cfg["membership"]
    T = _build_operator(block["operator"], grid)
    rep = _op.membership(T, block["m"], block.get("rho", 1),
                         block.get("m_tilde", 0), block.get("M", 2),
                         q=block.get("q", 2.0), grid=grid)
    report = rep.as_dict()
    report["membership_rows"] = report.pop("rows")
    return report, rep.verdict


def _cmd_recover(cfg, grid, outdir, rng):
    block = cfg["recover"]
    T = _build_operator(block["operator"], grid)
    rec = _ch.recover_symbol(T, m=block.get("m", 0.0), eps=block.get("eps"),
                             tolerance=block.get("tolerance", 1e-2),
                             classify=block.get("classify"))
    _save_symbol_table(os.path.join(outdir, "symbol_table.gst"),
                       rec.symbol._table, grid)
    report = {
        "order": rec.order,
        "eps": rec.eps,
        "replay_errors": rec.replay_errors,
        "replay_max": rec.replay_max,
        "failed": rec.failed,
        "verdict": rec.verdict,
        "diagnostics": rec.diagnostics,
        "symbol_table_file": "symbol_table.gst",
    }
    if rec.class_table is not None:
        report["class_rows"] = rec.class_table.rows()
    return report, rec.verdict


def _cmd_compose(cfg, grid, outdir, rng):
    block = cfg["compose"]
    p1 = _build_symbol(block["p1"])
    p2 = _build_symbol(block["p2"])
    rec = _ch.compose_and_classify(
        p1, p2, grid, m_tilde=block.get("m_tilde", 1), M=block.get("M", 3),
        q=block.get("q", 2.0), tau=block.get("tau"))
    _save_symbol_table(os.path.join(outdir, "symbol_table.gst"),
                       rec.symbol._table, grid)
    report = {
        "composition": rec.diagnostics["composition"],
        "replay_max": rec.replay_max,
        "failed": rec.failed,
        "verdict": rec.verdict,
        "symbol_table_file": "symbol_table.gst",
    }
    if rec.class_table is not None:
        report["class_rows"] = rec.class_table.rows()
    return report, rec.verdict


def _cmd_blowup(cfg, grid, outdir, rng):
    block = cfg["blowup"]
    rep = _ch.blowup_probe(block["coefficient"], block["tau"],
                           m=block.get("order", 0.0),
                           Ns=tuple(block.get("grids", (32, 64, 128))))
    rep["refinement_rows"] = rep["rows"]
    return rep, None


def _cmd_selftest(cfg, grid, outdir, rng):
    checks = []

    def check(name, value, tol):
        ok = value <= tol
        checks.append({"name": name, "value": float(value),
                       "tolerance": tol, "pass": bool(ok)})

    g = _g.Grid(1, 64, 2 * np.pi)
    u = _g.gaussian(g)
    rt = np.max(np.abs(_g.inverse_transform(_g.forward_transform(u)).values
                       - u.values))
    check("transform_roundtrip", rt, 1e-12)
    check("translate_isometry",
          abs(_g.lp_norm(_g.translate(u, g.spacing * 4), 2) - _g.lp_norm(u, 2)),
          1e-12)
    part = _sp.DyadicPartition(g)
    check("partition_of_unity", part.partition_defect(), 1e-12)
    v = _sp.order_reduce(_sp.order_reduce(u, 1.5), -1.5)
    check("order_reduce_inverse",
          np.max(np.abs(v.values - u.values)) / np.max(np.abs(u.values)), 1e-12)
    one = _oi.Amplitude(lambda y, e: np.ones(
        np.broadcast_shapes(np.shape(y), np.shape(e))))
    check("oscint_inversion", abs(_oi.oscint_lattice(one).value - 1.0), 1e-12)
    T = _op.quantize(_sy.builtin("bracket_power", m=0), g)
    check("quantize_identity",
          np.max(np.abs(T.apply_fn(u.values) - u.values)), 1e-12)
    C = _op.ad_x(_op.multiplication(g, np.sin(g.axis_nodes())))
    check("ad_x_of_multiplication_zero",
          np.max(np.abs(C.apply_fn(u.values))), 1e-12)
    ok = all(c["pass"] for c in checks)
    return {"checks": checks, "verdict": ok}, ok


_IMPL = {
    "norm": _cmd_norm,
    "seminorm": _cmd_seminorm,
    "apply": _cmd_apply,
    "oscint": _cmd_oscint,
    "commutator": _cmd_commutator,
    "membership": _cmd_membership,
    "recover": _cmd_recover,
    "compose": _cmd_compose,
    "blowup": _cmd_blowup,
    "selftest": _cmd_selftest,
}


def run(command, config, outdir, seed=0, quiet=False):
    """Execute one command; returns the process exit code."""
    import jsonschema

    config = dict(config)
    config["command"] = command
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        print(f"config error at {path}: {err.message}", file=sys.stderr)
        return 1

    os.makedirs(outdir, exist_ok=True)
    grid, grid_cfg = _build_grid(config)
    rng = np.random.default_rng(seed)
    t0 = time.time()
    try:
        report, verdict = _IMPL[command](config, grid, outdir, rng)
    except Exception as err:  # computation failure -> exit 1
        if not quiet:
            print(f"error: {err}", file=sys.stderr)
        return 1

    effective = {"command": command, "grid": grid_cfg, "seed": seed}
    for key in COMMANDS:
        if key in config:
            effective[key] = config[key]
    report_payload = {"command": command, "report": report,
                      "verdict": verdict, "seed": seed, "grid": grid_cfg}
    _write_json(os.path.join(outdir, "report.json"), report_payload)
    _write_json(os.path.join(outdir, "effective_config.json"), effective)
    _write_json(os.path.join(outdir, "meta.json"),
                {"elapsed_seconds": time.time() - t0,
                 "version": __version__,
                 "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())})
    emit_plotdata(report, outdir)

    if not quiet:
        vtxt = "ok" if verdict in (None, True) else "verdict-false"
        print(f"{command}: {vtxt} ({time.time() - t0:.2f}s) -> {outdir}")
    if verdict is False:
        return 2
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="psido",
        description="numerical laboratory for non-smooth pseudodifferential"
                    " operators")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", default="psido_out", help="output directory")
    parser.add_argument("--grid", help="N,L override (L in units of pi)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    config = {}
    if args.config:
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            print(f"cannot read config: {err}", file=sys.stderr)
            return 1
    if args.grid:
        try:
            n_str, l_str = args.grid.split(",")
            config.setdefault("grid", {})
            config["grid"]["n"] = int(n_str)
            config["grid"]["half_length_pi"] = float(l_str)
        except ValueError:
            print("--grid expects N,L (L in units of pi)", file=sys.stderr)
            return 1
    return run(args.command, config, args.out, seed=args.seed, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
