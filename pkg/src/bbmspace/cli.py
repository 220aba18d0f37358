"""Command-line front end.

Settings come from three layers: built-in defaults, an optional JSON config
file (``--config``), and explicit flags, later layers winning.  The merged
settings are echoed into every JSON output and artifact.

Exit codes: 0 success, 2 usage or input error, 3 numerical inconsistency
(only with ``--strict``).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from dataclasses import asdict, dataclass, field, fields

from . import formats, oscillation
from .atoms import empirical_functional_norm, functional_value, pair, validate_atom
from .distance import DEFAULT_EPS_CUT, DEFAULT_T_GRID, DEFAULT_TOLERANCE, distance_report
from .errors import ArgumentError, BBMError
from .generators import KINDS, generate
from .grid import l1_norm
from .mollifier import KERNELS, QUADRATURES, MollifierParams, approximant

EXIT_OK, EXIT_USAGE, EXIT_INCONSISTENT = 0, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Effective settings of one run."""

    command: str = ""
    input: str | None = None
    out: str | None = None
    kind: str | None = None
    d: int = 2
    n: int = 32
    seed: int = 0
    params: dict = field(default_factory=dict)
    binary: bool = False
    mode: str = "exact"
    s: int = oscillation.DEFAULT_S
    eps: float | None = None
    eps_cut: float = DEFAULT_EPS_CUT
    t: float | None = None
    t_grid: list = field(default_factory=lambda: list(DEFAULT_T_GRID))
    kernel: str = "tent"
    supersample: int = 4
    quadrature: str = "exact"
    bv_mode: str = "tiling"
    atom: str | None = None
    functional: str | None = None
    witness_out: str | None = None
    oracle_tol: float = 1e-12
    eta: float = DEFAULT_TOLERANCE
    limit: int = 24
    threads: int | None = None
    strict: bool = False

    def echo(self) -> dict:
        """Settings that affect the current command."""
        keys = ("command",) + COMMAND_KEYS.get(self.command, ()) + ("threads", "strict")
        full = asdict(self)
        return {k: full[k] for k in keys if full[k] is not None}


_SOLVER = ("input", "mode", "s")
COMMAND_KEYS = {
    "gen": ("kind", "d", "n", "seed", "params", "binary", "out"),
    "norm": _SOLVER + ("out",),
    "curve": _SOLVER + ("out", "witness_out"),
    "bmo": ("input", "s"),
    "bv-compare": _SOLVER + ("bv_mode", "oracle_tol"),
    "atom-validate": ("atom", "oracle_tol"),
    "atom-pair": _SOLVER + ("atom", "functional", "oracle_tol"),
    "mollify": ("input", "t", "kernel", "supersample", "quadrature", "out", "binary"),
    "distance": _SOLVER + ("eps_cut", "t_grid", "kernel", "supersample", "quadrature",
                           "eta", "out"),
    "oracle-check": _SOLVER + ("eps", "limit", "oracle_tol"),
}


_FIELDS = {f.name for f in fields(RunConfig)}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _number(text: str) -> float:
    """Accepts ``0.25`` as well as ``1/4``."""
    try:
        return float(Fraction(text.strip())) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _float_list(text: str) -> list:
    return [_number(x) for x in text.split(",") if x.strip()]


def _key_value(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=S, help="worker threads (env BBM_THREADS)")
    common.add_argument("--config", default=S, help="JSON file with default settings")
    common.add_argument("--strict", action="store_true", default=S,
                        help="exit 3 when a numerical check flags an inconsistency")
    common.add_argument("--json-errors", action="store_true", default=S,
                        help="report errors as JSON on stderr")

    solver = _Parser(add_help=False)
    solver.add_argument("--mode", choices=oscillation.MODES, default=S)
    solver.add_argument("--s", type=int, default=S, help="anchor steps per cube side")

    p = _Parser(prog="bbm", description="Mean-oscillation norms on grids over the unit cube.",
                parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_, *parents):
        return sub.add_parser(name, help=help_, parents=[common, *parents])

    g = add("gen", "write a synthetic grid function")
    g.add_argument("--kind", choices=sorted(KINDS), default=S)
    g.add_argument("--d", type=int, default=S)
    g.add_argument("--n", type=int, default=S)
    g.add_argument("--seed", type=int, default=S)
    g.add_argument("--param", type=_key_value, action="append", dest="param_list", default=S,
                   help="generator parameter key=value (JSON values)")
    g.add_argument("--binary", action="store_true", default=S)
    g.add_argument("--out", default=S)

    c = add("norm", "B-norm and the witness side", solver)
    c.add_argument("--input", default=S)
    c.add_argument("--out", default=S, help="also write the JSON result here")

    c = add("curve", "bracket curve as CSV", solver)
    c.add_argument("--input", default=S)
    c.add_argument("--out", default=S)
    c.add_argument("--witness-out", default=S)

    c = add("bmo", "discrete BMO norm")
    c.add_argument("--input", default=S)
    c.add_argument("--s", type=int, default=S)

    c = add("bv-compare", "uncapped functional against the discrete total variation", solver)
    c.add_argument("--input", default=S)
    c.add_argument("--bv-mode", choices=("tiling",) + oscillation.MODES, default=S)

    c = add("atom-validate", "check the atom conditions")
    c.add_argument("--atom", default=S)
    c.add_argument("--oracle-tol", type=float, default=S)

    c = add("atom-pair", "pair a grid function with an atom or a functional", solver)
    c.add_argument("--input", default=S)
    grp = c.add_mutually_exclusive_group()
    grp.add_argument("--atom", default=S)
    grp.add_argument("--functional", default=S)
    c.add_argument("--oracle-tol", type=float, default=S)

    c = add("mollify", "write the mollified approximant")
    c.add_argument("--input", default=S)
    c.add_argument("--t", type=_number, default=S)
    c.add_argument("--kernel", choices=KERNELS, default=S)
    c.add_argument("--supersample", type=int, default=S)
    c.add_argument("--quadrature", choices=QUADRATURES, default=S)
    c.add_argument("--out", default=S)
    c.add_argument("--binary", action="store_true", default=S)

    c = add("distance", "tail lower proxy and approximant upper bound", solver)
    c.add_argument("--input", default=S)
    c.add_argument("--eps-cut", type=_number, default=S)
    c.add_argument("--t", type=_float_list, dest="t_grid", default=S)
    c.add_argument("--kernel", choices=KERNELS, default=S)
    c.add_argument("--supersample", type=int, default=S)
    c.add_argument("--quadrature", choices=QUADRATURES, default=S)
    c.add_argument("--eta", type=float, default=S, help="relative allowance of the sandwich")
    c.add_argument("--out", default=S)

    c = add("oracle-check", "compare the solver with exhaustive search at one side", solver)
    c.add_argument("--input", default=S)
    c.add_argument("--eps", type=_number, default=S)
    c.add_argument("--limit", type=int, default=S)
    return p


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    given = vars(ns).copy()
    merged = {}
    if "config" in given:
        doc = formats._load_json(given["config"])
        if not isinstance(doc, dict):
            raise ArgumentError(f"{given['config']}: config must be a JSON object")
        unknown = sorted(set(doc) - _FIELDS - {"json_errors"})
        if unknown:
            raise ArgumentError(f"unknown config keys: {', '.join(unknown)}")
        merged.update(doc)
    if "param_list" in given:
        given["params"] = dict(given.pop("param_list"))
    merged.update({k: v for k, v in given.items() if k in _FIELDS})
    merged.pop("json_errors", None)
    cfg = RunConfig(**merged)
    for f in fields(RunConfig):
        default = getattr(RunConfig(), f.name)
        value = getattr(cfg, f.name)
        if default is None or value is None or isinstance(default, str):
            continue
        if isinstance(default, bool) is not isinstance(value, bool) or \
                not isinstance(value, (type(default), int) if isinstance(default, float) else type(default)):
            raise ArgumentError(f"config value {f.name}={value!r} has the wrong type")
    return cfg


def _require(cfg: RunConfig, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(cfg, n) in (None, "")]
    if missing:
        raise UsageError(f"bbm {cfg.command}: missing {', '.join(missing)}")


def _validate(cfg: RunConfig):
    if cfg.mode not in oscillation.MODES:
        raise UsageError(f"mode must be one of {oscillation.MODES}")
    if cfg.s < 1:
        raise UsageError("--s must be >= 1")
    if cfg.threads is not None and cfg.threads < 1:
        raise UsageError("--threads must be >= 1")


def _emit(doc: dict, out: str | None = None):
    text = json.dumps(doc, indent=2, allow_nan=False)
    if out:
        formats.write_json(out, doc)
    print(text)


def _family_doc(F) -> dict:
    return formats.family_to_json(F)


# --- commands ---------------------------------------------------------------

def cmd_gen(cfg):
    _require(cfg, "kind", "out")
    f = generate(cfg.kind, cfg.d, cfg.n, cfg.seed, **cfg.params)
    formats.write_grid(cfg.out, f, binary=cfg.binary, meta={"config": cfg.echo()})
    _emit({"out": cfg.out, "d": f.d, "n": f.n, "config": cfg.echo()})
    return EXIT_OK


def cmd_norm(cfg):
    _require(cfg, "input")
    f = formats.read_grid(cfg.input)
    value, curve = oscillation.b_norm(f, cfg.mode, cfg.s, cfg.threads)
    top = curve.argmax()
    _emit({"b_norm": value, "witness_epsilon": top.epsilon, "k": top.k, "exact": top.exact,
           "witness": _family_doc(top.witness), "config": cfg.echo()}, cfg.out)
    return EXIT_OK


def cmd_curve(cfg):
    _require(cfg, "input", "out")
    f = formats.read_grid(cfg.input)
    _, curve = oscillation.b_norm(f, cfg.mode, cfg.s, cfg.threads)
    formats.write_curve(cfg.out, curve, cfg.echo(), cfg.witness_out)
    top = curve.argmax()
    _emit({"out": cfg.out, "b_norm": top.value, "witness_epsilon": top.epsilon,
           "config": cfg.echo()})
    return EXIT_OK


def cmd_bmo(cfg):
    _require(cfg, "input")
    f = formats.read_grid(cfg.input)
    _emit({"bmo_norm": oscillation.bmo_norm(f, cfg.s, cfg.threads), "config": cfg.echo()})
    return EXIT_OK


def cmd_bv_compare(cfg):
    _require(cfg, "input")
    f = formats.read_grid(cfg.input)
    bv = oscillation.bv_functional(f, cfg.s, cfg.bv_mode, cfg.threads)
    tv = oscillation.discrete_tv(f)
    bn, _ = oscillation.b_norm(f, cfg.mode, cfg.s, cfg.threads)
    _emit({"bv_functional": bv, "discrete_tv": tv, "ratio": bv / tv if tv > 0 else None,
           "b_norm": bn, "config": cfg.echo()})
    # the uncapped sup can only be larger when both are solved exactly
    bad = cfg.bv_mode in ("exact", "bnb") and bv < bn - cfg.oracle_tol
    return EXIT_INCONSISTENT if bad and cfg.strict else EXIT_OK


def cmd_atom_validate(cfg):
    _require(cfg, "atom")
    a = formats.read_atom(cfg.atom)
    r = validate_atom(a, cfg.oracle_tol)
    _emit({"valid": r.valid, "support_violation": r.support_violation,
           "bound_violation": r.bound_violation, "mean_violation": r.mean_violation,
           "worst_cube": r.worst_cube, "messages": list(r.messages), "config": cfg.echo()})
    return EXIT_INCONSISTENT if cfg.strict and not r.valid else EXIT_OK


def cmd_atom_pair(cfg):
    _require(cfg, "input")
    if not (cfg.atom or cfg.functional):
        raise UsageError("bbm atom-pair: one of --atom or --functional is required")
    f = formats.read_grid(cfg.input)
    bn, _ = oscillation.b_norm(f, cfg.mode, cfg.s, cfg.threads)
    if cfg.atom:
        a = formats.read_atom(cfg.atom)
        value = pair(f, a)
        fam = oscillation.family_value(f, a.family)
        ok = abs(value) <= fam + cfg.oracle_tol and fam <= bn + cfg.oracle_tol
        doc = {"pair": value, "family_value": fam, "b_norm": bn, "bound_holds": ok}
    else:
        phi = formats.read_functional(cfg.functional)
        value = functional_value(f, phi)
        ok = abs(value) <= phi.l1 * bn + cfg.oracle_tol
        doc = {"functional_value": value, "l1": phi.l1, "b_norm": bn, "bound_holds": ok,
               "empirical_norm": empirical_functional_norm(phi, mode=cfg.mode, s=cfg.s,
                                                           threads=cfg.threads)}
    doc["config"] = cfg.echo()
    _emit(doc)
    return EXIT_INCONSISTENT if cfg.strict and not ok else EXIT_OK


def _params(cfg, t):
    return MollifierParams(t, cfg.kernel, cfg.supersample, cfg.quadrature)


def cmd_mollify(cfg):
    _require(cfg, "input", "t", "out")
    f = formats.read_grid(cfg.input)
    ft = approximant(f, _params(cfg, cfg.t))
    formats.write_grid(cfg.out, ft, binary=cfg.binary, meta={"config": cfg.echo()})
    _emit({"out": cfg.out, "t": cfg.t, "l1_change": l1_norm(ft - f), "config": cfg.echo()})
    return EXIT_OK


def cmd_distance(cfg):
    _require(cfg, "input")
    if not cfg.t_grid:
        raise UsageError("bbm distance: --t needs at least one value")
    f = formats.read_grid(cfg.input)
    r = distance_report(f, cfg.eps_cut, cfg.t_grid, _params(cfg, cfg.t_grid[0]), cfg.mode,
                        cfg.s, cfg.eta, cfg.threads)
    _emit(formats.report_to_json(r, cfg.echo()), cfg.out)
    return EXIT_INCONSISTENT if cfg.strict and r.inconsistent else EXIT_OK


def cmd_oracle_check(cfg):
    _require(cfg, "input", "eps")
    f = formats.read_grid(cfg.input)
    solved, F = oscillation.bracket_epsilon(f, cfg.eps, cfg.mode, cfg.s)
    oracle = oscillation.oracle_family_value(f, cfg.eps, s=cfg.s, limit=cfg.limit)
    match = math.isclose(solved, oracle, rel_tol=0.0, abs_tol=cfg.oracle_tol)
    _emit({"solver": solved, "oracle": oracle, "match": match,
           "witness": _family_doc(F), "config": cfg.echo()})
    # greedy is only a lower bound, so a gap is not an inconsistency there
    bad = not match and (cfg.mode != "greedy" or solved > oracle + cfg.oracle_tol)
    return EXIT_INCONSISTENT if cfg.strict and bad else EXIT_OK


COMMANDS = {
    "gen": cmd_gen, "norm": cmd_norm, "curve": cmd_curve, "bmo": cmd_bmo,
    "bv-compare": cmd_bv_compare, "atom-validate": cmd_atom_validate,
    "atom-pair": cmd_atom_pair, "mollify": cmd_mollify, "distance": cmd_distance,
    "oracle-check": cmd_oracle_check,
}


def _report_error(exc, kind, as_json):
    if as_json:
        print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
    else:
        print(f"error: {exc}", file=sys.stderr)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    as_json = "--json-errors" in argv
    try:
        ns = build_parser().parse_args(argv)
        cfg = resolve_config(ns)
        _validate(cfg)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        _report_error(exc, "usage", as_json)
        return EXIT_USAGE
    except BBMError as exc:
        _report_error(exc, "input", as_json)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
