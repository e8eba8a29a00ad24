"""Command-line front end.

Exit codes: 0 success, 1 a checked property failed, 2 the input violates a
contract (malformed file, non-symmetric state, ...), 3 a numerical budget was
exceeded or a solver did not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .analysis import (
    check_asymptotic_abelianness,
    check_strong_clustering,
    check_weak_clustering,
    definetti_fit,
    even_state_grid,
)
from .errors import (
    AlgebraError,
    BudgetExceeded,
    ConvergenceError,
    FermiError,
)
from .graded import (
    PRESET_NAMES,
    Element,
    GradedAlgebra,
    algebra_from_json,
    algebra_to_json,
    basis_element,
    preset,
    unit,
)
from .power import (
    fermi_power,
    mixed_product_state,
    product_density_state,
    product_state_power,
    restrict,
    symmetrize,
)
from .serialize import decode_complex, dumps
from .states import State, mixture, state_from_density, state_from_values, state_to_json, values_from_json
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3

_CAR1_LETTERS = {"e11": 0, "e12": 1, "e21": 2, "e22": 3}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    tol: float = 1e-10
    max_sites: int = 6
    sample_count: int = 20000
    output_path: str | None = None
    format: str = "json"

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_sites < 2:
            raise ValueError("max_sites must be at least 2")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.format not in ("json", "csv"):
            raise ValueError("format must be json or csv")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        return cls(seed=args.seed, tol=args.tol, max_sites=args.max_sites,
                   sample_count=args.samples, output_path=args.out, format=args.format)


class InputError(FermiError, ValueError):
    """A command-line input could not be interpreted."""


# -- input helpers ------------------------------------------------------------------

def load_algebra(ref: str, tol: float = 1e-12) -> GradedAlgebra:
    """A preset name or the path of an algebra JSON file."""
    path = Path(ref)
    if path.suffix == ".json" or path.exists():
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read algebra file {ref}: {exc}") from exc
        return algebra_from_json(data, tol)
    return preset(ref, tol)


def _algebra_of(data: dict) -> GradedAlgebra:
    alg = data.get("algebra", "car(1)")
    if isinstance(alg, dict):
        return algebra_from_json(alg)
    return load_algebra(str(alg))


def load_state(path: str, tol: float) -> State:
    """Read a state file ``{"algebra", "sites", "values"}`` or ``{"algebra", "density"}``.

    ``algebra`` is a preset name, a path, or an inline algebra object.  With
    ``sites`` present the state lives on that Fermi power of the algebra (and a
    density is read in its Klein realization).
    """
    try:
        data = json.loads(Path(path).read_text())
        values = values_from_json(data) if "values" in data else None
        density = decode_complex(data["density"]) if values is None else None
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise InputError(f"cannot read state file {path}: {exc}") from exc
    B = _algebra_of(data)
    if density is not None:
        target = fermi_power(B, int(data["sites"])) if "sites" in data else B
        return state_from_density(target, density, tol)
    if "sites" in data:
        P = fermi_power(B, int(data["sites"]))
        cert = None if P.size <= 1024 else "declared in state file"
        return state_from_values(P, values, tol, certificate=cert)
    return state_from_values(B, values, tol)


def parse_operand(text: str, B: GradedAlgebra) -> Element:
    """``unit``/``1``, a basis index, or (one-mode CAR) a matrix-unit name like ``e12``."""
    t = text.strip().lower()
    if t in ("1", "unit", "one", "id"):
        return unit(B)
    if t in _CAR1_LETTERS and B.size == 4 and B.ambient_dim == 2:
        return basis_element(B, _CAR1_LETTERS[t])
    m = re.fullmatch(r"b?(\d+)", t)
    if m and int(m.group(1)) < B.size:
        return basis_element(B, int(m.group(1)))
    raise InputError(f"cannot interpret operand {text!r}")


# -- output ----------------------------------------------------------------------------

def _rows_to_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _csv_for(kind: str, payload: dict) -> str:
    if kind == "decay":
        return _rows_to_csv(["n", "value"], payload["points"])
    if kind == "fit":
        return _rows_to_csv(["grid_param", "weight"],
                            [[json.dumps(p), w] for p, w in zip(payload["grid_params"], payload["weights"])])
    if kind == "verify":
        return _rows_to_csv(["suite", "property", "passed", "worst_residual", "threshold"],
                            [[s, p["property"], p["passed"], p["worst_residual"], p["threshold"]]
                             for s, props in payload["suites"].items() for p in props])
    return _rows_to_csv(["key", "value"], [[k, json.dumps(v)] for k, v in payload.items()])


def emit(payload: dict, kind: str, cfg: RunConfig, stdout) -> None:
    text = dumps(payload) if cfg.format == "json" else _csv_for(kind, payload)
    if cfg.output_path:
        Path(cfg.output_path).write_text(text)
    else:
        stdout.write(text)


# -- commands ---------------------------------------------------------------------------

def cmd_algebra(args: argparse.Namespace, cfg: RunConfig, stdout) -> int:
    if args.action == "preset":
        A = preset(args.target)
        emit(algebra_to_json(A), "algebra", cfg, stdout)
        return EXIT_OK
    if args.action == "info":
        A = load_algebra(args.target)
        emit({"name": A.name, "ambient_dim": A.ambient_dim, "basis_size": A.size,
              "even": int(np.sum(A.grades > 0)), "odd": int(np.sum(A.grades < 0))},
             "info", cfg, stdout)
        return EXIT_OK
    # validate
    try:
        A = load_algebra(args.target)
    except AlgebraError as exc:
        emit({"valid": False, "errors": [{"type": type(exc).__name__, "message": str(exc)}]},
             "info", cfg, stdout)
        return EXIT_FAIL
    emit({"valid": True, "errors": [], "name": A.name, "basis_size": A.size}, "info", cfg, stdout)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, cfg: RunConfig, stdout) -> int:
    results = run_suite(args.suite, cfg.seed, cfg.tol, cfg.sample_count, cfg.max_sites,
                        draws=args.draws)
    suites: dict[str, list] = {}
    for r in results:
        suites.setdefault(r.suite, []).append(r.to_dict())
    ok = all(r.passed for r in results)
    emit({"suite": args.suite, "seed": cfg.seed, "tol": cfg.tol, "passed": ok,
          "suites": suites}, "verify", cfg, stdout)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_decompose(args: argparse.Namespace, cfg: RunConfig, stdout) -> int:
    omega = load_state(args.state, cfg.tol)
    if not hasattr(omega.algebra, "sites"):
        raise InputError("decompose needs a state on a Fermi power (give 'sites')")
    if args.sites is not None and args.sites != omega.algebra.sites:
        omega = restrict(omega, args.sites)
    grid = even_state_grid(omega.algebra.site, args.grid, seed=cfg.seed)
    fit = definetti_fit(omega, grid, cfg.tol)
    emit(fit.to_dict(), "fit", cfg, stdout)
    if cfg.output_path:
        top = np.argsort(-fit.weights)[:5]
        summary = ", ".join(f"{fit.grid_params[k]}: {fit.weights[k]:.6g}"
                            for k in top if fit.weights[k] > 1e-9)
        sys.stderr.write(f"weights {summary}; residual {fit.residual:.3e}\n")
    return EXIT_OK


def cmd_cluster(args: argparse.Namespace, cfg: RunConfig, stdout) -> int:
    omega = load_state(args.state, cfg.tol)
    P = omega.algebra
    if not hasattr(P, "sites"):
        raise InputError("clustering needs a state on a Fermi power (give 'sites')")
    B = P.site
    a, b = parse_operand(args.a, B), parse_operand(args.b, B)
    top = min(P.sites, cfg.max_sites)
    family = [restrict(omega, n) for n in range(2, top + 1)] if top >= 2 else [omega]
    if args.mode == "weak":
        report = check_weak_clustering(family, a, b, samples=cfg.sample_count, seed=cfg.seed,
                                       tol=cfg.tol)
    elif args.mode == "abelian":
        c, d = parse_operand(args.c, B), parse_operand(args.d, B)
        report = check_asymptotic_abelianness(family, a, b, c, d, samples=cfg.sample_count,
                                              seed=cfg.seed, tol=cfg.tol)
    else:
        report = check_strong_clustering(omega, a, b)
    emit(report.to_dict(), "decay", cfg, stdout)
    return EXIT_OK


def _car1_even(B: GradedAlgebra, t: float) -> State:
    return state_from_density(B, np.diag([t, 1.0 - t]))


def cmd_state(args: argparse.Namespace, cfg: RunConfig, stdout) -> int:
    B = load_algebra(args.algebra)
    if not (B.ambient_dim == 2 and B.size == 4):
        raise InputError("state generation is available for the one-mode CAR algebra")
    n = args.sites
    P = fermi_power(B, n)
    if args.kind == "product":
        ts = args.t or [0.5]
        if len(ts) == 1:
            omega = product_state_power(_car1_even(B, ts[0]), P)
        elif len(ts) == n:
            omega = mixed_product_state([_car1_even(B, t) for t in ts], P)
        else:
            raise InputError("give one t, or one t per site")
    elif args.kind == "mixture":
        ts, ws = args.t or [], args.weights or []
        if not ts or len(ts) != len(ws):
            raise InputError("a mixture needs matching --t and --weights lists")
        omega = mixture([product_state_power(_car1_even(B, t), P) for t in ts], ws)
    else:  # seed
        psi = np.array([1.0, 1.0]) / np.sqrt(2)
        omega = symmetrize(product_density_state(P, [np.outer(psi, psi)] * n))
    emit(state_to_json(omega, args.algebra, n), "state", cfg, stdout)
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (unsigned 64-bit)")
    common.add_argument("--tol", type=float, default=1e-10, help="numerical tolerance")
    common.add_argument("--max-sites", type=int, default=6, help="largest number of sites")
    common.add_argument("--samples", type=int, default=20000,
                        help="draws for sampled permutation means (above 8 sites)")
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    p = argparse.ArgumentParser(prog="fermi-definetti",
                                description="Fermi tensor products, symmetric states and "
                                            "their product-state decompositions.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("algebra", parents=[common], help="inspect or emit graded algebras")
    a.add_argument("action", choices=("validate", "info", "preset"))
    a.add_argument("target", nargs="?", help=f"preset ({', '.join(PRESET_NAMES)}) or JSON path")
    a.add_argument("--spec", default=None, help="algebra JSON path (alternative to TARGET)")

    v = sub.add_parser("verify", parents=[common], help="run property suites")
    v.add_argument("suite", choices=tuple(SUITES) + ("all",))
    v.add_argument("--draws", type=int, default=200, help="random inputs per property")

    d = sub.add_parser("decompose", parents=[common], help="fit a symmetric state by product states")
    d.add_argument("--state", required=True)
    d.add_argument("--grid", type=int, default=101, help="grid resolution")
    d.add_argument("--sites", type=int, default=None, help="restrict to this many sites first")

    c = sub.add_parser("cluster", parents=[common], help="clustering diagnostics")
    c.add_argument("mode", choices=("weak", "strong", "abelian"))
    c.add_argument("--state", required=True)
    c.add_argument("--a", default="e11")
    c.add_argument("--b", default="e11")
    c.add_argument("--c", default="unit")
    c.add_argument("--d", default="unit")

    s = sub.add_parser("state", parents=[common], help="write a one-mode CAR state file")
    s.add_argument("kind", choices=("product", "mixture", "seed"))
    s.add_argument("--algebra", default="car(1)")
    s.add_argument("--sites", type=int, required=True)
    s.add_argument("--t", type=float, nargs="+", help="diag(t, 1-t) parameter(s)")
    s.add_argument("--weights", type=float, nargs="+")
    return p


_COMMANDS = {
    "algebra": cmd_algebra,
    "verify": cmd_verify,
    "decompose": cmd_decompose,
    "cluster": cmd_cluster,
    "state": cmd_state,
}


def main(argv: Sequence[str] | None = None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.command == "algebra":
        args.target = args.spec or args.target
        if args.target is None:
            sys.stderr.write("error: algebra needs a preset name or a JSON path\n")
            return EXIT_INPUT
    try:
        cfg = RunConfig.from_args(args)
        return _COMMANDS[args.command](args, cfg, stdout)
    except (BudgetExceeded, ConvergenceError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_BUDGET
    except (FermiError, ValueError, KeyError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
