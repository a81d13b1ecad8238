"""Command-line front end: JSON in, JSON out.

Every subcommand reads one JSON document (``--input`` or stdin) and writes
one JSON document (``--output`` or stdout) with an embedded ``manifest``.
Exit codes: 0 success, 2 invalid input, 3 numerical failure; failures print
``{"error": {"code": ..., "message": ...}}``.

Input documents
---------------
schwarzian   ``{"f": RF}``
normal-form  ``{"system": SYS, "pole": PT}``, ``{"q": RF, "pole": PT}`` or ``{"riccati": RIC}``
formal-data  ``{"q": RF, "pole": PT}`` (all poles when ``pole`` is omitted)
monodromy    ``{"q": RF}`` or ``{"system": SYS}``, optional ``"loops"`` (poles), ``"base"``
stokes       ``{"q": RF, "pole": PT}`` or ``{"system": SYS, "pole": PT}``
jacobian     a family configuration, optional ``"params"`` and ``"probe_pairs"``
check        ignored (may be empty)

``RF`` is ``{"num": [[re, im], ...], "den": [...]}`` with coefficients in
increasing degree; ``PT`` is ``[re, im]`` or ``"inf"``.  The shipped fixtures
(``--fixture hypergeometric|heun|airy``) replace the input document.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
import time
from importlib import resources

import numpy as np

from . import __version__
from .algebra import INF, RationalFunction, cx_from_json, cx_to_json, is_inf, point_from_json, point_to_json
from .errors import MeroprojError, ValidationError
from .formal import CONVENTIONS, formal_monodromy, formal_normal_form, structure_formal_data
from .lab import FamilyConfig, H_DEFAULT, RANK_TOL, build_family, jacobian_rank, local_injectivity_probe
from .linsys import LinearSystem, companion_system, lift_riccati
from .monodromy import CLEARANCE, DEFAULT_TOL, global_monodromy, stokes_data, stokes_product_check
from .projective import polar_divisor, ProjectiveStructureP1, schwarzian
from .riccati import RiccatiEq, minimize_pole_order, oper_normal_form

COMMANDS = ("schwarzian", "normal-form", "formal-data", "monodromy", "stokes", "jacobian", "check")
FIXTURES = ("hypergeometric", "heun", "airy")
DEFAULT_SEED = 0
DEFAULT_STOKES_TOL = 1e-6


class BadInput(ValidationError):
    """Malformed or incomplete input document."""


# --------------------------------------------------------------- helpers ----

def load_fixture(name: str) -> dict:
    if name not in FIXTURES:
        raise BadInput(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
    text = resources.files("meroproj").joinpath("data", f"{name}.json").read_text()
    return json.loads(text)


def format_rf(f: RationalFunction, digits: int = 10) -> str:
    """Human-readable ``num/den`` in ``x``."""

    def poly(c):
        terms = []
        for k, a in enumerate(c):
            a = complex(round(a.real, digits), round(a.imag, digits))
            if a == 0:
                continue
            coef = f"{a.real:g}" if a.imag == 0 else f"({a.real:g}{a.imag:+g}j)"
            mono = "" if k == 0 else ("x" if k == 1 else f"x^{k}")
            terms.append(coef if not mono else (mono if coef == "1" else f"{coef}*{mono}"))
        return " + ".join(terms) or "0"

    n, d = poly(f.num), poly(f.den)
    return n if d == "1" else f"({n})/({d})"


def _rf(doc, key):
    try:
        return RationalFunction.from_json(doc[key])
    except KeyError as exc:
        raise BadInput(f"missing field {key!r}") from exc
    except (TypeError, ValueError) as exc:
        raise BadInput(f"field {key!r}: {exc}") from exc


def _point(doc, key="pole"):
    if key not in doc:
        raise BadInput(f"missing field {key!r}")
    try:
        return point_from_json(doc[key])
    except (TypeError, ValueError) as exc:
        raise BadInput(f"field {key!r}: {exc}") from exc


def _system(doc) -> LinearSystem:
    if "system" in doc:
        try:
            return LinearSystem.from_json(doc["system"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BadInput(f"field 'system': {exc}") from exc
    if "q" in doc:
        return companion_system(_rf(doc, "q"))
    raise BadInput("expected a 'q' or a 'system' field")


def _poles_of(q) -> list:
    return [p for p, _ in polar_divisor(ProjectiveStructureP1(q)).entries]


# -------------------------------------------------------------- commands ----

def cmd_schwarzian(doc, args) -> dict:
    f = _rf(doc, "f")
    q = schwarzian(f)
    return {"q": q.to_json(), "q_text": format_rf(q)}


def cmd_normal_form(doc, args) -> dict:
    if "riccati" in doc:
        try:
            R = RiccatiEq.from_json(doc["riccati"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BadInput(f"field 'riccati': {exc}") from exc
        out = oper_normal_form(R, doc.get("section") and RationalFunction.from_json(doc["section"]))
        return {"oper": out.to_json(), "q_text": format_rf(out.q)}
    p = _point(doc)
    if "system" in doc:
        S = _system(doc)
    else:
        # the structure's own lift at minimal pole order (written in t = 1/x at infinity)
        R, _, _ = minimize_pole_order(_rf(doc, "q"), p)
        S, p = lift_riccati(R), (0j if is_inf(p) else p)
    N = args.truncation_order
    A = S.local_matrix(p, (N or 40) + 8)
    F, _ = formal_normal_form(A, N)
    out = {"formal": F.to_json(), "normal_form": F.normal_form.to_json()}
    if not F.cls.ramified or args.convention:
        out["formal_monodromy"] = _mat(formal_monodromy(F, args.convention))
    return out


def cmd_formal_data(doc, args) -> dict:
    q = _rf(doc, "q")
    pts = [_point(doc)] if "pole" in doc else _poles_of(q)
    return {"poles": [structure_formal_data(q, p, args.truncation_order).to_json() for p in pts]}


def cmd_monodromy(doc, args) -> dict:
    S = _system(doc)
    poles = [point_from_json(v) for v in doc["loops"]] if "loops" in doc else None
    base = args.base if args.base is not None else (cx_from_json(doc["base"]) if "base" in doc else None)
    md = global_monodromy(S, poles, base, args.tol or DEFAULT_TOL, clearance=args.path_clearance)
    return md.to_json()


def cmd_stokes(doc, args) -> dict:
    S = _system(doc)
    p = _point(doc)
    sd = stokes_data(S, p, tol=args.tol or DEFAULT_STOKES_TOL, N=args.truncation_order or 60)
    conv = args.convention or "ccw"
    out = sd.to_json()
    out["convention"] = conv
    out["product_check"] = stokes_product_check(sd, conv)
    return out


def cmd_jacobian(doc, args) -> dict:
    try:
        cfg = FamilyConfig.from_json(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise BadInput(f"family configuration: {exc}") from exc
    params = tuple(cx_from_json(v) for v in doc["params"]) if "params" in doc else cfg.initial
    rep = jacobian_rank(cfg, params, h=args.h, tol=args.rank_tol, ode_tol=args.tol or 1e-10,
                        threads=args.threads)
    out = {"config": cfg.to_json(), "params": [cx_to_json(complex(v)) for v in params], **rep.to_json()}
    pairs = int(doc.get("probe_pairs", 0))
    if pairs and params:
        rng = np.random.default_rng(args.seed)
        verdicts = []
        for _ in range(pairs):
            p1 = np.array(params, complex) + 0.05 * (rng.normal(size=len(params)) + 1j * rng.normal(size=len(params)))
            verdicts.append(local_injectivity_probe(cfg, params, tuple(p1)).verdict)
        out["probe"] = {"pairs": pairs, "distinct": verdicts.count("DISTINCT")}
    q = build_family(cfg)(params)
    out["q"] = q.to_json()
    return out


def cmd_check(doc, args) -> dict:
    from .checks import run_all

    only = [int(v) for v in args.only.split(",")] if args.only else None
    results = run_all(seed=args.seed, scale=args.scale, only=only)
    for r in results:
        print(r.line(), file=sys.stderr)
    return {"results": [r.to_json() for r in results], "all_pass": all(r.passed for r in results)}


HANDLERS = {
    "schwarzian": cmd_schwarzian,
    "normal-form": cmd_normal_form,
    "formal-data": cmd_formal_data,
    "monodromy": cmd_monodromy,
    "stokes": cmd_stokes,
    "jacobian": cmd_jacobian,
    "check": cmd_check,
}


def _mat(M) -> list:
    return [[cx_to_json(complex(v)) for v in row] for row in np.asarray(M)]


# ---------------------------------------------------------------- driver ----

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="meroproj", description="Meromorphic projective structures on P^1.")
    ap.add_argument("--version", action="version", version=f"meroproj {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--input", help="input JSON file (default: stdin)")
        sp.add_argument("--output", help="output JSON file (default: stdout)")
        sp.add_argument("--fixture", choices=FIXTURES, help="use a shipped fixture as input")
        sp.add_argument("--tol", type=float, default=None,
                        help=f"numerical tolerance (default: {DEFAULT_TOL:g} for transport, "
                             f"{DEFAULT_STOKES_TOL:g} for Stokes matching)")
        sp.add_argument("--truncation-order", type=int, default=None,
                        help="formal truncation order N (default: pole order + 12; 60 for Stokes)")
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED, help="64-bit seed for all randomness (default: 0)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads (default: 1)")
        sp.add_argument("--convention", choices=CONVENTIONS, default=None,
                        help="orientation for ramified formal monodromy (default: required when ramified; "
                             "ccw for the Stokes product check)")
        sp.add_argument("--base", type=complex, default=None, help="base point, e.g. 0.5+0.2j (default: automatic)")
        sp.add_argument("--path-clearance", type=float, default=CLEARANCE,
                        help=f"loop radius as a fraction of the nearest pole distance (default: {CLEARANCE})")
        sp.add_argument("--timing", action="store_true", help="record wall time in the manifest")
        if name == "jacobian":
            sp.add_argument("--h", type=float, default=H_DEFAULT, help=f"finite-difference step (default: {H_DEFAULT:g})")
            sp.add_argument("--rank-tol", type=float, default=RANK_TOL,
                            help=f"relative singular-value threshold (default: {RANK_TOL:g})")
        if name == "check":
            sp.add_argument("--scale", type=float, default=1.0, help="sample-size factor (default: 1.0)")
            sp.add_argument("--only", default=None, help="comma-separated check numbers")
    return ap


def _manifest(command, raw: bytes, args, warnings, elapsed) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "input", "output", "timing")}
    flags = {k: (str(v) if isinstance(v, complex) else v) for k, v in flags.items()}
    m = {"command": command, "input_sha256": hashlib.sha256(raw).hexdigest(), "flags": flags,
         "version": __version__, "warnings": warnings}
    if elapsed is not None:
        m["wall_time_s"] = elapsed
    return m


_PAIR = re.compile(r"\[\s+(-?[\d.eE+-]+|null),\s+(-?[\d.eE+-]+|null)\s+\]")


def _emit(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    text = _PAIR.sub(r"[\1, \2]", text)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_default(o):
    if isinstance(o, complex):
        return cx_to_json(o)
    if isinstance(o, np.generic):
        return o.item() if not np.iscomplexobj(o) else cx_to_json(complex(o))
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.fixture:
            raw = json.dumps(load_fixture(args.fixture), sort_keys=True).encode()
        elif args.command == "check" and not args.input and sys.stdin.isatty():
            raw = b"{}"
        else:
            raw = open(args.input, "rb").read() if args.input else sys.stdin.buffer.read()
        try:
            doc = json.loads(raw.decode() or "{}")
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise BadInput(f"malformed JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise BadInput("the input document must be a JSON object")
        if args.threads < 1:
            raise BadInput("--threads must be positive")
        import warnings as _w

        with _w.catch_warnings(record=True) as caught:
            _w.simplefilter("always")
            result = HANDLERS[args.command](doc, args)
        warnings = sorted({str(w.message) for w in caught})
        elapsed = time.perf_counter() - t0 if args.timing else None
        result["manifest"] = _manifest(args.command, raw, args, warnings, elapsed)
        _emit(result, args.output)
        if args.command == "check" and not result["all_pass"]:
            return 3
        return 0
    except MeroprojError as exc:
        _emit(exc.to_json(), None)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        err = BadInput(str(exc))
        _emit(err.to_json(), None)
        return err.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
