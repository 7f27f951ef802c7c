"""``nilpdiv`` command line: JSON in, JSON out, with a content-addressed result cache.

Exit codes: 0 success, 2 usage or invalid input, 3 computation error,
4 verification mismatch.  Every successful run prints one JSON object whose
``manifest`` records the command, parameters, engine version, wall time and
the sha256 digest of the result.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import threading
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

import sympy

from . import ENGINE_VERSION
from . import cartan as ca
from . import jmaps
from . import lmfdb
from . import modmat as mm
from . import nilpclass as nc
from . import verify as vf
from .grouplat import MatGroup
from .modcurve import DeterminantNotSurjective, invariants
from .nearco import UnsupportedLevel, maximal_nearco

EXIT_OK, EXIT_USAGE, EXIT_COMPUTE, EXIT_MISMATCH = 0, 2, 3, 4

# bad input rather than a failed computation
INPUT_ERRORS = (nc.MalformedDescriptor, ca.UnsupportedKind, UnsupportedLevel, jmaps.NotOnCurve,
                lmfdb.InvalidLabel, DeterminantNotSurjective, mm.NotInvertible)


class UsageError(Exception):
    pass


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def digest(obj) -> str:
    return hashlib.sha256(canonical(obj).encode()).hexdigest()


@dataclass
class RunManifest:
    command: str
    parameters: dict
    engine_version: str
    wall_time: float
    result_digest: str
    cached: bool = False


# ---------------------------------------------------------------------------
# cache

class ResultCache:
    """Results stored as ``<root>/results/<sha256 of key>.json``.

    A key is (command, parameters, engine version). Entries that do not parse,
    whose stored key differs, or whose digest does not match the stored result
    are moved to ``<root>/quarantine`` and treated as misses.
    """

    def __init__(self, root):
        self.root = Path(root)
        self._lock = threading.Lock()

    @staticmethod
    def make_key(command, params, engine=None):
        return {"command": command, "parameters": params, "engine": engine or ENGINE_VERSION}

    def path(self, key):
        return self.root / "results" / f"{digest(key)}.json"

    def get(self, key):
        path = self.path(key)
        if not path.exists():
            return None
        try:
            entry = json.loads(path.read_text())
            ok = (entry["key"] == key and entry["key"]["engine"] == ENGINE_VERSION
                  and digest(entry["result"]) == entry["digest"])
        except (ValueError, KeyError, TypeError):
            ok = False
        if not ok:
            self.quarantine(path)
            return None
        return entry["result"]

    def put(self, key, result):
        entry = {"key": key, "result": result, "digest": digest(result)}
        with self._lock:
            lmfdb._atomic_write(self.path(key), canonical(entry) + "\n")

    def quarantine(self, path):
        dest = self.root / "quarantine" / f"{path.stem}.{time.time_ns()}.json"
        dest.parent.mkdir(parents=True, exist_ok=True)
        os.replace(path, dest)


def cache_get(key, root=None):
    return ResultCache(root or lmfdb.cache_root()).get(key)


def cache_put(key, result, root=None):
    ResultCache(root or lmfdb.cache_root()).put(key, result)


# ---------------------------------------------------------------------------
# commands; each returns (result dict, exit code)

def _group_json(G: MatGroup):
    out = G.to_json()
    out["nilpotent"] = G.is_nilpotent()
    out["abelian"] = G.is_abelian()
    if G.has_surjective_det():
        out["invariants"] = invariants(G).to_json()
    if sympy.isprime(G.N):
        out["admissible"] = nc.is_admissible(G)
        out["projective_class"] = str(nc.projective_class(G))
    return out


def _parse_gens(text, N):
    gens = []
    for chunk in text.split(";"):
        vals = [int(v) for v in chunk.replace(" ", "").split(",") if v]
        if len(vals) != 4:
            raise UsageError(f"generator {chunk!r} needs four entries a,b,c,d")
        g = mm.Mat2(*vals, N)
        if math.gcd(g.det(), N) != 1:
            raise UsageError(f"generator {chunk!r} is not invertible mod {N}")
        gens.append(g)
    return gens


def cmd_invariants(a):
    if a.kind:
        if a.p is None:
            raise UsageError("--kind needs --p")
        G = ca.standard_group(a.kind, a.p)
    elif a.level and a.gens:
        G = MatGroup(a.level, _parse_gens(a.gens, a.level))
    else:
        raise UsageError("give --kind and --p, or --level and --gens")
    return _group_json(G), EXIT_OK


def cmd_search_nearco(a):
    classes = maximal_nearco(a.p, a.k, strategy=a.strategy)
    return {"level": [a.p**a.k, a.p ** (a.k - 1)],
            "classes": [c.to_json() for c in classes]}, EXIT_OK


def cmd_search_nilpotent(a):
    if not sympy.isprime(a.p):
        raise UsageError(f"{a.p} is not prime")
    classes = nc.maximal_nilpotent_admissible(a.p, require_admissible=not a.det_only)
    return {"p": a.p, "det_only": a.det_only,
            "labels": sorted(c.invariants.label_prefix for c in classes),
            "classes": [c.to_json() for c in classes]}, EXIT_OK


def _images(spec):
    images = {}
    for part in filter(None, (s.strip() for s in spec.split(","))):
        p, sep, cls = part.partition("=")
        if not sep:
            raise UsageError(f"image {part!r} should look like 7=ns+")
        try:
            images[int(p)] = nc.ImageClass.parse(cls)
        except ValueError as exc:
            raise UsageError(f"image {part!r}: {exc}") from None
    return images


def _descriptor(a):
    given = [x is not None for x in (a.cm, a.j0, a.images)]
    if sum(given) > 1:
        raise UsageError("--cm, --j0 and --images are mutually exclusive")
    if a.cm is not None:
        return nc.CurveDescriptor.cm(a.cm)
    if a.j0 is not None:
        return nc.CurveDescriptor.j0(mm.parse_rational(a.j0))
    return nc.CurveDescriptor.noncm(_images(a.images or ""), has_2torsion=a.two_torsion,
                                    square_disc=a.square_disc)


def cmd_classify(a):
    if a.n < 1:
        raise UsageError("--n must be positive")
    desc = _descriptor(a)
    out = nc.classify(desc, a.n, assume_conjecture=a.assume_conjecture).to_json()
    out.update({"n": a.n, "descriptor": desc.to_json()})
    return out, EXIT_OK


def cmd_cartan(a):
    order = ca.CmOrder.from_discriminant(a.D)
    if a.D not in ca.CM_DISCRIMINANTS:
        raise UsageError(f"{a.D} is not a class-number-one discriminant")
    C, Nrm = ca.cm_cartan(order, a.N), ca.cm_normalizer(order, a.N)
    out = {"D": a.D, "N": a.N, "cartan_order": C.order, "normalizer_order": Nrm.order,
           "center_is_scalar": ca.center_is_scalar(Nrm),
           "non_scalar_central": [str(mm.Mat2.from_code(int(x), a.N))
                                  for x in ca.non_scalar_central(Nrm)]}
    fac = mm.factor(a.N)
    if len(fac) == 1:
        (p, k), = fac.items()
        out["size_tower"] = ca.size_tower_holds(order, p, k)
        out["normalizer_size_tower"] = ca.size_tower_holds(order, p, k, normalizer=True)
    return out, EXIT_OK


def cmd_jmap(a):
    if a.id in jmaps.GENUS_ONE:
        if a.x is None or a.y is None:
            raise UsageError(f"{a.id} takes --x and --y")
        point = (mm.parse_rational(a.x), mm.parse_rational(a.y))
        shown = [str(v) for v in point]
    else:
        if a.t is None:
            raise UsageError(f"{a.id} takes --t")
        point = jmaps.INFINITY if a.t == jmaps.INFINITY else mm.parse_rational(a.t)
        shown = str(point)
    j = jmaps.evaluate(a.id, point)
    return {"map": a.id, "point": shown, "j": str(Fraction(j))}, EXIT_OK


def cmd_verify(a):
    kw = {"det_only": True} if a.det_only and a.table == "1" else {}
    report = vf.check(a.table, jobs=a.jobs, **kw)
    out = report.to_json()
    if a.det_only:
        out["det_only"] = True
    return out, EXIT_OK if report.ok else EXIT_MISMATCH


def cmd_fetch(a):
    rec = lmfdb.fetch_curve(a.label, live=a.live)
    out = {"record": lmfdb.record_to_raw(rec)}
    try:
        desc = lmfdb.to_descriptor(rec)
        out["descriptor"] = desc.to_json()
        if a.n:
            out["verdict"] = nc.classify(desc, a.n).to_json()
    except lmfdb.UnknownImageClass as exc:
        out["descriptor"] = None
        out["unmapped_image"] = exc.label
    return out, EXIT_OK


COMMANDS = {
    "invariants": cmd_invariants, "search-nearco": cmd_search_nearco,
    "search-nilpotent": cmd_search_nilpotent, "classify": cmd_classify, "cartan": cmd_cartan,
    "jmap": cmd_jmap, "verify": cmd_verify, "fetch": cmd_fetch,
}
# deterministic and worth keeping; fetch has its own record cache
CACHED = {"invariants", "search-nearco", "search-nilpotent", "verify"}
# flags that never change the result
NOT_PARAMETERS = {"command", "jobs", "no_cache", "cache_dir", "compact"}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cache-dir", help="result cache (default: $NILPDIV_CACHE or ./cache)")
    common.add_argument("--no-cache", action="store_true", help="neither read nor write the cache")
    common.add_argument("--compact", action="store_true", help="single-line JSON")
    ap = argparse.ArgumentParser(prog="nilpdiv", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    _add = sub.add_parser
    sub.add_parser = lambda *args, **kw: _add(*args, parents=[common], **kw)

    s = sub.add_parser("invariants", help="modular-curve invariants of a subgroup")
    s.add_argument("--kind", help="borel, split, split+, nonsplit, nonsplit+, nonsplit-3, cubes, ram-g, ...")
    s.add_argument("--p", type=int)
    s.add_argument("--level", type=int)
    s.add_argument("--gens", help='generators "a,b,c,d;a,b,c,d"')

    s = sub.add_parser("search-nearco", help="maximal near-coincidence groups at (p^k, p^(k-1))")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--strategy", choices=["solvable", "lift_search"])

    s = sub.add_parser("search-nilpotent", help="maximal nilpotent admissible groups mod p")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--det-only", action="store_true",
                   help="keep only the determinant condition of admissibility")

    s = sub.add_parser("classify", help="can Q(E[n]) be nilpotent for this curve")
    s.add_argument("--cm", type=int, metavar="D")
    s.add_argument("--j0", metavar="d", help="j = 0 curve y^2 = x^3 + d")
    s.add_argument("--images", help='mod-p images, e.g. "3=ns+,7=ns+"')
    s.add_argument("--2torsion", dest="two_torsion", action="store_true")
    s.add_argument("--square-disc", action="store_true")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--assume-conjecture", action=argparse.BooleanOptionalAction, default=True)

    s = sub.add_parser("cartan", help="CM Cartan and normaliser at level N")
    s.add_argument("--D", type=int, required=True)
    s.add_argument("--N", type=int, required=True)

    s = sub.add_parser("jmap", help="evaluate a j-map exactly")
    s.add_argument("--id", required=True, choices=jmaps.MAP_IDS)
    s.add_argument("--t")
    s.add_argument("--x")
    s.add_argument("--y")

    s = sub.add_parser("verify", help="compare against the expected tables")
    s.add_argument("--table", required=True, choices=vf.TABLES)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--det-only", action="store_true")

    s = sub.add_parser("fetch", help="LMFDB curve record and its classifier descriptor")
    s.add_argument("label")
    s.add_argument("--live", action="store_true")
    s.add_argument("--n", type=int)
    return ap


def run(argv=None, out=None, err=None):
    out, err = out or sys.stdout, err or sys.stderr
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    params = {k: v for k, v in sorted(vars(a).items()) if k not in NOT_PARAMETERS}
    cache = None
    if a.command in CACHED and not a.no_cache:
        cache = ResultCache(a.cache_dir or lmfdb.cache_root())
    key = ResultCache.make_key(a.command, params)

    start = time.perf_counter()
    cached = cache.get(key) if cache else None
    try:
        if cached is not None:
            result, code = cached["result"], cached["exit"]
        else:
            result, code = COMMANDS[a.command](a)
            if cache:
                cache.put(key, {"result": result, "exit": code})
    except UsageError as exc:
        return _fail(out, err, EXIT_USAGE, exc)
    except INPUT_ERRORS as exc:
        return _fail(out, err, EXIT_USAGE, exc)
    except (ArithmeticError, ValueError, LookupError, OSError, RuntimeError) as exc:
        return _fail(out, err, EXIT_COMPUTE, exc)

    manifest = RunManifest(a.command, params, ENGINE_VERSION,
                           round(time.perf_counter() - start, 3), digest(result), cached is not None)
    payload = dict(result, manifest=asdict(manifest))
    out.write(json.dumps(payload, indent=None if a.compact else 1, default=str) + "\n")
    if code == EXIT_MISMATCH:
        for line in result.get("diff", []):
            err.write(f"- {line}\n")
    return code


def _fail(out, err, code, exc):
    out.write(json.dumps({"error": str(exc), "type": type(exc).__name__}) + "\n")
    err.write(f"nilpdiv: {exc}\n")
    return code


def main(argv=None):
    return run(argv)
