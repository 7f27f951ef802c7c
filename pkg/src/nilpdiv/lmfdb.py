"""Elliptic-curve records from the LMFDB HTTP API, with offline fixtures and a disk cache.

Resolution order for a label: packaged fixture, then the cache under
``<cache>/lmfdb/<label>.json``, then the live API (only with ``live=True``).
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import cartan as ca
from .nilpclass import CurveDescriptor, ImageClass

SCHEMA = "ec_curvedata/v1"
FIELDS = ("lmfdb_label", "cm", "jinv", "ainvs", "torsion_structure", "modp_images")
DEFAULT_BASE_URL = "https://www.lmfdb.org"
FIXTURE_DIR = Path(__file__).parent / "data" / "lmfdb"

_LABEL = re.compile(r"^[1-9]\d*\.[a-z]+\d+$")
_IMAGE_LABEL = re.compile(r"^(\d+)\.(\d+)\.(\d+)\.(\d+)$")
_requests = threading.BoundedSemaphore(2)


class InvalidLabel(ValueError):
    pass


class UnknownLabel(LookupError):
    pass


class SchemaError(ValueError):
    pass


class NetworkError(ConnectionError):
    pass


class UnknownImageClass(ValueError):
    def __init__(self, label):
        super().__init__(f"unknown image class for label {label!r}")
        self.label = label


@dataclass(frozen=True)
class CurveRecord:
    label: str
    cm_discriminant: int | None
    modp_image_labels: tuple
    torsion_structure: tuple
    j_invariant: Fraction
    ainvs: tuple = field(default=())

    def __post_init__(self):
        if self.cm_discriminant is not None and self.cm_discriminant not in ca.CM_DISCRIMINANTS:
            raise SchemaError(f"cm discriminant {self.cm_discriminant} is not class number one")
        for lab in self.modp_image_labels:
            if not _IMAGE_LABEL.match(lab):
                raise SchemaError(f"image label {lab!r} is not of the form N.i.g.n")


def validate_label(label):
    if not isinstance(label, str) or not _LABEL.match(label):
        raise InvalidLabel(f"{label!r} is not an elliptic curve label like 32.a3")
    return label


def parse_record(raw: dict) -> CurveRecord:
    missing = [f for f in FIELDS if f not in raw]
    if missing:
        raise SchemaError(f"{SCHEMA}: missing field {missing[0]!r}")
    num, den = raw["jinv"]
    cm = int(raw["cm"])
    return CurveRecord(
        label=raw["lmfdb_label"],
        cm_discriminant=cm or None,
        modp_image_labels=tuple(raw["modp_images"]),
        torsion_structure=tuple(int(t) for t in raw["torsion_structure"]),
        j_invariant=Fraction(int(num), int(den)),
        ainvs=tuple(int(a) for a in raw["ainvs"]),
    )


def record_to_raw(rec: CurveRecord) -> dict:
    return {
        "lmfdb_label": rec.label,
        "cm": rec.cm_discriminant or 0,
        "jinv": [rec.j_invariant.numerator, rec.j_invariant.denominator],
        "ainvs": list(rec.ainvs),
        "torsion_structure": list(rec.torsion_structure),
        "modp_images": list(rec.modp_image_labels),
    }


def dumps_payload(rec: CurveRecord) -> str:
    """Canonical API-shaped JSON for a record; fixtures are stored in this form."""
    return json.dumps({"data": [record_to_raw(rec)]}, indent=1, sort_keys=True) + "\n"


def parse_payload(payload: dict, label) -> CurveRecord:
    if not isinstance(payload, dict) or "data" not in payload:
        raise SchemaError(f"{SCHEMA}: missing field 'data'")
    rows = payload["data"]
    if not rows:
        raise UnknownLabel(f"no curve with label {label}")
    return parse_record(rows[0])


# ---------------------------------------------------------------------------
# fetching

def cache_root():
    return Path(os.environ.get("NILPDIV_CACHE", "cache"))


def base_url():
    return os.environ.get("NILPDIV_LMFDB_URL", DEFAULT_BASE_URL).rstrip("/")


def _atomic_write(path: Path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _http_get(url, timeout=20):
    with _requests:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            return resp.read()


def fetch_curve(label, live=False, cache_dir=None, fixture_dir=FIXTURE_DIR,
                opener=_http_get, retries=3, backoff=0.5) -> CurveRecord:
    validate_label(label)
    for path in (Path(fixture_dir) / f"{label}.json",
                 Path(cache_dir or cache_root()) / "lmfdb" / f"{label}.json"):
        if path.exists():
            return parse_payload(json.loads(path.read_text()), label)
    if not live:
        raise NetworkError(f"{label} is not cached and live fetching is off")
    url = f"{base_url()}/api/ec_curvedata/?lmfdb_label={label}&_format=json"
    last = None
    for attempt in range(retries):
        try:
            body = opener(url)
            break
        except (urllib.error.URLError, OSError) as exc:
            last = exc
            time.sleep(backoff * 2**attempt)
    else:
        raise NetworkError(f"fetching {label} failed after {retries} attempts: {last}")
    rec = parse_payload(json.loads(body), label)
    _atomic_write(Path(cache_dir or cache_root()) / "lmfdb" / f"{label}.json", dumps_payload(rec))
    return rec


# ---------------------------------------------------------------------------
# records to classifier input

# (level, index) of the maximal mod-p images the classifier knows about
PREFIX_TABLE = {
    (2, 2): ImageClass.L2201,
    (2, 3): ImageClass.L2301,
    (2, 6): ImageClass.L2301,  # trivial mod-2 image: all 2-torsion rational
}


def image_class_of(label) -> tuple:
    m = _IMAGE_LABEL.match(label)
    if not m:
        raise UnknownImageClass(label)
    level, index = int(m.group(1)), int(m.group(2))
    if (level, index) in PREFIX_TABLE:
        return level, PREFIX_TABLE[level, index]
    p = level
    if p > 2 and all(p % q for q in range(2, int(p**0.5) + 1)):
        by_index = {p + 1: ImageClass.BOREL, p * (p + 1) // 2: ImageClass.SPLIT_NORMALIZER,
                    p * (p - 1) // 2: ImageClass.NONSPLIT_NORMALIZER}
        if index in by_index:
            return p, by_index[index]
    raise UnknownImageClass(label)


def weierstrass_d(ainvs):
    """d with E isomorphic to y^2 = x^3 + d, for a model with j = 0."""
    a1, a2, a3, a4, a6 = ainvs
    b2, b4, b6 = a1 * a1 + 4 * a2, 2 * a4 + a1 * a3, a3 * a3 + 4 * a6
    c4 = b2 * b2 - 24 * b4
    if c4 != 0:
        raise ValueError("model does not have j = 0")
    c6 = -b2**3 + 36 * b2 * b4 - 216 * b6
    return Fraction(-54 * c6)


def to_descriptor(rec: CurveRecord) -> CurveDescriptor:
    if rec.cm_discriminant is not None:
        if rec.j_invariant == 0:
            return CurveDescriptor.j0(weierstrass_d(rec.ainvs))
        return CurveDescriptor.cm(rec.cm_discriminant)
    images = {}
    for lab in rec.modp_image_labels:
        p, cls = image_class_of(lab)
        images[p] = cls
    two_torsion = any(t % 2 == 0 for t in rec.torsion_structure)
    return CurveDescriptor.noncm(images, has_2torsion=two_torsion)
