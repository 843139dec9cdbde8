"""Registry of named example metrics with their expected curvature behaviour.

Each entry is a JSON file with fields ``name``, ``metric``, ``domain``,
``expectation`` and ``citation`` (plus optional ``pair`` and ``notes``).
Expectation kinds:

``einstein``            Ric = lambda g with the given ``lambda``
``ricci-flat``          Ric = 0
``non-einstein``        the Einstein test must fail
``flat``                the full Riemann tensor vanishes
``constant-curvature``  R^l_ijk = K (g_jk delta^l_i - g_ik delta^l_j) with the given ``K``
``ricci``               Ricci equals the listed constant entries, all others zero
``quasi-einstein``      the quasi-Einstein identity for ``phi`` over ``base`` holds

An optional ``pair`` (``phi`` and ``inner``) describes the entry as a
conformal change ``phi^-2 inner`` for the conformal-law checks.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ForgeError

__all__ = [
    "CatalogEntry",
    "CatalogReport",
    "catalog_names",
    "catalog_list",
    "get_entry",
    "load_entry",
    "resolve_node",
    "catalog_verify",
]

DEFAULT_TOL = 1e-7


class UnknownEntryError(ForgeError, KeyError):
    def __str__(self) -> str:
        return f"unknown catalog entry {self.args[0]!r}"


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    metric: str
    domain: dict
    expectation: dict
    citation: str
    pair: dict | None = None
    notes: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> "CatalogEntry":
        missing = {"name", "metric", "expectation", "citation"} - set(d)
        if missing:
            raise ValueError(f"catalog entry lacks fields {sorted(missing)}")
        return cls(
            name=d["name"],
            metric=d["metric"],
            domain=dict(d.get("domain", {})),
            expectation=dict(d["expectation"]),
            citation=d["citation"],
            pair=d.get("pair"),
            notes=d.get("notes", ""),
        )

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "metric": self.metric,
            "domain": self.domain,
            "expectation": self.expectation,
            "citation": self.citation,
        }
        if self.pair:
            out["pair"] = self.pair
        if self.notes:
            out["notes"] = self.notes
        return out

    def spec(self):
        from ..dsl import parse_metric

        return parse_metric(self.metric).with_domain(self.domain)

    def conformal_pair(self):
        """The entry as a :class:`ConformalPair`, if it declares one."""
        if not self.pair:
            return None
        from ..conformal import ConformalPair
        from ..dsl import parse_metric

        inner = parse_metric(self.pair["inner"]).with_domain(self.domain)
        return ConformalPair.from_text(inner, self.pair["phi"])

    @property
    def kind(self) -> str:
        return self.expectation["kind"]


def _data_dir():
    return resources.files(__package__).joinpath("data")


@lru_cache(maxsize=None)
def _registry() -> dict[str, CatalogEntry]:
    out = {}
    for item in sorted(_data_dir().iterdir(), key=lambda p: p.name):
        if item.name.endswith(".json"):
            entry = CatalogEntry.from_dict(json.loads(item.read_text(encoding="utf-8")))
            out[entry.name] = entry
    return out


def catalog_names() -> list[str]:
    return list(_registry())


def catalog_list() -> list[dict]:
    """Name, citation and expectation of every entry, sorted by name."""
    return [
        {"name": e.name, "citation": e.citation, "expectation": e.expectation}
        for e in _registry().values()
    ]


def get_entry(name: str) -> CatalogEntry:
    try:
        return _registry()[name]
    except KeyError:
        raise UnknownEntryError(name) from None


def load_entry(path) -> CatalogEntry:
    """Load a user-supplied entry from a JSON file."""
    text = Path(path).read_text(encoding="utf-8")
    return CatalogEntry.from_dict(json.loads(text))


def resolve_node(name: str):
    """Metric tree of a catalog entry, used by ``catalog(name)`` in metric text."""
    return get_entry(name).spec().root


@dataclass
class CatalogReport:
    name: str
    kind: str
    passed: bool
    lambda_hat: float | None
    residual: float
    n_points: int
    tol: float
    details: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "name": self.name,
            "expectation": self.kind,
            "pass": self.passed,
            "lambda_hat": self.lambda_hat,
            "residual": self.residual,
            "n_points": self.n_points,
            "tol": self.tol,
            "details": self.details,
        }
        if timing:
            out["wall_time"] = self.wall_time
        return out


def catalog_verify(
    entry,
    grid=None,
    tol: float = DEFAULT_TOL,
    n: int = 64,
    domain: dict | None = None,
    parallel: int | None = None,
) -> CatalogReport:
    """Run an entry's expectation on the default (or a supplied) grid."""
    from ..conformal import quasi_einstein_check
    from ..curvature import constant_curvature_residual, curvature_batch, einstein_residual, make_grid
    from ..dsl import parse_metric

    if isinstance(entry, str):
        entry = get_entry(entry)
    start = time.perf_counter()
    spec = entry.spec().with_domain(domain)
    if grid is None:
        grid = make_grid(spec, n)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    exp = entry.expectation
    kind = exp["kind"]
    details: dict = {}
    lam = None
    if kind in ("einstein", "ricci-flat", "non-einstein"):
        rep = einstein_residual(spec, grid, tol=tol, parallel=parallel)
        lam, residual = rep.lambda_hat, rep.max_residual
        details = {"scalar_std": rep.scalar_std, "max_ricci": rep.max_ricci}
        if kind == "non-einstein":
            passed = not rep.passed
        else:
            expected = 0.0 if kind == "ricci-flat" else float(exp["lambda"])
            details["lambda_expected"] = expected
            passed = rep.passed and abs(rep.lambda_hat - expected) < tol * max(1.0, abs(expected))
    elif kind == "flat":
        cb = curvature_batch(spec, grid, parallel=parallel)
        residual = float(np.max(np.abs(cb.riemann)))
        lam = float(np.mean(cb.scalar) / cb.dim)
        passed = residual < tol
    elif kind == "constant-curvature":
        kappa, residual = constant_curvature_residual(spec, grid)
        expected = float(exp["K"])
        lam = kappa * (spec.dim - 1)
        details = {"K_hat": kappa, "K_expected": expected}
        passed = residual < tol and abs(kappa - expected) < tol * max(1.0, abs(expected))
    elif kind == "ricci":
        cb = curvature_batch(spec, grid, parallel=parallel)
        target = np.zeros((spec.dim, spec.dim))
        for key, value in exp["entries"].items():
            i, j = (int(x) for x in key.split(","))
            target[i, j] = target[j, i] = float(value)
        residual = float(np.max(np.abs(cb.ricci - target)))
        passed = residual < tol
    elif kind == "quasi-einstein":
        base = parse_metric(exp["base"]).with_domain(entry.domain).with_domain(domain)
        q = quasi_einstein_check(int(exp["n"]), exp["phi"], base, grid, tol=tol)
        residual = max(q.max_residual, q.precondition_residual)
        details = q.to_dict()
        passed = q.passed
    else:
        raise ValueError(f"unknown expectation kind {kind!r}")
    return CatalogReport(
        name=entry.name,
        kind=kind,
        passed=bool(passed),
        lambda_hat=lam,
        residual=float(residual),
        n_points=int(grid.shape[0]),
        tol=tol,
        details=details,
        wall_time=time.perf_counter() - start,
    )
