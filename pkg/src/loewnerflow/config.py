"""Slit-family instances and the interval structure of the real line.

A family is a list of driving points ``k_n`` with positive weights ``b_n``.
Finite families are given entry by entry; parametric families are
generated by a named rule and studied through a truncation of size ``N``
together with a bound on the dropped weight.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

DEFAULT_N = 64


class FamilyError(ValueError):
    """Raised for malformed or inadmissible slit-family documents."""


def _geometric_lattice(n: int, p: dict) -> tuple[float, float]:
    return n * p["spacing"], p["b0"] * p["ratio"] ** abs(n)


def _power_lattice(n: int, p: dict) -> tuple[float, float]:
    return n * p["spacing"], p["b0"] * abs(n) ** (-p["power"])


def _perturbed_lattice(n: int, p: dict) -> tuple[float, float]:
    k = n * p["spacing"] + p["jitter"] * math.sin(n)
    b = p["b0"] * p["ratio"] ** abs(n) * (1.0 + p["wobble"] * math.cos(n))
    return k, b


def _geometric_tail(N: int, p: dict) -> float:
    # two-sided: sum over |n| > N of b0 * r^|n|
    r = p["ratio"]
    return 2.0 * p["b0"] * r ** (N + 1) / (1.0 - r)


def _power_tail(N: int, p: dict) -> float:
    # integral comparison: sum_{n>N} n^-s <= N^(1-s)/(s-1), N >= 1
    s = p["power"]
    if N < 1:
        return 2.0 * p["b0"] * (1.0 + 1.0 / (s - 1.0))
    return 2.0 * p["b0"] * N ** (1.0 - s) / (s - 1.0)


def _check_geometric(p: dict) -> None:
    if not (p["spacing"] > 0 and p["b0"] > 0 and 0 < p["ratio"] < 1):
        raise FamilyError("geometric_lattice needs spacing>0, b0>0, 0<ratio<1")


def _check_power(p: dict) -> None:
    if not (p["spacing"] > 0 and p["b0"] > 0 and p["power"] > 1):
        raise FamilyError("power_lattice needs spacing>0, b0>0, power>1")


def _check_perturbed(p: dict) -> None:
    _check_geometric(p)
    if not abs(p["jitter"]) < p["spacing"] / 4:
        raise FamilyError("perturbed_lattice needs |jitter| < spacing/4")
    if not abs(p["wobble"]) < 1:
        raise FamilyError("perturbed_lattice needs |wobble| < 1")


# name -> (generator, closed-form tail or None, parameter check, gap lower bound)
RULES: dict[str, tuple] = {
    "geometric_lattice": (_geometric_lattice, _geometric_tail, _check_geometric,
                          lambda p: p["spacing"]),
    "power_lattice": (_power_lattice, _power_tail, _check_power,
                      lambda p: p["spacing"]),
    "perturbed_lattice": (_perturbed_lattice, None, _check_perturbed,
                          lambda p: p["spacing"] - 2 * abs(p["jitter"])),
}

_RULE_PARAMS = {
    "geometric_lattice": ("spacing", "b0", "ratio"),
    "power_lattice": ("spacing", "b0", "power"),
    "perturbed_lattice": ("spacing", "b0", "ratio", "jitter", "wobble"),
}


@dataclass(frozen=True)
class TailCertificate:
    """User-certified bound ``sum_{|n|>N} b_n <= C * q**N``."""

    C: float
    q: float

    def __call__(self, N: int) -> float:
        return self.C * self.q ** N


@dataclass(frozen=True)
class SlitFamily:
    """A finite or parametric family of slits.

    For ``kind == "finite"`` the ``entries`` hold every ``(k, b)`` pair sorted
    by ``k``. For ``kind == "parametric"`` the entries are generated on demand
    by ``rule`` for the indices ``0 < |n| <= N``.
    """

    kind: str
    entries: tuple[tuple[float, float], ...] = ()
    rule: str | None = None
    params: tuple[tuple[str, float], ...] = ()
    N: int = DEFAULT_N
    certificate: TailCertificate | None = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    # ----- construction ---------------------------------------------------
    @classmethod
    def finite(cls, pairs) -> "SlitFamily":
        pairs = sorted((float(k), float(b)) for k, b in pairs)
        fam = cls(kind="finite", entries=tuple(pairs))
        fam._validate()
        return fam

    @classmethod
    def parametric(cls, rule: str, params: dict, N: int = DEFAULT_N,
                   certificate: TailCertificate | None = None) -> "SlitFamily":
        if rule not in RULES:
            raise FamilyError(f"unknown rule {rule!r}")
        missing = [p for p in _RULE_PARAMS[rule] if p not in params]
        if missing:
            raise FamilyError(f"rule {rule} missing params {missing}")
        fam = cls(kind="parametric", rule=rule,
                  params=tuple(sorted((str(a), float(v)) for a, v in params.items())),
                  N=int(N), certificate=certificate)
        fam._validate()
        return fam

    def _validate(self) -> None:
        if self.kind == "finite":
            if not self.entries:
                raise FamilyError("finite family needs at least one entry")
            ks = [k for k, _ in self.entries]
            bs = [b for _, b in self.entries]
            if not all(math.isfinite(v) for v in ks + bs):
                raise FamilyError("non-finite k or b")
            if any(b <= 0 for b in bs):
                raise FamilyError("all weights b must be positive")
            gaps = np.diff(ks)
            if np.any(gaps == 0):
                raise FamilyError("duplicate driving point k")
            if np.any(gaps <= 0):
                raise FamilyError("zero gap between driving points")
        elif self.kind == "parametric":
            gen, tail, check, _ = RULES[self.rule]
            check(self.param_dict)
            if self.N < 1:
                raise FamilyError("truncation N must be >= 1")
            if tail is None and self.certificate is None:
                raise FamilyError(f"rule {self.rule} requires a user-certified tail_bound")
            if self.certificate is not None:
                c = self.certificate
                if not (c.C > 0 and 0 < c.q < 1):
                    raise FamilyError("tail_bound needs C>0 and 0<q<1")
                # the certificate must at least dominate the next 64 materialized terms
                extra = sum(gen(s * n, self.param_dict)[1]
                            for n in range(self.N + 1, self.N + 65) for s in (1, -1))
                if extra > c(self.N) * (1 + 1e-12):
                    raise FamilyError("tail_bound certificate is violated by materialized terms")
            k, _ = self.arrays()
            if np.any(np.diff(k) <= 0):
                raise FamilyError("zero gap between driving points")
        else:
            raise FamilyError(f"unknown kind {self.kind!r}")

    # ----- access ---------------------------------------------------------
    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def generation_order(self, N: int | None = None) -> list[tuple[float, float]]:
        """Entries in generation order (n = 1, -1, 2, -2, ... for rules)."""
        if self.kind == "finite":
            return list(self.entries)
        N = self.N if N is None else N
        gen = RULES[self.rule][0]
        p = self.param_dict
        out = []
        for n in range(1, N + 1):
            out.append(gen(n, p))
            out.append(gen(-n, p))
        return out

    def arrays(self, N: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Sorted ``(k, b)`` arrays of the materialized family."""
        N = self.N if N is None else int(N)
        key = ("arrays", N)
        if key not in self._cache:
            pairs = sorted(self.generation_order(N)) if self.kind == "parametric" \
                else list(self.entries)
            k = np.array([p[0] for p in pairs], dtype=np.float64)
            b = np.array([p[1] for p in pairs], dtype=np.float64)
            k.setflags(write=False)
            b.setflags(write=False)
            self._cache[key] = (k, b)
        return self._cache[key]

    def size(self, N: int | None = None) -> int:
        return len(self.arrays(N)[0])

    def tail_weight(self, N: int | None = None) -> float:
        """Upper bound on the total weight dropped by truncating at ``N``."""
        if self.kind == "finite":
            return 0.0
        N = self.N if N is None else int(N)
        tail = RULES[self.rule][1]
        if tail is not None:
            return float(tail(N, self.param_dict))
        return float(self.certificate(N))

    def total_weight(self, N: int | None = None) -> float:
        return float(np.sum(self.arrays(N)[1])) + self.tail_weight(N)

    def gap(self, N: int | None = None) -> float:
        """Minimum distance between consecutive driving points (inf for one slit)."""
        k, _ = self.arrays(N)
        if len(k) < 2:
            return math.inf
        d = float(np.min(np.diff(k)))
        if self.kind == "parametric":
            d = min(d, RULES[self.rule][3](self.param_dict))
        return d

    def tail_distance(self, z: complex, N: int | None = None) -> float:
        """Lower bound on the distance from ``z`` to the driving points not materialized."""
        if self.kind == "finite":
            return math.inf
        N = self.N if N is None else int(N)
        p = self.param_dict
        s = p["spacing"]
        slack = abs(p.get("jitter", 0.0))
        R = (N + 1) * s - slack  # first dropped point sits at |k| >= R
        x, y = abs(z.real), abs(z.imag)
        if x <= R:
            return math.hypot(R - x, y)
        # among the dropped lattice points, the nearest to x
        m = max(N + 1, round(x / s))
        best = math.inf
        for j in (m - 1, m, m + 1):
            if j >= N + 1:
                best = min(best, math.hypot(max(abs(x - j * s) - slack, 0.0), y))
        return best

    def outer_radius(self, N: int | None = None) -> float:
        """Smallest |k| among the dropped points (inf for finite families)."""
        if self.kind == "finite":
            return math.inf
        N = self.N if N is None else int(N)
        p = self.param_dict
        return (N + 1) * p["spacing"] - abs(p.get("jitter", 0.0))

    def scaled(self, c: float) -> "SlitFamily":
        """The family (c k_n, c^2 b_n); finite families only."""
        if self.kind != "finite":
            raise FamilyError("scaling is defined for finite families")
        return SlitFamily.finite([(c * k, c * c * b) for k, b in self.entries])

    def truncated(self, N: int | None = None) -> "SlitFamily":
        """The materialized family as a finite family."""
        k, b = self.arrays(N)
        return SlitFamily.finite(zip(k.tolist(), b.tolist()))

    # ----- serialization --------------------------------------------------
    def to_document(self) -> dict[str, Any]:
        if self.kind == "finite":
            slits = {"kind": "finite",
                     "entries": [{"k": k, "b": b} for k, b in self.entries]}
        else:
            slits = {"kind": "parametric", "rule": self.rule,
                     "params": self.param_dict, "N": self.N}
            if self.certificate is not None:
                slits["tail_bound"] = {"C": self.certificate.C, "q": self.certificate.q}
        return {"slits": slits}


def load_family(document: str | dict) -> SlitFamily:
    """Parse and validate a slit-family document (JSON text or dict)."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise FamilyError(f"parse error: {exc}") from exc
    if not isinstance(document, dict):
        raise FamilyError("document must be a JSON object")
    slits = document.get("slits", document)
    if not isinstance(slits, dict) or "kind" not in slits:
        raise FamilyError("missing 'slits.kind'")
    kind = slits["kind"]
    try:
        if kind == "finite":
            entries = slits["entries"]
            pairs = [(float(e["k"]), float(e["b"])) for e in entries]
            return SlitFamily.finite(pairs)
        if kind == "parametric":
            cert = None
            if slits.get("tail_bound") is not None:
                tb = slits["tail_bound"]
                cert = TailCertificate(float(tb["C"]), float(tb["q"]))
            params = {a: float(v) for a, v in slits.get("params", {}).items()}
            return SlitFamily.parametric(slits["rule"], params,
                                         int(slits.get("N", DEFAULT_N)), cert)
    except (KeyError, TypeError) as exc:
        raise FamilyError(f"schema error: missing or malformed field {exc}") from exc
    raise FamilyError(f"unknown kind {kind!r}")


def dump_family(family: SlitFamily) -> str:
    return json.dumps(family.to_document(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class Interval:
    left: float
    right: float
    left_index: int | None
    right_index: int | None
    truncation_artifact: bool = False

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.left) and math.isfinite(self.right)

    @property
    def length(self) -> float:
        return self.right - self.left

    def contains(self, x: float) -> bool:
        return self.left < x < self.right


@dataclass(frozen=True)
class IntervalStructure:
    bounded: tuple[Interval, ...]
    left_unbounded: Interval | None
    right_unbounded: Interval | None

    def all(self) -> list[Interval]:
        out = []
        if self.left_unbounded is not None:
            out.append(self.left_unbounded)
        out.extend(self.bounded)
        if self.right_unbounded is not None:
            out.append(self.right_unbounded)
        return out


def build_intervals(family: SlitFamily, N: int | None = None) -> IntervalStructure:
    """Split the real line at the materialized driving points.

    Indices refer to positions in the sorted ``family.arrays(N)``. For a
    truncated parametric family the two outer intervals are not intervals of
    the infinite family and carry ``truncation_artifact=True``.
    """
    k, _ = family.arrays(N)
    artifact = family.kind == "parametric"
    bounded = tuple(Interval(float(k[i]), float(k[i + 1]), i, i + 1)
                    for i in range(len(k) - 1))
    left = Interval(-math.inf, float(k[0]), None, 0, artifact)
    right = Interval(float(k[-1]), math.inf, len(k) - 1, None, artifact)
    return IntervalStructure(bounded, left, right)


# Canonical instances, one per root configuration, plus the lattice.
CANONICAL = {
    "complex_single": [(0.0, 1.0)],
    "complex_pair": [(-1.0, 1.0), (1.0, 1.0)],
    "distinct_real": [(-3.0, 1.0), (3.0, 1.0)],
    "double_root": [(4.0, 1.0)],
    "triple_root": [(-2.0 * math.sqrt(2.0), 1.0), (2.0 * math.sqrt(2.0), 1.0)],
}


def canonical_family(name: str) -> SlitFamily:
    if name == "lattice":
        return SlitFamily.parametric("geometric_lattice",
                                     {"spacing": 1.0, "b0": 0.1, "ratio": 0.5}, N=DEFAULT_N)
    return SlitFamily.finite(CANONICAL[name])
