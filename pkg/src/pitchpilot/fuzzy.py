"""Mamdani fuzzy inference for PID gain increments.

Two inputs (error ``e`` and change of error ``ec``), three outputs
(``dkp``, ``dki``, ``dkd``), seven terms per variable, min/max inference
and discrete centroid defuzzification.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
import yaml

TERMS = ("NB", "NM", "NS", "ZO", "PS", "PM", "PB")
OUTPUT_NAMES = ("dkp", "dki", "dkd")
DEFAULT_RESOLUTION = 501


class FuzzyConfigError(ValueError):
    pass


class DegenerateInferenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class Gaussian:
    center: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise FuzzyConfigError(f"gaussian sigma must be positive, got {self.sigma}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-((x - self.center) ** 2) / (2.0 * self.sigma**2))

    def scaled(self, factor: float) -> "Gaussian":
        return Gaussian(self.center * factor, self.sigma * factor)

    def to_dict(self) -> dict:
        return {"kind": "gaussian", "center": float(self.center), "sigma": float(self.sigma)}


@dataclass(frozen=True)
class Triangular:
    """Triangle on [left, right] peaking at ``peak``.

    ``left == peak`` (or ``peak == right``) gives a vertical shoulder, used for
    the edge terms of a universe.
    """

    left: float
    peak: float
    right: float

    def __post_init__(self):
        if not self.left <= self.peak <= self.right:
            raise FuzzyConfigError(
                f"triangular needs left <= peak <= right, got {self.left}, {self.peak}, {self.right}"
            )

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            rising = (x - self.left) / (self.peak - self.left) if self.peak > self.left else np.ones_like(x)
            falling = (self.right - x) / (self.right - self.peak) if self.right > self.peak else np.ones_like(x)
        mu = np.clip(np.minimum(rising, falling), 0.0, 1.0)
        mu = np.where((x < self.left) | (x > self.right), 0.0, mu)
        return np.where(x == self.peak, 1.0, mu)

    def scaled(self, factor: float) -> "Triangular":
        return Triangular(self.left * factor, self.peak * factor, self.right * factor)

    def to_dict(self) -> dict:
        return {
            "kind": "triangular",
            "left": float(self.left),
            "peak": float(self.peak),
            "right": float(self.right),
        }


MembershipFunction = Union[Gaussian, Triangular]


def membership_from_dict(d: dict) -> MembershipFunction:
    kind = d.get("kind")
    if kind == "gaussian":
        return Gaussian(float(d["center"]), float(d["sigma"]))
    if kind == "triangular":
        return Triangular(float(d["left"]), float(d["peak"]), float(d["right"]))
    raise FuzzyConfigError(f"unknown membership function kind {kind!r}")


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    lo: float
    hi: float
    terms: tuple[MembershipFunction, ...]  # ordered NB..PB

    def __post_init__(self):
        if not self.hi > self.lo:
            raise FuzzyConfigError(f"{self.name}: empty universe [{self.lo}, {self.hi}]")
        if len(self.terms) != len(TERMS):
            raise FuzzyConfigError(f"{self.name}: expected {len(TERMS)} terms, got {len(self.terms)}")

    @property
    def half_width(self) -> float:
        return (self.hi - self.lo) / 2.0

    def fuzzify(self, x: float) -> np.ndarray:
        return fuzzify(self, x)

    @cached_property
    def _gaussian_params(self):
        if not all(isinstance(mf, Gaussian) for mf in self.terms):
            return None
        centers = np.array([mf.center for mf in self.terms])
        return centers, 2.0 * np.array([mf.sigma for mf in self.terms]) ** 2

    def scaled(self, factor: float) -> "LinguisticVariable":
        return LinguisticVariable(
            self.name, self.lo * factor, self.hi * factor, tuple(mf.scaled(factor) for mf in self.terms)
        )


def fuzzify(var: LinguisticVariable, x: float) -> np.ndarray:
    """Membership degree of ``x`` (clamped to the universe) in each of the 7 terms."""
    xc = min(max(float(x), var.lo), var.hi)
    gauss = var._gaussian_params
    if gauss is not None:
        centers, two_var = gauss
        return np.exp(-((xc - centers) ** 2) / two_var)
    return np.array([float(mf(xc)) for mf in var.terms])


def _parse_cell(cell: str) -> tuple[str, str, str]:
    # Empty fragments repair the doubled separators printed in a few cells.
    labels = tuple(p for p in cell.strip().split("/") if p)
    if len(labels) != 3 or any(lab not in TERMS for lab in labels):
        raise FuzzyConfigError(f"bad rule cell {cell!r}")
    return labels  # type: ignore[return-value]


# Rows: e term; columns: ec term (both NB..PB). Cells: dkp/dki/dkd.
# Kept verbatim, including the doubled separators the parser collapses.
RULE_TABLE_TEXT = """
PB/NB/PS  PB/NB/NM  PM/NB/NB  PM/NM/NB  PS/NS/NB  PS/ZO/NM  ZO/ZO//PS
PB/NB/PS  PB/NB/NS  PM/NM/NB  PS/NS/NM  PS/NS/NM  ZO/ZO/NS  NS/ZO/PS
PM/NB/ZO  PM/NM/NS  PM/NS/NM  PS/NS/NM  ZO/ZO/NS  NS/PS/NS  NM/PS/ZO
PM/NM/ZO  PM/NS/NS  PS/NS/NS  ZO/ZO/NS  NS/PS/NS  NM/PM/NS  NM/PM/ZO
PS/NS/ZO  PS/NS/NS  ZO/ZO/ZO  NS/PS/ZO  NS/PS/ZO  NM/PM/ZO  NM/PB/PS
ZO/ZO/PB  ZO/ZO/NS  NS/PS/PS  NM/PS/PS  NM/PM/PS  NM/PB/PS  NB/PB/PB
ZO/ZO//PB NS/ZO//PM NM/PS/PM  NM/PM/PM  NM/PB/PS  NB/PB/PS  NB/PB/PB
"""


@dataclass(frozen=True)
class RuleTable:
    """7x7 grid of consequent term indices, shape (7, 7, 3)."""

    cells: tuple[tuple[tuple[int, int, int], ...], ...]

    def __post_init__(self):
        arr = np.asarray(self.cells)
        if arr.shape != (7, 7, 3) or arr.min() < 0 or arr.max() > 6:
            raise FuzzyConfigError("rule table must be 7x7 cells of three term indices in 0..6")

    @classmethod
    def from_text(cls, text: str) -> "RuleTable":
        rows = [line.split() for line in text.strip().splitlines()]
        if len(rows) != 7 or any(len(r) != 7 for r in rows):
            raise FuzzyConfigError("rule table text must have 7 rows of 7 cells")
        return cls(tuple(tuple(tuple(TERMS.index(l) for l in _parse_cell(c)) for c in row) for row in rows))

    @classmethod
    def from_records(cls, records: Iterable[Sequence[str]]) -> "RuleTable":
        grid: dict[tuple[int, int], tuple[int, int, int]] = {}
        for rec in records:
            if len(rec) != 5 or any(lab not in TERMS for lab in rec):
                raise FuzzyConfigError(f"bad rule record {rec!r}")
            key = (TERMS.index(rec[0]), TERMS.index(rec[1]))
            if key in grid:
                raise FuzzyConfigError(f"duplicate rule for e={rec[0]}, ec={rec[1]}")
            grid[key] = tuple(TERMS.index(l) for l in rec[2:])  # type: ignore[assignment]
        if len(grid) != 49:
            raise FuzzyConfigError(f"rule table needs all 49 cells, got {len(grid)}")
        return cls(tuple(tuple(grid[i, j] for j in range(7)) for i in range(7)))

    def records(self) -> list[tuple[str, str, str, str, str]]:
        return [
            (TERMS[i], TERMS[j], *(TERMS[k] for k in self.cells[i][j]))
            for i in range(7)
            for j in range(7)
        ]

    def __getitem__(self, key: tuple[str, str]) -> tuple[str, str, str]:
        i, j = (TERMS.index(k) for k in key)
        return tuple(TERMS[k] for k in self.cells[i][j])  # type: ignore[return-value]

    @cached_property
    def masks(self) -> np.ndarray:
        """Boolean (3, 7, 7, 7): [channel, e term, ec term, output term]."""
        arr = np.asarray(self.cells)
        return np.stack([arr[:, :, c, None] == np.arange(7) for c in range(3)])


def even_centers(lo: float, hi: float) -> np.ndarray:
    return np.linspace(lo, hi, len(TERMS))


def gaussian_variable(name: str, lo: float, hi: float) -> LinguisticVariable:
    """Evenly spaced gaussians; neighbours cross at membership 0.5."""
    centers = even_centers(lo, hi)
    sigma = (centers[1] - centers[0]) / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    return LinguisticVariable(name, lo, hi, tuple(Gaussian(float(c), sigma) for c in centers))


def triangular_variable(name: str, lo: float, hi: float) -> LinguisticVariable:
    """Evenly spaced triangles with feet on the neighbouring centres."""
    c = [float(v) for v in even_centers(lo, hi)]
    terms = []
    for k in range(len(c)):
        left = c[k - 1] if k > 0 else c[k]
        right = c[k + 1] if k < len(c) - 1 else c[k]
        terms.append(Triangular(left, c[k], right))
    return LinguisticVariable(name, lo, hi, tuple(terms))


@dataclass(frozen=True)
class FuzzyInferenceSystem:
    input_e: LinguisticVariable
    input_ec: LinguisticVariable
    outputs: tuple[LinguisticVariable, LinguisticVariable, LinguisticVariable]
    rules: RuleTable
    defuzz_resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        if len(self.outputs) != 3:
            raise FuzzyConfigError("need exactly three output variables (dkp, dki, dkd)")
        if self.defuzz_resolution < 2:
            raise FuzzyConfigError("defuzz_resolution must be at least 2")

    @cached_property
    def _grids(self) -> np.ndarray:
        return np.stack(
            [np.linspace(v.lo, v.hi, self.defuzz_resolution) for v in self.outputs]
        )

    @cached_property
    def _weights(self) -> np.ndarray:
        # trapezoid weights; a plain sum over-weights the end samples, where
        # the edge shoulders peak
        w = np.ones(self.defuzz_resolution)
        w[[0, -1]] = 0.5
        return w

    @cached_property
    def _output_mf(self) -> np.ndarray:
        # (3, 7, R): each output term sampled on its channel's grid
        return np.stack(
            [np.stack([mf(g) for mf in v.terms]) for v, g in zip(self.outputs, self._grids)]
        )

    def firing_strengths(self, e: float, ec: float) -> np.ndarray:
        """(7, 7) rule strengths, min of the two antecedent degrees."""
        return np.minimum.outer(fuzzify(self.input_e, e), fuzzify(self.input_ec, ec))

    def aggregate(self, e: float, ec: float) -> tuple[np.ndarray, np.ndarray]:
        """Output grids and aggregated membership, each (3, R)."""
        w = self.firing_strengths(e, ec)
        # strongest rule per (channel, output term)
        strength = np.where(self.rules.masks, w[None, :, :, None], 0.0).max(axis=(1, 2))
        agg = np.minimum(strength[:, :, None], self._output_mf).max(axis=1)
        return self._grids, agg

    def infer(self, e: float, ec: float) -> tuple[float, float, float]:
        return infer(self, e, ec)

    def half_width(self) -> float:
        return max(v.half_width for v in self.outputs)


def infer(fis: FuzzyInferenceSystem, e: float, ec: float) -> tuple[float, float, float]:
    """Gain increments (dkp, dki, dkd) for error ``e`` and change of error ``ec``."""
    grids, agg = fis.aggregate(e, ec)
    weighted = agg * fis._weights
    mass = weighted.sum(axis=1)
    out = []
    for c in range(3):
        if mass[c] > 0.0:
            out.append(float((grids[c] * weighted[c]).sum() / mass[c]))
        else:
            warnings.warn(
                f"zero aggregated membership for {OUTPUT_NAMES[c]} at e={e}, ec={ec}",
                DegenerateInferenceWarning,
                stacklevel=2,
            )
            out.append(0.0)
    return out[0], out[1], out[2]


def default_system(half_width: float = 5.0, resolution: int = DEFAULT_RESOLUTION) -> FuzzyInferenceSystem:
    """Gaussian inputs, triangular outputs, all on [-half_width, half_width]."""
    lo, hi = -half_width, half_width
    return FuzzyInferenceSystem(
        input_e=gaussian_variable("e", lo, hi),
        input_ec=gaussian_variable("ec", lo, hi),
        outputs=tuple(triangular_variable(n, lo, hi) for n in OUTPUT_NAMES),  # type: ignore[arg-type]
        rules=RuleTable.from_text(RULE_TABLE_TEXT),
        defuzz_resolution=resolution,
    )


def rescale_universe(fis: FuzzyInferenceSystem, new_range: tuple[float, float]) -> FuzzyInferenceSystem:
    """Scale every universe and MF parameter to a symmetric ``new_range``.

    The scale factor is taken from the ``e`` input universe; rules are kept.
    """
    lo, hi = (float(v) for v in new_range)
    half = hi
    if not half > 0:
        raise FuzzyConfigError(f"range half-width must be positive, got {new_range}")
    if lo != -hi:
        raise FuzzyConfigError(f"range must be symmetric about 0, got {new_range}")
    factor = half / fis.input_e.half_width
    if factor == 1.0:
        return fis
    return replace(
        fis,
        input_e=fis.input_e.scaled(factor),
        input_ec=fis.input_ec.scaled(factor),
        outputs=tuple(v.scaled(factor) for v in fis.outputs),  # type: ignore[arg-type]
    )


def _variable_to_dict(v: LinguisticVariable) -> dict:
    return {
        "name": v.name,
        "universe": [float(v.lo), float(v.hi)],
        "terms": {label: mf.to_dict() for label, mf in zip(TERMS, v.terms)},
    }


def _variable_from_dict(d: dict) -> LinguisticVariable:
    try:
        lo, hi = (float(x) for x in d["universe"])
        terms = d["terms"]
        missing = [t for t in TERMS if t not in terms]
        if missing:
            raise FuzzyConfigError(f"{d.get('name')}: missing terms {missing}")
        return LinguisticVariable(str(d["name"]), lo, hi, tuple(membership_from_dict(terms[t]) for t in TERMS))
    except KeyError as exc:
        raise FuzzyConfigError(f"missing key {exc} in variable definition") from None


def system_to_dict(fis: FuzzyInferenceSystem) -> dict:
    return {
        "defuzz_resolution": fis.defuzz_resolution,
        "inputs": [_variable_to_dict(fis.input_e), _variable_to_dict(fis.input_ec)],
        "outputs": [_variable_to_dict(v) for v in fis.outputs],
        "rules": [list(r) for r in fis.rules.records()],
    }


def system_from_dict(d: dict) -> FuzzyInferenceSystem:
    try:
        inputs = [_variable_from_dict(v) for v in d["inputs"]]
        outputs = [_variable_from_dict(v) for v in d["outputs"]]
        rules = RuleTable.from_records(d["rules"])
    except KeyError as exc:
        raise FuzzyConfigError(f"missing key {exc} in fuzzy system definition") from None
    if len(inputs) != 2:
        raise FuzzyConfigError("need exactly two input variables (e, ec)")
    return FuzzyInferenceSystem(
        inputs[0], inputs[1], tuple(outputs), rules,  # type: ignore[arg-type]
        int(d.get("defuzz_resolution", DEFAULT_RESOLUTION)),
    )


def dump_system(fis: FuzzyInferenceSystem, path) -> None:
    Path(path).write_text(yaml.safe_dump(system_to_dict(fis), sort_keys=False, default_flow_style=None), encoding="utf-8")


def load_system(path) -> FuzzyInferenceSystem:
    return system_from_dict(yaml.safe_load(Path(path).read_text(encoding="utf-8")))


DEFAULT_SYSTEM_FILE = Path(__file__).parent / "data" / "default_fis.yaml"


def load_default_system() -> FuzzyInferenceSystem:
    """The shipped definition file (equivalent to ``default_system()``)."""
    return load_system(DEFAULT_SYSTEM_FILE)
