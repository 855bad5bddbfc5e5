"""Finite source families, ambiguity partitions and modified distortion tables.

Component indices are 1-based throughout the public API (``A = (1, 3)``),
matching the model file format.  Joint symbols are stored flat in row-major
order with component 1 as the most significant index.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyRecoverySet,
    InconsistentAlphabet,
    MalformedModel,
    NegativeDistortion,
    UnknownTau,
    ZeroMassSymbol,
)

TOL_PMF = 1e-9
RENORM_TOL = 1e-6

Subset = tuple[int, ...]


def as_subset(A: Iterable[int], m: int) -> Subset:
    """Normalize a component set to a sorted tuple of 1-based indices."""
    sub = tuple(sorted({int(a) for a in A}))
    if not sub:
        raise ValueError("component set must be nonempty")
    if sub[0] < 1 or sub[-1] > m:
        raise ValueError(f"component set {sub} not within 1..{m}")
    return sub


def subsets_of_size(m: int, k: int) -> list[Subset]:
    """All k-subsets of {1..m} in lexicographic order."""
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= m, got k={k}, m={m}")
    return list(itertools.combinations(range(1, m + 1), k))


@dataclass(frozen=True, eq=False)
class SourceModel:
    """A finite family of joint pmfs with a prior, recovery set and distortion.

    ``family`` has shape ``(|Theta|, prod(alphabets))`` and ``distortion`` has
    shape ``(|X_B|, |Y_B|)``.  Construction validates and renormalizes; use
    :func:`validate_model` to build from JSON-shaped data.
    """

    alphabets: tuple[int, ...]
    family: np.ndarray
    prior: np.ndarray
    recovery_set: Subset
    repro_alphabets: tuple[int, ...]
    distortion: np.ndarray
    theta: tuple = ()
    full_support: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        alph = tuple(int(a) for a in self.alphabets)
        if not alph:
            raise MalformedModel("alphabets must be nonempty", "alphabets")
        if any(a < 2 for a in alph):
            raise InconsistentAlphabet(f"every source alphabet needs >= 2 symbols, got {alph}", "alphabets")
        m = len(alph)
        if len(self.recovery_set) == 0:
            raise EmptyRecoverySet("recovery set is empty", "recovery_set")
        try:
            B = as_subset(self.recovery_set, m)
        except ValueError as exc:
            raise InconsistentAlphabet(str(exc), "recovery_set") from None
        repro = tuple(int(a) for a in self.repro_alphabets)
        if len(repro) != len(B) or any(a < 1 for a in repro):
            raise InconsistentAlphabet(
                f"reproduction_alphabets must list |Y_i| >= 1 for each of the {len(B)} recovery components",
                "reproduction_alphabets",
            )
        n_joint = int(np.prod(alph))
        fam = np.array(self.family, dtype=float)
        if fam.ndim == 1:
            fam = fam[None, :]
        fam = fam.reshape(fam.shape[0], -1)
        if fam.shape[1] != n_joint:
            raise InconsistentAlphabet(
                f"family rows have {fam.shape[1]} entries, expected {n_joint}", "family"
            )
        T = fam.shape[0]
        theta = tuple(self.theta) if self.theta else tuple(range(1, T + 1))
        if len(theta) != T or len(set(theta)) != T:
            raise MalformedModel("theta labels must be distinct, one per family member", "theta_labels")
        fam = np.stack([_check_pmf(row, f"family[{lab}]", self.full_support) for row, lab in zip(fam, theta)])
        prior = _check_pmf(np.asarray(self.prior, dtype=float).ravel(), "prior", True)
        if prior.size != T:
            raise InconsistentAlphabet(f"prior has {prior.size} entries, expected {T}", "prior")
        nxb = int(np.prod([alph[i - 1] for i in B]))
        nyb = int(np.prod(repro))
        d = np.array(self.distortion, dtype=float)
        if d.size != nxb * nyb:
            raise InconsistentAlphabet(
                f"distortion table has {d.size} entries, expected {nxb}x{nyb}", "distortion"
            )
        d = d.reshape(nxb, nyb)
        if not np.all(np.isfinite(d)):
            raise MalformedModel("distortion entries must be finite", "distortion")
        if np.any(d < 0):
            raise NegativeDistortion("distortion entries must be nonnegative", "distortion")
        fam.setflags(write=False)
        prior.setflags(write=False)
        d.setflags(write=False)
        for name, val in [
            ("alphabets", alph), ("family", fam), ("prior", prior), ("recovery_set", B),
            ("repro_alphabets", repro), ("distortion", d), ("theta", theta),
        ]:
            object.__setattr__(self, name, val)

    # -- basic shape info -------------------------------------------------
    @property
    def m(self) -> int:
        return len(self.alphabets)

    @property
    def n_theta(self) -> int:
        return self.family.shape[0]

    @property
    def n_joint(self) -> int:
        return self.family.shape[1]

    @property
    def n_repro(self) -> int:
        return self.distortion.shape[1]

    @property
    def d_max(self) -> float:
        return float(self.distortion.max())

    def tau_index(self, tau) -> int:
        """Position of a parameter label in ``theta``."""
        try:
            return self.theta.index(tau)
        except ValueError:
            raise UnknownTau(f"unknown parameter label {tau!r}") from None

    # -- index maps -------------------------------------------------------
    def coords(self) -> np.ndarray:
        """(n_joint, m) array of component values for each flat joint symbol."""
        if "coords" not in self._cache:
            c = np.stack(np.unravel_index(np.arange(self.n_joint), self.alphabets), axis=1)
            self._cache["coords"] = c
        return self._cache["coords"]

    def subset_size(self, A: Sequence[int]) -> int:
        return int(np.prod([self.alphabets[i - 1] for i in A]))

    def index_of(self, A: Sequence[int]) -> np.ndarray:
        """Map each joint symbol to the flat index of its restriction x_A."""
        A = as_subset(A, self.m)
        key = ("idx", A)
        if key not in self._cache:
            cols = [i - 1 for i in A]
            self._cache[key] = np.ravel_multi_index(
                tuple(self.coords()[:, cols].T), tuple(self.alphabets[c] for c in cols)
            )
        return self._cache[key]

    def joint_distortion(self) -> np.ndarray:
        """d(x_B(x_M), y_B) as an (n_joint, |Y_B|) table."""
        if "dM" not in self._cache:
            self._cache["dM"] = self.distortion[self.index_of(self.recovery_set)]
        return self._cache["dM"]

    # -- pmfs -------------------------------------------------------------
    def cell_weights(self, cell: Iterable[int]) -> np.ndarray:
        """Prior restricted to ``cell`` (tau indices) and renormalized."""
        cell = list(cell)
        w = np.zeros(self.n_theta)
        w[cell] = self.prior[cell]
        return w / w.sum()

    def joint(self, cell: Iterable[int] | None = None) -> np.ndarray:
        """Joint pmf of X_M mixed over ``cell`` by the renormalized prior."""
        if cell is None:
            return self.prior @ self.family
        return self.cell_weights(cell) @ self.family

    def marginal(self, A: Sequence[int], cell: Iterable[int] | None = None, pmf=None) -> np.ndarray:
        """Exact marginal of X_A under ``pmf`` (or the cell mixture)."""
        if pmf is None:
            pmf = self.joint(cell)
        idx = self.index_of(A)
        return np.bincount(idx, weights=pmf, minlength=self.subset_size(A))

    def to_dict(self) -> dict:
        """JSON-ready representation (see :func:`validate_model` for the schema)."""
        return {
            "m": self.m,
            "alphabets": list(self.alphabets),
            "recovery_set": list(self.recovery_set),
            "reproduction_alphabets": list(self.repro_alphabets),
            "theta_labels": [_jsonable(t) for t in self.theta],
            "prior": self.prior.tolist(),
            "family": {str(t): row.tolist() for t, row in zip(self.theta, self.family)},
            "distortion": self.distortion.ravel().tolist(),
            "full_support": self.full_support,
        }


def _jsonable(x):
    return x.item() if isinstance(x, np.generic) else x


def _check_pmf(p: np.ndarray, name: str, full_support: bool) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise MalformedModel(f"{name} has non-finite entries", name)
    if np.any(p < 0):
        raise MalformedModel(f"{name} has negative entries", name)
    if full_support and np.any(p <= 0):
        raise ZeroMassSymbol(f"{name} assigns zero mass to a symbol", name)
    s = p.sum()
    if abs(s - 1.0) > RENORM_TOL:
        raise MalformedModel(f"{name} sums to {s!r}, not 1", name)
    return p / s


# -- construction from JSON-shaped data -------------------------------------
def validate_model(raw) -> SourceModel:
    """Build a validated :class:`SourceModel` from a mapping (or pass one through).

    Expected keys: ``alphabets``, ``recovery_set``, ``family`` (a mapping from
    label to flat row-major joint pmf, or a list of rows), ``prior``,
    ``distortion`` (flat row-major table over (x_B, y_B)) and
    ``reproduction_alphabets``.  ``m`` and ``theta_labels`` are optional
    consistency fields.  Pmfs within 1e-6 of summing to one are renormalized.
    """
    if isinstance(raw, SourceModel):
        return raw
    if not isinstance(raw, Mapping):
        raise MalformedModel("model must be a JSON object", "model")
    for key in ("alphabets", "recovery_set", "family", "prior", "distortion"):
        if key not in raw:
            raise MalformedModel(f"missing field {key!r}", key)
    alph = _int_list(raw["alphabets"], "alphabets")
    if "m" in raw and int(raw["m"]) != len(alph):
        raise InconsistentAlphabet(f"m={raw['m']} but {len(alph)} alphabets given", "m")
    B = _int_list(raw["recovery_set"], "recovery_set")
    if not B:
        raise EmptyRecoverySet("recovery set is empty", "recovery_set")
    repro = raw.get("reproduction_alphabets")
    if repro is None:
        repro = [alph[i - 1] for i in B if 1 <= i <= len(alph)]
    repro = _int_list(repro, "reproduction_alphabets")
    fam = raw["family"]
    labels = raw.get("theta_labels")
    if isinstance(fam, Mapping):
        if labels is None:
            labels = list(fam.keys())
        rows = []
        for lab in labels:
            if str(lab) in fam:
                rows.append(fam[str(lab)])
            elif lab in fam:
                rows.append(fam[lab])
            else:
                raise MalformedModel(f"family has no entry for label {lab!r}", "family")
    elif isinstance(fam, Sequence):
        rows = list(fam)
        if labels is None:
            labels = list(range(1, len(rows) + 1))
    else:
        raise MalformedModel("family must be a mapping or a list of rows", "family")
    try:
        rows = np.array(rows, dtype=float)
        prior = np.array(raw["prior"], dtype=float)
        dist = np.array(raw["distortion"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise MalformedModel(f"non-numeric entries: {exc}", "family") from None
    if rows.ndim != 2:
        raise MalformedModel("family rows must be flat lists of equal length", "family")
    return SourceModel(
        alphabets=tuple(alph),
        family=rows,
        prior=prior,
        recovery_set=tuple(B),
        repro_alphabets=tuple(repro),
        distortion=dist,
        theta=tuple(labels),
        full_support=bool(raw.get("full_support", True)),
    )


def _int_list(x, name) -> list[int]:
    try:
        return [int(v) for v in x]
    except (TypeError, ValueError):
        raise MalformedModel(f"{name} must be a list of integers", name) from None


def load_model(path) -> SourceModel:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedModel(f"invalid JSON: {exc}", "model") from None
    return validate_model(raw)


def save_model(model: SourceModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2))


# -- ambiguity partitions ---------------------------------------------------
@dataclass(frozen=True, eq=False)
class AmbiguityPartition:
    """Cells of tau indices that the sampler cannot tell apart.

    ``kind`` is ``"THETA1"`` (key = sampling set A), ``"THETA2"`` (key = k) or
    ``"THETA_FULL"``.  Cells are ordered by their smallest member.
    """

    cells: tuple[tuple[int, ...], ...]
    kind: str
    key: object
    induced_prior: np.ndarray

    def __len__(self):
        return len(self.cells)

    def cell_of(self, tau_idx: int) -> int:
        for c, cell in enumerate(self.cells):
            if tau_idx in cell:
                return c
        raise UnknownTau(f"tau index {tau_idx} not in partition")

    def refines(self, other: "AmbiguityPartition") -> bool:
        """True if every cell of ``self`` sits inside a cell of ``other``."""
        return all(any(set(c) <= set(o) for o in other.cells) for c in self.cells)


def _group(signatures: list[np.ndarray], tol: float) -> list[tuple[int, ...]]:
    reps: list[np.ndarray] = []
    cells: list[list[int]] = []
    for t, sig in enumerate(signatures):
        for c, rep in enumerate(reps):
            if np.max(np.abs(sig - rep)) <= tol:
                cells[c].append(t)
                break
        else:
            reps.append(sig)
            cells.append([t])
    return [tuple(c) for c in cells]


def _partition(model: SourceModel, sigs, kind, key, tol) -> AmbiguityPartition:
    cells = _group(sigs, tol)
    prior = np.array([model.prior[list(c)].sum() for c in cells])
    prior.setflags(write=False)
    return AmbiguityPartition(tuple(cells), kind, key, prior)


def theta1_partition(model: SourceModel, A: Sequence[int], tol: float = TOL_PMF) -> AmbiguityPartition:
    """Group parameters whose X_A marginals coincide."""
    A = as_subset(A, model.m)
    sigs = [model.marginal(A, pmf=row) for row in model.family]
    return _partition(model, sigs, "THETA1", A, tol)


def theta2_partition(model: SourceModel, k: int, tol: float = TOL_PMF) -> AmbiguityPartition:
    """Group parameters whose whole ordered collection of k-marginals coincides."""
    sets = subsets_of_size(model.m, k)
    sigs = [np.concatenate([model.marginal(A, pmf=row) for A in sets]) for row in model.family]
    return _partition(model, sigs, "THETA2", int(k), tol)


def full_partition(model: SourceModel, tol: float = TOL_PMF) -> AmbiguityPartition:
    """Group parameters with identical joint pmfs (singletons for distinct members)."""
    return _partition(model, list(model.family), "THETA_FULL", None, tol)


# -- modified distortion ----------------------------------------------------
@dataclass(frozen=True)
class DistortionTable:
    """Conditional expected distortion d'(x_cond, y_B), one row per conditioning symbol."""

    table: np.ndarray
    conditioning: tuple

    @property
    def shape(self):
        return self.table.shape


def conditional_distortion(model: SourceModel, pmf: np.ndarray, labels: np.ndarray, n_labels: int) -> tuple[np.ndarray, np.ndarray]:
    """E[d(X_B, y) | label] and P(label) for a labelling of joint symbols.

    Rows whose label has zero probability fall back to the unconditional
    expectation so every entry stays within [0, d_max].
    """
    dM = model.joint_distortion()
    mass = np.bincount(labels, weights=pmf, minlength=n_labels)
    num = np.zeros((n_labels, dM.shape[1]))
    np.add.at(num, labels, pmf[:, None] * dM)
    out = np.empty_like(num)
    pos = mass > 0
    out[pos] = num[pos] / mass[pos, None]
    out[~pos] = pmf @ dM
    return out, mass


def modified_distortion(model: SourceModel, cell: Iterable[int], A: Sequence[int]) -> DistortionTable:
    """d_cell(x_A, y_B) = E[d(X_B, y_B) | X_A = x_A, cell], cell mixed by its prior."""
    A = as_subset(A, model.m)
    B = model.recovery_set
    if set(B) <= set(A):
        # X_B is a function of X_A: no averaging needed
        nA = model.subset_size(A)
        first = np.zeros(nA, dtype=int)
        first[model.index_of(A)[::-1]] = np.arange(model.n_joint)[::-1]
        xb = model.index_of(B)[first]
        return DistortionTable(model.distortion[xb].copy(), ("X", A))
    pmf = model.joint(cell)
    table, _ = conditional_distortion(model, pmf, model.index_of(A), model.subset_size(A))
    return DistortionTable(table, ("X", A))


def per_tau_distortion(model: SourceModel, tau_idx: int, A: Sequence[int]) -> DistortionTable:
    """Modified distortion under a single family member."""
    return modified_distortion(model, [tau_idx], A)
