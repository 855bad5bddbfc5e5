"""Builders for small parametric source families used in tests and demos."""
from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .source_model import SourceModel


def _prior(prior, T):
    return np.full(T, 1.0 / T) if prior is None else np.asarray(prior, dtype=float)


def error_distortion(n_symbols: int) -> np.ndarray:
    """Probability-of-error (0/1) distortion on a square alphabet."""
    return 1.0 - np.eye(n_symbols)


def hamming_sum_distortion(alphabets: Sequence[int]) -> np.ndarray:
    """Number of mismatched components between x_B and y_B."""
    tuples = list(itertools.product(*[range(a) for a in alphabets]))
    return np.array([[sum(a != b for a, b in zip(x, y)) for y in tuples] for x in tuples], dtype=float)


def virtual_bsc_family(p: Sequence[float], q: Sequence[float], prior=None, recovery_set=(1, 2)) -> SourceModel:
    """X1 ~ Bern(p_tau), X2 = X1 xor Z with Z ~ Bern(q_tau); 0/1 error on X_B."""
    rows = []
    for pt, qt in zip(p, q):
        P = np.zeros((2, 2))
        for x1, x2 in itertools.product((0, 1), repeat=2):
            P[x1, x2] = (pt if x1 else 1 - pt) * (qt if x1 != x2 else 1 - qt)
        rows.append(P.ravel())
    nB = 2 ** len(recovery_set)
    return SourceModel(
        alphabets=(2, 2), family=np.array(rows), prior=_prior(prior, len(rows)),
        recovery_set=tuple(recovery_set), repro_alphabets=(2,) * len(recovery_set),
        distortion=error_distortion(nB),
    )


def independent_bits_family(p: Sequence[float], q: Sequence[float], prior=None) -> SourceModel:
    """Independent X1 ~ Bern(p_tau), X2 ~ Bern(q_tau); Hamming-count distortion on both."""
    rows = []
    for pt, qt in zip(p, q):
        rows.append(np.outer([1 - pt, pt], [1 - qt, qt]).ravel())
    return SourceModel(
        alphabets=(2, 2), family=np.array(rows), prior=_prior(prior, len(rows)),
        recovery_set=(1, 2), repro_alphabets=(2, 2), distortion=hamming_sum_distortion((2, 2)),
    )


def parity_family(q: Sequence[float], p: float = 0.5, prior=None) -> SourceModel:
    """X1 ~ Bern(p), X2 = X1 xor Z with Z ~ Bern(q_tau), X3 = Z; recover X1 xor X2.

    The distortion on B = {1, 2} is 1 when the parities of x_B and y_B differ.
    The joint pmf has structural zeros, so the model opts out of the
    full-support check.
    """
    rows = []
    for qt in q:
        P = np.zeros((2, 2, 2))
        for x1, z in itertools.product((0, 1), repeat=2):
            P[x1, x1 ^ z, z] = (p if x1 else 1 - p) * (qt if z else 1 - qt)
        rows.append(P.ravel())
    pairs = list(itertools.product((0, 1), repeat=2))
    D = np.array([[float((a ^ b) != (c ^ d)) for c, d in pairs] for a, b in pairs])
    return SourceModel(
        alphabets=(2, 2, 2), family=np.array(rows), prior=_prior(prior, len(rows)),
        recovery_set=(1, 2), repro_alphabets=(2, 2), distortion=D, full_support=False,
    )


def single_source(pmf: Sequence[float], distortion, alphabets=None) -> SourceModel:
    """One-member family on a single component (classical rate-distortion)."""
    pmf = np.asarray(pmf, dtype=float)
    D = np.asarray(distortion, dtype=float)
    return SourceModel(
        alphabets=(pmf.size,) if alphabets is None else tuple(alphabets), family=pmf[None, :],
        prior=np.ones(1), recovery_set=(1,), repro_alphabets=(D.shape[1],), distortion=D,
    )


def duplicated_bits_family(p: Sequence[float], q: Sequence[float], prior=None) -> SourceModel:
    """X1 ~ Bern(p_tau), X2 ~ Bern(q_tau) independent, X3 = X1, X4 = X2; Hamming count on (X1, X2).

    Only four of the sixteen joint symbols can occur, so the 2-subsets of four
    components (six of them) can name every possible symbol.
    """
    rows = []
    for pt, qt in zip(p, q):
        P = np.zeros((2, 2, 2, 2))
        for x1, x2 in itertools.product((0, 1), repeat=2):
            P[x1, x2, x1, x2] = (pt if x1 else 1 - pt) * (qt if x2 else 1 - qt)
        rows.append(P.ravel())
    return SourceModel(
        alphabets=(2, 2, 2, 2), family=np.array(rows), prior=_prior(prior, len(rows)),
        recovery_set=(1, 2), repro_alphabets=(2, 2), distortion=hamming_sum_distortion((2, 2)),
        full_support=False,
    )
