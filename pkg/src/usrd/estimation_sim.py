"""Monte Carlo checks of the parameter-estimation phase of the sampling schemes.

Every trial draws from its own generator ``np.random.default_rng([seed, trial])``
so results are reproducible bit for bit and independent of trial order.  When
``tau_true`` is None each trial first draws the parameter from the prior.
Source sequences are drawn once per trial at the largest blocklength and
prefixes serve the shorter ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SignalingImpossible
from .source_model import (
    AmbiguityPartition,
    SourceModel,
    as_subset,
    full_partition,
    subsets_of_size,
    theta1_partition,
    theta2_partition,
)

DEFAULT_TRIALS = 2000


@dataclass
class SimReport:
    """Empirical cell-identification error per blocklength."""

    ns: list
    errors: list
    trials: int
    seed: int
    descriptor: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"ns": list(self.ns), "errors": list(self.errors), "trials": self.trials,
                "seed": self.seed, **self.descriptor}


def _rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(trial)])


def _as_list(n) -> list[int]:
    ns = [int(v) for v in (n if np.ndim(n) else [n])]
    if not ns or min(ns) < 1:
        raise ValueError("blocklengths must be >= 1")
    return ns


def _draw(model: SourceModel, tau_idx: int, size, rng) -> np.ndarray:
    cdf = np.cumsum(model.family[tau_idx])
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right")


def sample_dmms(model: SourceModel, tau, n: int, seed: int = 0) -> np.ndarray:
    """n i.i.d. joint symbols (flat indices) from the member labelled ``tau``."""
    if int(n) < 1:
        raise ValueError("n must be >= 1")
    t = model.tau_index(tau)
    return _draw(model, t, int(n), np.random.default_rng(int(seed)))


def _log(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(p)


def _pick_theta(model, tau_true, rng) -> int:
    if tau_true is None:
        return int(rng.choice(model.n_theta, p=model.prior))
    return model.tau_index(tau_true)


def _ml(loglik_rows: np.ndarray, counts: np.ndarray) -> int:
    """argmax_c sum_x counts[x] log P_c(x), skipping unseen symbols; first index wins ties."""
    seen = counts > 0
    ll = (loglik_rows[:, seen] * counts[seen]).sum(axis=1)
    return int(np.argmax(ll))


def simulate_fs_ml(model: SourceModel, A, tau_true, n_list, trials: int = DEFAULT_TRIALS, seed: int = 0,
                   partition: AmbiguityPartition | None = None) -> SimReport:
    """ML identification of the fixed-set ambiguity cell from X_A^n.

    ``partition`` overrides the cells (used for negative controls).
    """
    A = as_subset(A, model.m)
    part = partition or theta1_partition(model, A)
    ns = _as_list(n_list)
    idx = model.index_of(A)
    nA = model.subset_size(A)
    logp = np.stack([_log(model.marginal(A, cell)) for cell in part.cells])
    errors = np.zeros(len(ns), dtype=int)
    for trial in range(trials):
        rng = _rng(seed, trial)
        t = _pick_theta(model, tau_true, rng)
        truth = part.cell_of(t)
        xa = idx[_draw(model, t, max(ns), rng)]
        for j, n in enumerate(ns):
            counts = np.bincount(xa[:n], minlength=nA)
            errors[j] += _ml(logp, counts) != truth
    return SimReport(ns, (errors / trials).tolist(), trials, seed,
                     {"scheme": "fs-ml", "A": list(A), "cells": len(part.cells), "tau_true": tau_true})


def simulate_irs_phase1(model: SourceModel, k: int, tau_true, N, trials: int = DEFAULT_TRIALS,
                        seed: int = 0) -> SimReport:
    """Sample every k-subset for N instants, then ML over the k-marginal cells."""
    ns = _as_list(N)
    sets = subsets_of_size(model.m, k)
    part = theta2_partition(model, k)
    idxs = [model.index_of(A) for A in sets]
    sizes = [model.subset_size(A) for A in sets]
    logps = [np.stack([_log(model.marginal(A, cell)) for cell in part.cells]) for A in sets]
    errors = np.zeros(len(ns), dtype=int)
    for trial in range(trials):
        rng = _rng(seed, trial)
        t = _pick_theta(model, tau_true, rng)
        truth = part.cell_of(t)
        X = _draw(model, t, (len(sets), max(ns)), rng)
        for j, n in enumerate(ns):
            ll = np.zeros(len(part.cells))
            for i in range(len(sets)):
                counts = np.bincount(idxs[i][X[i, :n]], minlength=sizes[i])
                seen = counts > 0
                ll += (logps[i][:, seen] * counts[seen]).sum(axis=1)
            errors[j] += int(np.argmax(ll)) != truth
    return SimReport(ns, (errors / trials).tolist(), trials, seed,
                     {"scheme": "irs-phase1", "k": int(k), "cells": len(part.cells), "tau_true": tau_true,
                      "instants": [len(sets) * n for n in ns]})


def simulate_full_ml(model: SourceModel, tau_true, n_list, trials: int = DEFAULT_TRIALS, seed: int = 0) -> SimReport:
    """ML over distinct family members from fully observed X_M^n."""
    ns = _as_list(n_list)
    part = full_partition(model)
    logp = np.stack([_log(model.joint(cell)) for cell in part.cells])
    errors = np.zeros(len(ns), dtype=int)
    for trial in range(trials):
        rng = _rng(seed, trial)
        t = _pick_theta(model, tau_true, rng)
        truth = part.cell_of(t)
        x = _draw(model, t, max(ns), rng)
        for j, n in enumerate(ns):
            errors[j] += _ml(logp, np.bincount(x[:n], minlength=model.n_joint)) != truth
    return SimReport(ns, (errors / trials).tolist(), trials, seed,
                     {"scheme": "full-ml", "cells": len(part.cells), "tau_true": tau_true})


def signal_alphabet(model: SourceModel) -> np.ndarray:
    """Joint symbols that can occur under some member; only these need signaling."""
    return np.nonzero(model.family.max(axis=0) > 0)[0]


def signaling_chunks(model: SourceModel, k: int) -> int:
    """Signaling rounds: 1 if the k-subsets can name every possible symbol, else ceil(n/(|A_k|-1))."""
    nA = math.comb(model.m, k)
    n = signal_alphabet(model).size
    if nA >= n:
        return 1
    if nA == 1:
        raise SignalingImpossible("a single sampling set cannot signal source symbols")
    return math.ceil(n / (nA - 1))


def simulate_mrs_signaling(model: SourceModel, tau_true, N, trials: int = DEFAULT_TRIALS, seed: int = 0,
                           k: int = 1) -> SimReport:
    """ML over the family from the sampling sequence alone.

    One-to-one regime (|A_k| at least the number of possible symbols): the
    set sequence reveals X_M^N exactly.  Otherwise the possible symbols are
    split lexicographically into chunks of |A_k| - 1; during round l the
    sampler names symbols of chunk l and uses the last set as a dummy for all
    others, so each round yields a censored observation.
    """
    ns = _as_list(N)
    L = signaling_chunks(model, k)
    nA = math.comb(model.m, k)
    part = full_partition(model)
    P = np.stack([model.joint(cell) for cell in part.cells])  # (C, n_joint)
    logP = _log(P)
    alphabet = signal_alphabet(model)
    rank = np.full(model.n_joint, -1)
    rank[alphabet] = np.arange(alphabet.size)
    width = alphabet.size if L == 1 else nA - 1
    dummy = nA - 1
    chunk_of = rank // width
    position = rank % width
    rest = [_log(np.clip(1.0 - P[:, alphabet[l * width:(l + 1) * width]].sum(axis=1), 0.0, None))
            for l in range(L)]
    errors = np.zeros(len(ns), dtype=int)
    for trial in range(trials):
        rng = _rng(seed, trial)
        t = _pick_theta(model, tau_true, rng)
        truth = part.cell_of(t)
        X = _draw(model, t, max(ns) if L == 1 else (L, max(ns)), rng).reshape(L, -1)
        # sampler output: in round l, name the symbol's position in chunk l or use the dummy set
        S = np.where(chunk_of[X] == np.arange(L)[:, None], position[X], dummy)
        for j, n in enumerate(ns):
            ll = np.zeros(len(part.cells))
            for l in range(L):
                s = S[l, :n]
                named = s != dummy if L > 1 else np.ones(n, dtype=bool)
                xhat = alphabet[l * width + s[named]]
                counts = np.bincount(xhat, minlength=model.n_joint)
                seen = counts > 0
                ll += (logP[:, seen] * counts[seen]).sum(axis=1)
                other = n - int(named.sum())
                if other > 0:
                    ll += other * rest[l]
            errors[j] += int(np.argmax(ll)) != truth
    return SimReport(ns, (errors / trials).tolist(), trials, seed,
                     {"scheme": "mrs-signaling", "k": int(k), "chunks": L, "tau_true": tau_true,
                      "effective_lengths": [L * n for n in ns]})
