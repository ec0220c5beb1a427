"""Cross-validation segmentation shared by the PLS and elastic-net modules."""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CvScheme:
    kind: str = "loo"
    k: int = 0
    seed: int = 0

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "CvScheme":
        text = text.strip().lower()
        if text == "loo":
            return cls("loo")
        if text.startswith("kfold:"):
            try:
                k = int(text.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"bad fold count in {text!r}") from None
            if k < 2:
                raise ValueError("k-fold needs k >= 2")
            return cls("kfold", k, seed)
        raise ValueError(f"unknown validation scheme {text!r} (use loo or kfold:K)")

    def __str__(self):
        return "loo" if self.kind == "loo" else f"kfold:{self.k}"


LOO = CvScheme("loo")


def as_scheme(scheme) -> CvScheme:
    if scheme is None:
        return LOO
    if isinstance(scheme, CvScheme):
        return scheme
    return CvScheme.parse(str(scheme))


def segments(n: int, scheme, strata=None) -> list[np.ndarray]:
    """Held-out index sets; every sample appears in exactly one segment.

    k-fold segments are stratified by ``strata`` when given: each class is
    shuffled with the scheme's seed and dealt round-robin over the folds.
    """
    scheme = as_scheme(scheme)
    if scheme.kind == "loo":
        return [np.array([i]) for i in range(n)]
    k = scheme.k
    if not 2 <= k <= n:
        raise ValueError(f"k-fold needs 2 <= k <= n ({n}), got {k}")
    rng = np.random.default_rng(scheme.seed)
    fold = np.empty(n, dtype=int)
    if strata is None:
        order = rng.permutation(n)
        fold[order] = np.arange(n) % k
    else:
        strata = np.asarray(strata)
        offset = 0
        for cls in sorted(set(strata.tolist())):
            idx = np.flatnonzero(strata == cls)
            idx = idx[rng.permutation(len(idx))]
            fold[idx] = (offset + np.arange(len(idx))) % k
            offset += len(idx)
        if min(np.sum(strata == c) for c in set(strata.tolist())) < k:
            warnings.warn("some class has fewer samples than folds; stratification is incomplete",
                          stacklevel=2)
    return [np.flatnonzero(fold == j) for j in range(k) if np.any(fold == j)]


def n_threads() -> int:
    try:
        return max(1, int(os.environ.get("GEM_THREADS", "1")))
    except ValueError:
        return 1


def map_ordered(fn, items) -> list:
    """``[fn(x) for x in items]``, threaded when GEM_THREADS > 1; order is preserved."""
    items = list(items)
    workers = min(n_threads(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def one_se_index(error, se, prefer="first") -> int:
    """Index of the first entry with error within one standard error of the minimum."""
    error = np.asarray(error, dtype=float)
    se = np.asarray(se, dtype=float)
    best = int(np.argmin(error))
    bound = error[best] + se[best]
    ok = np.flatnonzero(error <= bound + 1e-12 * max(1.0, abs(bound)))
    return int(ok[0]) if prefer == "first" else int(ok[-1])
