"""Pilot book and pilot assignment strategies.

Assignments are zero-based integer arrays: ``assignment[k]`` is the pilot
index of MS k.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import DomainError

__all__ = ["PilotAssignment", "make_pilot_book", "assign_rpa", "assign_brpa",
           "cosine_similarity", "assign_dcpa", "assign_pilots", "canonical_labels"]


@dataclass(frozen=True)
class PilotAssignment:
    book: np.ndarray          # tau_p x tau_p, column t is pilot t
    assignment: np.ndarray    # (K,) pilot index per MS
    strategy: str

    @property
    def tau_p(self) -> int:
        return self.book.shape[1]

    def overlap(self) -> np.ndarray:
        """K x K matrix ``|phi_k'^T phi_k^*|^2``."""
        P = self.book[:, self.assignment]
        return np.abs(P.T @ P.conj()) ** 2


def make_pilot_book(tau_p: int) -> np.ndarray:
    """Unitary DFT matrix; its columns are the orthonormal pilots."""
    if tau_p < 1:
        raise DomainError("tau_p must be >= 1")
    n = np.arange(tau_p)
    return np.exp(-2j * np.pi * np.outer(n, n) / tau_p) / np.sqrt(tau_p)


def assign_rpa(K: int, tau_p: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, tau_p, size=K)


def assign_brpa(K: int, tau_p: int) -> np.ndarray:
    return np.arange(K) % tau_p


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DomainError("zero fingerprint")
    return float(a @ b / (na * nb))


def assign_dcpa(fingerprints, tau_p: int) -> np.ndarray:
    """Dissimilarity-cluster pilot assignment.

    ``fingerprints`` is K x M (row k holds the weights of MS k to every AP).
    MSs are ordered by ascending cosine similarity to the centroid
    fingerprint (ties by MS index) and the i-th MS in that order gets
    pilot ``i mod tau_p``, so MSs adjacent in the order never share.
    """
    X = np.asarray(fingerprints, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DomainError("fingerprints must be a non-empty K x M array")
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise DomainError("zero fingerprint")
    centroid = X.mean(axis=0)
    sim = (X @ centroid) / (norms * np.linalg.norm(centroid))
    order = np.argsort(sim, kind="stable")
    out = np.empty(X.shape[0], dtype=int)
    out[order] = np.arange(X.shape[0]) % tau_p
    return out


def assign_pilots(strategy: str, K: int, tau_p: int, fingerprints=None,
                  rng: np.random.Generator | None = None) -> PilotAssignment:
    book = make_pilot_book(tau_p)
    if strategy == "rpa":
        if rng is None:
            raise ValueError("RPA needs a random generator")
        a = assign_rpa(K, tau_p, rng)
    elif strategy == "brpa":
        a = assign_brpa(K, tau_p)
    elif strategy == "dcpa":
        a = assign_dcpa(fingerprints, tau_p)
    else:
        raise ValueError(f"unknown pilot strategy {strategy!r}")
    return PilotAssignment(book, np.asarray(a, dtype=int), strategy)


def canonical_labels(assignment) -> np.ndarray:
    """Relabel pilots in order of first use by MS index.

    Pilots are statistically interchangeable, so this leaves every rate
    unchanged while making equivalent assignments identical.
    """
    assignment = np.asarray(assignment)
    mapping: dict[int, int] = {}
    for t in assignment:
        mapping.setdefault(int(t), len(mapping))
    return np.array([mapping[int(t)] for t in assignment], dtype=int)
