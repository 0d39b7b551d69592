"""Pure numpy implementations of the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def reverse_delete(xi, L):
    """Served mask (M x K, bool) after reverse-delete down to L MSs per AP.

    Each step removes, among edges leaving an AP that still serves more
    than L MSs, the one whose removal leaves the largest minimum per-MS
    sum energy; ties go to the smaller weight, then lower AP, then lower MS.
    """
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    M, K = xi.shape
    served = np.ones((M, K), dtype=bool)
    if K <= L:
        return served
    deg = np.full(M, K)
    for _ in range(M * (K - L)):
        energy = np.where(served, xi, 0.0).sum(axis=0)
        count = served.sum(axis=0)
        own = np.where(count[None, :] == 1, 0.0, energy[None, :] - xi)
        if K > 1:
            order = np.argsort(energy, kind="stable")
            other = np.full(K, energy[order[0]])
            other[order[0]] = energy[order[1]]
        else:
            other = np.full(K, np.inf)
        post = np.minimum(own, other[None, :])
        cand = served & (deg[:, None] > L)
        score = np.where(cand, post, -np.inf)
        best = score.max()
        tied = cand & (post == best)
        wmin = np.where(tied, xi, np.inf).min()
        idx = int(np.argmax(tied & (xi == wmin)))
        m, k = divmod(idx, K)
        served[m, k] = False
        deg[m] -= 1
    return served
