"""Low-rank linear algebra helpers used by the filters.

Everything here works on plain float64 ndarrays and avoids forming any
P x P matrix. The deterministic sign and tie conventions make filter
trajectories reproducible run to run.
"""

import numpy as np
import scipy.linalg

from .exceptions import NumericalDegeneracyError

# Singular values below RANK_EPS * sigma_max are treated as exact zeros and
# their singular vectors are replaced by zero columns.
RANK_EPS = 1e-12


def fix_column_signs(u):
    """Flip column signs so the first nonzero entry of each column is > 0."""
    u = np.array(u, copy=True)
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.flatnonzero(col)
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
    return u


def thin_svd(w):
    """Left singular vectors and singular values of a tall matrix.

    Parameters
    ----------
    w : ndarray, shape (P, K)

    Returns
    -------
    s : ndarray, shape (K,)
        Singular values, sorted non-increasing. Values below
        ``RANK_EPS * s.max()`` are zeroed.
    u : ndarray, shape (P, K)
        Matching left singular vectors; columns paired with zeroed
        singular values are zero columns. Nonzero columns carry a
        deterministic sign (first nonzero entry positive). Ties in the
        singular values keep a stable order.

    Notes
    -----
    When P > K the decomposition goes through the K x K Gram matrix
    ``w.T w`` so the cost is O(P K^2 + K^3) rather than O(P^2 K).
    """
    w = np.asarray(w, dtype=float)
    p, k = w.shape
    if k == 0:
        return np.zeros(0), np.zeros((p, 0))
    if p > k:
        gram = w.T @ w
        vals, vecs = scipy.linalg.eigh(gram)
        vals = np.maximum(vals, 0.0)
        order = np.argsort(-vals, kind="stable")
        s = np.sqrt(vals[order])
        v = vecs[:, order]
        u = np.zeros((p, k))
        smax = s[0] if s.size else 0.0
        for j in range(k):
            if smax > 0.0 and s[j] > RANK_EPS * smax:
                u[:, j] = (w @ v[:, j]) / s[j]
            else:
                s[j] = 0.0
    else:
        u, s, _ = np.linalg.svd(w, full_matrices=False)
        order = np.argsort(-s, kind="stable")
        s = s[order]
        u = u[:, order]
        smax = s[0] if s.size else 0.0
        dead = s <= RANK_EPS * smax
        s[dead] = 0.0
        u[:, dead] = 0.0
        if p < k:
            # pad so callers always see K columns
            s = np.concatenate([s, np.zeros(k - p)])
            u = np.hstack([u, np.zeros((p, k - p))])
    return s, fix_column_signs(u)


def solve_diag_plus_lowrank(diag, w, rhs):
    """Solve ``(np.diag(diag) + w @ w.T) x = rhs`` in O(P L^2).

    ``rhs`` may be a vector of length P or a (P, m) matrix.
    """
    diag = np.asarray(diag, dtype=float)
    d_inv = 1.0 / diag
    x0 = (d_inv * rhs.T).T
    if w.shape[1] == 0:
        return x0
    m = d_inv[:, None] * w
    core = np.eye(w.shape[1]) + w.T @ m
    return x0 - m @ np.linalg.solve(core, w.T @ x0)


def chol_or_raise(a, what="matrix"):
    """Cholesky factor (lower) of ``a``, raising NumericalDegeneracyError."""
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(f"Cholesky of {what} failed: {exc}") from exc


def symmetrize(a):
    return 0.5 * (a + a.T)
