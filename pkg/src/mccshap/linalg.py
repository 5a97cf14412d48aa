"""Small dense linear solves."""

import numpy as np


class SingularSystem(np.linalg.LinAlgError):
    def __init__(self, min_pivot, threshold):
        self.min_pivot = min_pivot
        self.threshold = threshold
        super().__init__(f"pivot {min_pivot:.3g} below threshold {threshold:.3g}")


def gauss_solve(a, b, rel_tol=1e-10):
    """Solve ``a @ x = b`` by Gaussian elimination with partial pivoting.

    ``b`` may be a vector or a matrix of right-hand sides (one per column).
    The system is rejected when any pivot magnitude falls below
    ``rel_tol * max(|diag(a)|)``.

    Returns ``(x, min_pivot)``.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    n = a.shape[0]
    if a.shape != (n, n) or b.shape[0] != n:
        raise ValueError(f"shape mismatch: a {a.shape}, b {b.shape}")

    threshold = rel_tol * float(np.max(np.abs(np.diag(a)))) if n else 0.0
    min_pivot = np.inf
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        pivot = abs(a[p, k])
        min_pivot = min(min_pivot, pivot)
        if not pivot > threshold:
            raise SingularSystem(pivot, threshold)
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        for i in range(k + 1, n):
            lam = a[i, k] / a[k, k]
            if lam != 0.0:
                a[i, k + 1:] -= lam * a[k, k + 1:]
                b[i] -= lam * b[k]
            a[i, k] = 0.0

    x = np.empty_like(b)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return (x[:, 0] if vector else x), float(min_pivot)
