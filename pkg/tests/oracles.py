"""Independent reference computations used only by the tests.

Nothing here imports the package's numerical code paths.
"""

import itertools
import math


def two_pass_covariance(rows):
    """Plain-Python two-pass sample covariance (denominator n - 1) with fsum."""
    n = len(rows)
    m = len(rows[0])
    means = [math.fsum(r[j] for r in rows) / n for j in range(m)]
    cov = [[0.0] * m for _ in range(m)]
    for a in range(m):
        for b in range(m):
            cov[a][b] = math.fsum((r[a] - means[a]) * (r[b] - means[b]) for r in rows) / (n - 1)
    return means, cov


def det_cofactor(a):
    """Determinant by cofactor expansion along the first row."""
    n = len(a)
    if n == 1:
        return a[0][0]
    if n == 2:
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]
    total = 0.0
    for col in range(n):
        minor = [row[:col] + row[col + 1:] for row in a[1:]]
        total += (-1) ** col * a[0][col] * det_cofactor(minor)
    return total


def cramer_solve(a, b):
    """Solve a x = b by determinant ratios."""
    a = [list(map(float, row)) for row in a]
    d = det_cofactor(a)
    out = []
    for j in range(len(a)):
        aj = [row[:j] + [b[i]] + row[j + 1:] for i, row in enumerate(a)]
        out.append(det_cofactor(aj) / d)
    return out


def inverse_2x2_solve(a, b):
    (p, q), (r, s) = a
    d = p * s - q * r
    inv = [[s / d, -q / d], [-r / d, p / d]]
    return [inv[0][0] * b[0] + inv[0][1] * b[1], inv[1][0] * b[0] + inv[1][1] * b[1]]


def exact_pair_closed_form(var_i, var_j, cov_ij, cov_ik, cov_jk):
    """Sign-corrected two-feature coefficients (solution of the 2x2 system)."""
    d = var_i * var_j - cov_ij**2
    a = -(cov_ik * var_j - cov_jk * cov_ij) / d
    b = -(cov_jk * var_i - cov_ik * cov_ij) / d
    return a, b


def knn_brute(train_x, train_y, query, k):
    """Mean target of the k nearest rows (plain Euclidean, no scaling)."""
    d = sorted(
        (math.fsum((q - t) ** 2 for q, t in zip(query, row)), i) for i, row in enumerate(train_x)
    )
    return math.fsum(train_y[i] for _, i in d[:k]) / k


def enumerate_shapley_linear(weights, instance, means):
    """Closed-form interventional Shapley value for a linear model."""
    return [w * (x - mu) for w, x, mu in zip(weights, instance, means)]


def permutation_shapley_exact(f, background, instance, j):
    """Shapley value by averaging over all m! orderings and all background rows."""
    m = len(instance)
    perms = list(itertools.permutations(range(m)))
    total = []
    for order in perms:
        pos = order.index(j)
        before = set(order[:pos])
        for z in background:
            plus = [instance[t] if (t in before or t == j) else z[t] for t in range(m)]
            minus = [instance[t] if t in before else z[t] for t in range(m)]
            total.append(f(plus) - f(minus))
    return math.fsum(total) / len(total)
