"""Compiled inner loops (Sturm counts, bisection, polynomial weights)."""

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def sturm_count(d, e2, x, pivmin):
    """Number of eigenvalues strictly below ``x`` (negative LDL^T pivots)."""
    n = d.shape[0]
    count = 0
    q = d[0] - x
    if abs(q) < pivmin:
        q = -pivmin
    if q < 0:
        count += 1
    for i in range(1, n):
        q = d[i] - x - e2[i - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0:
            count += 1
    return count


@njit(cache=True)
def sturm_counts(d, e2, xs, pivmin):
    """Sturm counts at many shifts at once; the inner loop over shifts vectorizes."""
    n = d.shape[0]
    m = xs.shape[0]
    q = np.empty(m)
    count = np.zeros(m, dtype=np.int64)
    for b in range(m):
        v = d[0] - xs[b]
        if abs(v) < pivmin:
            v = -pivmin
        q[b] = v
        count[b] += v < 0
    for i in range(1, n):
        di = d[i]
        ei = e2[i - 1]
        for b in range(m):
            v = di - xs[b] - ei / q[b]
            v = v if abs(v) >= pivmin else -pivmin
            q[b] = v
            count[b] += v < 0
    return count


@njit(cache=True)
def bisect_range(d, e2, k_lo, k_hi, lo, hi, tol, pivmin, maxit):
    """Eigenvalues with indices k_lo..k_hi-1 inside the bracket [lo, hi].

    All brackets are halved together, one batched Sturm sweep per round.
    Returns (values, failed_index); failed_index is -1 on success.
    """
    m = k_hi - k_lo
    a = np.full(m, lo)
    b = np.full(m, hi)
    active = np.arange(m)
    it = 0
    while active.shape[0] > 0:
        if it >= maxit:
            return 0.5 * (a + b), k_lo + active[0]
        mids = np.empty(active.shape[0])
        for j in range(active.shape[0]):
            k = active[j]
            mids[j] = 0.5 * (a[k] + b[k])
        cnt = sturm_counts(d, e2, mids, pivmin)
        keep = np.zeros(active.shape[0], dtype=np.bool_)
        for j in range(active.shape[0]):
            k = active[j]
            mid = mids[j]
            if mid == a[k] or mid == b[k]:
                continue
            if cnt[j] > k + k_lo:
                b[k] = mid
            else:
                a[k] = mid
            keep[j] = b[k] - a[k] > tol
        active = active[keep]
        it += 1
    return 0.5 * (a + b), -1


@njit(cache=True)
def poly_weights(d, e, lams):
    """Site-0 weights 1 / sum_n P_n(lambda)^2 with P_0 = 1.

    The three-term recurrence is rescaled whenever |P| exceeds 1e100; the
    scale is tracked in log form so the sum never overflows.
    """
    n = d.shape[0]
    m = lams.shape[0]
    w = np.empty(m)
    for k in range(m):
        lam = lams[k]
        p_prev = 0.0
        p_curr = 1.0
        s = 1.0
        log_scale = 0.0
        for i in range(n - 1):
            back = e[i - 1] * p_prev if i > 0 else 0.0
            p_next = ((lam - d[i]) * p_curr - back) / e[i]
            p_prev = p_curr
            p_curr = p_next
            s += p_curr * p_curr
            a = abs(p_curr)
            if a > 1e100:
                p_prev /= a
                p_curr /= a
                s /= a * a
                log_scale += 2.0 * math.log(a)
        w[k] = math.exp(-(math.log(s) + log_scale))
    return w


@njit(cache=True)
def _twisted_vector(d, e, lam, pivmin, dp, dm, z):
    """Fill z with the eigenvector guess at ``lam`` (z_r = 1); returns |z|^2."""
    n = d.shape[0]
    v = d[0] - lam
    dp[0] = v if abs(v) >= pivmin else -pivmin
    for i in range(1, n):
        v = d[i] - lam - e[i - 1] * e[i - 1] / dp[i - 1]
        dp[i] = v if abs(v) >= pivmin else -pivmin
    v = d[n - 1] - lam
    dm[n - 1] = v if abs(v) >= pivmin else -pivmin
    for i in range(n - 2, -1, -1):
        v = d[i] - lam - e[i] * e[i] / dm[i + 1]
        dm[i] = v if abs(v) >= pivmin else -pivmin
    r = 0
    best = np.inf
    for i in range(n):
        g = abs(dp[i] + dm[i] - (d[i] - lam))
        if g < best:
            best = g
            r = i
    z[r] = 1.0
    s = 1.0
    for i in range(r - 1, -1, -1):
        z[i] = -e[i] * z[i + 1] / dp[i]
        s += z[i] * z[i]
    for i in range(r + 1, n):
        z[i] = -e[i - 1] * z[i - 1] / dm[i]
        s += z[i] * z[i]
    return s


@njit(cache=True)
def twisted_weights(d, e, lams, pivmin, max_shift):
    """Site-0 weights z_0^2 / |z|^2 from a twisted factorization of T - lambda.

    The eigenvector is the polynomial sequence P_n(lambda), but it is built
    from both ends: forward pivots above the twist index r, backward pivots
    below it, with r where |gamma_r| is smallest. Each half then only
    follows decaying ratios. The weight moves by about w * shift / gap when
    lambda is off by ``shift``; where that could exceed 1e-15 one
    Rayleigh-quotient step (accepted if it moves lambda by at most
    ``max_shift``; 0 disables it) removes the first-order error. Ends of
    ``lams`` always refine since their outer neighbour is unknown.
    """
    n = d.shape[0]
    m = lams.shape[0]
    w = np.empty(m)
    dp = np.empty(n)
    dm = np.empty(n)
    z = np.empty(n)
    for k in range(m):
        if n == 1:
            w[k] = 1.0
            continue
        lam = lams[k]
        s = _twisted_vector(d, e, lam, pivmin, dp, dm, z)
        gap = 0.0
        if 0 < k < m - 1:
            gap = min(lam - lams[k - 1], lams[k + 1] - lam)
        if gap > 0.0 and z[0] * z[0] / s * max_shift < 1e-15 * gap:
            w[k] = z[0] * z[0] / s
            continue
        q = 0.0
        for i in range(n):
            q += d[i] * z[i] * z[i]
        for i in range(n - 1):
            q += 2.0 * e[i] * z[i] * z[i + 1]
        ray = q / s
        if ray != lam and abs(ray - lam) <= max_shift:
            s = _twisted_vector(d, e, ray, pivmin, dp, dm, z)
        w[k] = z[0] * z[0] / s
    return w


@njit(cache=True)
def window_masses(atoms, weights, center, deltas):
    """Mass in the open windows (center - delta, center + delta)."""
    out = np.empty(deltas.shape[0])
    for j in range(deltas.shape[0]):
        lo = np.searchsorted(atoms, center - deltas[j], side="right")
        hi = np.searchsorted(atoms, center + deltas[j], side="left")
        acc = 0.0
        for i in range(lo, hi):
            acc += weights[i]
        out[j] = acc
    return out
