"""Compiled inner loops of the discrete-time sampler.

Days are stored as offsets ``d = t - floor`` into arrays of length ``D``:
``new_inf[d]`` counts infections on day ``d``, ``Y[d]`` infectives and
``X[d]`` susceptibles on day ``d``. ``beta[d]`` is only meaningful on the
current grid ``[lo, end]`` (``end`` is ``r_n - 1``).
"""
import numpy as np
from numba import njit

# slots of the integer status vector shared with Python
KAPPA, LO, END, FIXED, NO_DATA, ACCEPTED, PROPOSED, FLOOR_HITS, PEND_KAPPA, PEND_START = range(10)
STATUS_SIZE = 10


@njit(cache=True)
def log_h(new_inf, Y, X, beta, start, end):
    """Log of the infection-process part of the discrete likelihood."""
    s = 0.0
    for d in range(start, end + 1):
        lam = beta[d] * Y[d]
        c = new_inf[d + 1]
        if c > 0:
            if lam <= 0.0:
                return -np.inf
            s += c * np.log(-np.expm1(-lam))
        s -= lam * X[d + 1]
    return s


@njit(cache=True)
def _shift(a, b, new_inf, Y, X):
    if b < a:
        for d in range(b, a):
            Y[d] += 1
            X[d] -= 1
    else:
        for d in range(a, b):
            Y[d] -= 1
            X[d] += 1
    new_inf[a] -= 1
    new_inf[b] += 1


@njit(cache=True)
def choose_kappa(j, b, inf, kappa):
    """New initial-infective label if individual ``j`` moves to day ``b``.

    Returns -1 when the move would leave two initial infectives.
    """
    n = inf.size
    if j != kappa:
        ik = inf[kappa]
        if b == ik:
            return -1
        return j if b < ik else kappa
    if n == 1:
        return j
    mo = 1 << 62
    arg = -1
    cnt = 0
    for k in range(n):
        if k == j:
            continue
        if inf[k] < mo:
            mo = inf[k]
            arg = k
            cnt = 1
        elif inf[k] == mo:
            cnt += 1
    if b < mo:
        return j
    if b == mo or cnt > 1:
        return -1
    return arg


@njit(cache=True)
def attempt(j, b, new_kappa, new_start, u, inf, new_inf, Y, X, beta, st, cur):
    """Metropolis step for moving ``j`` to day ``b`` given the relabelling."""
    a = inf[j]
    _shift(a, b, new_inf, Y, X)
    inf[j] = b
    if st[NO_DATA]:
        lh = 0.0
    else:
        lh = log_h(new_inf, Y, X, beta, new_start, st[END])
    if lh > -np.inf and np.log(u) < lh - cur[0]:
        st[KAPPA] = new_kappa
        if not st[FIXED]:
            st[LO] = new_start
        cur[0] = lh
        st[ACCEPTED] += 1
        return True
    _shift(b, a, new_inf, Y, X)
    inf[j] = a
    return False


@njit(cache=True)
def infection_moves(first, js, ws, us, inf, rem, new_inf, Y, X, beta, st, cur):
    """Run proposals ``first..`` until done or a grid extension is needed.

    Returns the index of the proposal that needs the grid extended below
    ``st[LO]`` (its relabelling is left in ``st[PEND_*]``), or ``len(js)``.
    """
    for m in range(first, js.size):
        j = js[m]
        b = rem[j] - ws[m]
        st[PROPOSED] += 1
        if b < 0:
            st[FLOOR_HITS] += 1
            continue
        kap = choose_kappa(j, b, inf, st[KAPPA])
        if kap < 0:
            continue
        new_start = inf[kap] if kap != j else b
        if not st[FIXED] and new_start < st[LO]:
            st[PEND_KAPPA] = kap
            st[PEND_START] = new_start
            return m
        attempt(j, b, kap, new_start, us[m], inf, new_inf, Y, X, beta, st, cur)
    return js.size
