# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: lasso coordinate descent, CART growth and forest
prediction, and Monte Carlo sign-flip sums.

Every routine here has a line-for-line twin in ``_fallback.py``; the two are
expected to agree to floating-point round-off (bit-for-bit for the tree and
sign-flip routines, which share the splitmix64 counter stream).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from libc.stdlib cimport malloc, free, qsort
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef extern from *:
    """
    #define CPI_GOLDEN 0x9E3779B97F4A7C15ULL
    #define CPI_MIX1 0xBF58476D1CE4E5B9ULL
    #define CPI_MIX2 0x94D049BB133111EBULL
    """
    uint64_t CPI_GOLDEN
    uint64_t CPI_MIX1
    uint64_t CPI_MIX2


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * CPI_MIX1
    z = (z ^ (z >> 27)) * CPI_MIX2
    return z ^ (z >> 31)


cdef inline uint64_t _next(uint64_t *state) noexcept nogil:
    state[0] += CPI_GOLDEN
    return _mix(state[0])


# ---------------------------------------------------------------- lasso

def lasso_cd(const double[::1, :] X, double[::1] resid, double[::1] beta,
             const double[::1] col_sq, double lam, double tol, int max_sweeps):
    """Cyclic coordinate descent for (1/2n)||r||^2 + lam*||beta||_1.

    ``resid`` and ``beta`` are updated in place; ``resid`` must equal
    ``y - X @ beta`` on entry. Stops once a full sweep moves no coordinate's
    loss contribution ``col_sq * dbeta**2`` by ``tol`` or more. Returns the
    number of sweeps used.
    """
    cdef Py_ssize_t n = X.shape[0], p = X.shape[1]
    cdef Py_ssize_t i, j
    cdef int sweeps = 0
    cdef bint active_only = False
    cdef double rho, new, delta, change, max_change
    cdef double inv_n = 1.0 / n

    with nogil:
        while sweeps < max_sweeps:
            sweeps += 1
            max_change = 0.0
            for j in range(p):
                if col_sq[j] == 0.0:
                    continue
                if active_only and beta[j] == 0.0:
                    continue
                rho = 0.0
                for i in range(n):
                    rho = rho + X[i, j] * resid[i]
                rho = rho * inv_n + col_sq[j] * beta[j]
                if rho > lam:
                    new = (rho - lam) / col_sq[j]
                elif rho < -lam:
                    new = (rho + lam) / col_sq[j]
                else:
                    new = 0.0
                delta = new - beta[j]
                if delta != 0.0:
                    for i in range(n):
                        resid[i] = resid[i] - delta * X[i, j]
                    beta[j] = new
                    change = col_sq[j] * delta * delta
                    if change > max_change:
                        max_change = change
            if max_change < tol:
                if not active_only:
                    break
                # active set settled; confirm with a full sweep
                active_only = False
            else:
                active_only = True
    return sweeps


# ---------------------------------------------------------------- trees

ctypedef struct ValIdx:
    double v
    int64_t i


cdef int _cmp_validx(const void *a, const void *b) noexcept nogil:
    cdef const ValIdx *x = <const ValIdx *> a
    cdef const ValIdx *y = <const ValIdx *> b
    if x.v < y.v:
        return -1
    if x.v > y.v:
        return 1
    if x.i < y.i:
        return -1
    if x.i > y.i:
        return 1
    return 0


def build_tree(const double[::1, :] X, const double[::1] y,
               const int64_t[::1] sample, int mtry, int min_node,
               int max_depth, uint64_t seed):
    """Grow one CART tree on the rows listed in ``sample``.

    The split score ``sL^2/nL + sR^2/nR`` is the variance-reduction
    criterion; for 0/1 targets it is also the Gini-decrease criterion.
    ``max_depth < 0`` means unlimited. Returns node arrays
    ``(feature, threshold, left, right, value)``; leaves have feature -1.
    """
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t m_all = sample.shape[0]
    cdef Py_ssize_t cap = 2 * m_all + 1
    feature_arr = np.full(cap, -1, dtype=np.int64)
    threshold_arr = np.zeros(cap, dtype=np.float64)
    left_arr = np.full(cap, -1, dtype=np.int64)
    right_arr = np.full(cap, -1, dtype=np.int64)
    value_arr = np.zeros(cap, dtype=np.float64)
    cdef int64_t[::1] feature = feature_arr
    cdef double[::1] threshold = threshold_arr
    cdef int64_t[::1] left = left_arr
    cdef int64_t[::1] right = right_arr
    cdef double[::1] value = value_arr

    cdef int64_t *samples = <int64_t *> malloc(m_all * sizeof(int64_t))
    cdef ValIdx *pairs = <ValIdx *> malloc(m_all * sizeof(ValIdx))
    cdef int64_t *feats = <int64_t *> malloc(p * sizeof(int64_t))
    cdef int64_t *st_node = <int64_t *> malloc(cap * sizeof(int64_t))
    cdef int64_t *st_start = <int64_t *> malloc(cap * sizeof(int64_t))
    cdef int64_t *st_end = <int64_t *> malloc(cap * sizeof(int64_t))
    cdef int64_t *st_depth = <int64_t *> malloc(cap * sizeof(int64_t))
    if (samples == NULL or pairs == NULL or feats == NULL or st_node == NULL
            or st_start == NULL or st_end == NULL or st_depth == NULL):
        free(samples); free(pairs); free(feats)
        free(st_node); free(st_start); free(st_end); free(st_depth)
        raise MemoryError()

    cdef uint64_t state = seed
    cdef Py_ssize_t k, c, top, n_nodes, nl
    cdef int64_t node, start, end, depth, f, tmp, best_f, j
    cdef double s, sl, sr, score, best, parent, best_thr, ymin, ymax, yv, thr
    cdef Py_ssize_t m

    with nogil:
        for k in range(m_all):
            samples[k] = sample[k]
        top = 0
        st_node[0] = 0; st_start[0] = 0; st_end[0] = m_all; st_depth[0] = 0
        top = 1
        n_nodes = 1
        while top > 0:
            top -= 1
            node = st_node[top]; start = st_start[top]
            end = st_end[top]; depth = st_depth[top]
            m = end - start
            s = 0.0
            ymin = y[samples[start]]
            ymax = ymin
            for k in range(start, end):
                yv = y[samples[k]]
                s = s + yv
                if yv < ymin:
                    ymin = yv
                if yv > ymax:
                    ymax = yv
            value[node] = s / m
            if m < 2 or m < min_node or ymin == ymax:
                continue
            if max_depth >= 0 and depth >= max_depth:
                continue
            parent = s * s / m
            best = parent + 1e-12 * fabs(parent) + 1e-14
            best_f = -1
            best_thr = 0.0
            for k in range(p):
                feats[k] = k
            for c in range(mtry):
                j = c + <int64_t>(_next(&state) % <uint64_t>(p - c))
                tmp = feats[c]; feats[c] = feats[j]; feats[j] = tmp
                f = feats[c]
                for k in range(m):
                    pairs[k].v = X[samples[start + k], f]
                    pairs[k].i = samples[start + k]
                qsort(pairs, m, sizeof(ValIdx), _cmp_validx)
                if pairs[0].v == pairs[m - 1].v:
                    continue
                sl = 0.0
                for k in range(m - 1):
                    sl = sl + y[pairs[k].i]
                    if pairs[k].v < pairs[k + 1].v:
                        sr = s - sl
                        score = sl * sl / (k + 1) + sr * sr / (m - k - 1)
                        if score > best:
                            best = score
                            best_f = f
                            thr = 0.5 * (pairs[k].v + pairs[k + 1].v)
                            if thr == pairs[k + 1].v:
                                thr = pairs[k].v
                            best_thr = thr
            if best_f < 0:
                continue
            for k in range(m):
                pairs[k].v = X[samples[start + k], best_f]
                pairs[k].i = samples[start + k]
            qsort(pairs, m, sizeof(ValIdx), _cmp_validx)
            nl = 0
            for k in range(m):
                samples[start + k] = pairs[k].i
                if pairs[k].v <= best_thr:
                    nl += 1
            feature[node] = best_f
            threshold[node] = best_thr
            left[node] = n_nodes
            right[node] = n_nodes + 1
            st_node[top] = n_nodes + 1; st_start[top] = start + nl
            st_end[top] = end; st_depth[top] = depth + 1
            top += 1
            st_node[top] = n_nodes; st_start[top] = start
            st_end[top] = start + nl; st_depth[top] = depth + 1
            top += 1
            n_nodes += 2

    free(samples); free(pairs); free(feats)
    free(st_node); free(st_start); free(st_end); free(st_depth)
    return (feature_arr[:n_nodes].copy(), threshold_arr[:n_nodes].copy(),
            left_arr[:n_nodes].copy(), right_arr[:n_nodes].copy(),
            value_arr[:n_nodes].copy())


def predict_forest(const double[:, ::1] X, const int64_t[::1] feature,
                   const double[::1] threshold, const int64_t[::1] left,
                   const int64_t[::1] right, const double[::1] value,
                   const int64_t[::1] roots, bint vote):
    """Average leaf values (or 0/1 votes, leaf value >= 0.5) over trees."""
    cdef Py_ssize_t n = X.shape[0], n_trees = roots.shape[0]
    cdef Py_ssize_t i, t
    cdef int64_t node
    cdef double acc, v
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            acc = 0.0
            for t in range(n_trees):
                node = roots[t]
                while feature[node] >= 0:
                    if X[i, feature[node]] <= threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                v = value[node]
                if vote:
                    if v >= 0.5:
                        acc = acc + 1.0
                else:
                    acc = acc + v
            out[i] = acc / n_trees
    return out_arr


# ---------------------------------------------------------------- sign flips

def signflip_subset_sums(const double[::1] d, Py_ssize_t n_draws, uint64_t seed):
    """Sum of the entries of ``d`` selected by each of ``n_draws`` random
    subsets. Subset membership of entry i in draw b is bit (i % 64) of the
    counter-based word ``mix(seed + (b*nwords + i//64 + 1) * GOLDEN)``.
    """
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t nwords = (n + 63) // 64
    cdef Py_ssize_t b, i
    cdef uint64_t word = 0, counter
    cdef double acc
    out_arr = np.empty(n_draws, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for b in range(n_draws):
            acc = 0.0
            for i in range(n):
                if i % 64 == 0:
                    counter = <uint64_t>(b * nwords + i // 64 + 1)
                    word = _mix(seed + counter * CPI_GOLDEN)
                if (word >> (i % 64)) & 1:
                    acc = acc + d[i]
            out[b] = acc
    return out_arr
