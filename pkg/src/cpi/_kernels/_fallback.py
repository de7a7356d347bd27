"""Pure-Python/numpy versions of the compiled kernels in ``_core.pyx``.

Same algorithms, same operation order, so results match the compiled path
(exactly for trees and sign flips, to round-off for coordinate descent).
"""
from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class _SplitMix:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next(self) -> int:
        self.state = (self.state + GOLDEN) & _MASK
        return _mix(self.state)


def lasso_cd(X, resid, beta, col_sq, lam, tol, max_sweeps):
    n, p = X.shape
    inv_n = 1.0 / n
    sweeps = 0
    active_only = False
    while sweeps < max_sweeps:
        sweeps += 1
        max_change = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            if active_only and beta[j] == 0.0:
                continue
            xj = X[:, j]
            rho = float(xj @ resid) * inv_n + col_sq[j] * beta[j]
            if rho > lam:
                new = (rho - lam) / col_sq[j]
            elif rho < -lam:
                new = (rho + lam) / col_sq[j]
            else:
                new = 0.0
            delta = new - beta[j]
            if delta != 0.0:
                resid -= delta * xj
                beta[j] = new
                change = col_sq[j] * delta * delta
                if change > max_change:
                    max_change = change
        if max_change < tol:
            if not active_only:
                break
            active_only = False
        else:
            active_only = True
    return sweeps


def build_tree(X, y, sample, mtry, min_node, max_depth, seed):
    p = X.shape[1]
    m_all = len(sample)
    cap = 2 * m_all + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)

    rng = _SplitMix(seed)
    samples = np.array(sample, dtype=np.int64)
    stack = [(0, 0, m_all, 0)]
    n_nodes = 1
    while stack:
        node, start, end, depth = stack.pop()
        m = end - start
        idx = samples[start:end]
        y_node = y[idx]
        s = float(np.cumsum(y_node)[-1])
        value[node] = s / m
        if m < 2 or m < min_node or y_node.min() == y_node.max():
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue
        parent = s * s / m
        best = parent + 1e-12 * abs(parent) + 1e-14
        best_f = -1
        best_thr = 0.0
        feats = list(range(p))
        for c in range(mtry):
            j = c + rng.next() % (p - c)
            feats[c], feats[j] = feats[j], feats[c]
            f = feats[c]
            v = X[idx, f]
            order = np.lexsort((idx, v))
            vs = v[order]
            if vs[0] == vs[-1]:
                continue
            sl = np.cumsum(y[idx[order]])[:-1]
            cut = np.nonzero(vs[:-1] < vs[1:])[0]
            if cut.size == 0:
                continue
            sl = sl[cut]
            nl = cut + 1.0
            sr = s - sl
            scores = sl * sl / nl + sr * sr / (m - nl)
            k = int(np.argmax(scores))
            if scores[k] > best:
                best = float(scores[k])
                best_f = f
                kk = cut[k]
                thr = 0.5 * (vs[kk] + vs[kk + 1])
                if thr == vs[kk + 1]:
                    thr = vs[kk]
                best_thr = float(thr)
        if best_f < 0:
            continue
        v = X[idx, best_f]
        order = np.lexsort((idx, v))
        samples[start:end] = idx[order]
        nl = int(np.count_nonzero(v <= best_thr))
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack.append((n_nodes + 1, start + nl, end, depth + 1))
        stack.append((n_nodes, start, start + nl, depth + 1))
        n_nodes += 2
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(), value[:n_nodes].copy())


def predict_forest(X, feature, threshold, left, right, value, roots, vote):
    n = X.shape[0]
    acc = np.zeros(n)
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        while True:
            f = feature[node]
            inner = f >= 0
            if not inner.any():
                break
            r = rows[inner]
            nd = node[inner]
            go_left = X[r, f[inner]] <= threshold[nd]
            node[inner] = np.where(go_left, left[nd], right[nd])
        v = value[node]
        acc += (v >= 0.5).astype(float) if vote else v
    return acc / len(roots)


def signflip_subset_sums(d, n_draws, seed, chunk=4096):
    d = np.asarray(d, dtype=np.float64)
    n = d.shape[0]
    nwords = (n + 63) // 64
    out = np.empty(n_draws)
    seed = np.uint64(seed & _MASK)
    for b0 in range(0, n_draws, chunk):
        b = np.arange(b0, min(b0 + chunk, n_draws), dtype=np.uint64)
        acc = np.zeros(b.shape[0])
        word = None
        for i in range(n):
            if i % 64 == 0:
                counter = b * np.uint64(nwords) + np.uint64(i // 64 + 1)
                word = _mix_array(seed + counter * np.uint64(GOLDEN))
            bit = (word >> np.uint64(i % 64)) & np.uint64(1)
            acc = np.where(bit == 1, acc + d[i], acc)
        out[b0:b0 + b.shape[0]] = acc
    return out
