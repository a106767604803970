"""numba kernels for skip-gram negative-sampling SGD.

One call runs one epoch. Sessions are split into chunks; chunks are
processed with ``prange`` in the parallel build (lock-free, racy updates)
and sequentially in the serial build, which is bit-reproducible.
"""

import math

import numba
import numpy as np

_MAX_EXP = 30.0
_NEG_RETRIES = 8


@numba.njit(inline="always")
def _splitmix(state):
    # returns (new_state, output); uint64 wraparound is intended
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@numba.njit(inline="always")
def _uniform(state):
    state, z = _splitmix(state)
    return state, float(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(inline="always")
def _log_sigmoid(x):
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


@numba.njit(inline="always")
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _epoch(ids, offsets, chunk_bounds, syn0, syn1, neg_cdf, keep_prob,
           window, negatives, shrink, lr_start, lr_end, states, loss_out, pairs_out):
    n_chunks = chunk_bounds.shape[0] - 1
    dim = syn0.shape[1]
    for c in numba.prange(n_chunks):
        state = states[c]
        s_lo = chunk_bounds[c]
        s_hi = chunk_bounds[c + 1]
        total = offsets[s_hi] - offsets[s_lo]
        seen = 0
        loss = 0.0
        pairs = 0
        work = np.empty(dim, dtype=np.float32)
        buf = np.empty(0, dtype=np.int32)
        for s in range(s_lo, s_hi):
            a = offsets[s]
            b = offsets[s + 1]
            if buf.shape[0] < b - a:
                buf = np.empty(b - a, dtype=np.int32)
            n = 0
            for p in range(a, b):
                w = ids[p]
                if keep_prob[w] < 1.0:
                    state, r = _uniform(state)
                    if r >= keep_prob[w]:
                        continue
                buf[n] = w
                n += 1
            frac = seen / total if total > 0 else 0.0
            lr = lr_start + (lr_end - lr_start) * frac
            seen += b - a
            for i in range(n):
                center = buf[i]
                span = window
                if shrink:
                    state, z = _splitmix(state)
                    span = window - int(z % np.uint64(window))
                lo = max(0, i - span)
                hi = min(n, i + span + 1)
                for j in range(lo, hi):
                    if j == i:
                        continue
                    context = buf[j]
                    for k in range(dim):
                        work[k] = np.float32(0.0)
                    for t in range(negatives + 1):
                        if t == 0:
                            target = context
                            label = 1.0
                        else:
                            target = -1
                            for _ in range(_NEG_RETRIES):
                                state, r = _uniform(state)
                                cand = np.searchsorted(neg_cdf, r, side="right")
                                if cand >= neg_cdf.shape[0]:
                                    cand = neg_cdf.shape[0] - 1
                                if cand != context:
                                    target = cand
                                    break
                            if target < 0:
                                continue
                            label = 0.0
                        dot = np.float32(0.0)
                        for k in range(dim):
                            dot += syn0[center, k] * syn1[target, k]
                        if dot > _MAX_EXP:
                            dot = _MAX_EXP
                        elif dot < -_MAX_EXP:
                            dot = -_MAX_EXP
                        if label > 0.0:
                            loss -= _log_sigmoid(dot)
                        else:
                            loss -= _log_sigmoid(-dot)
                        g = np.float32((label - _sigmoid(dot)) * lr)
                        for k in range(dim):
                            work[k] += g * syn1[target, k]
                            syn1[target, k] += g * syn0[center, k]
                    for k in range(dim):
                        syn0[center, k] += work[k]
                    pairs += 1
        states[c] = state
        loss_out[c] = loss
        pairs_out[c] = pairs


# fastmath lets the dot products vectorize; results stay deterministic per build
epoch_serial = numba.njit(cache=True, nogil=True, fastmath=True)(_epoch)
epoch_parallel = numba.njit(cache=True, nogil=True, fastmath=True, parallel=True)(_epoch)


def seed_states(seed: int, n: int) -> np.ndarray:
    seq = np.random.SeedSequence(seed)
    return seq.generate_state(n, dtype=np.uint64)
