"""Independent path-enumeration oracle for the drift-trellis BCJR.

Computes exact symbolwise posteriors for tiny configurations by brute force:
enumerate every input vector v, score p(y | enc(v)) with a quadratic
edit-path DP over (input position, output position), and marginalize. No
drift window, no trellis sections — only the branch family (per-symbol
insertion cap i_max with the geometric tail folded into the last branch)
is shared with the production decoder, as required for a matched metric.
"""

import itertools

import numpy as np

from dnastore.channel import IdsParams
from dnastore.strand import CodeConfig, encode_strand


def branch_weights(ids: IdsParams, i_max: int):
    """(c_del, c_tx) recomputed from first principles."""
    def w_ins(j):
        if j < i_max:
            return ids.p_ins**j
        return ids.p_ins**i_max / (1.0 - ids.p_ins)

    c_del = [w_ins(k) * ids.p_del * 0.25**k for k in range(i_max + 1)] + [0.0]
    c_tx = [0.0] + [w_ins(k - 1) * ids.p_trans * 0.25 ** (k - 1) for k in range(1, i_max + 2)]
    return c_del, c_tx


def path_likelihood(x, y, ids: IdsParams, i_max: int) -> float:
    """p(y | x) by dynamic programming over all IDS event sequences."""
    c_del, c_tx = branch_weights(ids, i_max)
    n, m = len(x), len(y)
    f = np.zeros((n + 1, m + 1))
    f[0, 0] = 1.0
    for i in range(n):
        for j in range(m + 1):
            v = f[i, j]
            if v == 0.0:
                continue
            for k in range(i_max + 2):
                if j + k > m:
                    break
                g = c_del[k]
                if k >= 1:
                    if y[j + k - 1] == x[i]:
                        g += c_tx[k] * (1.0 - ids.p_sub)
                    else:
                        g += c_tx[k] * (ids.p_sub / 3.0)
                f[i + 1, j + k] += v * g
    return float(f[n, m])


def enumerate_inputs(cfg: CodeConfig):
    """All (v, encoded bare strand) pairs; v = head digits | data | tail digits."""
    k_half = cfg.kix // 2
    zero_off = np.zeros(cfg.strand_len, dtype=np.uint8)
    for v in itertools.product(range(4), repeat=cfg.v_len):
        head = v[:k_half]
        data = np.array(v[k_half: k_half + cfg.block_len], dtype=np.uint8)
        tail = v[k_half + cfg.block_len:]
        index = 0
        for d in head + tail:
            index = (index << 2) | d
        yield np.array(v, dtype=np.uint8), encode_strand(data, index, cfg, zero_off)


def oracle_apps(cfg: CodeConfig, ids: IdsParams, y, offset, i_max: int) -> np.ndarray:
    """Exact APP matrix (v_len, 4) by full enumeration over inputs.

    All inputs are a priori uniform (uniform data symbols, uniform index),
    matching the decoder's priors.
    """
    y = np.asarray(y, dtype=np.uint8)
    app = np.zeros((cfg.v_len, 4))
    for v, bare in enumerate_inputs(cfg):
        x = np.bitwise_xor(bare, np.asarray(offset, dtype=np.uint8))
        like = path_likelihood(x, y, ids, i_max)
        if like == 0.0:
            continue
        for t, a in enumerate(v):
            app[t, a] += like
    z = app.sum(axis=1, keepdims=True)
    if np.any(z <= 0):
        raise ZeroDivisionError("oracle: no input explains this read")
    return app / z
