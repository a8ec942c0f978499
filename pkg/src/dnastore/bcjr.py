"""Joint index/inner MAP decoding over the drift trellis.

Hidden state is the drift d = (symbols emitted) - (symbols consumed). Data
symbols are one trellis section each (two channel positions at marker
positions); each index half is a single section whose branches are the
half-codebook entries, which embeds the index-code constraint in the
trellis. Recursions run in the probability domain with per-section
renormalization, which is numerically equivalent to exact log-sum-exp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .channel import IdsParams
from .strand import CodeConfig

LLR_CAP = math.log(1e30)  # ~69.08, matches the 1e-30 probability floor
PROB_FLOOR = 1e-30

SEC_DATA = 0
SEC_MARKER = 1
SEC_INDEX = 2


class UndecodableRead(Exception):
    """Read length outside the admissible drift window."""


@dataclass(frozen=True)
class DriftTrellisConfig:
    d_max: int
    i_max: int = 2

    def __post_init__(self):
        if self.d_max < 0 or self.i_max < 1:
            raise ValueError("d_max must be >= 0 and i_max >= 1")


def default_d_max(ids: IdsParams, strand_len: int) -> int:
    """Smallest window a +-4.9 sigma drift excursion stays inside, >= 5."""
    step_var = ids.p_ins / (1.0 - ids.p_ins) ** 2 + ids.p_del * (1.0 - ids.p_del)
    return max(5, math.ceil(4.9 * math.sqrt(step_var * strand_len)))


def default_trellis(ids: IdsParams, cfg: CodeConfig, i_max: int = 2) -> DriftTrellisConfig:
    return DriftTrellisConfig(d_max=default_d_max(ids, cfg.strand_len), i_max=i_max)


def _branch_coeffs(ids: IdsParams, i_max: int):
    """c_del[k], c_tx[k] for a branch emitting k symbols from one consumed
    symbol. The geometric insertion tail beyond i_max is folded into the
    last insertion branch so the branch family sums to 1."""
    c_del = np.zeros(i_max + 2)
    c_tx = np.zeros(i_max + 2)
    w_ins = np.array(
        [ids.p_ins**j if j < i_max else ids.p_ins**i_max / (1.0 - ids.p_ins) for j in range(i_max + 1)]
    )
    for k in range(i_max + 1):
        c_del[k] = w_ins[k] * ids.p_del * 0.25**k
    for k in range(1, i_max + 2):
        c_tx[k] = w_ins[k - 1] * ids.p_trans * 0.25 ** (k - 1)
    return c_del, c_tx


def section_plan(cfg: CodeConfig):
    """(kinds, start channel positions) for head, Lo data sections, tail."""
    n_half = cfg.codebook.n_half
    kinds = [SEC_INDEX]
    pos = [0]
    p = n_half
    markers = set(cfg.marker_positions)
    for t in range(1, cfg.block_len + 1):
        if t in markers:
            kinds.append(SEC_MARKER)
            pos.append(p)
            p += 2
        else:
            kinds.append(SEC_DATA)
            pos.append(p)
            p += 1
    kinds.append(SEC_INDEX)
    pos.append(p)
    assert p + n_half == cfg.strand_len
    return np.array(kinds, dtype=np.int8), np.array(pos, dtype=np.int64)


@njit(cache=True)
def _step_known(a_in, out, sym, p, y, ny, D, c_del, c_tx, p_sub):
    """One channel position with known channel symbol; accumulates into out."""
    n_states = 2 * D + 1
    ik = len(c_del)  # i_max + 2
    for di in range(n_states):
        av = a_in[di]
        if av == 0.0:
            continue
        d = di - D
        e = p + d
        if e < 0:
            continue
        for k in range(ik):
            dpi = di + (k - 1)
            if dpi < 0 or dpi >= n_states:
                continue
            if e + k > ny:
                break
            g = c_del[k]
            if k >= 1:
                obs = y[e + k - 1]
                if obs == sym:
                    g += c_tx[k] * (1.0 - p_sub)
                else:
                    g += c_tx[k] * (p_sub / 3.0)
            if g > 0.0:
                out[dpi] += av * g


@njit(cache=True)
def _step_known_back(b_in, out, sym, p, y, ny, D, c_del, c_tx, p_sub):
    """Backward analogue of _step_known: out[d] = sum_k gamma * b_in[d']."""
    n_states = 2 * D + 1
    ik = len(c_del)
    for di in range(n_states):
        d = di - D
        e = p + d
        if e < 0:
            continue
        acc = 0.0
        for k in range(ik):
            dpi = di + (k - 1)
            if dpi < 0 or dpi >= n_states:
                continue
            if e + k > ny:
                break
            bv = b_in[dpi]
            if bv == 0.0:
                continue
            g = c_del[k]
            if k >= 1:
                obs = y[e + k - 1]
                if obs == sym:
                    g += c_tx[k] * (1.0 - p_sub)
                else:
                    g += c_tx[k] * (p_sub / 3.0)
            acc += bv * g
        out[di] += acc


@njit(cache=True)
def _forward_backward(y, offset, kinds, pos, codebook, D, c_del, c_tx, p_sub):
    """Full forward/backward pass. Returns (alpha, beta, ok, logpy_f, logpy_b).

    alpha[t], beta[t] are the normalized state distributions at section
    boundary t; logpy_* are the accumulated log evidence from each pass
    (equal up to numerics, used as a consistency check).
    """
    ny = len(y)
    lam = len(offset)
    n_sec = len(kinds)
    n_states = 2 * D + 1
    n_cw, n_half = codebook.shape
    dfin = ny - lam

    alpha = np.zeros((n_sec + 1, n_states))
    beta = np.zeros((n_sec + 1, n_states))
    alpha[0, D] = 1.0
    beta[n_sec, dfin + D] = 1.0
    logpy_f = 0.0
    logpy_b = 0.0
    ok = True

    tmp1 = np.zeros(n_states)
    tmp2 = np.zeros(n_states)

    # Average over a uniform symbol of the transmit likelihood is 1/4, so
    # single-symbol data sections have observation-independent recursions.
    ik = len(c_del)
    g_avg = np.zeros(ik)
    for k in range(ik):
        g_avg[k] = c_del[k] + 0.25 * c_tx[k]

    for t in range(n_sec):
        kind = kinds[t]
        p = pos[t]
        out = alpha[t + 1]
        if kind == SEC_DATA:
            a_in = alpha[t]
            for di in range(n_states):
                av = a_in[di]
                if av == 0.0:
                    continue
                e = p + (di - D)
                if e < 0:
                    continue
                for k in range(ik):
                    dpi = di + (k - 1)
                    if dpi < 0 or dpi >= n_states:
                        continue
                    if e + k > ny:
                        break
                    out[dpi] += av * g_avg[k]
        elif kind == SEC_MARKER:
            for a in range(4):
                s0 = a ^ offset[p]
                s1 = a ^ offset[p + 1]
                tmp1[:] = 0.0
                _step_known(alpha[t], tmp1, s0, p, y, ny, D, c_del, c_tx, p_sub)
                tmp2[:] = 0.0
                _step_known(tmp1, tmp2, s1, p + 1, y, ny, D, c_del, c_tx, p_sub)
                for di in range(n_states):
                    out[di] += 0.25 * tmp2[di]
        else:  # SEC_INDEX
            prior = 1.0 / n_cw
            for c in range(n_cw):
                tmp1[:] = alpha[t]
                for q in range(n_half):
                    s = codebook[c, q] ^ offset[p + q]
                    tmp2[:] = 0.0
                    _step_known(tmp1, tmp2, s, p + q, y, ny, D, c_del, c_tx, p_sub)
                    tmp1[:] = tmp2
                for di in range(n_states):
                    out[di] += prior * tmp1[di]
        z = out.sum()
        if z <= 0.0:
            ok = False
            break
        out /= z
        logpy_f += math.log(z)

    if ok and alpha[n_sec, dfin + D] <= 0.0:
        ok = False
    if ok:
        logpy_f += math.log(alpha[n_sec, dfin + D])
        for t in range(n_sec - 1, -1, -1):
            kind = kinds[t]
            p = pos[t]
            out = beta[t]
            if kind == SEC_DATA:
                b_in = beta[t + 1]
                for di in range(n_states):
                    e = p + (di - D)
                    if e < 0:
                        continue
                    acc = 0.0
                    for k in range(ik):
                        dpi = di + (k - 1)
                        if dpi < 0 or dpi >= n_states:
                            continue
                        if e + k > ny:
                            break
                        acc += b_in[dpi] * g_avg[k]
                    out[di] += acc
            elif kind == SEC_MARKER:
                for a in range(4):
                    s0 = a ^ offset[p]
                    s1 = a ^ offset[p + 1]
                    tmp1[:] = 0.0
                    _step_known_back(beta[t + 1], tmp1, s1, p + 1, y, ny, D, c_del, c_tx, p_sub)
                    tmp2[:] = 0.0
                    _step_known_back(tmp1, tmp2, s0, p, y, ny, D, c_del, c_tx, p_sub)
                    for di in range(n_states):
                        out[di] += 0.25 * tmp2[di]
            else:
                prior = 1.0 / n_cw
                for c in range(n_cw):
                    tmp1[:] = beta[t + 1]
                    for q in range(n_half - 1, -1, -1):
                        s = codebook[c, q] ^ offset[p + q]
                        tmp2[:] = 0.0
                        _step_known_back(tmp1, tmp2, s, p + q, y, ny, D, c_del, c_tx, p_sub)
                        tmp1[:] = tmp2
                    for di in range(n_states):
                        out[di] += prior * tmp1[di]
            z = out.sum()
            if z <= 0.0:
                ok = False
                break
            out /= z
            logpy_b += math.log(z)
        if ok:
            if beta[0, D] <= 0.0:
                ok = False
            else:
                logpy_b += math.log(beta[0, D])
    return alpha, beta, ok, logpy_f, logpy_b


@njit(cache=True)
def _extract_apps(y, offset, kinds, pos, codebook, D, c_del, c_tx, p_sub, alpha, beta):
    """Symbolwise posteriors per section from the boundary distributions.

    Returns (data_app[n_sec, 4], idx_post[2, n_cw]); data rows are only
    meaningful for data/marker sections, idx_post rows for head/tail.
    """
    ny = len(y)
    n_sec = len(kinds)
    n_states = 2 * D + 1
    n_cw, n_half = codebook.shape
    ik = len(c_del)
    delta = (1.0 - p_sub) - p_sub / 3.0

    data_app = np.zeros((n_sec, 4))
    idx_post = np.zeros((2, n_cw))
    idx_row = 0
    tmp1 = np.zeros(n_states)
    tmp2 = np.zeros(n_states)

    for t in range(n_sec):
        kind = kinds[t]
        p = pos[t]
        a_in = alpha[t]
        b_out = beta[t + 1]
        if kind == SEC_DATA:
            common = 0.0
            bucket = np.zeros(4)
            for di in range(n_states):
                av = a_in[di]
                if av == 0.0:
                    continue
                e = p + (di - D)
                if e < 0:
                    continue
                for k in range(ik):
                    dpi = di + (k - 1)
                    if dpi < 0 or dpi >= n_states:
                        continue
                    if e + k > ny:
                        break
                    w = av * b_out[dpi]
                    if w == 0.0:
                        continue
                    common += w * (c_del[k] + c_tx[k] * (p_sub / 3.0))
                    if k >= 1:
                        bucket[y[e + k - 1]] += w * c_tx[k] * delta
            for a in range(4):
                data_app[t, a] = common + bucket[a ^ offset[p]]
        elif kind == SEC_MARKER:
            for a in range(4):
                s0 = a ^ offset[p]
                s1 = a ^ offset[p + 1]
                tmp1[:] = 0.0
                _step_known(a_in, tmp1, s0, p, y, ny, D, c_del, c_tx, p_sub)
                tmp2[:] = 0.0
                _step_known(tmp1, tmp2, s1, p + 1, y, ny, D, c_del, c_tx, p_sub)
                acc = 0.0
                for di in range(n_states):
                    acc += tmp2[di] * b_out[di]
                data_app[t, a] = acc
        else:
            for c in range(n_cw):
                tmp1[:] = a_in
                for q in range(n_half):
                    s = codebook[c, q] ^ offset[p + q]
                    tmp2[:] = 0.0
                    _step_known(tmp1, tmp2, s, p + q, y, ny, D, c_del, c_tx, p_sub)
                    tmp1[:] = tmp2
                acc = 0.0
                for di in range(n_states):
                    acc += tmp1[di] * b_out[di]
                idx_post[idx_row, c] = acc
            idx_row += 1
    return data_app, idx_post


class BcjrDecoder:
    """Caches the section plan and branch tables for one (cfg, ids) pair."""

    def __init__(self, cfg: CodeConfig, ids: IdsParams, trellis: DriftTrellisConfig | None = None):
        self.cfg = cfg
        self.ids = ids
        self.trellis = trellis if trellis is not None else default_trellis(ids, cfg)
        self.kinds, self.pos = section_plan(cfg)
        self.c_del, self.c_tx = _branch_coeffs(ids, self.trellis.i_max)
        self.codebook_arr = cfg.codebook.as_array()
        self._cache: dict = {}

    def decode(self, y: np.ndarray, offset: np.ndarray, use_cache: bool = False) -> np.ndarray:
        """APP matrix of shape (kix + Lo, 4) for one read.

        Raises UndecodableRead for reads shorter than lambda - d_max or with
        no surviving trellis path. Overlong reads are truncated to
        lambda + d_max. ``use_cache`` memoizes on (read, offset) bytes,
        which pays off for duplicate reads (e.g. noiseless channels).
        """
        y = np.asarray(y, dtype=np.uint8)
        lam = self.cfg.strand_len
        D = self.trellis.d_max
        if len(y) < lam - D:
            raise UndecodableRead(f"read length {len(y)} below {lam - D}")
        if len(y) > lam + D:
            y = y[: lam + D]
        if use_cache:
            key = (y.tobytes(), offset.tobytes())
            hit = self._cache.get(key)
            if hit is not None:
                return hit
        app = self._decode_inner(y, offset)
        if use_cache:
            self._cache[key] = app
        return app

    def _decode_inner(self, y, offset):
        alpha, beta, ok, _, _ = _forward_backward(
            y, offset, self.kinds, self.pos, self.codebook_arr, self.trellis.d_max,
            self.c_del, self.c_tx, self.ids.p_sub,
        )
        if not ok:
            raise UndecodableRead("no trellis path explains this read")
        data_app, idx_post = _extract_apps(
            y, offset, self.kinds, self.pos, self.codebook_arr, self.trellis.d_max,
            self.c_del, self.c_tx, self.ids.p_sub, alpha, beta,
        )
        return self._assemble(data_app, idx_post)

    def _assemble(self, data_app, idx_post) -> np.ndarray:
        cfg = self.cfg
        k_half = cfg.codebook.k_half
        app = np.empty((cfg.v_len, 4))
        app[k_half: k_half + cfg.block_len] = data_app[1:-1]
        for side in range(2):
            post = idx_post[side]
            z = post.sum()
            if z <= 0.0:
                raise UndecodableRead("index section has zero posterior mass")
            post = post / z
            # Marginalize the codeword posterior onto the info digits.
            rows = np.zeros((k_half, 4))
            for c, pc in enumerate(post):
                for q in range(k_half):
                    digit = (c >> (2 * (k_half - 1 - q))) & 3
                    rows[q, digit] += pc
            if side == 0:
                app[:k_half] = rows
            else:
                app[k_half + cfg.block_len:] = rows
        z = app.sum(axis=1, keepdims=True)
        if np.any(z <= 0.0):
            raise UndecodableRead("zero posterior row")
        return app / z

    def evidence(self, y: np.ndarray, offset: np.ndarray):
        """(log p(y) forward, log p(y) backward) for consistency checks."""
        y = np.asarray(y, dtype=np.uint8)
        _, _, ok, f, b = _forward_backward(
            y, offset, self.kinds, self.pos, self.codebook_arr, self.trellis.d_max,
            self.c_del, self.c_tx, self.ids.p_sub,
        )
        if not ok:
            raise UndecodableRead("no trellis path explains this read")
        return f, b


def app_to_binary_llr(app: np.ndarray) -> np.ndarray:
    """Marginalize GF(4) rows onto the 2-bit labeling, as ln(P0/P1) LLRs.

    Bit order per symbol: most significant bit first. Probabilities are
    floored at 1e-30, capping LLRs at about +-69.
    """
    app = np.asarray(app)
    p_msb1 = app[:, 2] + app[:, 3]
    p_lsb1 = app[:, 1] + app[:, 3]
    out = np.empty(2 * app.shape[0])
    for bitpos, p1 in ((0, p_msb1), (1, p_lsb1)):
        p1c = np.clip(p1, PROB_FLOOR, None)
        p0c = np.clip(1.0 - p1, PROB_FLOOR, None)
        out[bitpos::2] = np.log(p0c) - np.log(p1c)
    return out
