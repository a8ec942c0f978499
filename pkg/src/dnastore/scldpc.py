"""Protograph-based non-binary SC-LDPC outer code over GF(4).

A block protograph is edge-spread over coupling offsets 0..m, coupled over
L_c positions (terminated, so there are L_c + m check layers), lifted by
random cyclic shifts of size Q, and given random nonzero GF(4) edge
weights. Decoding is flooding sum-product over GF(4); check-node
convolutions use the 4-point Walsh-Hadamard transform of the XOR group,
which is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .gf4 import INV_TABLE, MUL_TABLE

REFERENCE_PROTOGRAPHS = {
    # c -> (coded-index base, coded-index + clustering base) from the
    # block-LDPC protograph table.
    1: (
        np.array([[1, 1, 1, 0, 1], [1, 1, 1, 1, 0], [1, 0, 1, 0, 1], [0, 1, 0, 2, 0]]),
        np.array([[1, 1, 1, 0, 1], [0, 0, 2, 2, 0], [2, 0, 0, 0, 1], [0, 2, 0, 1, 0]]),
    ),
    2: (
        np.array([[1, 2, 0, 0, 1], [0, 0, 1, 1, 1], [2, 1, 2, 1, 0]]),
        np.array([[1, 1, 0, 1, 0], [1, 0, 2, 1, 1], [1, 2, 1, 0, 1]]),
    ),
    5: (
        np.array([[2, 1, 0, 2, 2], [0, 2, 2, 1, 1]]),
        np.array([[2, 1, 0, 2, 2], [0, 2, 2, 1, 1]]),
    ),
    10: (
        np.array([[1, 2, 1, 1, 0, 0, 0, 1, 1, 2],
                  [1, 0, 2, 0, 2, 1, 2, 0, 1, 0],
                  [0, 1, 0, 1, 1, 2, 0, 2, 1, 1]]),
        np.array([[1, 1, 1, 1, 0, 0, 0, 1, 2, 1],
                  [1, 1, 0, 0, 2, 1, 2, 2, 0, 1],
                  [0, 1, 2, 1, 1, 2, 0, 0, 1, 1]]),
    ),
}


def uniform_spreading(base: np.ndarray, memory: int) -> list:
    """Distribute each base edge's multiplicity as evenly as possible over
    the spreading offsets 0..memory."""
    base = np.asarray(base, dtype=np.int64)
    spread = [np.zeros_like(base) for _ in range(memory + 1)]
    for i in range(base.shape[0]):
        for j in range(base.shape[1]):
            mu = int(base[i, j])
            for k in range(memory + 1):
                spread[k][i, j] = mu // (memory + 1) + (1 if k < mu % (memory + 1) else 0)
    return spread


@dataclass
class ProtographSpec:
    base: np.ndarray
    coupling_len: int
    memory: int = 2
    lift: int = 1
    spreading: list | None = None  # list of memory+1 matrices summing to base

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=np.int64)
        if self.spreading is None:
            self.spreading = uniform_spreading(self.base, self.memory)
        total = sum(np.asarray(s, dtype=np.int64) for s in self.spreading)
        if not np.array_equal(total, self.base):
            raise ValueError("edge spreading must preserve base multiplicities")

    @property
    def b_c(self) -> int:
        return self.base.shape[0]

    @property
    def b_v(self) -> int:
        return self.base.shape[1]

    @property
    def n_cols(self) -> int:
        return self.b_v * self.coupling_len * self.lift

    @property
    def n_rows(self) -> int:
        return self.b_c * (self.coupling_len + self.memory) * self.lift

    def to_json(self) -> str:
        return json.dumps(
            {
                "base": self.base.tolist(),
                "coupling_len": self.coupling_len,
                "memory": self.memory,
                "lift": self.lift,
                "spreading": [np.asarray(s).tolist() for s in self.spreading],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "ProtographSpec":
        d = json.loads(text)
        return cls(
            base=np.array(d["base"]),
            coupling_len=d["coupling_len"],
            memory=d["memory"],
            lift=d["lift"],
            spreading=[np.array(s) for s in d["spreading"]],
        )


def design_rate(spec: ProtographSpec) -> float:
    """Terminated SC design rate in bits/nucleotide: 2*(1 - (b_c/b_v)(L+m)/L)."""
    L = spec.coupling_len
    return 2.0 * (1.0 - (spec.b_c / spec.b_v) * (L + spec.memory) / L)


@dataclass
class ParityCheckMatrix:
    n_rows: int
    n_cols: int
    rows: np.ndarray  # edge -> check row
    cols: np.ndarray  # edge -> variable column
    weights: np.ndarray  # edge -> GF(4) weight in {1,2,3}
    spec: ProtographSpec | None = None
    _adj: dict = field(default_factory=dict, repr=False)

    @property
    def n_edges(self) -> int:
        return len(self.rows)

    def syndrome(self, w: np.ndarray) -> np.ndarray:
        syn = np.zeros(self.n_rows, dtype=np.uint8)
        contrib = MUL_TABLE[self.weights, w[self.cols]]
        np.bitwise_xor.at(syn, self.rows, contrib)
        return syn

    def save(self, path) -> None:
        with open(path, "w") as f:
            if self.spec is not None:
                f.write("# protograph: " + self.spec.to_json() + "\n")
            f.write(f"# shape: {self.n_rows} {self.n_cols}\n")
            for r, c, w in zip(self.rows, self.cols, self.weights):
                f.write(f"{r} {c} {w}\n")

    @classmethod
    def load(cls, path) -> "ParityCheckMatrix":
        spec = None
        shape = None
        rows, cols, weights = [], [], []
        with open(path) as f:
            for line in f:
                line = line.strip()
                if line.startswith("# protograph:"):
                    spec = ProtographSpec.from_json(line.split(":", 1)[1])
                elif line.startswith("# shape:"):
                    shape = tuple(int(x) for x in line.split(":")[1].split())
                elif line and not line.startswith("#"):
                    r, c, w = line.split()
                    rows.append(int(r))
                    cols.append(int(c))
                    weights.append(int(w))
        if shape is None:
            raise ValueError("missing shape header")
        return cls(
            n_rows=shape[0], n_cols=shape[1],
            rows=np.array(rows, dtype=np.int64),
            cols=np.array(cols, dtype=np.int64),
            weights=np.array(weights, dtype=np.uint8),
            spec=spec,
        )


def expand_protograph(spec: ProtographSpec, rng: np.random.Generator) -> ParityCheckMatrix:
    """Coupled base matrix -> cyclic lifting with girth-4 avoidance attempts
    -> random nonzero GF(4) edge weights."""
    L, m, Q = spec.coupling_len, spec.memory, spec.lift
    b_c, b_v = spec.b_c, spec.b_v
    # Block-level edges: (check layer row, variable layer col, multiplicity).
    placed: list[tuple[int, int, int]] = []  # (block row, block col, shift)
    by_cell: dict[tuple[int, int], list] = {}

    def creates_4cycle(I, J, s):
        # A 4-cycle needs blocks (I,J),(I,J2),(I2,J),(I2,J2) with
        # s - s2 - s3 + s4 == 0 (mod Q).
        row_mates = [(j2, s2) for (i2, j2, s2) in placed if i2 == I and j2 != J]
        col_mates = [(i2, s3) for (i2, j2, s3) in placed if j2 == J and i2 != I]
        for j2, s2 in row_mates:
            for i2, s3 in col_mates:
                for s4 in by_cell.get((i2, j2), ()):
                    if (s - s2 - s3 + s4) % Q == 0:
                        return True
        return False

    for v_layer in range(L):
        for k in range(m + 1):
            Bk = np.asarray(spec.spreading[k], dtype=np.int64)
            c_layer = v_layer + k
            for bi in range(b_c):
                for bj in range(b_v):
                    mu = int(Bk[bi, bj])
                    I = c_layer * b_c + bi
                    J = v_layer * b_v + bj
                    used = by_cell.setdefault((I, J), [])
                    for _ in range(mu):
                        shift = None
                        for _try in range(30):
                            cand = int(rng.integers(0, Q))
                            if cand in used:
                                continue
                            if Q > 1 and creates_4cycle(I, J, cand):
                                continue
                            shift = cand
                            break
                        if shift is None:
                            # Bounded retries exhausted; accept any unused shift.
                            free = [s for s in range(Q) if s not in used]
                            shift = free[int(rng.integers(0, len(free)))] if free else 0
                        used.append(shift)
                        placed.append((I, J, shift))

    rows, cols, weights = [], [], []
    for I, J, shift in placed:
        z = np.arange(Q)
        rows.append(I * Q + (z + shift) % Q)
        cols.append(J * Q + z)
        weights.append(rng.integers(1, 4, size=Q, dtype=np.uint8))
    return ParityCheckMatrix(
        n_rows=spec.n_rows,
        n_cols=spec.n_cols,
        rows=np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64),
        cols=np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64),
        weights=np.concatenate(weights) if weights else np.zeros(0, dtype=np.uint8),
        spec=spec,
    )


class Gf4Encoder:
    """Systematic encoder from Gaussian elimination of H over GF(4)."""

    def __init__(self, H: ParityCheckMatrix):
        dense = np.zeros((H.n_rows, H.n_cols), dtype=np.uint8)
        # Parallel lifted edges landing on the same entry add in GF(4).
        np.bitwise_xor.at(dense, (H.rows, H.cols), H.weights)
        self.n = H.n_cols
        rref, pivots = _gf4_rref(dense)
        self.rref = rref[: len(pivots)]
        self.pivots = pivots
        self.free = np.array([j for j in range(self.n) if j not in set(pivots)], dtype=np.int64)
        self.rank = len(pivots)

    @property
    def k(self) -> int:
        return self.n - self.rank

    def encode(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.uint8)
        if len(u) != self.k:
            raise ValueError(f"info length must be {self.k}")
        w = np.zeros(self.n, dtype=np.uint8)
        w[self.free] = u
        # Each rref row: w[pivot] = sum over free columns of coeff * w_free.
        for r, pj in enumerate(self.pivots):
            acc = 0
            row = self.rref[r]
            for j in self.free:
                if row[j]:
                    acc ^= MUL_TABLE[row[j], w[j]]
            w[pj] = acc
        return w


def _gf4_rref(mat: np.ndarray):
    """Reduced row echelon form over GF(4). Returns (rref, pivot columns)."""
    a = mat.copy()
    n_rows, n_cols = a.shape
    pivots = []
    r = 0
    for c in range(n_cols):
        if r >= n_rows:
            break
        pr = None
        for i in range(r, n_rows):
            if a[i, c]:
                pr = i
                break
        if pr is None:
            continue
        a[[r, pr]] = a[[pr, r]]
        inv = INV_TABLE[a[r, c]]
        a[r] = MUL_TABLE[inv, a[r]]
        mask = a[:, c] != 0
        mask[r] = False
        if np.any(mask):
            coeff = a[mask, c]
            a[mask] ^= MUL_TABLE[coeff[:, None], a[r][None, :]].reshape(coeff.shape[0], n_cols)
        pivots.append(c)
        r += 1
    return a, pivots


@dataclass
class BpResult:
    estimate: np.ndarray
    success: bool
    iterations: int


def bp_decode(
    H: ParityCheckMatrix, priors: np.ndarray, max_iter: int = 100, early_stop: bool = True
) -> BpResult:
    """GF(4) sum-product with flooding schedule.

    With early_stop the decoder returns as soon as the tentative decision
    satisfies all checks; without it, it always runs max_iter iterations
    (useful when the converged beliefs themselves are of interest)."""
    priors = np.asarray(priors, dtype=np.float64)
    if priors.shape != (H.n_cols, 4):
        raise ValueError("priors must have shape (n, 4)")
    adj = H._adj
    if not adj:
        order_c = np.argsort(H.rows, kind="stable")
        order_v = np.argsort(H.cols, kind="stable")
        adj["edge_by_check"] = order_c.astype(np.int64)
        adj["edge_by_var"] = order_v.astype(np.int64)
        adj["check_ptr"] = np.searchsorted(H.rows[order_c], np.arange(H.n_rows + 1)).astype(np.int64)
        adj["var_ptr"] = np.searchsorted(H.cols[order_v], np.arange(H.n_cols + 1)).astype(np.int64)
    est, success, iters = _bp_kernel(
        priors, H.rows, H.cols, H.weights.astype(np.int64),
        adj["edge_by_check"], adj["check_ptr"], adj["edge_by_var"], adj["var_ptr"],
        MUL_TABLE.astype(np.int64), INV_TABLE.astype(np.int64), max_iter, early_stop,
    )
    return BpResult(estimate=est.astype(np.uint8), success=bool(success), iterations=int(iters))


@njit(cache=True)
def _wht4(v):
    a0 = v[0] + v[1]
    a1 = v[0] - v[1]
    a2 = v[2] + v[3]
    a3 = v[2] - v[3]
    v[0] = a0 + a2
    v[1] = a1 + a3
    v[2] = a0 - a2
    v[3] = a1 - a3


@njit(cache=True)
def _syndrome_ok(hard, rows, cols, wts, mul, n_rows):
    syn = np.zeros(n_rows, dtype=np.int64)
    for e in range(len(rows)):
        syn[rows[e]] ^= mul[wts[e], hard[cols[e]]]
    for i in range(n_rows):
        if syn[i] != 0:
            return False
    return True


@njit(cache=True)
def _bp_kernel(priors, rows, cols, wts, e_by_c, c_ptr, e_by_v, v_ptr, mul, inv, max_iter,
               early_stop):
    n = priors.shape[0]
    n_rows = len(c_ptr) - 1
    E = len(rows)
    hard = np.empty(n, dtype=np.int64)
    for j in range(n):
        best = 0
        for a in range(1, 4):
            if priors[j, a] > priors[j, best]:
                best = a
        hard[j] = best
    if early_stop and _syndrome_ok(hard, rows, cols, wts, mul, n_rows):
        return hard, True, 0

    v2c = np.empty((E, 4))
    c2v = np.ones((E, 4)) * 0.25
    for e in range(E):
        for a in range(4):
            v2c[e, a] = priors[cols[e], a]

    scratch = np.empty(4)
    for it in range(1, max_iter + 1):
        # Check-node update via WHT-domain prefix/suffix products.
        for i in range(n_rows):
            lo, hi = c_ptr[i], c_ptr[i + 1]
            deg = hi - lo
            if deg == 0:
                continue
            T = np.empty((deg, 4))
            for s in range(deg):
                e = e_by_c[lo + s]
                w = wts[e]
                for a in range(4):
                    T[s, mul[w, a]] = v2c[e, a]
                _wht4(T[s])
            pre = np.empty((deg + 1, 4))
            suf = np.empty((deg + 1, 4))
            for a in range(4):
                pre[0, a] = 1.0
                suf[deg, a] = 1.0
            for s in range(deg):
                for a in range(4):
                    pre[s + 1, a] = pre[s, a] * T[s, a]
            for s in range(deg - 1, -1, -1):
                for a in range(4):
                    suf[s, a] = suf[s + 1, a] * T[s, a]
            for s in range(deg):
                e = e_by_c[lo + s]
                for a in range(4):
                    scratch[a] = pre[s, a] * suf[s + 1, a]
                _wht4(scratch)
                w = wts[e]
                tot = 0.0
                for a in range(4):
                    val = scratch[mul[w, a]] * 0.25
                    if val < 0.0:
                        val = 0.0
                    c2v[e, a] = val
                    tot += val
                if tot <= 0.0:
                    for a in range(4):
                        c2v[e, a] = 0.25
                else:
                    for a in range(4):
                        c2v[e, a] /= tot

        # Variable-node update and tentative decision.
        for j in range(n):
            lo, hi = v_ptr[j], v_ptr[j + 1]
            deg = hi - lo
            pre = np.empty((deg + 1, 4))
            suf = np.empty((deg + 1, 4))
            for a in range(4):
                pre[0, a] = priors[j, a]
                suf[deg, a] = 1.0
            for s in range(deg):
                e = e_by_v[lo + s]
                for a in range(4):
                    pre[s + 1, a] = pre[s, a] * c2v[e, a]
            for s in range(deg - 1, -1, -1):
                e = e_by_v[lo + s]
                for a in range(4):
                    suf[s, a] = suf[s + 1, a] * c2v[e, a]
            for s in range(deg):
                e = e_by_v[lo + s]
                tot = 0.0
                for a in range(4):
                    val = pre[s, a] * suf[s + 1, a]
                    v2c[e, a] = val
                    tot += val
                if tot <= 0.0:
                    for a in range(4):
                        v2c[e, a] = 0.25
                else:
                    for a in range(4):
                        v2c[e, a] /= tot
            best = 0
            for a in range(1, 4):
                if pre[deg, a] > pre[deg, best]:
                    best = a
            hard[j] = best

        if early_stop and _syndrome_ok(hard, rows, cols, wts, mul, n_rows):
            return hard, True, it
    return hard, _syndrome_ok(hard, rows, cols, wts, mul, n_rows), max_iter
