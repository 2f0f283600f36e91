"""Sum-of-rank-1 (canonical polyadic) state representation.

A state on n sites of dimension d is a weighted sum of rank-1 terms, each a
Kronecker product of per-site vectors.  Site vectors are kept unit-norm with
magnitudes folded into the term weight; a projector that annihilates a site
vector zeroes the whole term (the vector is replaced by a basis placeholder
so the representation stays well formed for the no-prune experiments).

Structured operators apply term by term through small site-local products,
so the cost per term is independent of the global dimension; the price is
that the number of terms can grow with every controlled factor.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .tensor import (
    DEFAULT_DENSE_LIMIT,
    StructuredOperator,
    _check_dense_limit,
    kron_all,
)
from .spectral import dft_matrix
from .factorize import (
    CONTROL_FIRST,
    TARGET_FIRST,
    diagonal_decomposition,
    qft_plan,
)


@dataclass(frozen=True, eq=False)
class RankOneTerm:
    """One weighted Kronecker product of unit-norm site vectors.

    The constructor normalizes: site-vector magnitudes are folded into the
    weight, and a zero site vector collapses the term to weight 0 (with the
    first basis vector as a placeholder so every stored vector stays unit).
    """

    weight: complex
    site_vectors: tuple[np.ndarray, ...]

    def __post_init__(self):
        weight = complex(self.weight)
        normalized = []
        for v in self.site_vectors:
            a = np.array(v, dtype=complex).reshape(-1)
            norm = np.linalg.norm(a)
            if norm == 0:
                weight = 0.0
                a = np.zeros_like(a)
                a[0] = 1.0
            else:
                a = a / norm
                weight *= norm
            a.setflags(write=False)
            normalized.append(a)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "site_vectors", tuple(normalized))


@dataclass(frozen=True, eq=False)
class CPState:
    """Weighted sum of rank-1 terms on n sites of local dimension d."""

    n: int
    d: int
    terms: tuple[RankOneTerm, ...]

    def __post_init__(self):
        if self.n < 1 or self.d < 2:
            raise ValueError("states need n >= 1 sites of dimension d >= 2")
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("states carry at least one term")
        for t in self.terms:
            if len(t.site_vectors) != self.n:
                raise ValueError(f"term has {len(t.site_vectors)} sites, expected {self.n}")
            for v in t.site_vectors:
                if v.shape != (self.d,):
                    raise ValueError(f"site vector length {v.shape[0]} != {self.d}")

    @property
    def dim(self) -> int:
        return self.d**self.n

    @property
    def term_count(self) -> int:
        return len(self.terms)

    def reverse_sites(self) -> "CPState":
        """Site order reversed per term: the digit-reversal permutation."""
        terms = tuple(
            RankOneTerm(t.weight, tuple(reversed(t.site_vectors))) for t in self.terms
        )
        return CPState(self.n, self.d, terms)


def cp_basis_state(digits, d: int = 2) -> CPState:
    """Computational basis state from its big-endian base-d digit string."""
    digits = list(digits)
    if not digits:
        raise ValueError("need at least one digit")
    vectors = []
    for dig in digits:
        if not 0 <= dig < d:
            raise ValueError(f"digit {dig} out of range for base {d}")
        v = np.zeros(d, dtype=complex)
        v[dig] = 1.0
        vectors.append(v)
    return CPState(len(digits), d, (RankOneTerm(1.0, tuple(vectors)),))


def random_rank_one(
    n: int, d: int = 2, seed: int = 0, min_component: float = 1e-6
) -> CPState:
    """Seeded generic rank-1 state: complex Gaussian site vectors, renormalized.

    Genericity is enforced by resampling any site vector with a component of
    magnitude <= ``min_component``, so projector branches never vanish by
    accident.
    """
    rng = np.random.default_rng(seed)
    vectors = []
    for _ in range(n):
        while True:
            v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            if np.min(np.abs(v)) > min_component * np.linalg.norm(v):
                break
        vectors.append(v / np.linalg.norm(v))
    return CPState(n, d, (RankOneTerm(1.0, tuple(vectors)),))


def cp_to_dense(s: CPState, dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
    """Materialize the state as a dense vector of length d**n."""
    _check_dense_limit(s.dim, dense_limit)
    out = np.zeros(s.dim, dtype=complex)
    for t in s.terms:
        if t.weight != 0:
            out += t.weight * kron_all(t.site_vectors)
    return out


def apply_op_cp(op: StructuredOperator, s: CPState, prune: float = 1e-14) -> CPState:
    """Apply a structured operator term by term.

    Every (operator term, state term) pair yields one candidate output term
    via site-wise d x d matrix-vector products.  Terms whose weight magnitude
    falls below ``prune`` times the largest weight are dropped; ``prune = 0``
    keeps everything, including exact zeros.
    """
    if (op.n_sites, op.local_dim) != (s.n, s.d):
        raise ValueError("operator and state site structures do not match")
    candidates = []
    for st in s.terms:
        for ot in op.terms:
            vectors = tuple(f @ v for f, v in zip(ot.factors, st.site_vectors))
            candidates.append(RankOneTerm(st.weight * ot.coefficient, vectors))
    if prune > 0:
        wmax = max(abs(t.weight) for t in candidates)
        kept = [t for t in candidates if abs(t.weight) >= prune * wmax] if wmax > 0 else []
        if not kept:
            kept = [candidates[0]]
        candidates = kept
    return CPState(s.n, s.d, tuple(candidates))


def diagonal_cascade_cp(
    k: int,
    d: int,
    s: CPState,
    prune: float = 1e-14,
    orientation: str = CONTROL_FIRST,
) -> tuple[CPState, list[int]]:
    """Run the k twiddle-diagonal factors on a (k+1)-site state in order.

    Returns the final state and the term count recorded after each factor.
    """
    if s.n != k + 1 or s.d != d:
        raise ValueError(f"state must have {k + 1} sites of dimension {d}")
    decomposition = diagonal_decomposition(k, d, orientation)
    trajectory = []
    for f in decomposition.factors:
        s = apply_op_cp(f, s, prune)
        trajectory.append(s.term_count)
    return s, trajectory


def bipartition_rank(
    s: CPState,
    cut: int,
    dense_limit: int = DEFAULT_DENSE_LIMIT,
    rel_tol: float = 1e-10,
) -> int:
    """Numerical rank of the state's matricization across a site cut.

    ``cut`` is the number of leading sites on the left side; singular values
    above ``rel_tol`` times the largest one count toward the rank.
    """
    if not 1 <= cut < s.n:
        raise ValueError(f"cut must lie strictly inside 1..{s.n - 1}")
    dense = cp_to_dense(s, dense_limit=dense_limit)
    matrix = dense.reshape(s.d**cut, -1)
    svals = np.linalg.svd(matrix, compute_uv=False)
    if svals.size == 0 or svals[0] == 0:
        return 0
    return int(np.count_nonzero(svals > rel_tol * svals[0]))


def _merge_parallel(terms: list[RankOneTerm], tol: float) -> list[RankOneTerm]:
    kept: list[RankOneTerm] = []
    weights: list[complex] = []
    for t in terms:
        for i, base in enumerate(kept):
            overlaps = [
                np.vdot(bv, tv) for bv, tv in zip(base.site_vectors, t.site_vectors)
            ]
            if all(abs(abs(o) - 1.0) <= tol for o in overlaps):
                phase = np.prod(overlaps)
                weights[i] += t.weight * phase
                break
        else:
            kept.append(t)
            weights.append(t.weight)
    return [RankOneTerm(w, t.site_vectors) for w, t in zip(weights, kept)]


def compress(s: CPState, tol: float = 1e-12, svd: bool = True) -> CPState:
    """Cheap representation cleanup: never changes the dense state beyond ``tol``.

    Drops near-zero-weight terms and merges terms whose site vectors are
    pairwise parallel.  For two-site states the ``svd`` path re-expresses the
    state through its singular value decomposition, which is the minimal
    representation there; no general rank minimization is attempted.
    """
    terms = list(s.terms)
    wmax = max(abs(t.weight) for t in terms)
    if wmax > 0:
        terms = [t for t in terms if abs(t.weight) > tol * wmax]
    else:
        terms = [terms[0]]
    if svd and s.n == 2:
        matrix = cp_to_dense(CPState(s.n, s.d, tuple(terms))).reshape(s.d, s.d)
        u, svals, vh = np.linalg.svd(matrix)
        smax = svals[0] if svals.size else 0.0
        out = []
        for i, sv in enumerate(svals):
            if sv > tol * smax and sv > 0:
                out.append(RankOneTerm(sv, (u[:, i], vh[i, :])))
        if not out:
            out = [RankOneTerm(0.0, (u[:, 0], vh[0, :]))]
        return CPState(s.n, s.d, tuple(out))
    merged = _merge_parallel(terms, tol)
    wmax = max(abs(t.weight) for t in merged)
    if wmax > 0:
        merged = [t for t in merged if abs(t.weight) > tol * wmax]
    return CPState(s.n, s.d, tuple(merged if merged else terms[:1]))


@dataclass(frozen=True)
class TrajectoryStep:
    step: int
    factor_label: str
    term_count: int
    elapsed_ms: float


@dataclass(frozen=True)
class RankTrajectory:
    """Term-count trajectory of a factor-by-factor QFT run, plus the dense check."""

    n: int
    d: int
    orientation: str
    prune: float
    steps: tuple[TrajectoryStep, ...]
    residual: float

    @property
    def max_term_count(self) -> int:
        return max(s.term_count for s in self.steps)

    def to_csv(self, timing: bool = True) -> str:
        lines = ["step,factor_label,term_count,elapsed_ms"]
        for s in self.steps:
            ms = s.elapsed_ms if timing else 0.0
            lines.append(f"{s.step},{s.factor_label},{s.term_count},{ms:.3f}")
        return "\n".join(lines)

    def to_json(self, timing: bool = True, indent: int | None = None) -> str:
        doc = {
            "n": self.n,
            "d": self.d,
            "orientation": self.orientation,
            "prune": self.prune,
            "residual": self.residual,
            "steps": [
                {
                    "step": s.step,
                    "factor_label": s.factor_label,
                    "term_count": s.term_count,
                    "elapsed_ms": round(s.elapsed_ms if timing else 0.0, 3),
                }
                for s in self.steps
            ],
        }
        return json.dumps(doc, indent=indent)


def qft_rank_experiment(
    n: int,
    d: int,
    state: CPState,
    prune: float = 1e-14,
    orientation: str = TARGET_FIRST,
    dense_limit: int = DEFAULT_DENSE_LIMIT,
) -> RankTrajectory:
    """Run the full QFT plan on a CP state, recording term counts per factor.

    The final state is checked densely against the brute-force DFT of the
    input, so the global dimension must stay within the dense limit.
    """
    if (state.n, state.d) != (n, d):
        raise ValueError("state does not match the requested site structure")
    _check_dense_limit(state.dim, dense_limit)
    expected = dft_matrix(state.dim, dense_limit=dense_limit) @ cp_to_dense(
        state, dense_limit=dense_limit
    )
    plan = qft_plan(n, d, orientation)
    steps = []
    for i, f in enumerate(plan.factors):
        start = time.perf_counter()
        state = apply_op_cp(f, state, prune)
        elapsed = (time.perf_counter() - start) * 1e3
        steps.append(TrajectoryStep(i, f.label, state.term_count, elapsed))
    start = time.perf_counter()
    state = state.reverse_sites()
    elapsed = (time.perf_counter() - start) * 1e3
    steps.append(TrajectoryStep(len(plan.factors), "digit-reversal", state.term_count, elapsed))
    residual = float(
        np.max(np.abs(cp_to_dense(state, dense_limit=dense_limit) - expected))
    )
    return RankTrajectory(n, d, orientation, prune, tuple(steps), residual)
