"""Kronecker-product linear algebra: dense primitives, structured operators,
and base-d digit-reversal permutations.

Everything here works with plain complex ``numpy`` arrays.  Matrices of global
dimension ``d**n`` are represented either densely or as a
:class:`StructuredOperator`: a scaled sum of Kronecker products of site-local
``d x d`` matrices.  Structured operators can be applied to vectors (and
column batches) without ever materializing the full matrix.

All values are immutable after construction and safe to share across threads.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

#: Largest global dimension d**n that dense materialization will accept by
#: default.  Every guarded function takes a ``dense_limit`` override.
DEFAULT_DENSE_LIMIT = 4096

#: Default absolute entrywise tolerance for matrix comparisons.
DEFAULT_ATOL = 1e-12


class DenseLimitError(Exception):
    """An operation would materialize a matrix beyond the dense limit."""


def _check_dense_limit(dim: int, dense_limit: int) -> None:
    if dim > dense_limit:
        raise DenseLimitError(
            f"dimension {dim} exceeds the dense limit {dense_limit}"
        )


def _frozen_complex(a) -> np.ndarray:
    if isinstance(a, np.ndarray) and a.dtype == complex and not a.flags.writeable:
        return a
    out = np.array(a, dtype=complex)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=None)
def identity(dim: int) -> np.ndarray:
    """Read-only complex identity matrix, shared between callers."""
    return _frozen_complex(np.eye(dim))


def _is_identity(f: np.ndarray) -> bool:
    if f.shape[0] != f.shape[1]:
        return False
    eye = identity(f.shape[0])
    return f is eye or np.array_equal(f, eye)


def _is_diagonal(f: np.ndarray) -> bool:
    return np.count_nonzero(f - np.diag(np.diagonal(f))) == 0


def kron(a, b) -> np.ndarray:
    """Kronecker product: block matrix with (i,j) block ``a[i,j] * b``."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(factors) -> np.ndarray:
    """Kronecker product of a sequence of matrices, left to right."""
    return functools.reduce(np.kron, (np.asarray(f, dtype=complex) for f in factors))


def direct_sum(a, b) -> np.ndarray:
    """Block-diagonal stacking of two square matrices."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    if a.shape[0] != a.shape[1] or b.shape[0] != b.shape[1]:
        raise ValueError("direct_sum requires square matrices")
    na, nb = a.shape[0], b.shape[0]
    out = np.zeros((na + nb, na + nb), dtype=complex)
    out[:na, :na] = a
    out[na:, na:] = b
    return out


@functools.lru_cache(maxsize=None)
def basis_projector(index: int, d: int) -> np.ndarray:
    """Rank-1 projector onto the ``index``-th basis state of a d-level site.

    Returns a shared read-only matrix.
    """
    if not 0 <= index < d:
        raise ValueError(f"projector index {index} out of range for dimension {d}")
    out = np.zeros((d, d), dtype=complex)
    out[index, index] = 1.0
    return _frozen_complex(out)


def unitarity_residual_dense(m: np.ndarray) -> float:
    """Max-abs entry of ``m @ m^H - I``."""
    m = np.asarray(m, dtype=complex)
    return float(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))))


@dataclass(frozen=True, eq=False)
class KronTerm:
    """One scaled Kronecker-product term: ``coefficient * (f_1 (x) ... (x) f_n)``.

    The scalar coefficient is kept separate from the factors so projector
    terms and phase factors compose without renormalizing the factors.
    """

    coefficient: complex
    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "coefficient", complex(self.coefficient))
        frozen = []
        for f in self.factors:
            a = _frozen_complex(f)
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise ValueError("Kronecker factors must be square matrices")
            frozen.append(a)
        object.__setattr__(self, "factors", tuple(frozen))

    @property
    def dim(self) -> int:
        out = 1
        for f in self.factors:
            out *= f.shape[0]
        return out


@dataclass(frozen=True, eq=False)
class StructuredOperator:
    """Sum of Kronecker-product terms over ``n_sites`` sites of dimension ``local_dim``.

    Site order is big-endian: factor 1 acts on the most significant base-d
    digit of the global index.
    """

    n_sites: int
    local_dim: int
    terms: tuple[KronTerm, ...]
    label: str = ""

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("operator needs at least one site")
        if self.local_dim < 1:
            raise ValueError("local dimension must be positive")
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if len(t.factors) != self.n_sites:
                raise ValueError(
                    f"term has {len(t.factors)} factors, expected {self.n_sites}"
                )
            for f in t.factors:
                if f.shape != (self.local_dim, self.local_dim):
                    raise ValueError(
                        f"factor shape {f.shape} does not match local dimension "
                        f"{self.local_dim}"
                    )

    @property
    def dim(self) -> int:
        return self.local_dim**self.n_sites


def embed_term(
    n: int, d: int, sites: dict[int, np.ndarray], coefficient: complex = 1.0
) -> KronTerm:
    """Kronecker term that is identity everywhere except the given 0-based sites."""
    eye = identity(d)
    factors = tuple(sites.get(i, eye) for i in range(n))
    return KronTerm(coefficient, factors)


def single_site_operator(
    n: int, d: int, site: int, m: np.ndarray, label: str = ""
) -> StructuredOperator:
    """Operator acting as ``m`` on one site and identity elsewhere."""
    return StructuredOperator(n, d, (embed_term(n, d, {site: m}),), label=label)


def expand(op: StructuredOperator, dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
    """Materialize a structured operator as a dense matrix."""
    _check_dense_limit(op.dim, dense_limit)
    out = np.zeros((op.dim, op.dim), dtype=complex)
    for t in op.terms:
        out += t.coefficient * kron_all(t.factors)
    return out


def _term_site_ops(term: KronTerm) -> list[tuple[str, int, int, np.ndarray]]:
    """Reduce a term to a minimal op list for structured application.

    Identity factors are skipped and adjacent diagonal sites are merged into
    a single combined diagonal, so a term touches the state once per
    non-identity region instead of once per site.
    """
    ops: list[list] = []
    for i, f in enumerate(term.factors):
        if _is_identity(f):
            continue
        if _is_diagonal(f):
            diag = np.diagonal(f)
            if ops and ops[-1][0] == "diag" and ops[-1][1] + ops[-1][2] == i:
                ops[-1][2] += 1
                ops[-1][3] = np.kron(ops[-1][3], diag)
            else:
                ops.append(["diag", i, 1, diag.copy()])
        else:
            ops.append(["dense", i, 1, f])
    return [tuple(o) for o in ops]


def _apply_term(term: KronTerm, flat: np.ndarray, d: int) -> np.ndarray:
    total = flat.size
    out = flat
    for kind, site, span, payload in _term_site_ops(term):
        left = d**site
        mid = d**span
        view = out.reshape(left, mid, total // (left * mid))
        if kind == "diag":
            out = view * payload[None, :, None]
        else:
            out = np.matmul(payload, view)
        out = out.reshape(total)
    if out is flat:
        return term.coefficient * flat
    if term.coefficient != 1:
        out *= term.coefficient
    return out


def apply_structured(op: StructuredOperator, x: np.ndarray) -> np.ndarray:
    """Apply a structured operator to a vector without expanding it.

    ``x`` may be 1-D of length ``op.dim`` or 2-D of shape ``(op.dim, m)``, in
    which case every column is transformed (so applying to the identity
    matrix yields the expanded operator).
    """
    x = np.ascontiguousarray(x, dtype=complex)
    if x.shape[0] != op.dim:
        raise ValueError(f"vector length {x.shape[0]} does not match operator dimension {op.dim}")
    flat = x.reshape(-1)
    acc = None
    for t in op.terms:
        contrib = _apply_term(t, flat, op.local_dim)
        acc = contrib if acc is None else acc + contrib
    if acc is None:
        acc = np.zeros_like(flat)
    return acc.reshape(x.shape)


def compose(a: StructuredOperator, b: StructuredOperator) -> StructuredOperator:
    """Operator product ``a @ b`` via the mixed-product identity, term-pairwise."""
    if (a.n_sites, a.local_dim) != (b.n_sites, b.local_dim):
        raise ValueError("operators act on different site structures")
    terms = []
    for s in a.terms:
        for t in b.terms:
            factors = tuple(fs @ ft for fs, ft in zip(s.factors, t.factors))
            terms.append(KronTerm(s.coefficient * t.coefficient, factors))
    return StructuredOperator(a.n_sites, a.local_dim, tuple(terms))


def adjoint(op: StructuredOperator) -> StructuredOperator:
    """Conjugate transpose, taken factor by factor."""
    terms = tuple(
        KronTerm(np.conj(t.coefficient), tuple(f.conj().T for f in t.factors))
        for t in op.terms
    )
    return StructuredOperator(op.n_sites, op.local_dim, terms, label=op.label)


def unitarity_residual(op: StructuredOperator, dense_limit: int = DEFAULT_DENSE_LIMIT) -> float:
    """Max-abs entry of ``op @ op^H - I``.

    When the Gram operator is diagonal on all but a few sites (true for every
    factor produced by the factorization plans) the residual is evaluated on
    the nonzero support only, which stays cheap even at the dense limit.
    Otherwise falls back to dense expansion.
    """
    gram = compose(op, adjoint(op))
    n, d = op.n_sites, op.local_dim
    dense_sites = sorted(
        {i for t in gram.terms for i in range(n) if not _is_diagonal(t.factors[i])}
    )
    diag_sites = [i for i in range(n) if i not in dense_sites]
    support = d ** (len(diag_sites) + 2 * len(dense_sites))
    if support <= max(dense_limit * d * d, 64):
        bdim = d ** len(dense_sites)
        ddim = d ** len(diag_sites)
        acc = np.zeros((ddim, bdim, bdim), dtype=complex)
        for t in gram.terms:
            diag_part = np.ones(1, dtype=complex)
            for i in diag_sites:
                diag_part = np.kron(diag_part, np.diagonal(t.factors[i]))
            dense_part = np.ones((1, 1), dtype=complex)
            for i in dense_sites:
                dense_part = np.kron(dense_part, t.factors[i])
            acc += t.coefficient * diag_part[:, None, None] * dense_part[None, :, :]
        acc -= np.eye(bdim)[None, :, :]
        return float(np.max(np.abs(acc)))
    _check_dense_limit(op.dim, dense_limit)
    return unitarity_residual_dense(expand(op, dense_limit))


@dataclass(frozen=True)
class Permutation:
    """Permutation sigma of {0..size-1}, stored as the image tuple.

    As a matrix, ``P @ x`` gathers: ``(P x)[j] = x[sigma(j)]``.  For the
    digit-reversal permutations used here sigma is an involution, so this is
    the same as moving entry j to position sigma(j).
    """

    image: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "image", tuple(int(j) for j in self.image))
        if sorted(self.image) != list(range(len(self.image))):
            raise ValueError("image is not a bijection on {0..size-1}")

    @property
    def size(self) -> int:
        return len(self.image)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Permute vector entries (or matrix rows): equivalent to ``to_matrix() @ x``."""
        x = np.asarray(x)
        if x.shape[0] != self.size:
            raise ValueError(f"vector length {x.shape[0]} does not match permutation size {self.size}")
        return x[np.asarray(self.image)]

    def to_matrix(self) -> np.ndarray:
        return np.eye(self.size, dtype=complex)[np.asarray(self.image)]


@functools.lru_cache(maxsize=None)
def digit_reversal(n: int, d: int) -> Permutation:
    """Base-d digit-reversal permutation on n sites (big-endian digits).

    ``sigma(j)`` reverses the n base-d digits of j; applying it twice gives
    back the identity.
    """
    if n < 1 or d < 2:
        raise ValueError("digit reversal needs n >= 1 sites of dimension d >= 2")
    image = []
    for j in range(d**n):
        rev, rem = 0, j
        for _ in range(n):
            rem, digit = divmod(rem, d)
            rev = rev * d + digit
        image.append(rev)
    return Permutation(tuple(image))


def permute_tensor_factors(p: Permutation, x):
    """Reverse the tensor-factor order of a state.

    For a dense vector this permutes entries by the digit-reversal
    permutation ``p``; for a sum-of-rank-1 state (anything exposing
    ``reverse_sites``) the per-term site vectors are reversed in place of any
    dense work.
    """
    if isinstance(x, np.ndarray):
        return p.apply(x)
    reverse = getattr(x, "reverse_sites", None)
    if reverse is not None:
        if p.image != digit_reversal(x.n, x.d).image:
            raise ValueError("permutation is not the digit reversal for this state")
        return reverse()
    raise TypeError(f"cannot permute tensor factors of {type(x).__name__}")
