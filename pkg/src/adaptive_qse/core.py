"""Complex linear-algebra primitives: states, bases, permanents, eigenpairs, Haar sampling.

States are plain 1-D ``complex128`` arrays.  Bases are :class:`MeasurementBasis`
objects whose columns are the basis vectors.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Optional, Sequence

import numpy as np

__all__ = [
    "PERMANENT_CAP",
    "ValidationError",
    "PermanentCapError",
    "RandomSource",
    "MeasurementBasis",
    "as_state",
    "normalize",
    "canonical_phase",
    "fidelity",
    "check_hermitian",
    "permanent",
    "permanent_bruteforce",
    "gram_permanent",
    "MonomialTable",
    "jacobi_eigh",
    "top_eigenpair",
    "haar_random_state",
    "haar_random_basis",
    "bloch_to_state",
    "state_to_bloch",
    "qubit_basis",
    "UP",
    "DOWN",
    "PLUS",
    "MINUS",
    "PLUS_I",
    "MINUS_I",
    "PAULI_STATES",
]

PERMANENT_CAP = 30
STATE_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class PermanentCapError(ValidationError):
    """Raised when an exact permanent would exceed :data:`PERMANENT_CAP`."""


# --------------------------------------------------------------------------- #
# Randomness
# --------------------------------------------------------------------------- #


class RandomSource:
    """Seeded, splittable random stream backed by the counter-based Philox generator.

    ``RandomSource(seed).spawn(i)`` depends only on ``seed`` and the spawn path,
    so experiment ``i`` draws the same numbers no matter how work is scheduled.
    """

    def __init__(self, seed: int = 0, _path: tuple[int, ...] = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.path = tuple(int(p) for p in _path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.Philox(ss))

    def spawn(self, index: int) -> "RandomSource":
        """Independent child stream identified by ``index``."""
        return RandomSource(self.seed, self.path + (int(index),))

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, size=None):
        return self.generator.random(size)

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, path={self.path})"


# --------------------------------------------------------------------------- #
# States and bases
# --------------------------------------------------------------------------- #


def normalize(vector) -> np.ndarray:
    v = np.asarray(vector, dtype=complex).ravel()
    if not np.all(np.isfinite(v)):
        raise ValidationError("state amplitudes must be finite")
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValidationError("cannot normalize the zero vector")
    return v / norm


def as_state(vector, tol: float = STATE_TOL) -> np.ndarray:
    """Validate ``vector`` as a pure state (finite, unit norm) and return it as complex."""
    v = np.asarray(vector, dtype=complex).ravel()
    if v.size < 1:
        raise ValidationError("state must have at least one amplitude")
    if not np.all(np.isfinite(v)):
        raise ValidationError("state amplitudes must be finite")
    if abs(np.vdot(v, v).real - 1.0) > tol:
        raise ValidationError(f"state is not normalized (norm^2 = {np.vdot(v, v).real!r})")
    return v


def canonical_phase(vector, tol: float = 1e-14) -> np.ndarray:
    """Multiply by a global phase so the first non-negligible amplitude is real positive."""
    v = np.asarray(vector, dtype=complex)
    scale = np.abs(v).max()
    if scale == 0:
        return v.copy()
    idx = int(np.argmax(np.abs(v) > tol * scale))
    return v * (abs(v[idx]) / v[idx])


def fidelity(a, b) -> float:
    """|<a|b>|^2 for pure states."""
    return float(abs(np.vdot(a, b)) ** 2)


@dataclass(frozen=True, eq=False)
class MeasurementBasis:
    """Orthonormal measurement basis; ``vectors[:, n]`` is the n-th basis state."""

    vectors: np.ndarray
    label: Optional[str] = None
    tol: float = field(default=STATE_TOL, repr=False)

    def __post_init__(self):
        vecs = np.array(self.vectors, dtype=complex)
        if vecs.ndim != 2 or vecs.shape[0] != vecs.shape[1]:
            raise ValidationError("basis must be a square matrix of column vectors")
        if not np.all(np.isfinite(vecs)):
            raise ValidationError("basis amplitudes must be finite")
        overlaps = vecs.conj().T @ vecs
        if np.abs(overlaps - np.eye(len(vecs))).max() > self.tol:
            raise ValidationError("basis vectors are not orthonormal")
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)

    @classmethod
    def from_states(cls, states: Sequence, label: Optional[str] = None) -> "MeasurementBasis":
        return cls(np.column_stack([np.asarray(s, dtype=complex) for s in states]), label)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def __len__(self) -> int:
        return self.dim

    def __getitem__(self, n: int) -> np.ndarray:
        return self.vectors[:, n]

    def __iter__(self) -> Iterator[np.ndarray]:
        return (self.vectors[:, n] for n in range(self.dim))

    def probabilities(self, state) -> np.ndarray:
        """Born-rule outcome probabilities |<e_n|state>|^2."""
        return np.abs(self.vectors.conj().T @ np.asarray(state, dtype=complex)) ** 2

    def max_overlap(self, other: "MeasurementBasis") -> float:
        """Largest |<e_m|f_n>|^2 between vectors of the two bases."""
        return float((np.abs(self.vectors.conj().T @ other.vectors) ** 2).max())

    def __repr__(self) -> str:
        name = self.label or "custom"
        return f"MeasurementBasis({name!r}, dim={self.dim})"


_S = 1 / math.sqrt(2)
UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)
PLUS = np.array([_S, _S], dtype=complex)
MINUS = np.array([_S, -_S], dtype=complex)
PLUS_I = np.array([_S, 1j * _S], dtype=complex)
MINUS_I = np.array([_S, -1j * _S], dtype=complex)
PAULI_STATES = (UP, DOWN, PLUS, MINUS, PLUS_I, MINUS_I)
for _v in PAULI_STATES:
    _v.setflags(write=False)


def bloch_to_state(theta: float, phi: float) -> np.ndarray:
    """cos(theta/2)|up> + e^{i phi} sin(theta/2)|down>."""
    if not (0.0 <= theta <= math.pi) or not math.isfinite(theta):
        raise ValidationError(f"polar angle {theta!r} outside [0, pi]")
    if not (0.0 <= phi < 2 * math.pi) or not math.isfinite(phi):
        raise ValidationError(f"azimuthal angle {phi!r} outside [0, 2pi)")
    return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])


def _wrap_angles(theta: float, phi: float) -> tuple[float, float]:
    theta = math.fmod(theta, 2 * math.pi)
    if theta < 0:
        theta += 2 * math.pi
    if theta > math.pi:
        theta = 2 * math.pi - theta
        phi += math.pi
    phi = math.fmod(phi, 2 * math.pi)
    if phi < 0:
        phi += 2 * math.pi
    if phi >= 2 * math.pi:
        phi = 0.0
    return theta, phi


def state_to_bloch(state) -> tuple[float, float]:
    """Bloch angles (theta, phi) of a qubit state; phi is 0 at the poles."""
    v = normalize(state)
    if v.size != 2:
        raise ValidationError("Bloch angles are defined for qubits only")
    a, b = v
    theta = 2 * math.atan2(abs(b), abs(a))
    if abs(a) < 1e-15 or abs(b) < 1e-15:
        return theta, 0.0
    return _wrap_angles(theta, float(np.angle(b) - np.angle(a)))


def qubit_basis(theta: float, phi: float, label: Optional[str] = None) -> MeasurementBasis:
    """Qubit basis whose first vector points along (theta, phi); angles are wrapped."""
    theta, phi = _wrap_angles(theta, phi)
    first = bloch_to_state(theta, phi)
    second = canonical_phase(np.array([-np.conj(first[1]), np.conj(first[0])]))
    return MeasurementBasis(np.column_stack([first, second]), label)


# --------------------------------------------------------------------------- #
# Permanents
# --------------------------------------------------------------------------- #


def _as_square(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"permanent needs a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix entries must be finite")
    return m


def permanent(matrix) -> complex:
    """Permanent by Ryser's formula, visiting column subsets in Gray-code order.

    Costs O(2^n n).  The empty matrix has permanent 1.
    """
    a = _as_square(matrix)
    n = a.shape[0]
    if n > PERMANENT_CAP:
        raise PermanentCapError(f"permanent of size {n} exceeds cap {PERMANENT_CAP}")
    if n == 0:
        return 1.0 + 0j
    if n == 1:
        return complex(a[0, 0])
    cols = [a[:, j].copy() for j in range(n)]
    row_sums = np.zeros(n, dtype=complex)
    in_set = [False] * n
    total = 0j
    size = 0
    for g in range(1, 1 << n):
        j = (g & -g).bit_length() - 1
        if in_set[j]:
            row_sums -= cols[j]
            size -= 1
        else:
            row_sums += cols[j]
            size += 1
        in_set[j] = not in_set[j]
        term = np.prod(row_sums)
        total += term if size & 1 else -term
    # Ryser: Per = (-1)^n sum_S (-1)^{|S|} prod_i rowsum_i(S)
    return complex(total if n & 1 else -total)


def permanent_bruteforce(matrix) -> complex:
    """Permutation-sum permanent; an O(n! n) oracle for testing."""
    a = _as_square(matrix)
    n = a.shape[0]
    rows = np.arange(n)
    return complex(sum(np.prod(a[rows, list(p)]) for p in itertools.permutations(range(n))))


class MonomialTable:
    """Monomials of fixed total degree in ``dim`` variables.

    ``exponents[i]`` is a multi-index alpha; ``raise_map[v][i]`` is the index of
    alpha + e_v in the table of the next degree.  ``haar_weight[i]`` is
    int |psi^alpha|^2 dpsi = alpha! (d-1)! / (|alpha| + d - 1)!  under the
    normalized Haar measure on unit vectors of C^d.
    """

    def __init__(self, dim: int, degree: int):
        self.dim = dim
        self.degree = degree
        exps = []
        for combo in itertools.combinations_with_replacement(range(dim), degree):
            e = [0] * dim
            for v in combo:
                e[v] += 1
            exps.append(tuple(e))
        self.exponents = np.array(exps, dtype=int).reshape(len(exps), dim)
        self.index = {e: i for i, e in enumerate(exps)}
        log_w = (
            np.array([sum(math.lgamma(x + 1) for x in e) for e in exps])
            + math.lgamma(dim)
            - math.lgamma(degree + dim)
        )
        self.haar_weight = np.exp(log_w)
        self._raise_map: Optional[np.ndarray] = None

    @property
    def raise_map(self) -> np.ndarray:
        if self._raise_map is None:
            up = monomials(self.dim, self.degree + 1)
            rm = np.empty((self.dim, len(self.exponents)), dtype=int)
            for i, e in enumerate(self.exponents):
                for v in range(self.dim):
                    f = list(e)
                    f[v] += 1
                    rm[v, i] = up.index[tuple(f)]
            self._raise_map = rm
        return self._raise_map

    def __len__(self) -> int:
        return len(self.exponents)


@lru_cache(maxsize=None)
def monomials(dim: int, degree: int) -> MonomialTable:
    return MonomialTable(dim, degree)


def multiply_linear(coeffs: np.ndarray, dim: int, degree: int, linear) -> np.ndarray:
    """Coefficients of P(x) * sum_v linear[v] x_v, where P has the given degree."""
    table = monomials(dim, degree)
    out = np.zeros(len(monomials(dim, degree + 1)), dtype=complex)
    rm = table.raise_map
    for v in range(dim):
        if linear[v] != 0:
            out[rm[v]] += linear[v] * coeffs
    return out


def product_coefficients(vectors, dim: int) -> np.ndarray:
    """Coefficients of prod_m <b_m|x> as a polynomial in x (monomial order of the table)."""
    coeffs = np.ones(1, dtype=complex)
    for deg, b in enumerate(vectors):
        coeffs = multiply_linear(coeffs, dim, deg, np.conj(np.asarray(b, dtype=complex)))
    return coeffs


def gram_permanent(left, right) -> complex:
    """Per(L^dagger R) for d x n matrices L, R, via monomial expansion.

    Expanding prod_m <l_m|x> and prod_m <r_m|x> in monomials gives
    Per(L^dagger R) = sum_alpha alpha! beta_alpha conj(gamma_alpha), a sum of
    C(n+d-1, d-1) terms.  Cheap when d is small, whatever n is.
    """
    lm = np.asarray(left, dtype=complex)
    rm = np.asarray(right, dtype=complex)
    if lm.ndim != 2 or lm.shape != rm.shape:
        raise ValidationError("gram_permanent needs two d x n matrices of equal shape")
    d, n = lm.shape
    beta = product_coefficients(lm.T, d)
    gamma = product_coefficients(rm.T, d)
    factorials = np.array(
        [math.prod(math.factorial(x) for x in e) for e in monomials(d, n).exponents],
        dtype=float,
    )
    return complex(np.sum(factorials * beta * np.conj(gamma)))


# --------------------------------------------------------------------------- #
# Hermitian eigen-decomposition
# --------------------------------------------------------------------------- #


def check_hermitian(matrix, tol: float = 1e-12) -> np.ndarray:
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix entries must be finite")
    # relative to the largest entry: unnormalized moments can be tiny
    scale = max(np.abs(a).max(), np.finfo(float).tiny)
    if np.abs(a - a.conj().T).max() > tol * scale:
        raise ValidationError("matrix is not Hermitian")
    return a


def jacobi_eigh(matrix, tol: float = 1e-17, max_sweeps: int = 60):
    """Full eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` sorted by descending eigenvalue;
    ``eigenvectors[:, i]`` carries the canonical phase.  Ties keep the order
    produced by the sweep, so degenerate eigenvectors are arbitrary but
    reproducible.
    """
    a = check_hermitian(matrix).copy()
    n = a.shape[0]
    a = (a + a.conj().T) / 2
    v = np.eye(n, dtype=complex)
    scale = np.abs(a).max()
    if scale > 0:
        threshold = tol * scale
        for _ in range(max_sweeps):
            off = np.abs(np.triu(a, 1)).max() if n > 1 else 0.0
            if off <= threshold:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    mag = abs(apq)
                    if mag <= threshold:
                        continue
                    u = apq / mag
                    theta = (a[q, q].real - a[p, p].real) / (2 * mag)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                    c = 1 / math.sqrt(t * t + 1)
                    s = t * c
                    g = np.array([[c, s], [-s * np.conj(u), c * np.conj(u)]])
                    idx = [p, q]
                    a[:, idx] = a[:, idx] @ g
                    a[idx, :] = g.conj().T @ a[idx, :]
                    a[p, q] = a[q, p] = 0
                    v[:, idx] = v[:, idx] @ g
    w = a.diagonal().real.copy()
    order = np.argsort(-w, kind="stable")
    vecs = np.column_stack([canonical_phase(v[:, i]) for i in order])
    return w[order], vecs


def top_eigenpair(matrix) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and a unit eigenvector (canonical phase)."""
    a = np.asarray(matrix)
    if a.shape[0] > 16:
        raise ValidationError("top_eigenpair supports dimensions up to 16")
    w, vecs = jacobi_eigh(a)
    return float(w[0]), vecs[:, 0]


# --------------------------------------------------------------------------- #
# Haar sampling
# --------------------------------------------------------------------------- #


def haar_random_state(dim: int, rng: RandomSource) -> np.ndarray:
    """Haar-random pure state from 2d independent standard normals."""
    if dim < 2:
        raise ValidationError("dimension must be at least 2")
    x = rng.normal(2 * dim)
    return normalize(x[:dim] + 1j * x[dim:])


def haar_random_basis(dim: int, rng: RandomSource, label: Optional[str] = None) -> MeasurementBasis:
    """Columns of a Haar unitary: QR of a complex Ginibre matrix with positive diag(R)."""
    if dim < 2:
        raise ValidationError("dimension must be at least 2")
    x = rng.normal(2 * dim * dim)
    z = (x[: dim * dim] + 1j * x[dim * dim :]).reshape(dim, dim)
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    cols = np.column_stack([canonical_phase(q[:, i]) for i in range(dim)])
    return MeasurementBasis(cols, label)
