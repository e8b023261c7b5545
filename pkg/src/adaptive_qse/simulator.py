"""Closed-loop estimation runs: emit, choose basis, measure, update, estimate."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    MeasurementBasis,
    PermanentCapError,
    RandomSource,
    ValidationError,
    as_state,
    fidelity,
    haar_random_basis,
    state_to_bloch,
)
from .optimizer import (
    BasisCatalog,
    OptimizationReport,
    QubitScore,
    optimize_from_catalog,
    optimize_qubit_basis,
)
from .posterior import MeasurementRecord, most_likely_state, normalized_state

__all__ = [
    "StrategyKind",
    "Strategy",
    "Stopping",
    "Estimate",
    "ProtocolRun",
    "TraceRow",
    "sample_outcome",
    "choose_basis",
    "run_protocol",
    "scripted_trace",
]

Sampler = Callable[[MeasurementBasis, RandomSource], int]


class StrategyKind(enum.Enum):
    ADAPTIVE = "adaptive"
    RESTRICTED_ADAPTIVE = "restricted-adaptive"
    NONADAPTIVE = "nonadaptive"
    RANDOM = "random"


@dataclass(frozen=True)
class Strategy:
    """How the next basis is picked.

    ``ADAPTIVE`` optimizes over all qubit bases, ``RESTRICTED_ADAPTIVE`` over
    ``catalog``, ``NONADAPTIVE`` cycles through ``catalog`` in order and
    ``RANDOM`` draws a Haar-random basis every time.  Restricted kinds start
    from ``catalog[0]`` unless ``first_from_catalog`` is False, in which case
    the first entry is drawn uniformly from the catalog.
    """

    kind: StrategyKind
    catalog: Optional[BasisCatalog] = None
    label: Optional[str] = None
    first_from_catalog: bool = True
    restarts: int = 8
    grad_step: float = 1e-5
    tol: float = 1e-7
    max_iter: int = 200
    engine: str = "expansion"

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        restricted = self.kind in (StrategyKind.RESTRICTED_ADAPTIVE, StrategyKind.NONADAPTIVE)
        if restricted and self.catalog is None:
            raise ValidationError(f"strategy {self.kind.value!r} needs a basis catalog")
        if self.restarts < 0:
            raise ValidationError("restarts must be non-negative")

    @property
    def name(self) -> str:
        return self.label or self.kind.value

    def check_dim(self, dim: int) -> None:
        if self.catalog is not None and self.catalog.dim != dim:
            raise ValidationError(f"catalog dimension {self.catalog.dim} != state dimension {dim}")
        if self.kind is StrategyKind.ADAPTIVE and dim != 2:
            raise ValidationError("the unrestricted adaptive strategy needs d = 2; use a catalog strategy")


@dataclass(frozen=True)
class Stopping:
    """Stop at ``k_max`` measurements, or earlier on either optional criterion.

    ``fidelity_eps``: consecutive estimates satisfy |<Psi_{k-1}|Psi_k>|^2 > 1 - eps.
    ``purity_eps``: Tr[rho_k^2] > 1 - eps.
    """

    k_max: int
    fidelity_eps: Optional[float] = None
    purity_eps: Optional[float] = None

    def __post_init__(self):
        if self.k_max < 0:
            raise ValidationError("k_max must be non-negative")


@dataclass
class Estimate:
    k: int
    state: np.ndarray
    fidelity: float
    infidelity: float
    purity: float


@dataclass
class ProtocolRun:
    hidden_state: np.ndarray
    record: MeasurementRecord
    estimates: list[Estimate]
    bases_used: list[MeasurementBasis]
    outcomes: list[int]
    initial_estimate: Estimate
    stopping: Stopping
    stop_reason: str = "iteration-cap"
    truncated: bool = False
    reports: list[Optional[OptimizationReport]] = field(default_factory=list, repr=False)

    def infidelity_curve(self) -> np.ndarray:
        """I_0, I_1, ..., I_K where I_0 uses the estimate before any measurement."""
        return np.array([self.initial_estimate.infidelity] + [e.infidelity for e in self.estimates])


def sample_outcome(hidden, basis: MeasurementBasis, rng: RandomSource) -> int:
    """Draw n with probability |<e_n|hidden>|^2 (inverse CDF, last bucket takes the remainder)."""
    probs = basis.probabilities(hidden)
    u = rng.uniform()
    acc = 0.0
    for n in range(len(probs) - 1):
        acc += probs[n]
        if u < acc:
            return n
    return len(probs) - 1


def choose_basis(
    strategy: Strategy,
    record: MeasurementRecord,
    previous: Optional[MeasurementBasis],
    rng: RandomSource,
):
    """Basis for measurement number ``record.k + 1`` and the optimizer report, if any."""
    k = record.k
    kind = strategy.kind
    if kind is StrategyKind.RANDOM or (kind is StrategyKind.ADAPTIVE and k == 0):
        return haar_random_basis(record.dim, rng), None
    catalog = strategy.catalog
    if k == 0:
        if strategy.first_from_catalog:
            return catalog[0], None
        return catalog[int(rng.uniform() * len(catalog)) % len(catalog)], None
    if kind is StrategyKind.NONADAPTIVE:
        return catalog[k % len(catalog)], None
    if kind is StrategyKind.RESTRICTED_ADAPTIVE:
        report = optimize_from_catalog(record, catalog, strategy.engine)
        return report.best_basis, report
    report = optimize_qubit_basis(
        record,
        restarts=strategy.restarts,
        seed_basis=previous,
        rng=rng,
        engine=strategy.engine,
        grad_step=strategy.grad_step,
        tol=strategy.tol,
        max_iter=strategy.max_iter,
    )
    return report.best_basis, report


def _estimate(record: MeasurementRecord, hidden: np.ndarray, engine: str) -> Estimate:
    rho = normalized_state(record, engine)
    state, lam = most_likely_state(record, engine)
    return Estimate(
        k=record.k,
        state=state,
        fidelity=lam,
        infidelity=min(max(1.0 - fidelity(hidden, state), 0.0), 1.0),
        purity=float(np.vdot(rho, rho).real),
    )


def run_protocol(
    hidden,
    strategy: Strategy,
    stopping: Stopping,
    rng: RandomSource,
    sampler: Optional[Sampler] = None,
) -> ProtocolRun:
    """Estimate ``hidden`` from single-copy measurements chosen by ``strategy``.

    Basis choices draw from ``rng.spawn(0)`` and outcomes from ``rng.spawn(1)``.
    The hidden state is touched only by the sampler (to draw outcomes) and by
    the infidelity bookkeeping; basis selection sees the record alone.  A run
    whose exact engine hits the permanent cap stops with ``truncated=True``.
    """
    hidden = as_state(hidden).copy()
    dim = hidden.size
    strategy.check_dim(dim)
    if sampler is None:
        def sampler(basis, r):
            return sample_outcome(hidden, basis, r)

    basis_rng, outcome_rng = rng.spawn(0), rng.spawn(1)
    engine = strategy.engine
    record = MeasurementRecord(dim)
    run = ProtocolRun(
        hidden_state=hidden,
        record=record,
        estimates=[],
        bases_used=[],
        outcomes=[],
        initial_estimate=_estimate(record, hidden, engine),
        stopping=stopping,
    )
    previous = None
    for _ in range(stopping.k_max):
        try:
            basis, report = choose_basis(strategy, record, previous, basis_rng)
            n = int(sampler(basis, outcome_rng))
            trial = record.extended(basis[n])
            est = _estimate(trial, hidden, engine)
        except PermanentCapError:
            run.truncated = True
            run.stop_reason = "permanent-cap"
            break
        record.append(basis[n])
        run.bases_used.append(basis)
        run.outcomes.append(n)
        run.estimates.append(est)
        run.reports.append(report)
        prev_state = run.estimates[-2].state if len(run.estimates) > 1 else None
        previous = basis
        if stopping.purity_eps is not None and est.purity > 1 - stopping.purity_eps:
            run.stop_reason = "purity"
            break
        if (
            stopping.fidelity_eps is not None
            and prev_state is not None
            and fidelity(prev_state, est.state) > 1 - stopping.fidelity_eps
        ):
            run.stop_reason = "fidelity-delta"
            break
    return run


@dataclass
class TraceRow:
    k: int
    state: np.ndarray
    fidelity: float
    next_basis: Optional[MeasurementBasis]
    next_score: Optional[float]
    scripted_score: Optional[float]
    report: Optional[OptimizationReport]

    @property
    def angles(self) -> tuple[float, float]:
        return state_to_bloch(self.state)


def scripted_trace(
    outcomes: Sequence,
    restarts: int = 8,
    rng: Optional[RandomSource] = None,
    engine: str = "expansion",
) -> list[TraceRow]:
    """Replay a qubit protocol with outcomes fixed in advance.

    Before each scripted outcome the optimizer is run on the record so far;
    ``scripted_score`` is the score of the basis that contains the scripted
    outcome, so ``next_score - scripted_score`` ~ 0 certifies that the script
    follows an optimal path (one member of a degenerate family, for instance).
    """
    rng = rng if rng is not None else RandomSource(0)
    record = MeasurementRecord(2)
    rows = []
    for k in range(len(outcomes) + 1):
        state, lam = most_likely_state(record, engine)
        nxt = outcomes[k] if k < len(outcomes) else None
        report = scripted = None
        if k > 0:
            report = optimize_qubit_basis(record, restarts=restarts, rng=rng.spawn(k), engine=engine)
            if nxt is not None:
                scripted = QubitScore.from_record(record, engine).at_angles(*state_to_bloch(nxt))
        rows.append(
            TraceRow(
                k=k,
                state=state,
                fidelity=lam,
                next_basis=None if report is None else report.best_basis,
                next_score=None if report is None else report.score,
                scripted_score=scripted,
                report=report,
            )
        )
        if nxt is not None:
            record.append(nxt)
    return rows

