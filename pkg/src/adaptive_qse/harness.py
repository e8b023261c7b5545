"""Monte Carlo experiments over many hidden states, with CSV and SVG output."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .core import PERMANENT_CAP, RandomSource, ValidationError, haar_random_state
from .optimizer import BasisCatalog, local_pauli_catalog, pauli_catalog
from .posterior import ENGINES
from .simulator import Stopping, Strategy, StrategyKind, run_protocol

__all__ = [
    "CATALOGS",
    "StrategySpec",
    "ExperimentConfig",
    "RunStatistics",
    "ExperimentError",
    "massar_bound",
    "load_config",
    "qubit_config",
    "two_qubit_config",
    "run_experiment",
    "summarize",
    "csv_text",
    "svg_text",
    "write_csv",
    "read_csv",
    "write_svg_plot",
]

CSV_HEADER = ("strategy", "k", "mean_infidelity", "stderr", "n", "bound")

CATALOGS: dict[str, Callable[[], BasisCatalog]] = {
    "pauli": pauli_catalog,
    "local-pauli-2q": local_pauli_catalog,
}
DEFAULT_CATALOG = {2: "pauli", 4: "local-pauli-2q"}


class ExperimentError(RuntimeError):
    """A single protocol run failed; the whole experiment is aborted."""


def massar_bound(k: int) -> float:
    """Best mean infidelity over k qubit copies with collective measurements: 1/(k+2)."""
    if k < 0:
        raise ValidationError("k must be non-negative")
    return 1.0 / (k + 2)


def _reject_unknown(section: str, data: dict, allowed: Sequence[str]) -> None:
    if not isinstance(data, dict):
        raise ValidationError(f"{section} must be a JSON object")
    extra = sorted(set(data) - set(allowed))
    if extra:
        raise ValidationError(f"unknown key(s) in {section}: {', '.join(extra)}")


@dataclass(frozen=True)
class StrategySpec:
    kind: str
    catalog: Optional[str] = None
    label: Optional[str] = None

    def __post_init__(self):
        try:
            StrategyKind(self.kind)
        except ValueError:
            kinds = ", ".join(k.value for k in StrategyKind)
            raise ValidationError(f"unknown strategy kind {self.kind!r}; choose from {kinds}") from None
        if self.catalog is not None and self.catalog not in CATALOGS:
            raise ValidationError(f"unknown catalog {self.catalog!r}; choose from {', '.join(CATALOGS)}")

    @property
    def name(self) -> str:
        return self.label or self.kind

    @property
    def needs_catalog(self) -> bool:
        return StrategyKind(self.kind) in (StrategyKind.RESTRICTED_ADAPTIVE, StrategyKind.NONADAPTIVE)

    @classmethod
    def from_dict(cls, data: dict) -> "StrategySpec":
        _reject_unknown("strategy", data, ("kind", "catalog", "label"))
        if "kind" not in data:
            raise ValidationError("strategy entry needs a 'kind'")
        return cls(**data)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one batch of runs.

    The JSON form mirrors the fields::

        {"dim": 2, "strategies": [{"kind": "adaptive"}, ...],
         "n_experiments": 500, "k_max": 30, "seed": 1,
         "optimizer": {"restarts": 8, "grad_step": 1e-5, "tol": 1e-7},
         "output": {"csv": "out.csv", "svg": "out.svg", "log_scale": false},
         "engine": "expansion", "workers": 1, "first_from_catalog": true}
    """

    dim: int
    strategies: tuple[StrategySpec, ...]
    n_experiments: int
    k_max: int
    seed: int = 0
    restarts: int = 8
    grad_step: float = 1e-5
    tol: float = 1e-7
    csv_path: Optional[str] = None
    svg_path: Optional[str] = None
    log_scale: bool = False
    engine: str = "expansion"
    workers: int = 1
    first_from_catalog: bool = True

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if self.dim < 2:
            raise ValidationError("dim must be at least 2")
        if not self.strategies:
            raise ValidationError("at least one strategy is required")
        if self.n_experiments <= 0:
            raise ValidationError("n_experiments must be a positive integer")
        if self.k_max <= 0:
            raise ValidationError("k_max must be a positive integer")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must fit in 64 unsigned bits")
        if self.restarts < 0 or self.grad_step <= 0 or self.tol <= 0:
            raise ValidationError("optimizer settings must be positive")
        if self.workers < 1:
            raise ValidationError("workers must be at least 1")
        if self.engine not in ENGINES:
            raise ValidationError(f"unknown engine {self.engine!r}; choose from {ENGINES}")
        if self.engine == "quadrature" and self.dim != 2:
            raise ValidationError("the quadrature engine is qubit-only")
        if self.engine == "ryser" and self.k_max + 1 > PERMANENT_CAP:
            raise ValidationError(
                f"k_max={self.k_max} exceeds the permanent cap {PERMANENT_CAP} for the ryser engine; "
                "use engine 'expansion' (any d) or 'quadrature' (d=2)"
            )
        names = [s.name for s in self.strategies]
        if len(set(names)) != len(names):
            raise ValidationError(f"strategy labels must be unique, got {names}")
        for s in self.strategies:
            if s.kind == StrategyKind.ADAPTIVE.value and self.dim != 2:
                raise ValidationError(f"d={self.dim} requires a catalog strategy; 'adaptive' is qubit-only")
            if s.needs_catalog and s.catalog is None and self.dim not in DEFAULT_CATALOG:
                raise ValidationError(f"strategy {s.name!r} needs an explicit catalog for d={self.dim}")
            if s.needs_catalog and s.catalog is not None and CATALOGS[s.catalog]().dim != self.dim:
                raise ValidationError(f"catalog {s.catalog!r} does not match d={self.dim}")

    def build_strategies(self) -> list[Strategy]:
        out = []
        for s in self.strategies:
            catalog = None
            if s.needs_catalog:
                catalog = CATALOGS[s.catalog or DEFAULT_CATALOG[self.dim]]()
            out.append(
                Strategy(
                    StrategyKind(s.kind),
                    catalog=catalog,
                    label=s.name,
                    first_from_catalog=self.first_from_catalog,
                    restarts=self.restarts,
                    grad_step=self.grad_step,
                    tol=self.tol,
                    engine=self.engine,
                )
            )
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        top = ("dim", "strategies", "n_experiments", "k_max", "seed", "optimizer", "output",
               "engine", "workers", "first_from_catalog")
        _reject_unknown("config", data, top)
        missing = [key for key in ("dim", "strategies", "n_experiments", "k_max") if key not in data]
        if missing:
            raise ValidationError(f"config is missing: {', '.join(missing)}")
        opt = data.get("optimizer", {})
        _reject_unknown("optimizer", opt, ("restarts", "grad_step", "tol"))
        out = data.get("output", {})
        _reject_unknown("output", out, ("csv", "svg", "log_scale"))
        if not isinstance(data["strategies"], list):
            raise ValidationError("strategies must be a list")
        try:
            return cls(
                dim=int(data["dim"]),
                strategies=tuple(StrategySpec.from_dict(s) for s in data["strategies"]),
                n_experiments=int(data["n_experiments"]),
                k_max=int(data["k_max"]),
                seed=int(data.get("seed", 0)),
                restarts=int(opt.get("restarts", 8)),
                grad_step=float(opt.get("grad_step", 1e-5)),
                tol=float(opt.get("tol", 1e-7)),
                csv_path=out.get("csv"),
                svg_path=out.get("svg"),
                log_scale=bool(out.get("log_scale", False)),
                engine=str(data.get("engine", "expansion")),
                workers=int(data.get("workers", 1)),
                first_from_catalog=bool(data.get("first_from_catalog", True)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"bad config value: {exc}") from None

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return ExperimentConfig.from_dict(data)


def qubit_config(n_experiments: int = 500, k_max: int = 30, seed: int = 2024, **kw) -> ExperimentConfig:
    """The four qubit strategies on the Pauli catalog; 5000 runs is the full-scale mode."""
    specs = (
        StrategySpec("adaptive"),
        StrategySpec("restricted-adaptive", "pauli"),
        StrategySpec("nonadaptive", "pauli"),
        StrategySpec("random"),
    )
    return ExperimentConfig(2, specs, n_experiments, k_max, seed, **kw)


def two_qubit_config(n_experiments: int = 200, k_max: int = 12, seed: int = 2024, **kw) -> ExperimentConfig:
    """Restricted-adaptive versus cycling over the nine local Pauli bases."""
    specs = (
        StrategySpec("restricted-adaptive", "local-pauli-2q"),
        StrategySpec("nonadaptive", "local-pauli-2q"),
    )
    return ExperimentConfig(4, specs, n_experiments, k_max, seed, **kw)


@dataclass
class RunStatistics:
    """Per-strategy mean infidelity, standard error and sample count for k = 0..k_max."""

    k: np.ndarray
    mean: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]
    count: dict[str, np.ndarray]
    bound: Optional[np.ndarray] = None
    truncated: dict[str, int] = field(default_factory=dict)
    # per-experiment infidelity curves (rows in experiment order); not serialized
    curves: Optional[dict[str, np.ndarray]] = field(default=None, repr=False)

    @property
    def labels(self) -> list[str]:
        return sorted(self.mean)

    def paired_difference(self, a: str, b: str, k_range: tuple[int, int]):
        """Mean and standard error of (I^a - I^b) averaged over k in ``k_range``.

        Each experiment contributes one difference, computed on the shared
        hidden state, so the comparison is paired.
        """
        if self.curves is None:
            raise ValidationError("per-experiment curves are not available (statistics read from CSV?)")
        lo, hi = k_range
        cols = slice(lo, hi + 1)
        diff = np.nanmean(self.curves[a][:, cols], axis=1) - np.nanmean(self.curves[b][:, cols], axis=1)
        mean, err, _ = _column_stats(diff)
        return mean, err

    def __len__(self) -> int:
        return len(self.mean)

    def rows(self):
        for label in self.labels:
            for i, k in enumerate(self.k):
                b = None if self.bound is None else float(self.bound[i])
                yield label, int(k), float(self.mean[label][i]), float(self.stderr[label][i]), int(self.count[label][i]), b


def _column_stats(values: np.ndarray):
    """Mean and standard error of the finite entries, summed exactly so the
    result does not depend on the order of the experiments."""
    vals = [float(v) for v in values if np.isfinite(v)]
    n = len(vals)
    if n == 0:
        return math.nan, math.nan, 0
    mean = math.fsum(vals) / n
    if n == 1:
        return mean, math.nan, 1
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var / n), n


def summarize(curves: dict[str, np.ndarray], k_max: int, dim: int) -> RunStatistics:
    """Statistics from per-experiment infidelity curves (rows = experiments, NaN = not reached)."""
    ks = np.arange(k_max + 1)
    mean, err, cnt, trunc = {}, {}, {}, {}
    for label, arr in curves.items():
        cols = [_column_stats(arr[:, j]) for j in range(k_max + 1)]
        mean[label] = np.array([c[0] for c in cols])
        err[label] = np.array([c[1] for c in cols])
        cnt[label] = np.array([c[2] for c in cols], dtype=int)
        trunc[label] = int(np.sum(~np.isfinite(arr[:, -1])))
    bound = np.array([massar_bound(int(k)) for k in ks]) if dim == 2 else None
    return RunStatistics(ks, mean, err, cnt, bound, trunc, curves)


def _one_experiment(args):
    config, strategies, index = args
    root = RandomSource(config.seed).spawn(index)
    hidden = haar_random_state(config.dim, root.spawn(0))
    stopping = Stopping(config.k_max)
    out = []
    for j, strategy in enumerate(strategies):
        try:
            run = run_protocol(hidden, strategy, stopping, root.spawn(j + 1))
        except Exception as exc:  # fail fast with context
            raise ExperimentError(f"experiment {index}, strategy {strategy.name!r}: {exc}") from exc
        curve = np.full(config.k_max + 1, np.nan)
        vals = run.infidelity_curve()
        curve[: len(vals)] = vals
        out.append(curve)
    return index, out


def run_experiment(config: ExperimentConfig, progress: Optional[Callable[[int, int], None]] = None) -> RunStatistics:
    """Run every strategy on ``n_experiments`` Haar-random hidden states.

    Experiment ``i`` draws its hidden state from ``seed``/``i``/0 and strategy
    ``j`` runs on ``seed``/``i``/``j+1``, so results do not depend on the number
    of workers or on scheduling.  All strategies see the same hidden state.
    """
    strategies = config.build_strategies()
    n = config.n_experiments
    curves = {s.name: np.full((n, config.k_max + 1), np.nan) for s in strategies}
    jobs = [(config, strategies, i) for i in range(n)]

    def collect(results):
        for done, (index, rows) in enumerate(results, 1):
            for s, row in zip(strategies, rows):
                curves[s.name][index] = row
            if progress is not None:
                progress(done, n)

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            collect(pool.map(_one_experiment, jobs, chunksize=max(1, n // (4 * config.workers))))
    else:
        collect(map(_one_experiment, jobs))
    return summarize(curves, config.k_max, config.dim)


def _fmt(x: float) -> str:
    return format(x, ".12g")


def csv_text(stats: RunStatistics) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for label, k, mean, err, n, bound in stats.rows():
        writer.writerow([label, k, _fmt(mean), _fmt(err), n, "" if bound is None else _fmt(bound)])
    return buf.getvalue()


def write_csv(stats: RunStatistics, path) -> None:
    """Header ``strategy,k,mean_infidelity,stderr,n,bound``; rows sorted by (label, k)."""
    path = Path(path)
    try:
        path.write_text(csv_text(stats))
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write CSV {path}: {exc.strerror}") from None


def read_csv(path) -> RunStatistics:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise ValidationError(f"{path}: unexpected header {header}")
        rows = list(reader)
    by_label: dict[str, list] = {}
    bounds: dict[int, Optional[float]] = {}
    for label, k, mean, err, n, bound in rows:
        by_label.setdefault(label, []).append((int(k), float(mean), float(err), int(n)))
        bounds[int(k)] = float(bound) if bound else None
    if not by_label:
        raise ValidationError(f"{path}: no data rows")
    ks = np.array(sorted(bounds))
    mean, err, cnt = {}, {}, {}
    for label, entries in by_label.items():
        entries.sort()
        if [e[0] for e in entries] != list(ks):
            raise ValidationError(f"{path}: strategy {label!r} has a different k range")
        mean[label] = np.array([e[1] for e in entries])
        err[label] = np.array([e[2] for e in entries])
        cnt[label] = np.array([e[3] for e in entries], dtype=int)
    has_bound = all(bounds[k] is not None for k in ks)
    bound = np.array([bounds[k] for k in ks]) if has_bound else None
    return RunStatistics(ks, mean, err, cnt, bound)


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def svg_text(stats: RunStatistics, log_scale: bool = False, title: str = "Mean infidelity") -> str:
    if len(stats) == 0 or len(stats.k) == 0:
        raise ValidationError("nothing to plot: statistics are empty")
    width, height = 640, 420
    left, right, top, bottom = 70, 170, 40, 55
    pw, ph = width - left - right, height - top - bottom
    ks = stats.k.astype(float)
    series = {lab: stats.mean[lab] for lab in stats.labels}
    errs = {lab: np.nan_to_num(stats.stderr[lab]) for lab in stats.labels}

    values = [v for lab in series for v in (series[lab] - errs[lab], series[lab] + errs[lab])]
    if stats.bound is not None:
        values.append(stats.bound)
    allv = np.concatenate([np.ravel(v) for v in values])
    allv = allv[np.isfinite(allv)]
    if log_scale:
        pos = allv[allv > 0]
        lo = 10 ** math.floor(math.log10(pos.min())) if pos.size else 1e-3
        hi = 10 ** math.ceil(math.log10(pos.max())) if pos.size else 1.0

        def ty(v):
            v = max(v, lo)
            return top + ph * (1 - (math.log10(v) - math.log10(lo)) / (math.log10(hi) - math.log10(lo)))

        ticks = [10.0**e for e in range(int(round(math.log10(lo))), int(round(math.log10(hi))) + 1)]
    else:
        lo, hi = 0.0, max(float(allv.max()) if allv.size else 1.0, 1e-12) * 1.05

        def ty(v):
            return top + ph * (1 - (v - lo) / (hi - lo))

        ticks = list(np.linspace(lo, hi, 6))
    kmin, kmax = float(ks.min()), float(ks.max())
    span = kmax - kmin or 1.0

    def tx(k):
        return left + pw * (k - kmin) / span

    def pts(ys):
        return " ".join(f"{tx(k):.2f},{ty(float(y)):.2f}" for k, y in zip(ks, ys) if np.isfinite(y))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{left + pw / 2:.2f}" y="22" text-anchor="middle" font-size="15">{title}</text>',
        f'<line class="axis" x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for t in ticks:
        y = ty(t)
        out.append(f'<line x1="{left - 4}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 7}" y="{y + 4:.2f}" text-anchor="end" font-size="11">{t:.3g}</text>')
    step = max(1, int(math.ceil(span / 10)))
    for k in range(int(kmin), int(kmax) + 1, step):
        x = tx(k)
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 17}" text-anchor="middle" font-size="11">{k}</text>')
    out.append(
        f'<text x="{left + pw / 2:.2f}" y="{height - 12}" text-anchor="middle" font-size="13">'
        "number of measurements k</text>"
    )
    out.append(
        f'<text x="18" y="{top + ph / 2:.2f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {top + ph / 2:.2f})">mean infidelity</text>'
    )
    legend_y = top + 10
    for i, lab in enumerate(stats.labels):
        color = _PALETTE[i % len(_PALETTE)]
        m, e = series[lab], errs[lab]
        out.append(f'<g class="errorbars" stroke="{color}">')
        for k, y, dy in zip(ks, m, e):
            if np.isfinite(y) and dy > 0:
                x = tx(k)
                out.append(f'<line x1="{x:.2f}" y1="{ty(y - dy):.2f}" x2="{x:.2f}" y2="{ty(y + dy):.2f}"/>')
        out.append("</g>")
        out.append(f'<polyline class="series" data-strategy="{lab}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5" points="{pts(m)}"/>')
        ly = legend_y + 18 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 34}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 40}" y="{ly + 4}" font-size="12">{lab}</text>')
    if stats.bound is not None:
        out.append(f'<polyline class="bound" fill="none" stroke="black" stroke-width="1.5" points="{pts(stats.bound)}"/>')
        ly = legend_y + 18 * len(stats.labels)
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 34}" y2="{ly}" stroke="black" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 40}" y="{ly + 4}" font-size="12">1/(k+2)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg_plot(stats: RunStatistics, path, log_scale: bool = False) -> None:
    """Mean infidelity against k with error bars, one polyline per strategy plus the bound."""
    text = svg_text(stats, log_scale)
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write SVG {path}: {exc.strerror}") from None
