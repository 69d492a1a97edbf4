"""Hyperparameter selection for the volatility filter.

The state innovation scale is restricted to a diagonal matrix and
reparameterized entrywise through ``z = w / (1 + w)``, which maps
``(0, inf)`` onto ``(0, 1)`` and admits a finite grid ``i / 10**q``. The
joint grid is combinatorially infeasible beyond two coordinates, so the
search is cyclic coordinate ascent over the per-coordinate grids, with the
discount factor handled as an independent outer grid.

Ties within a coordinate's grid are broken toward smaller ``z`` (a smaller
innovation scale gives smoother volatility paths); a move is accepted only
when it improves the objective or reaches the same value at a smaller
``z``, so sweeps terminate.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._fastpath import evaluate_candidates
from .errors import DomainError
from .filtering import ModelConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchSpec:
    """Grid resolution, discount candidates and objective of one search."""

    q: int = 2
    delta_candidates: tuple[float, ...] = (0.70, 0.75, 0.80, 0.85)
    max_sweeps: int = 10
    objective: str = "loglik"  # or "msse_distance"

    def __post_init__(self):
        if self.q < 1:
            raise DomainError(f"grid resolution q={self.q} must be >= 1")
        if not self.delta_candidates:
            raise DomainError("delta_candidates must be non-empty")
        for d in self.delta_candidates:
            if not 2.0 / 3.0 < d < 1.0:
                raise DomainError(f"delta candidate {d} violates 2/3 < delta < 1")
        if self.max_sweeps < 1:
            raise DomainError("max_sweeps must be >= 1")
        if self.objective not in ("loglik", "msse_distance"):
            raise DomainError(f"unknown objective {self.objective!r}")


@dataclass(frozen=True)
class TraceEntry:
    """One objective evaluation, for auditing the search path."""

    delta: float
    z: tuple[float, ...]
    coordinate: int | None
    sweep: int
    objective: float
    accepted: bool


def z_to_omega(z) -> np.ndarray:
    """Diagonal innovation scale from grid coordinates: ``w = z / (1 - z)``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z <= 0.0) or np.any(z >= 1.0):
        raise DomainError("z coordinates must lie strictly inside (0, 1)")
    return np.diag(z / (1.0 - z))


def omega_diag_to_z(w) -> np.ndarray:
    """Inverse reparameterization: ``z = w / (1 + w)`` entrywise."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if np.any(w <= 0.0):
        raise DomainError("diagonal entries must be positive")
    return w / (1.0 + w)


def _evaluate(ys, base_config, delta, z_rows, objective, jobs) -> np.ndarray:
    omegas = np.array([np.diag(z / (1.0 - z)) for z in z_rows])
    if jobs > 1 and len(z_rows) > 1:
        chunks = np.array_split(np.arange(len(z_rows)), jobs)
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(
                lambda idx: evaluate_candidates(ys, base_config, delta,
                                                omegas[idx], objective),
                [c for c in chunks if c.size],
            ))
        return np.concatenate(parts)
    return evaluate_candidates(ys, base_config, delta, omegas, objective)


def coordinate_search(ys, base_config: ModelConfig, spec: SearchSpec, *,
                      jobs: int = 1
                      ) -> tuple[np.ndarray, float, list[TraceEntry]]:
    """Coordinate-ascent grid search over ``(z, delta)``.

    Returns ``(best z vector, best delta, evaluation trace)``. Requires at
    least ``10 p`` observations to avoid degenerate fits. Candidates that
    fail numerically are skipped; a discount factor with no surviving
    candidate is dropped, and the search aborts only when every candidate of
    every discount factor fails.
    """
    ys = np.asarray(ys, dtype=float)
    if ys.ndim == 1:
        ys = ys[:, None]
    p = base_config.p
    if ys.shape[0] < 10 * p:
        raise DomainError(
            f"need at least 10*p = {10 * p} observations, got {ys.shape[0]}"
        )
    grid = np.arange(1, 10 ** spec.q) / 10.0 ** spec.q
    trace: list[TraceEntry] = []
    best: tuple[float, float, np.ndarray] | None = None  # (objective, delta, z)
    cache: dict[tuple, float] = {}

    def evaluate(delta: float, rows: list[np.ndarray]) -> np.ndarray:
        missing = [z for z in rows if (delta, tuple(z)) not in cache]
        if missing:
            values = _evaluate(ys, base_config, delta, missing, spec.objective, jobs)
            for z, val in zip(missing, values):
                cache[(delta, tuple(z))] = float(val)
        return np.array([cache[(delta, tuple(z))] for z in rows])

    for delta in spec.delta_candidates:
        z = np.full(p, 0.5)
        current = evaluate(delta, [z])[0]
        trace.append(TraceEntry(delta, tuple(z), None, 0, current, True))
        if not np.isfinite(current):
            logger.warning("delta=%g: initial point failed; dropping candidate", delta)
            continue
        for sweep in range(1, spec.max_sweeps + 1):
            changed = False
            for coord in range(p):
                rows = []
                for g in grid:
                    cand = z.copy()
                    cand[coord] = g
                    rows.append(cand)
                values = evaluate(delta, rows)
                best_idx = int(np.argmax(values))  # first max = smallest z
                cand_val = values[best_idx]
                cand_z = grid[best_idx]
                improves = cand_val > current or (cand_val == current
                                                  and cand_z < z[coord])
                for g, val in zip(grid, values):
                    accepted = improves and g == cand_z
                    zt = z.copy()
                    zt[coord] = g
                    trace.append(TraceEntry(delta, tuple(zt), coord, sweep,
                                            float(val), accepted))
                if improves and np.isfinite(cand_val):
                    z[coord] = cand_z
                    current = float(cand_val)
                    changed = True
            if not changed:
                break
        if not np.isfinite(current):
            logger.warning("delta=%g: no finite objective; dropping candidate", delta)
            continue
        if best is None or current > best[0] or (current == best[0]
                                                 and delta < best[1]):
            best = (current, delta, z.copy())

    if best is None:
        raise DomainError("every (z, delta) candidate failed numerically")
    return best[2], best[1], trace
