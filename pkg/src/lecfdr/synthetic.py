"""Synthetic (uncertainty, error) generators with a known population law.

Each model's uncertainty follows a piecewise-uniform mixture over ``B`` equal
bins of ``[0, 1]`` and its error probability is constant within a bin, so the
population FDR at any threshold is a finite sum. Paired models are coupled
through a Gaussian copula on their uncertainty ranks.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import MultiRecord, Record
from .routing import calibrate_multi_arrays, cascade_outcomes
from .single import calibrate_arrays

CHUNK = 500


@dataclass(frozen=True)
class ModelProfile:
    """Per-bin error probabilities and per-bin uncertainty mass."""

    err_prob: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.err_prob, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if p.ndim != 1 or p.shape != w.shape or len(p) == 0:
            raise ValueError("err_prob and weights must be equal-length, non-empty sequences")
        if np.any((p < 0) | (p > 1)):
            raise ValueError("bin error probabilities must lie in [0, 1]")
        if np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("mixture weights must be non-negative and sum to 1")

    @property
    def bins(self) -> int:
        return len(self.err_prob)

    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.bins + 1)

    def quantile(self, v: np.ndarray) -> np.ndarray:
        """Map uniforms in (0, 1) to scores; strictly increasing on the support."""
        w = np.asarray(self.weights)
        cw = np.concatenate(([0.0], np.cumsum(w)))
        cw[-1] = 1.0
        b = np.searchsorted(cw, v, side="right") - 1
        b = np.clip(b, 0, self.bins - 1)
        # skip empty bins that share a cumulative boundary
        while True:
            empty = w[b] == 0
            if not empty.any():
                break
            b[empty] += 1
        frac = (v - cw[b]) / w[b]
        width = 1.0 / self.bins
        return (b + np.clip(frac, 0.0, 1.0)) * width

    def bin_of(self, u: np.ndarray) -> np.ndarray:
        return np.clip((u * self.bins).astype(np.int64), 0, self.bins - 1)


@dataclass(frozen=True)
class GenSpec:
    models: tuple[ModelProfile, ...]
    rho: float = 0.0
    seed: int = 0
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if not self.models:
            raise ValueError("a spec needs at least one model")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        m = len(self.models)
        if m > 2 and self.rho < -1.0 / (m - 1):
            raise ValueError(f"rho below {-1.0 / (m - 1):.4f} is not a valid equicorrelation for {m} models")

    @property
    def n_models(self) -> int:
        return len(self.models)

    def with_(self, **changes) -> "GenSpec":
        d = {"models": self.models, "rho": self.rho, "seed": self.seed, "name": self.name}
        d.update(changes)
        return GenSpec(**d)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "rho": self.rho,
            "models": [{"err_prob": list(m.err_prob), "weights": list(m.weights)} for m in self.models],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenSpec":
        models = tuple(ModelProfile(tuple(m["err_prob"]), tuple(m["weights"])) for m in d["models"])
        return cls(models, float(d.get("rho", 0.0)), int(d.get("seed", 0)), d.get("name", "custom"))


def default_spec(seed: int = 0) -> GenSpec:
    """Single-model spec shaped like typical LLM score histograms.

    Correct answers pile up at low uncertainty, but every bin carries some
    errors, so small risk levels are only sometimes attainable.
    """
    return GenSpec(
        (ModelProfile(
            (0.03, 0.06, 0.10, 0.15, 0.22, 0.30, 0.40, 0.50, 0.62, 0.75),
            (0.22, 0.16, 0.12, 0.10, 0.09, 0.08, 0.07, 0.06, 0.05, 0.05),
        ),),
        seed=seed,
        name="default",
    )


def default_paired_spec(rho: float = 0.0, seed: int = 0) -> GenSpec:
    """Two models: the first accurate but with weakly informative scores,
    the second less accurate but with sharply separating scores."""
    a = ModelProfile(
        (0.06, 0.07, 0.08, 0.09, 0.10, 0.11, 0.12, 0.14, 0.16, 0.18),
        (0.20, 0.16, 0.13, 0.11, 0.09, 0.08, 0.07, 0.06, 0.05, 0.05),
    )
    b = ModelProfile(
        (0.00, 0.01, 0.02, 0.05, 0.20, 0.50, 0.70, 0.85, 0.90, 0.95),
        (0.10,) * 10,
    )
    return GenSpec((a, b), rho=rho, seed=seed, name="paired-default")


_erfc = np.frompyfunc(math.erfc, 1, 1)


def _norm_cdf(x: np.ndarray) -> np.ndarray:
    return 0.5 * _erfc(-x / math.sqrt(2.0)).astype(float)


def _uniforms(rng: np.random.Generator, n: int, m: int, rho: float) -> np.ndarray:
    """Copula uniforms whose normal scores have pairwise correlation ``rho``."""
    if m == 1 or rho == 0.0:
        return rng.random((n, m))
    z = rng.standard_normal((n, m))
    if rho >= 0:
        z0 = rng.standard_normal((n, 1))
        x = math.sqrt(rho) * z0 + math.sqrt(1.0 - rho) * z
    else:
        c = np.full((m, m), rho) + np.eye(m) * (1.0 - rho)
        x = z @ np.linalg.cholesky(c).T
    return _norm_cdf(x)


def draw_arrays(spec: GenSpec, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``(u, err)`` arrays of shape ``(n, M)``."""
    m = spec.n_models
    v = _uniforms(rng, n, m, spec.rho)
    u = np.empty((n, m))
    err = np.empty((n, m), dtype=np.int64)
    coins = rng.random((n, m))
    for k, prof in enumerate(spec.models):
        u[:, k] = prof.quantile(v[:, k])
        p = np.asarray(prof.err_prob)[prof.bin_of(u[:, k])]
        err[:, k] = coins[:, k] < p
    return u, err


def gen_single(spec: GenSpec, n: int, model: int = 0) -> list[Record]:
    """``n`` i.i.d. records for one model; identical for identical seeds."""
    if n == 0:
        return []
    rng = np.random.default_rng(spec.seed)
    u, err = draw_arrays(spec.with_(models=(spec.models[model],), rho=0.0), n, rng)
    return [Record(i, float(u[i, 0]), int(err[i, 0])) for i in range(n)]


def gen_paired(spec: GenSpec, n: int) -> list[MultiRecord]:
    if spec.n_models < 2:
        raise ValueError("paired generation needs a spec with at least two models")
    if n == 0:
        return []
    rng = np.random.default_rng(spec.seed)
    u, err = draw_arrays(spec, n, rng)
    return [
        MultiRecord(i, tuple((float(u[i, k]), int(err[i, k])) for k in range(spec.n_models)))
        for i in range(n)
    ]


def oracle_fdr(spec: GenSpec, lam: float, model: int = 0) -> float:
    """Population ``Pr[err = 1 | u <= lam]`` for one model, as an exact bin sum."""
    prof = spec.models[model]
    edges = prof.edges()
    lo, hi = edges[:-1], edges[1:]
    frac = np.clip((lam - lo) / (hi - lo), 0.0, 1.0)
    mass = np.asarray(prof.weights) * frac
    total = mass.sum()
    if total <= 0.0:
        raise ValueError(f"no selection mass at or below {lam}")
    return float((mass * np.asarray(prof.err_prob)).sum() / total)


def _replicate_chunk(args):
    theorem, spec, alpha, n_cal, seed, chunk, size, correction = args
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(chunk,)))
    selected = errors = feasible = 0
    for _ in range(size):
        u, err = draw_arrays(spec, n_cal + 1, rng)
        cu, ce, tu, te = u[:n_cal], err[:n_cal], u[n_cal:], err[n_cal:]
        if theorem == "t1":
            d = calibrate_arrays(cu[:, 0], ce[:, 0], alpha, correction)
            if d.feasible:
                feasible += 1
                if tu[0, 0] <= d.thresholds[0]:
                    selected += 1
                    errors += int(te[0, 0])
        else:
            d = calibrate_multi_arrays(cu, ce, alpha, "exact", correction=correction)
            if d.feasible:
                feasible += 1
                credited, z = cascade_outcomes(tu, te, d.thresholds)
                if credited[0] >= 0:
                    selected += 1
                    errors += int(z[0])
    return selected, errors, feasible


def mc_validate_theorem(theorem: str, spec: GenSpec, alpha: float, n_cal: int, R: int, seed: int,
                        correction: int = 1, workers: int = 1, min_replications: int = 1000) -> dict:
    """Monte Carlo check of the marginal FDR guarantee.

    Each replication draws ``n_cal`` calibration records and one test record,
    calibrates (single model for ``'t1'``, two-model cascade for ``'t2'``)
    and gates the test record. Passes when the error rate among selected test
    records is at most ``alpha + 3 * sqrt(alpha * (1 - alpha) / selected)``.
    Replications are seeded per fixed-size chunk, so the result does not
    depend on ``workers``.
    """
    theorem = theorem.lower()
    if theorem not in ("t1", "t2"):
        raise ValueError("theorem must be 't1' or 't2'")
    if R < min_replications:
        raise ValueError(f"need at least {min_replications} replications, got {R}")
    if theorem == "t2" and spec.n_models != 2:
        raise ValueError("the routing check needs a two-model spec")
    if theorem == "t1" and spec.n_models != 1:
        spec = spec.with_(models=(spec.models[0],), rho=0.0)
    jobs = []
    for c in range(0, (R + CHUNK - 1) // CHUNK):
        size = min(CHUNK, R - c * CHUNK)
        jobs.append((theorem, spec, alpha, n_cal, seed, c, size, correction))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_replicate_chunk, jobs))
    else:
        parts = [_replicate_chunk(j) for j in jobs]
    selected = sum(p[0] for p in parts)
    errors = sum(p[1] for p in parts)
    feasible = sum(p[2] for p in parts)
    out = {
        "theorem": theorem,
        "alpha": alpha,
        "n_cal": n_cal,
        "replications": R,
        "seed": seed,
        "correction": correction,
        "feasible_count": feasible,
        "selected_count": selected,
        "error_count": errors,
    }
    if selected == 0:
        out.update(error_given_selected=None, standard_error=None, bound=None, status="inconclusive", passed=None)
        return out
    ratio = errors / selected
    se = math.sqrt(alpha * (1.0 - alpha) / selected)
    bound = alpha + 3.0 * se
    out.update(error_given_selected=ratio, standard_error=se, bound=bound,
               status="pass" if ratio <= bound else "fail", passed=ratio <= bound)
    return out
