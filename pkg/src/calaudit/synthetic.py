"""Synthetic score populations with known posteriors and beta-CDF score distortion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .dataset import ScoreSet, Seed

_CF_MAX_ITERATIONS = 300
_CF_EPS = 1e-15
_CF_FPMIN = 1e-300


@dataclass(frozen=True)
class SyntheticScenario:
    """A de-calibration regime: scores are the beta(alpha, beta) CDF of the posterior."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        for name, value in (("alpha", self.alpha), ("beta", self.beta)):
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be finite and positive, got {value}")

    @property
    def name(self) -> str:
        return f"alpha{self.alpha:g}_beta{self.beta:g}"


@dataclass(frozen=True)
class SyntheticPopulation:
    """Samples with uniform true posteriors and labels drawn Bernoulli(posterior)."""

    true_posteriors: np.ndarray
    labels: np.ndarray
    seed: int | tuple[int, ...]

    def __post_init__(self) -> None:
        p = np.array(self.true_posteriors, dtype=np.float64, copy=True).reshape(-1)
        labels = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        if p.size != labels.size:
            raise ValueError("posteriors and labels must have equal length")
        p.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "true_posteriors", p)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return int(self.true_posteriors.size)


def _beta_continued_fraction(a: float, b: float, x: np.ndarray) -> np.ndarray:
    """Modified Lentz evaluation of the continued fraction behind I_x(a, b)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    np.copyto(d, _CF_FPMIN, where=np.abs(d) < _CF_FPMIN)
    d = 1.0 / d
    h = d.copy()
    converged = np.zeros(x.shape, dtype=bool)
    for m in range(1, _CF_MAX_ITERATIONS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        np.copyto(d, _CF_FPMIN, where=np.abs(d) < _CF_FPMIN)
        c = 1.0 + aa / c
        np.copyto(c, _CF_FPMIN, where=np.abs(c) < _CF_FPMIN)
        d = 1.0 / d
        h = h * d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        np.copyto(d, _CF_FPMIN, where=np.abs(d) < _CF_FPMIN)
        c = 1.0 + aa / c
        np.copyto(c, _CF_FPMIN, where=np.abs(c) < _CF_FPMIN)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        converged |= np.abs(delta - 1.0) < _CF_EPS
        if converged.all():
            break
    if not converged.all():
        raise RuntimeError(
            f"incomplete beta continued fraction did not converge for a={a}, b={b}"
        )
    return h


def regularized_incomplete_beta(
    x: float | np.ndarray, alpha: float, beta: float
) -> float | np.ndarray:
    """Regularized incomplete beta function I_x(alpha, beta).

    Evaluated by continued fraction, switching via the symmetry
    I_x(a, b) = 1 - I_{1-x}(b, a) on the side where the fraction converges
    fast. alpha = beta = 1 returns x exactly (uniform CDF), and the symmetric
    midpoint I_{0.5}(a, a) is pinned to exactly 0.5.
    """
    for name, value in (("alpha", alpha), ("beta", beta)):
        if not (math.isfinite(value) and value > 0.0):
            raise ValueError(f"{name} must be finite and positive, got {value}")
    scalar = np.isscalar(x) or np.ndim(x) == 0
    xa = np.asarray(x, dtype=np.float64).reshape(-1)
    if xa.size and (xa.min() < 0.0 or xa.max() > 1.0 or not np.all(np.isfinite(xa))):
        raise ValueError("x must lie in [0, 1]")

    if alpha == 1.0 and beta == 1.0:
        out = xa.copy()
    else:
        out = np.empty_like(xa)
        interior = (xa > 0.0) & (xa < 1.0)
        out[xa == 0.0] = 0.0
        out[xa == 1.0] = 1.0
        xi = xa[interior]
        ln_beta = math.lgamma(alpha + beta) - math.lgamma(alpha) - math.lgamma(beta)
        front = np.exp(ln_beta + alpha * np.log(xi) + beta * np.log1p(-xi))
        res = np.empty_like(xi)
        direct = xi < (alpha + 1.0) / (alpha + beta + 2.0)
        if np.any(direct):
            res[direct] = (
                front[direct] * _beta_continued_fraction(alpha, beta, xi[direct]) / alpha
            )
        if np.any(~direct):
            res[~direct] = 1.0 - (
                front[~direct]
                * _beta_continued_fraction(beta, alpha, 1.0 - xi[~direct])
                / beta
            )
        out[interior] = res
        if alpha == beta:
            out[xa == 0.5] = 0.5
        np.clip(out, 0.0, 1.0, out=out)
    if scalar:
        return float(out[0])
    return out.reshape(np.shape(x))


def inverse_beta_cdf(
    q: float | np.ndarray, alpha: float, beta: float, tolerance: float = 1e-10
) -> float | np.ndarray:
    """Inverse of :func:`regularized_incomplete_beta` in x, by bisection."""
    scalar = np.isscalar(q) or np.ndim(q) == 0
    qa = np.asarray(q, dtype=np.float64).reshape(-1)
    if qa.size and (qa.min() < 0.0 or qa.max() > 1.0):
        raise ValueError("q must lie in [0, 1]")
    lo = np.zeros_like(qa)
    hi = np.ones_like(qa)
    for _ in range(60):
        if float(np.max(hi - lo)) <= tolerance:
            break
        mid = 0.5 * (lo + hi)
        below = np.asarray(regularized_incomplete_beta(mid, alpha, beta)) < qa
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    if scalar:
        return float(out[0])
    return out.reshape(np.shape(q))


def generate_population(n: int, seed: Seed) -> SyntheticPopulation:
    """Draw posteriors p ~ Uniform(0, 1) and labels ~ Bernoulli(p), i.i.d."""
    if n < 2:
        raise ValueError("population size must be >= 2")
    rng = np.random.default_rng(seed)
    posteriors = rng.random(n)
    labels = rng.binomial(1, posteriors)
    stored = tuple(int(s) for s in seed) if not isinstance(seed, (int, np.integer)) else int(seed)
    return SyntheticPopulation(true_posteriors=posteriors, labels=labels, seed=stored)


def apply_miscalibration(
    pop: SyntheticPopulation, scenario: SyntheticScenario
) -> ScoreSet:
    """Distort the true posteriors into scores via the scenario's beta CDF.

    The transform is strictly increasing, so rankings (and any ranking metric)
    are unchanged; alpha = beta = 1 leaves the scores perfectly calibrated.
    """
    scores = regularized_incomplete_beta(
        pop.true_posteriors, scenario.alpha, scenario.beta
    )
    return ScoreSet(scores=scores, labels=pop.labels)


def write_population_csv(
    pop: SyntheticPopulation, scenario: SyntheticScenario, dest: str | IO[str]
) -> None:
    """Standard score CSV plus a true_posterior column."""
    scoreset = apply_miscalibration(pop, scenario)
    if hasattr(dest, "write"):
        _write_population(pop, scoreset, dest)
        return
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        _write_population(pop, scoreset, fh)


def _write_population(
    pop: SyntheticPopulation, scoreset: ScoreSet, fh: IO[str]
) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(
        ["sample_id", "patient_id", "score", "label", "group", "true_posterior"]
    )
    for i in range(scoreset.n):
        writer.writerow(
            [
                scoreset.sample_ids[i],
                scoreset.patient_ids[i],
                str(scoreset.scores[i]),
                int(scoreset.labels[i]),
                scoreset.groups[i],
                str(pop.true_posteriors[i]),
            ]
        )
