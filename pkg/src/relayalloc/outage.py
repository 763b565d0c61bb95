"""Outage probability of a two-hop fixed-gain amplify-and-forward link.

Per subcarrier, the source transmits with power pt through a Rayleigh
channel with mean power gain mu1, the relay amplifies with power pr through
a second Rayleigh channel with mean gain mu2, and the two hops add noise
with powers eta1 and eta2. The end-to-end SNR is

    snr = pt * pr * g1 * g2 / (pr * g2 * eta1 + eta2),

with g1, g2 exponential with means mu1, mu2. The outage probability below a
threshold s has the closed form

    Phi(s) = 1 - 2 sqrt(A) K1(2 sqrt(A)) exp(-s eta1 / (mu1 pt)),
    A      = s eta2 / (mu1 mu2 pt pr),

evaluated here in the exponentially scaled form

    Phi(s) = 1 - [z e^z K1(z)] * exp(-(z + s eta1 / (mu1 pt))),  z = 2 sqrt(A),

which neither underflows nor overflows for any positive arguments; the
bracket tends to 1 as z -> 0, so eta2 -> 0 and large-power limits are exact.

A block of T active subcarriers is in outage when any of them is; averaging
that over the legitimate activation patterns gives the pattern-averaged
outage. A seeded Monte-Carlo estimator provides the independent check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bessel import xk1e
from .errors import InvalidArgumentError, NumericConsistencyError
from .saps import SapSet

_PROB_TOL = 1e-12
_MC_MIN_TRIALS = 10_000
_MC_CHUNK = 1_000_000


@dataclass(frozen=True)
class SubcarrierStats:
    """Channel statistics of one subcarrier: hop gain means and noise powers."""

    mu1: float
    mu2: float
    eta1: float
    eta2: float

    def __post_init__(self):
        for name in ("mu1", "mu2", "eta1", "eta2"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidArgumentError(f"{name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class SubcarrierPower:
    """Transmit/relay power pair for one subcarrier."""

    pt: float
    pr: float

    def __post_init__(self):
        for name in ("pt", "pr"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvalidArgumentError(f"{name} must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class OutageQuery:
    """Inputs of a pattern-averaged outage evaluation.

    stats and powers are indexed by subcarrier (1-based indices in the SAPs
    refer to position i -> stats[i-1]).
    """

    s: float
    stats: tuple[SubcarrierStats, ...]
    powers: tuple[SubcarrierPower, ...]
    sap_set: SapSet

    def __post_init__(self):
        if not (np.isfinite(self.s) and self.s > 0):
            raise InvalidArgumentError(f"snr threshold must be finite and > 0, got {self.s!r}")
        if len(self.stats) != len(self.powers):
            raise InvalidArgumentError(
                f"stats and powers lengths differ: {len(self.stats)} vs {len(self.powers)}"
            )
        top = max(i for sap in self.sap_set.saps for i in sap.indices)
        if top > len(self.stats):
            raise InvalidArgumentError(
                f"SAP references subcarrier {top} but only {len(self.stats)} stats given"
            )


@dataclass(frozen=True)
class MonteCarloEstimate:
    probability: float
    std_error: float
    trials: int


def _check_s(s: float) -> None:
    if not (np.isfinite(s) and s > 0):
        raise InvalidArgumentError(f"snr threshold must be finite and > 0, got {s!r}")


def end_to_end_snr(g1, g2, power: SubcarrierPower, eta1: float, eta2: float):
    """Instantaneous SNR for channel gain draws g1, g2 (scalar or array)."""
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    return (power.pt * power.pr * g1 * g2) / (power.pr * g2 * eta1 + eta2)


def _clamp_probability(p):
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if (arr < -_PROB_TOL).any() or (arr > 1.0 + _PROB_TOL).any():
        bad = arr[(arr < -_PROB_TOL) | (arr > 1.0 + _PROB_TOL)]
        raise NumericConsistencyError(
            f"outage probability escaped [0, 1] beyond tolerance: {bad[:4]}"
        )
    return np.clip(arr, 0.0, 1.0)


def outage_grid(stats: SubcarrierStats, pt, pr, s: float) -> np.ndarray:
    """Vectorized Phi(s) over broadcastable power arrays (zero power -> 1)."""
    _check_s(s)
    pt = np.asarray(pt, dtype=float)
    pr = np.asarray(pr, dtype=float)
    if (pt < 0).any() or (pr < 0).any():
        raise InvalidArgumentError("powers must be >= 0")
    shape = np.broadcast(pt, pr).shape
    pt_b, pr_b = np.broadcast_arrays(np.atleast_1d(pt), np.atleast_1d(pr))
    pt_b = pt_b.reshape(-1)
    pr_b = pr_b.reshape(-1)
    out = np.ones(pt_b.shape, dtype=float)
    on = (pt_b > 0) & (pr_b > 0)
    if on.any():
        ptv = pt_b[on]
        prv = pr_b[on]
        b = s * stats.eta1 / (stats.mu1 * ptv)
        a = s * stats.eta2 / (stats.mu1 * stats.mu2 * ptv * prv)
        z = 2.0 * np.sqrt(a)
        out[on] = 1.0 - xk1e(z) * np.exp(-(z + b))
    return _clamp_probability(out).reshape(shape)


def subcarrier_outage(stats: SubcarrierStats, power: SubcarrierPower, s: float) -> float:
    """Closed-form P(snr < s) for one subcarrier."""
    return float(outage_grid(stats, power.pt, power.pr, s))


def combine_active_outages(phis) -> float:
    """Block outage 1 - prod_i (1 - phi_i) over the active subcarriers."""
    q = 1.0
    for phi in phis:
        q *= 1.0 - phi
    return float(_clamp_probability(1.0 - q)[0])


def all_active_outage(stats, powers, s: float) -> float:
    """Block outage with every listed subcarrier active."""
    if len(stats) != len(powers):
        raise InvalidArgumentError("stats and powers lengths differ")
    return combine_active_outages(
        subcarrier_outage(st, pw, s) for st, pw in zip(stats, powers)
    )


def average_outage(query: OutageQuery) -> float:
    """Outage averaged over the legitimate activation patterns.

    For each pattern the block is in outage when any active subcarrier is;
    inactive subcarriers do not contribute.
    """
    phi = [subcarrier_outage(st, pw, query.s) for st, pw in zip(query.stats, query.powers)]
    total = 0.0
    for sap in query.sap_set.saps:
        total += combine_active_outages(phi[i - 1] for i in sap.indices)
    return float(_clamp_probability(total / query.sap_set.xi)[0])


def monte_carlo_outage(
    stats: SubcarrierStats,
    power: SubcarrierPower,
    s: float,
    trials: int,
    seed: int,
) -> MonteCarloEstimate:
    """Empirical P(snr < s) from seeded exponential channel draws.

    Draws are consumed in fixed-size chunks from one generator, so the
    estimate is deterministic in (trials, seed) and memory stays bounded.
    """
    _check_s(s)
    if trials < _MC_MIN_TRIALS:
        raise InvalidArgumentError(f"trials must be >= {_MC_MIN_TRIALS}, got {trials}")
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < trials:
        n = min(_MC_CHUNK, trials - done)
        g1 = rng.exponential(stats.mu1, n)
        g2 = rng.exponential(stats.mu2, n)
        snr = end_to_end_snr(g1, g2, power, stats.eta1, stats.eta2)
        hits += int(np.count_nonzero(snr < s))
        done += n
    p = hits / trials
    se = float(np.sqrt(p * (1.0 - p) / trials))
    return MonteCarloEstimate(probability=p, std_error=se, trials=trials)
