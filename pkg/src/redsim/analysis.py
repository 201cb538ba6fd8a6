# -*- coding: UTF-8 -*-

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from itertools import cycle, islice
from math import isfinite, sqrt
from typing import Dict, Iterator, List, Sequence, Tuple, Union

import numpy as np

from .aqm import RedParams, RedState, RedVariant, region_drop_prob, settle_count
from .exceptions import AnalysisError
from .mixins import Record
from .simkernel import RandomStream

# slack on the cumulative condition W_n * p_b <= 1:
_EDGE_TOLERANCE: float = 1e-12

# survival below this ends the exhaustive walk:
_TAIL_EPSILON: float = 1e-15

_BATCH: int = 1 << 16


class Pmf(object):
    """Probability mass function on the positive integers."""

    __slots__ = ("_masses",)

    def __init__(self, support: Union[Dict[int, float], Sequence[Tuple[int, float]]] = ()):
        items = support.items() if isinstance(support, dict) else support
        masses: Dict[int, float] = {}
        for n, mass in items:
            if n < 1:
                raise AnalysisError(f"Pmf support must be positive integers, got {n}!")
            if mass < 0:
                raise AnalysisError(f"Pmf masses must be non-negative, got {mass} at n={n}!")
            masses[int(n)] = masses.get(int(n), 0.0) + float(mass)
        self._masses = dict(sorted(masses.items()))

    def __iter__(self) -> Iterator[Tuple[int, float]]:
        return iter(self._masses.items())

    def __len__(self) -> int:
        return len(self._masses)

    def __repr__(self) -> str:
        head = ", ".join(f"{n}: {mass:.6g}" for n, mass in islice(self._masses.items(), 6))
        tail = ", ..." if len(self._masses) > 6 else ""
        return f"Pmf({{{head}{tail}}})"

    @property
    def support(self) -> List[Tuple[int, float]]:
        return list(self._masses.items())

    def mass(self, n: int) -> float:
        return self._masses.get(n, 0.0)

    def total(self) -> float:
        return sum(self._masses.values())

    def mean(self) -> float:
        return sum(n * mass for n, mass in self._masses.items())

    def max_abs_difference(self, other: Pmf) -> float:
        keys = set(self._masses) | set(other._masses)
        return max((abs(self.mass(n) - other.mass(n)) for n in keys), default=0.0)


class DropLawInput(Record):
    """
    Frozen p_b plus the sizes of the arrivals following a drop.

    With `periodic` the size sequence repeats forever; otherwise it must be
    long enough for the law to close.
    """

    def __init__(self, p_b: float, sizes: Sequence[float], M: float, periodic: bool = True):
        if not (isfinite(p_b) and 0 < p_b < 1):
            raise AnalysisError(f"p_b must lie in (0, 1) not {p_b}!")
        if M <= 0:
            raise AnalysisError(f"M must be positive not {M}!")
        sizes = [float(size) for size in sizes]
        if len(sizes) == 0:
            raise AnalysisError("At least one packet size is required!")
        for size in sizes:
            if not 0 < size <= M:
                raise AnalysisError(f"Packet sizes must lie in (0, {M}] not {size}!")
        self.p_b = float(p_b)
        self.sizes = sizes
        self.M = float(M)
        self.periodic = periodic

    def stream(self) -> Iterator[float]:
        return cycle(self.sizes) if self.periodic else iter(self.sizes)


class GoodputModel(Record):
    """Square-root model inputs; `C` is dimensionless."""

    def __init__(self, mss: float, rtt: float, p: float, C: float = 1.0):
        for name, value in (("mss", mss), ("rtt", rtt), ("C", C)):
            if not (isfinite(value) and value > 0):
                raise AnalysisError(f"'{name}' must be positive not {value}!")
        if not (isfinite(p) and 0 <= p <= 1):
            raise AnalysisError(f"'p' must lie in [0, 1] not {p}!")
        self.mss = float(mss)
        self.rtt = float(rtt)
        self.p = float(p)
        self.C = float(C)


def _cumulative_law(p_b: float, weights: Iterator[float]) -> Pmf:
    """
    N counts arrivals from one drop to the next, the dropped one included.
    With W_n = w_1 + ... + w_n:

        P[N = n] = p_b * w_n          while W_n <= 1/p_b
        P[N = n] = 1 - p_b * W_{n-1}  at the first n with W_n > 1/p_b
    """
    masses: List[Tuple[int, float]] = []
    cumulative = 0.0
    total = 0.0
    n = 0
    for weight in weights:
        n += 1
        cumulative += weight
        if cumulative * p_b > 1.0 + _EDGE_TOLERANCE:
            residual = 1.0 - total
            if residual > 0.0:
                masses.append((n, residual))
            return Pmf(masses)
        mass = p_b * weight
        masses.append((n, mass))
        total += mass
        if total >= 1.0 - _EDGE_TOLERANCE:
            return Pmf(masses)
    raise AnalysisError(
        f"The size sequence ended after {n} packets before the drop law closed "
        f"(cumulative weight {cumulative:.6g} < 1/p_b = {1.0 / p_b:.6g})!"
    )


def red1_interdrop_pmf(p_b: float) -> Pmf:
    """Uniform law: mass p_b on 1..floor(1/p_b), the remainder just after."""
    if not (isfinite(p_b) and 0 < p_b < 1):
        raise AnalysisError(f"p_b must lie in (0, 1) not {p_b}!")
    return _cumulative_law(p_b, cycle([1.0]))


def red4_interdrop_pmf(law: DropLawInput) -> Pmf:
    """P[N = n] = p_b * L_n / M under the cumulative condition."""
    return _cumulative_law(law.p_b, (size / law.M for size in law.stream()))


def red5_interdrop_pmf(law: DropLawInput) -> Pmf:
    """P[N = n] = p_b * (L_n / M)^2 under the cumulative condition."""
    return _cumulative_law(law.p_b, ((size / law.M) ** 2 for size in law.stream()))


def closed_form_pmf(variant: Union[RedVariant, str], law: DropLawInput) -> Pmf:
    variant = RedVariant.parse(variant)
    if variant is RedVariant.RED1:
        return red1_interdrop_pmf(law.p_b)
    if variant is RedVariant.RED4:
        return red4_interdrop_pmf(law)
    if variant is RedVariant.RED5:
        return red5_interdrop_pmf(law)
    raise AnalysisError(f"No closed-form inter-drop law for {variant.value}!")


def hazard_sequence(variant: Union[RedVariant, str], p_b: float, sizes: Sequence[float], M: float,
                    horizon: int, periodic: bool = True) -> List[float]:
    """
    Drop probability of the n-th arrival after a drop, given that arrivals
    1..n-1 were accepted, from the queue manager's own state machine.
    Stops at the first certain drop or at `horizon`.
    """
    law = DropLawInput(p_b, sizes, M, periodic)
    params = RedParams(M=law.M, capacity=max(law.M, 2.0), min_th=1.0, max_th=2.0)
    state = RedState(variant)
    hazards: List[float] = []
    for size in islice(law.stream(), horizon):
        p_a = region_drop_prob(state, params, law.p_b, size)
        hazards.append(p_a)
        if p_a >= 1.0:
            break
        settle_count(state, params, size, dropped=False)
    return hazards


def exhaustive_interdrop(variant: Union[RedVariant, str], p_b: float, sizes: Sequence[float], M: float,
                         horizon: int = 100000, periodic: bool = True) -> Pmf:
    """
    Exact law of N by walking the no-drop path:
    P[N = n] = h(n) * prod_{i < n} (1 - h(i)).

    :raise AnalysisError: If more than 1e-12 of mass survives `horizon`.
    """
    masses: List[Tuple[int, float]] = []
    survival = 1.0
    for n, hazard in enumerate(hazard_sequence(variant, p_b, sizes, M, horizon, periodic), start=1):
        mass = survival * hazard
        if mass > 0.0:
            masses.append((n, mass))
        survival *= 1.0 - hazard
        if survival < _TAIL_EPSILON:
            break
    if survival > 1e-12:
        raise AnalysisError(
            f"{survival:.3g} of the inter-drop mass survives the horizon of {horizon} arrivals!"
        )
    return Pmf(masses)


def _sample_batch(hazards: np.ndarray, stream: RandomStream, size: int) -> np.ndarray:
    counts = np.zeros(len(hazards) + 1, dtype=np.int64)
    alive = size
    for idx, hazard in enumerate(hazards):
        if alive == 0:
            break
        dropped = int(np.count_nonzero(stream.uniforms(alive) < hazard))
        counts[idx + 1] = dropped
        alive -= dropped
    if alive > 0:
        raise AnalysisError(f"{alive} sample(s) outlived the hazard sequence!")
    return counts


def sample_interdrop(variant: Union[RedVariant, str], p_b: float, sizes: Sequence[float], M: float,
                     stream: RandomStream, n_samples: int, **kwargs) -> Pmf:
    """
    Empirical law of N from `n_samples` simulated inter-drop windows.

    Batches of `batch` samples draw from their own substreams of `stream`,
    so the result does not depend on `workers`.

    **Keyword arguments:**
        ``horizon``: int
            Longest window considered (default 100000).
        ``batch``: int
            Samples per batch.
        ``workers``: int
            Threads drawing batches concurrently.
        ``periodic``: bool
            Repeat `sizes` forever (default).
    """
    if n_samples < 1:
        raise AnalysisError(f"n_samples must be at least 1 not {n_samples}!")

    horizon = kwargs.pop("horizon", 100000)
    batch = kwargs.pop("batch", _BATCH)
    workers = kwargs.pop("workers", 1)
    periodic = kwargs.pop("periodic", True)

    hazards = np.asarray(hazard_sequence(variant, p_b, sizes, M, horizon, periodic))
    if hazards[-1] < 1.0:
        raise AnalysisError(
            f"The drop process is not certain to fire within {horizon} arrivals; raise the horizon!"
        )

    jobs = [
        (stream.spawn(f"batch-{idx}"), min(batch, n_samples - start))
        for idx, start in enumerate(range(0, n_samples, batch))
    ]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            parts = list(executor.map(lambda job: _sample_batch(hazards, *job), jobs))
    else:
        parts = [_sample_batch(hazards, *job) for job in jobs]

    counts = np.sum(parts, axis=0)
    return Pmf(
        (n, count / n_samples)
        for n, count in enumerate(counts.tolist()) if count > 0
    )


def pmf_distance(a: Pmf, b: Pmf) -> float:
    """Total-variation distance over the union support."""
    keys = {n for n, _ in a} | {n for n, _ in b}
    return 0.5 * sum(abs(a.mass(n) - b.mass(n)) for n in keys)


def drop_size_shares(pmf: Pmf, sizes: Sequence[float], periodic: bool = True) -> Dict[float, float]:
    """Probability that the packet ending an inter-drop window has size L."""
    source = cycle(sizes) if periodic else iter(sizes)
    shares: Dict[float, float] = {}
    position = 0
    for n, mass in pmf:
        for size in source:
            position += 1
            if position == n:
                shares[float(size)] = shares.get(float(size), 0.0) + mass
                break
        else:
            raise AnalysisError(f"The size sequence ended before n={n}!")
    return shares


def goodput_bound(model: GoodputModel) -> float:
    """
    MSS * C / (RTT * sqrt(p)) in bytes per second.

    :raise AnalysisError: If p = 0 (the bound is unbounded).
    """
    if model.p == 0:
        raise AnalysisError("The goodput bound is unbounded for a zero drop probability!")
    return model.mss * model.C / (model.rtt * sqrt(model.p))


def fairness_required_p(mss_a: float, mss_b: float, p_a: float) -> float:
    """
    Drop probability flow b needs for the same goodput as flow a:
    MSS_a^2 / p_a = MSS_b^2 / p_b.
    """
    for name, value in (("mss_a", mss_a), ("mss_b", mss_b), ("p_a", p_a)):
        if not (isfinite(value) and value > 0):
            raise AnalysisError(f"'{name}' must be positive not {value}!")
    ratio = mss_b / mss_a
    return p_a * ratio * ratio
