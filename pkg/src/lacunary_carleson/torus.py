"""Functions on the discretized unit torus.

A ``GridFunction`` holds N = 2**m complex samples at x_i = i/N. Characters are
e_n(x) = exp(2*pi*i*n*x), so the n-th Fourier coefficient is the normalized
DFT ``fft(samples)[n] / N``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, FrequencyOverflowError, GaugeError

__all__ = [
    "GridFunction",
    "Spectrum",
    "LacunarySequence",
    "OrliczGauge",
    "EXP_L2",
    "L1_GAUGE",
    "L_LOGLOG",
    "L_LOGLOG_LOGLOGLOG",
    "l_log_l",
    "to_spectrum",
    "from_spectrum",
    "partial_sum",
    "partial_sums",
    "lacunary_maximal",
    "full_carleson_maximal",
    "linearize",
    "weak_l1_norm",
    "orlicz_norm",
    "lp_norm",
    "character_phase",
]


def _check_m(m: int) -> int:
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool):
        raise ConfigurationError(f"grid exponent must be an integer, got {m!r}")
    if m < 3:
        raise ConfigurationError(f"grid exponent must be >= 3, got {m}")
    return int(m)


def character_phase(n: int, N: int) -> np.ndarray:
    """exp(2*pi*i*n*i/N) for i = 0..N-1, with the product reduced mod N first."""
    idx = (np.arange(N, dtype=np.int64) * int(n)) % N
    return np.exp(2j * np.pi * idx / N)


@dataclass(frozen=True, eq=False)
class GridFunction:
    m: int
    samples: np.ndarray

    def __post_init__(self):
        m = _check_m(self.m)
        arr = np.array(self.samples, dtype=np.complex128).reshape(-1)
        if arr.size != 2**m:
            raise ConfigurationError(f"expected {2**m} samples for m={m}, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError("samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "samples", arr)

    @property
    def N(self) -> int:
        return self.samples.size

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.N) / self.N

    def abs(self) -> np.ndarray:
        return np.abs(self.samples)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _same_grid(self, other)
        return GridFunction(self.m, self.samples + other.samples)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _same_grid(self, other)
        return GridFunction(self.m, self.samples - other.samples)

    def __mul__(self, c) -> "GridFunction":
        if isinstance(c, GridFunction):
            _same_grid(self, c)
            return GridFunction(self.m, self.samples * c.samples)
        return GridFunction(self.m, self.samples * c)

    __rmul__ = __mul__

    # constructors

    @classmethod
    def zeros(cls, m: int) -> "GridFunction":
        return cls(m, np.zeros(2**m))

    @classmethod
    def constant(cls, m: int, c: complex) -> "GridFunction":
        return cls(m, np.full(2**m, c, dtype=np.complex128))

    @classmethod
    def character(cls, m: int, n: int) -> "GridFunction":
        return cls(m, character_phase(n, 2**m))

    @classmethod
    def indicator(cls, m: int, mask) -> "GridFunction":
        mask = np.asarray(mask, dtype=bool)
        return cls(m, mask.astype(np.float64))

    @classmethod
    def interval_indicator(cls, m: int, start: float, end: float) -> "GridFunction":
        """Indicator of [start, end) sampled on the grid (no wraparound)."""
        x = np.arange(2**m) / 2**m
        return cls.indicator(m, (x >= start) & (x < end))

    @classmethod
    def from_callable(cls, m: int, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        x = np.arange(2**m) / 2**m
        return cls(m, fn(x))

    # serialization

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "re": self.samples.real.tolist(),
            "im": self.samples.imag.tolist(),
        }

    @classmethod
    def from_json(cls, record: dict) -> "GridFunction":
        try:
            m = record["m"]
            re = np.asarray(record["re"], dtype=np.float64)
            im = np.asarray(record["im"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed GridFunction record: {exc}") from None
        if re.shape != im.shape:
            raise ConfigurationError("re and im arrays differ in length")
        return cls(m, re + 1j * im)

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    def to_csv(self, path, **columns: Sequence[float]) -> None:
        """Write a sample table: index, x, re, im and any extra per-sample columns."""
        names = ["i", "x", "re", "im", *columns]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            x = self.grid
            extra = [np.asarray(v) for v in columns.values()]
            for i in range(self.N):
                row = [i, repr(float(x[i])), repr(float(self.samples[i].real)),
                       repr(float(self.samples[i].imag))]
                row.extend(repr(float(v[i])) for v in extra)
                w.writerow(row)


def _same_grid(a: GridFunction, b: GridFunction) -> None:
    if a.m != b.m:
        raise ConfigurationError(f"grid mismatch: m={a.m} vs m={b.m}")


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier coefficients for n in [-N/2, N/2), stored in increasing n."""

    m: int
    coeffs: np.ndarray

    def __post_init__(self):
        m = _check_m(self.m)
        arr = np.array(self.coeffs, dtype=np.complex128).reshape(-1)
        if arr.size != 2**m:
            raise ConfigurationError(f"expected {2**m} coefficients for m={m}, got {arr.size}")
        arr.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "coeffs", arr)

    @property
    def N(self) -> int:
        return self.coeffs.size

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(-self.N // 2, self.N // 2)

    def __getitem__(self, n: int) -> complex:
        if not -self.N // 2 <= n < self.N // 2:
            raise FrequencyOverflowError(f"frequency {n} outside [-N/2, N/2) for N={self.N}")
        return complex(self.coeffs[n + self.N // 2])


def to_spectrum(f: GridFunction) -> Spectrum:
    return Spectrum(f.m, np.fft.fftshift(np.fft.fft(f.samples)) / f.N)


def from_spectrum(s: Spectrum) -> GridFunction:
    return GridFunction(s.m, np.fft.ifft(np.fft.ifftshift(s.coeffs)) * s.N)


@dataclass(frozen=True)
class LacunarySequence:
    """n_j = alpha**j for j = 0..count-1."""

    alpha: int
    count: int

    def __post_init__(self):
        if not isinstance(self.alpha, (int, np.integer)) or self.alpha < 2:
            raise ConfigurationError(f"alpha must be an integer >= 2, got {self.alpha!r}")
        if self.count < 1:
            raise ConfigurationError(f"count must be >= 1, got {self.count}")

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(int(self.alpha) ** j for j in range(self.count))

    def __iter__(self):
        return iter(self.values)

    def __len__(self) -> int:
        return self.count

    @property
    def max(self) -> int:
        return int(self.alpha) ** (self.count - 1)

    @classmethod
    def fitting(cls, alpha: int, m: int, count: int | None = None) -> "LacunarySequence":
        """Longest (or requested) sequence with every term below N/2."""
        longest = 0
        while alpha**longest < 2 ** (m - 1):
            longest += 1
        if count is None:
            count = longest
        if count > longest:
            raise FrequencyOverflowError(
                f"alpha={alpha}, count={count} exceeds N/2={2 ** (m - 1)}"
            )
        return cls(alpha, count)


def _check_frequency(n: int, N: int) -> int:
    n = int(n)
    if n < 0:
        raise ConfigurationError(f"partial sum index must be nonnegative, got {n}")
    if n >= N // 2:
        raise FrequencyOverflowError(f"partial sum index {n} must be < N/2 = {N // 2}")
    return n


def partial_sums(f: GridFunction, ns: Iterable[int]) -> np.ndarray:
    """Rows S_n f for each n in ``ns`` (shape len(ns) x N).

    Every caller goes through this routine so that a given S_n f is bitwise
    identical no matter which batch it was computed in.
    """
    N = f.N
    ns = [_check_frequency(n, N) for n in ns]
    if not ns:
        return np.zeros((0, N), dtype=np.complex128)
    spec = np.fft.fft(f.samples)
    k = np.fft.fftfreq(N, d=1.0 / N).astype(np.int64)
    keep = np.abs(k)[None, :] <= np.asarray(ns)[:, None]
    return np.fft.ifft(np.where(keep, spec[None, :], 0), axis=-1)


def partial_sum(f: GridFunction, n: int) -> GridFunction:
    """S_n f = sum over |k| <= n of f^(k) e_k."""
    return GridFunction(f.m, partial_sums(f, [n])[0])


def lacunary_maximal(f: GridFunction, seq: LacunarySequence) -> GridFunction:
    """Pointwise sup over j of |S_{n_j} f|."""
    return GridFunction(f.m, np.abs(partial_sums(f, seq.values)).max(axis=0))


def linearize(f: GridFunction, seq: LacunarySequence) -> np.ndarray:
    """Per-sample frequency N(x) in seq attaining the lacunary sup.

    Ties go to the smallest index j (``argmax`` returns the first maximum).
    """
    vals = np.asarray(seq.values, dtype=np.int64)
    j = np.argmax(np.abs(partial_sums(f, vals)), axis=0)
    return vals[j]


def full_carleson_maximal(f: GridFunction, chunk: int | None = None) -> GridFunction:
    """Pointwise sup of |S_n f| over every n in [0, N/2)."""
    N = f.N
    if chunk is None:
        chunk = max(1, 2**22 // N)
    out = np.zeros(N)
    for start in range(0, N // 2, chunk):
        rows = partial_sums(f, range(start, min(N // 2, start + chunk)))
        np.maximum(out, np.abs(rows).max(axis=0), out=out)
    return GridFunction(f.m, out)


def _abs_samples(g) -> np.ndarray:
    if isinstance(g, GridFunction):
        return g.abs()
    arr = np.abs(np.asarray(g))
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError("samples must be finite")
    return arr


def weak_l1_norm(g) -> float:
    """sup over t of t * |{|g| > t}|, exactly: max_i v_i * i/N over sorted |g|."""
    v = np.sort(_abs_samples(g).reshape(-1))[::-1]
    if v.size == 0:
        return 0.0
    return float(np.max(v * (np.arange(1, v.size + 1) / v.size)))


def lp_norm(f, p: float) -> float:
    """Grid-mean L^p norm; ``p = inf`` gives the max."""
    if p < 1:
        raise ConfigurationError(f"p must be >= 1, got {p}")
    a = _abs_samples(f)
    if math.isinf(p):
        return float(a.max())
    if p == 1:
        return float(a.mean())
    if p == 2:
        return float(math.sqrt(np.mean(a * a)))
    return float(np.mean(a**p) ** (1.0 / p))


# Orlicz gauges -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OrliczGauge:
    name: str
    phi: Callable[[np.ndarray], np.ndarray]
    # multiplier on ||f||_inf for the first bracket point
    start_scale: float = 1.0

    def __call__(self, t):
        with np.errstate(over="ignore"):
            return self.phi(np.asarray(t, dtype=np.float64))

    def check(self, samples: np.ndarray | None = None) -> bool:
        """phi(0) = 0, strict increase and midpoint convexity at sampled points."""
        t = np.linspace(0.0, 10.0, 401) if samples is None else np.sort(np.asarray(samples))
        v = self(t)
        if float(self(np.array([0.0]))[0]) != 0.0:
            return False
        if not np.all(np.diff(v) > 0):
            return False
        mid = self((t[:-2] + t[2:]) / 2)
        return bool(np.all(mid <= (v[:-2] + v[2:]) / 2 + 1e-12 * np.abs(v[2:])))


EXP_L2 = OrliczGauge("exp(L^2)", lambda t: np.expm1(t * t), start_scale=1.0 / math.sqrt(math.log(2)))
L1_GAUGE = OrliczGauge("L^1", lambda t: t)


def l_log_l(alpha: float) -> OrliczGauge:
    """Gauge t * (ln(e + t))**alpha for L (log L)^alpha."""
    return OrliczGauge(f"L(log L)^{alpha:g}", lambda t: t * np.log(np.e + t) ** alpha)


L_LOGLOG = OrliczGauge("L log log L", lambda t: t * np.log(np.log(np.exp(np.e) + t)))
_EEE = math.exp(math.exp(math.e))
L_LOGLOG_LOGLOGLOG = OrliczGauge(
    "L log log L log log log L",
    lambda t: t * np.log(np.log(np.exp(np.e) + t)) * np.log(np.log(np.log(_EEE + t))),
)


def orlicz_norm(
    f,
    gauge: OrliczGauge,
    rtol: float = 1e-9,
    max_iter: int = 200,
) -> float:
    """Luxemburg norm inf{c > 0 : mean(phi(|f|/c)) <= 1} by bisection."""
    a = _abs_samples(f).reshape(-1)
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return 0.0

    def excess(c: float) -> float:
        return float(np.mean(gauge(a / c))) - 1.0

    hi = top * gauge.start_scale
    for _ in range(max_iter):
        if excess(hi) <= 0:
            break
        hi *= 2.0
    else:
        raise GaugeError(f"no upper bracket for gauge {gauge.name}")
    lo = hi / 2.0
    for _ in range(max_iter):
        if excess(lo) > 0:
            break
        hi, lo = lo, lo / 2.0
    else:
        raise GaugeError(f"no lower bracket for gauge {gauge.name}")

    for _ in range(max_iter):
        if hi - lo <= rtol * hi:
            break
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0:
            hi = mid
        else:
            lo = mid
    else:
        raise GaugeError(f"bisection did not reach rtol={rtol} for gauge {gauge.name}")
    return hi
