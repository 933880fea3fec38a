"""Driving sequences: the uniforms a sampler consumes, in a fixed order.

Three kinds are provided:

* ``pseudo_random`` -- numpy's Philox4x64 counter-based generator, keyed by
  the seed.  Each raw 64-bit word ``x`` maps to ``((x >> 11) + 0.5) / 2**53``,
  which lies strictly inside (0, 1).
* ``cud_lfsr`` -- a completely uniformly distributed sequence of length
  ``2**m - 1`` from a linear feedback shift register over GF(2) with a
  primitive feedback polynomial (see :data:`PRIMITIVE_POLYNOMIALS`).
* ``van_der_corput`` -- the radical-inverse sequence.  It is uniformly
  distributed but *not* CUD and only exists as a negative control.

CUD output map
--------------
The register produces an m-sequence ``b_0, b_1, ...`` of period
``P = 2**m - 1``.  The i-th output reads ``m`` consecutive bits starting at
position ``offset + i*s (mod P)`` as a binary fraction::

    u_i = sum_j b_{offset + i*s + j} 2**-(j+1)

where ``s`` is the smallest integer ``>= m`` coprime to ``P`` (so consecutive
outputs use disjoint bit windows and the decimation visits every position).
Every non-zero m-bit window occurs exactly once per period, so over one period
the outputs are exactly ``{1, ..., 2**m - 1} / 2**m`` -- never 0, never 1.
The seed selects ``offset = seed mod P``, i.e. a cyclic rotation of the same
sequence.

A run that consumes a whole period uses the same values whatever the
rotation, so rotations are weak replicates.  ``variant`` selects a different
feedback polynomial of the same degree instead (see
:data:`POLYNOMIAL_FAMILIES`), giving genuinely different sequences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import gcd

import numpy as np

from .errors import ConfigError, InvalidWidth, SequenceExhausted, UnsupportedRegisterSize

NEAR_ZERO = 2.0**-32
EQUIDISTRIBUTION_T_MAX = 8

# One primitive polynomial per register size, encoded with bit k holding the
# coefficient of x**k.  Candidates were drawn at random, checked for
# primitivity, and ranked by the equidistribution of overlapping output
# tuples (tools/search_polynomials.py reproduces the selection).
PRIMITIVE_POLYNOMIALS: dict[int, int] = {
    10: 0x6B5,
    11: 0xA7F,
    12: 0x1BA7,
    13: 0x37E1,
    14: 0x6B39,
    15: 0xABD7,
    16: 0x19143,
    17: 0x2D727,
    18: 0x740CB,
    19: 0x9A5CD,
    20: 0x16A0ED,
}


# --------------------------------------------------------------------------
# GF(2) polynomial helpers


def _prime_factors(n: int) -> list[int]:
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out.append(n)
    return out


def _gf2_mulmod(a: int, b: int, poly: int, m: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if (a >> m) & 1:
            a ^= poly
    return r


def _gf2_powmod(a: int, e: int, poly: int, m: int) -> int:
    r = 1
    while e:
        if e & 1:
            r = _gf2_mulmod(r, a, poly, m)
        a = _gf2_mulmod(a, a, poly, m)
        e >>= 1
    return r


def is_primitive(poly: int) -> bool:
    """True when ``poly`` (bit k = coefficient of x**k) is primitive over GF(2).

    x generates the full multiplicative group of order 2**m - 1 exactly when
    x**(2**m - 1) == 1 and x**((2**m - 1)/q) != 1 for every prime q dividing
    the group order.
    """
    m = poly.bit_length() - 1
    if m < 2 or not poly & 1:
        return False
    order = (1 << m) - 1
    if _gf2_powmod(2, order, poly, m) != 1:
        return False
    return all(_gf2_powmod(2, order // q, poly, m) != 1 for q in _prime_factors(order))


def decimation_step(m: int) -> int:
    """Smallest step >= m that is coprime to the period 2**m - 1."""
    period = (1 << m) - 1
    s = m
    while gcd(s, period) != 1:
        s += 1
    return s


def msequence(poly: int) -> np.ndarray:
    """One period of the maximal-length bit sequence of a Galois LFSR."""
    m = poly.bit_length() - 1
    period = (1 << m) - 1
    taps = poly >> 1
    state = 1
    bits = bytearray(period)
    for k in range(period):
        lsb = state & 1
        bits[k] = lsb
        state >>= 1
        if lsb:
            state ^= taps
    return np.frombuffer(bytes(bits), dtype=np.uint8)


def _windows(bits: np.ndarray, m: int) -> np.ndarray:
    """Integer value of the m-bit window starting at every position (cyclic)."""
    period = bits.size
    ext = np.concatenate([bits, bits[: m - 1]]).astype(np.int64)
    w = np.zeros(period, dtype=np.int64)
    for j in range(m):
        w = (w << 1) | ext[j : j + period]
    return w


def lfsr_integers(poly: int, offset: int = 0) -> np.ndarray:
    """Raw register outputs in {1, ..., 2**m - 1}, one full period."""
    m = poly.bit_length() - 1
    period = (1 << m) - 1
    w = _windows(msequence(poly), m)
    pos = (offset + np.arange(period, dtype=np.int64) * decimation_step(m)) % period
    return w[pos]


def equidistribution_resolution(ints: np.ndarray, m: int, t: int) -> int:
    """Largest l such that the leading l bits of t overlapping consecutive
    outputs hit all 2**(t*l) cells equally often (the all-zero cell once less)."""
    best = 0
    for l in range(1, m // t + 1):
        top = ints >> (m - l)
        cell = np.zeros(ints.size, dtype=np.int64)
        for c in range(t):
            cell = (cell << l) | np.roll(top, -c)
        counts = np.bincount(cell, minlength=1 << (t * l))
        expected = 1 << (m - t * l)
        if counts[0] != expected - 1 or np.any(counts[1:] != expected):
            break
        best = l
    return best


def equidistribution_shortfall(poly: int, t_max: int = EQUIDISTRIBUTION_T_MAX,
                               stop_above: int | None = None) -> tuple[int, list[int]]:
    """Total gap sum_t (m // t - resolution_t) over t = 2..t_max, and the resolutions.

    With ``stop_above`` the scan ends as soon as the total exceeds it (the
    returned resolutions are then incomplete).
    """
    m = poly.bit_length() - 1
    ints = lfsr_integers(poly)
    total, res = 0, []
    for t in range(2, t_max + 1):
        res.append(equidistribution_resolution(ints, m, t))
        total += m // t - res[-1]
        if stop_above is not None and total > stop_above:
            break
    return total, res


# Alternative feedback polynomials per register size, for replicates that
# need distinct sequences.  Member 0 is the table entry above; the rest are
# the other primitive polynomials of that degree ranked by equidistribution
# shortfall (ties broken by a seeded shuffle), as printed by
# ``tools/search_polynomials.py --family``.
POLYNOMIAL_FAMILIES: dict[int, tuple[int, ...]] = {
    10: (
        0x6b5, 0x523, 0x4e7, 0x78d, 0x531, 0x763, 0x56b, 0x6d3,
        0x637, 0x58f, 0x465, 0x625, 0x739, 0x65b, 0x5a1, 0x5e5,
        0x747, 0x615, 0x7f3, 0x643, 0x689, 0x77d, 0x721, 0x5f7,
        0x543, 0x427, 0x67f, 0x585, 0x717, 0x53d, 0x71d, 0x42d,
    ),
    11: (
        0xa7f, 0xcd3, 0xc97, 0xcb3, 0x8cf, 0xe4b, 0xd59, 0xc89,
        0x913, 0x8a9, 0x9f7, 0xa85, 0xf0b, 0xfb5, 0xa13, 0x847,
        0x98f, 0xdf5, 0xa6d, 0x8eb, 0xae9, 0xf6b, 0xa79, 0xdbb,
        0xf31, 0xd0f, 0xf19, 0xe1d, 0xb93, 0xda9, 0x865, 0xf75,
    ),
    12: (
        0x1ba7, 0x1cbb, 0x1267, 0x1431, 0x1ad1, 0x11b3, 0x1273, 0x1d43,
        0x19b1, 0x1ae1, 0x107b, 0x1857, 0x1fbb, 0x1185, 0x1775, 0x1437,
        0x1bc1, 0x10eb, 0x1e19, 0x1d85, 0x1cc9, 0x130f, 0x116b, 0x19c9,
        0x1bbf, 0x15dd, 0x1743, 0x144f, 0x1107, 0x1c11, 0x1965, 0x17ad,
    ),
    13: (
        0x37e1, 0x396d, 0x24c7, 0x3b2d, 0x2fa5, 0x24b5, 0x33b9, 0x2429,
        0x3d33, 0x2aeb, 0x3d7d, 0x2f05, 0x3f51, 0x3d2d, 0x3f37, 0x3a89,
        0x38bb, 0x2efd, 0x332f, 0x394f, 0x237d, 0x2b37, 0x304f, 0x29c3,
        0x2509, 0x24cb, 0x3537, 0x3997, 0x2a7d, 0x20a5, 0x23ed, 0x283d,
    ),
    14: (
        0x6b39, 0x7663, 0x7757, 0x56c7, 0x6c57, 0x4e37, 0x68ff, 0x7309,
        0x6697, 0x4867, 0x6acb, 0x617d, 0x45e7, 0x751b, 0x71b5, 0x46c5,
        0x7577, 0x51b1, 0x7415, 0x518b, 0x5a1f, 0x6545, 0x598f, 0x4b37,
        0x75d1, 0x5f43, 0x4ba1, 0x786d, 0x78cd, 0x4883, 0x49cf, 0x456f,
    ),
    15: (
        0xabd7, 0xc5ef, 0xd8d3, 0xf7b7, 0x9dbd, 0xdadd, 0xb107, 0xc531,
        0xa501, 0xec99, 0xebd5, 0xcec5, 0xa4bd, 0xa373, 0x9e11, 0xbdb9,
        0xe2a1, 0xe92b, 0x8e51, 0xde4f, 0x870d, 0x9141, 0xd5e1, 0xfeb1,
        0xa30d, 0xd28f, 0xb02d, 0xeac9, 0xe595, 0x8ca3, 0x8879, 0xb0c5,
    ),
    16: (
        0x19143, 0x119fd, 0x12235, 0x16efd, 0x127c5, 0x1ef57, 0x14a6d, 0x1cc27,
        0x147c9, 0x19761, 0x141af, 0x1971f, 0x19677, 0x15889, 0x1322f, 0x1c867,
        0x1520b, 0x17f31, 0x19355, 0x19473, 0x11923, 0x1e899, 0x1c3e1, 0x1015d,
        0x18513, 0x1eb9f, 0x15593, 0x10dd3, 0x1d5ad, 0x17eed, 0x1dcd3, 0x11253,
    ),
}


def polynomial_family(m: int, count: int) -> list[int]:
    """The first ``count`` members of the embedded family for degree m."""
    fam = POLYNOMIAL_FAMILIES.get(m, (PRIMITIVE_POLYNOMIALS[m],) if m in PRIMITIVE_POLYNOMIALS else ())
    if not fam:
        raise UnsupportedRegisterSize(f"no primitive polynomial for m={m}")
    if count > len(fam):
        raise UnsupportedRegisterSize(
            f"only {len(fam)} embedded polynomials of degree {m}, {count} requested")
    return list(fam[:count])


@lru_cache(maxsize=64)
def _lfsr_base(m: int, variant: int = 0) -> np.ndarray:
    out = lfsr_integers(polynomial_family(m, variant + 1)[variant]) / float(1 << m)
    out.setflags(write=False)
    return out


def radical_inverse(index, base: int = 2) -> np.ndarray:
    """Van der Corput radical inverse of non-negative integers."""
    idx = np.array(index, dtype=np.int64, ndmin=1)
    out = np.zeros(idx.shape)
    scale = 1.0 / base
    while np.any(idx > 0):
        out += (idx % base) * scale
        idx //= base
        scale /= base
    return out


# --------------------------------------------------------------------------
# streams

KINDS = ("pseudo_random", "cud_lfsr", "van_der_corput")


class UniformStream:
    """A single-consumer iterator over uniforms in (0, 1).

    Finite kinds hold their whole sequence in ``values``; ``clone`` gives an
    independent iterator positioned at the same cursor.
    """

    def __init__(self, kind: str, seed: int = 0, params: dict | None = None,
                 values: np.ndarray | None = None, cursor: int = 0):
        if kind not in KINDS:
            raise ConfigError(f"unknown stream kind {kind!r}")
        self.kind = kind
        self.seed = int(seed)
        self.params = dict(params or {})
        self.values = values
        self.cursor = 0
        self._bitgen = None
        if kind == "pseudo_random":
            self._bitgen = np.random.Philox(key=self.seed % 2**64)
        if cursor:
            self.skip(cursor)

    @property
    def length(self) -> int | None:
        return None if self.values is None else int(self.values.size)

    @property
    def remaining(self) -> int | None:
        return None if self.values is None else self.length - self.cursor

    def take(self, n: int) -> np.ndarray:
        """The next ``n`` values as a new array; advances the cursor by ``n``."""
        n = int(n)
        if self.values is not None:
            if self.cursor + n > self.values.size:
                raise SequenceExhausted(
                    f"requested {n} values at cursor {self.cursor}, "
                    f"only {self.values.size - self.cursor} left")
            out = np.array(self.values[self.cursor : self.cursor + n])
        elif self.kind == "pseudo_random":
            raw = self._bitgen.random_raw(n)
            out = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        else:
            base = self.params.get("base", 2)
            out = radical_inverse(np.arange(self.cursor + 1, self.cursor + n + 1), base)
        self.cursor += n
        return out

    def next_uniform(self) -> float:
        return float(self.take(1)[0])

    def skip(self, n: int) -> None:
        if self.kind == "pseudo_random":
            blocks, rest = divmod(int(n), 4)
            self._bitgen.advance(blocks)
            self._bitgen.random_raw(rest)
            self.cursor += int(n)
        elif self.values is not None and self.cursor + n > self.values.size:
            raise SequenceExhausted(f"cannot skip {n} values at cursor {self.cursor}")
        else:
            self.cursor += int(n)

    def clone(self) -> "UniformStream":
        return UniformStream(self.kind, self.seed, self.params, self.values, self.cursor)

    def __repr__(self) -> str:
        return (f"UniformStream(kind={self.kind!r}, seed={self.seed}, "
                f"params={self.params}, cursor={self.cursor})")


def pseudo_random_stream(seed: int) -> UniformStream:
    return UniformStream("pseudo_random", seed)


def van_der_corput(base: int = 2) -> UniformStream:
    return UniformStream("van_der_corput", 0, {"base": base})


def build_lfsr_cud(m: int, seed: int = 0, variant: int = 0) -> UniformStream:
    """Full-period CUD stream of length 2**m - 1, rotated by ``seed``, from
    member ``variant`` of :func:`polynomial_family`."""
    if m not in PRIMITIVE_POLYNOMIALS:
        raise UnsupportedRegisterSize(
            f"no primitive polynomial for m={m}; available: {sorted(PRIMITIVE_POLYNOMIALS)}")
    if variant < 0:
        raise ConfigError("polynomial variant must be non-negative")
    base = _lfsr_base(m, int(variant))
    offset = int(seed) % base.size
    values = np.roll(base, -offset) if offset else base
    params = {"m": m, "poly": polynomial_family(m, variant + 1)[variant],
              "step": decimation_step(m), "offset": offset, "variant": int(variant)}
    return UniformStream("cud_lfsr", seed, params, values)


@dataclass
class TupleSchedule:
    """A CUD sequence laid out as width-``d`` tuples, each used exactly once.

    The sequence is trimmed to ``T = (L // d) * d`` values, then run through
    ``d`` times, each run starting one position later (wrapping around).
    One tuple of ``d`` near-zero values is prepended.
    """

    d: int
    T: int
    values: np.ndarray
    source: dict = field(default_factory=dict)

    @property
    def n_tuples(self) -> int:
        return self.values.size // self.d

    def tuples(self) -> np.ndarray:
        return self.values.reshape(-1, self.d)

    def stream(self) -> UniformStream:
        params = dict(self.source.get("params", {}), width=self.d)
        return UniformStream("cud_lfsr", self.source.get("seed", 0), params, self.values)


def make_tuple_schedule(stream: UniformStream, d: int) -> TupleSchedule:
    if stream.values is None:
        raise ConfigError("tuple schedules need a finite CUD stream")
    n = stream.values.size
    if d < 1 or d > n:
        raise InvalidWidth(f"tuple width {d} outside [1, {n}]")
    T = (n // d) * d
    if d > T:
        raise InvalidWidth(f"tuple width {d} exceeds trimmed length {T}")
    u = np.asarray(stream.values[:T])
    runs = [np.full(d, NEAR_ZERO)] + [np.roll(u, -k) for k in range(d)]
    values = np.concatenate(runs)
    values.setflags(write=False)
    return TupleSchedule(d, T, values, {"seed": stream.seed, "params": stream.params})


def cud_capacity(m: int, width: int) -> int:
    """Number of width-``width`` tuples a schedule over a 2**m - 1 sequence holds."""
    n = (1 << m) - 1
    return 1 + (n // width) * width if width <= n else 0


def smallest_register(width: int, iterations: int, m_min: int = 10) -> int:
    """Smallest embedded register size whose schedule covers the requested iterations."""
    for m in sorted(PRIMITIVE_POLYNOMIALS):
        if m >= m_min and cud_capacity(m, width) >= iterations:
            return m
    raise UnsupportedRegisterSize(
        f"no embedded register gives {iterations} tuples of width {width}")


def period_register(width: int, iterations: int, m_min: int = 10) -> int:
    """Smallest embedded register whose single period holds ``iterations``
    disjoint tuples of ``width`` values, so no value is read twice.

    Falls back to :func:`smallest_register` when even the largest register
    is too short.
    """
    for m in sorted(PRIMITIVE_POLYNOMIALS):
        if m >= m_min and ((1 << m) - 1) // width >= iterations:
            return m
    return smallest_register(width, iterations, m_min)


def make_driving(kind: str, seed: int = 0, m: int | None = None,
                 width: int | None = None, variant: int = 0) -> UniformStream:
    """Build a ready-to-consume stream: pseudo-random, or a tuple-scheduled CUD."""
    if kind == "pseudo_random":
        return pseudo_random_stream(seed)
    if kind == "cud_lfsr":
        if m is None or width is None:
            raise ConfigError("cud_lfsr driving needs register size m and tuple width")
        return make_tuple_schedule(build_lfsr_cud(m, seed, variant), width).stream()
    if kind == "van_der_corput":
        return van_der_corput()
    raise ConfigError(f"unknown driving kind {kind!r}")
