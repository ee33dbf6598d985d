"""Geometry of finite windows of Z^d.

Windows are axis-aligned boxes of sites with one of three geometries:
``fixed`` (exterior spins frozen to a boundary condition), ``free``
(interaction terms crossing the edge are dropped by consumers), and
``torus`` (coordinates wrap).  Site enumeration is lexicographic on
coordinates everywhere; all tables and arrays in the package follow
this order.

Spins are stored as symbol indices ``0 .. alphabet_size-1``.  The
physical alphabet is a presentation-layer mapping; for a two-symbol
alphabet the convention is ``0 <-> -1`` and ``1 <-> +1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Mapping

import numpy as np

Site = tuple[int, ...]

FIXED = "fixed"
FREE = "free"
TORUS = "torus"
GEOMETRIES = (FIXED, FREE, TORUS)

# Long-form aliases accepted when parsing serialized windows.
_GEOMETRY_ALIASES = {
    "cube-with-fixed-boundary": FIXED,
    "cube-free": FREE,
    FIXED: FIXED,
    FREE: FREE,
    TORUS: TORUS,
}


class OutOfWindowError(LookupError):
    """A site outside the window was addressed on a non-torus geometry."""


class WindowMismatchError(ValueError):
    """Two configurations living on different windows were combined."""


class BoundaryError(ValueError):
    """A frozen exterior spin was needed but not supplied."""


def box_sites(d: int, n: int) -> tuple[Site, ...]:
    """All sites of the centered cube [-n, n]^d, lexicographically ordered."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if n < 0:
        raise ValueError(f"radius must be >= 0, got {n}")
    return tuple(itertools.product(range(-n, n + 1), repeat=d))


def add_sites(x: Site, y: Site) -> Site:
    return tuple(a + b for a, b in zip(x, y))


def negate_site(x: Site) -> Site:
    return tuple(-a for a in x)


@dataclass(frozen=True)
class Window:
    """A finite box of sites with a geometry and an alphabet size.

    ``sides`` are the per-axis lengths.  Coordinates are centered: axis i
    runs over ``[-(L_i // 2), L_i - L_i // 2 - 1]``, which is ``[-n, n]``
    for the odd cube of radius n.  Even side lengths are supported for
    sampling experiments; radius-based constructors always produce odd
    cubes with exactly ``(2n+1)^d`` sites.
    """

    d: int
    sides: tuple[int, ...]
    geometry: str = FREE
    alphabet_size: int = 2

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if len(self.sides) != self.d:
            raise ValueError("sides must have one entry per dimension")
        if any(s < 1 for s in self.sides):
            raise ValueError("all side lengths must be >= 1")
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if not 2 <= self.alphabet_size <= 255:
            raise ValueError("alphabet size must lie in [2, 255]")

    @classmethod
    def cube(cls, d: int, n: int, geometry: str = FREE,
             alphabet_size: int = 2) -> "Window":
        """The centered cube Lambda_n = [-n, n]^d with (2n+1)^d sites."""
        if n < 0:
            raise ValueError(f"radius must be >= 0, got {n}")
        return cls(d=d, sides=(2 * n + 1,) * d, geometry=geometry,
                   alphabet_size=alphabet_size)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.sides))

    @property
    def radius(self) -> int | None:
        """Radius n when the window is an odd cube, else None."""
        s = self.sides[0]
        if s % 2 == 1 and all(x == s for x in self.sides):
            return (s - 1) // 2
        return None

    @property
    def lo(self) -> tuple[int, ...]:
        return tuple(-(s // 2) for s in self.sides)

    @property
    def hi(self) -> tuple[int, ...]:
        return tuple(lo + s - 1 for lo, s in zip(self.lo, self.sides))

    @cached_property
    def sites(self) -> tuple[Site, ...]:
        ranges = [range(lo, hi + 1) for lo, hi in zip(self.lo, self.hi)]
        return tuple(itertools.product(*ranges))

    @cached_property
    def _strides(self) -> tuple[int, ...]:
        strides = [1] * self.d
        for i in range(self.d - 2, -1, -1):
            strides[i] = strides[i + 1] * self.sides[i + 1]
        return tuple(strides)

    def contains(self, site: Site) -> bool:
        return all(lo <= c <= hi for c, lo, hi in zip(site, self.lo, self.hi))

    def wrap(self, site: Site) -> Site:
        """Canonical representative of a site modulo the torus periods."""
        return tuple((c - lo) % s + lo
                     for c, lo, s in zip(site, self.lo, self.sides))

    def site_index(self, site: Site) -> int:
        """Position of a site in lexicographic enumeration order."""
        if len(site) != self.d:
            raise ValueError("site dimension mismatch")
        if self.geometry == TORUS:
            site = self.wrap(site)
        idx = 0
        for c, lo, s, stride in zip(site, self.lo, self.sides, self._strides):
            off = c - lo
            if not 0 <= off < s:
                raise OutOfWindowError(f"site {site} outside window")
            idx += off * stride
        return idx

    @property
    def n_states(self) -> int:
        """Number of spin assignments on the window (exact integer)."""
        return self.alphabet_size ** self.n_sites

    def sub_cube_indices(self, k: int) -> np.ndarray:
        """Window indices of the centered sub-cube Lambda_k, in its lex order."""
        sub = box_sites(self.d, k)
        for site in sub:
            if not self.contains(site):
                raise OutOfWindowError(
                    f"Lambda_{k} does not fit inside window with sides {self.sides}")
        return np.array([self.site_index(s) for s in sub], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Configuration:
    """A spin assignment on a window, plus frozen exterior spins when fixed.

    ``boundary`` is either a single symbol (uniform exterior) or an
    explicit mapping from exterior sites to symbols.  It must be present
    exactly when the geometry is ``fixed``.
    """

    window: Window
    spins: np.ndarray
    boundary: int | Mapping[Site, int] | None = None

    def __post_init__(self):
        spins = np.asarray(self.spins, dtype=np.uint8)
        if spins.shape != (self.window.n_sites,):
            raise ValueError(
                f"expected {self.window.n_sites} spins, got shape {spins.shape}")
        if spins.size and int(spins.max()) >= self.window.alphabet_size:
            raise ValueError("spin symbol out of alphabet range")
        spins = spins.copy()
        spins.flags.writeable = False
        object.__setattr__(self, "spins", spins)
        if self.window.geometry == FIXED:
            if self.boundary is None:
                raise BoundaryError("fixed geometry requires boundary spins")
            if isinstance(self.boundary, int) and not (
                    0 <= self.boundary < self.window.alphabet_size):
                raise ValueError("boundary symbol out of alphabet range")
        elif self.boundary is not None:
            raise ValueError("boundary spins only make sense on fixed geometry")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return (self.window == other.window
                and np.array_equal(self.spins, other.spins)
                and self.boundary == other.boundary)

    @classmethod
    def constant(cls, window: Window, symbol: int,
                 boundary: int | Mapping[Site, int] | None = None) -> "Configuration":
        return cls(window, np.full(window.n_sites, symbol, dtype=np.uint8), boundary)

    @classmethod
    def from_code(cls, window: Window, code: int,
                  boundary: int | Mapping[Site, int] | None = None) -> "Configuration":
        """Configuration whose spin array is the base-|S| expansion of ``code``."""
        symbols = decode_symbols(code, window.n_sites, window.alphabet_size)
        return cls(window, symbols, boundary)

    def code(self) -> int:
        """Base-|S| encoding of the spin array (first site most significant)."""
        return encode_symbols(self.spins, self.window.alphabet_size)

    def symbol(self, site: Site) -> int:
        """Spin at a site; exterior reads wrap (torus) or hit the boundary (fixed)."""
        w = self.window
        if w.geometry == TORUS:
            return int(self.spins[w.site_index(site)])
        if w.contains(site):
            return int(self.spins[w.site_index(site)])
        if w.geometry == FIXED:
            if isinstance(self.boundary, int):
                return self.boundary
            try:
                return int(self.boundary[site])
            except KeyError:
                raise BoundaryError(f"no boundary spin supplied at {site}")
        raise OutOfWindowError(f"site {site} outside free window")

    def with_spins(self, spins: np.ndarray) -> "Configuration":
        return Configuration(self.window, spins, self.boundary)

    # -- flat text serialization ------------------------------------------

    def to_text(self) -> str:
        """Header line ``d n geometry |S|``, spin line, boundary line (fixed).

        Windows that are not odd cubes write their sides as an ``s``-prefixed
        token (e.g. ``s16x16``) in place of the radius.
        """
        w = self.window
        n = w.radius
        shape_token = str(n) if n is not None else "s" + "x".join(map(str, w.sides))
        lines = [f"{w.d} {shape_token} {w.geometry} {w.alphabet_size}",
                 " ".join(str(int(s)) for s in self.spins)]
        if w.geometry == FIXED:
            if not isinstance(self.boundary, int):
                raise ValueError("only uniform boundaries serialize to text")
            lines.append(str(self.boundary))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Configuration":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        d_tok, shape_tok, geom_tok, s_tok = lines[0].split()
        d, alphabet = int(d_tok), int(s_tok)
        geometry = _GEOMETRY_ALIASES[geom_tok]
        if shape_tok.startswith("s"):
            sides = tuple(int(x) for x in shape_tok[1:].split("x"))
            window = Window(d=d, sides=sides, geometry=geometry,
                            alphabet_size=alphabet)
        else:
            window = Window.cube(d, int(shape_tok), geometry, alphabet)
        spins = np.array([int(x) for x in lines[1].split()], dtype=np.uint8)
        boundary = int(lines[2]) if geometry == FIXED else None
        return cls(window, spins, boundary)


def hamming_distance(a: Configuration, b: Configuration) -> int:
    """Number of sites where two configurations on the same window differ."""
    if a.window != b.window:
        raise WindowMismatchError("configurations live on different windows")
    return int(np.count_nonzero(a.spins != b.spins))


def encode_symbols(symbols, alphabet_size: int) -> int:
    """Base-|S| positional code, first symbol most significant."""
    code = 0
    for s in symbols:
        code = code * alphabet_size + int(s)
    return code


def decode_symbols(code: int, length: int, alphabet_size: int) -> np.ndarray:
    """Inverse of :func:`encode_symbols`; validates the code range."""
    if code < 0 or code >= alphabet_size ** length:
        raise ValueError(f"code {code} out of range for {length} symbols")
    out = np.empty(length, dtype=np.uint8)
    for i in range(length - 1, -1, -1):
        code, rem = divmod(code, alphabet_size)
        out[i] = rem
    return out


@dataclass(frozen=True)
class Pattern:
    """A spin assignment on the centered cube Lambda_k."""

    d: int
    k: int
    alphabet_size: int
    symbols: tuple[int, ...]

    def __post_init__(self):
        expected = (2 * self.k + 1) ** self.d
        if len(self.symbols) != expected:
            raise ValueError(f"expected {expected} symbols, got {len(self.symbols)}")
        if any(not 0 <= s < self.alphabet_size for s in self.symbols):
            raise ValueError("pattern symbol out of alphabet range")

    @property
    def code(self) -> int:
        return encode_symbols(self.symbols, self.alphabet_size)

    @classmethod
    def from_code(cls, code: int, k: int, alphabet_size: int, d: int) -> "Pattern":
        length = (2 * k + 1) ** d
        symbols = tuple(int(s) for s in decode_symbols(code, length, alphabet_size))
        return cls(d=d, k=k, alphabet_size=alphabet_size, symbols=symbols)


def pattern_code(p: Pattern) -> int:
    return p.code


def pattern_decode(code: int, k: int, alphabet_size: int, d: int) -> Pattern:
    return Pattern.from_code(code, k, alphabet_size, d)


def shift_window(config: Configuration, x: Site, k: int) -> Pattern:
    """Pattern read off the shifted sub-cube Lambda_k + x.

    On a torus the coordinates wrap; on other geometries every site of
    Lambda_k + x must lie inside the window.
    """
    w = config.window
    symbols = []
    for y in box_sites(w.d, k):
        site = add_sites(x, y)
        if w.geometry != TORUS and not w.contains(site):
            raise OutOfWindowError(
                f"shifted sub-cube leaves the window at {site}")
        symbols.append(int(config.spins[w.site_index(site)]))
    return Pattern(d=w.d, k=k, alphabet_size=w.alphabet_size,
                   symbols=tuple(symbols))


def all_configurations(window: Window,
                       boundary: int | None = None) -> Iterator[Configuration]:
    """Iterate the full configuration space in code order (small windows only)."""
    for code in range(window.n_states):
        yield Configuration.from_code(window, code, boundary)
