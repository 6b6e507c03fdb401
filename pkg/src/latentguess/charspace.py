"""Character space: alphabet, fixed-length probabilistic encoding, templates.

Passwords and templates are plain strings. Templates may contain the
alphabet's reserved wildcard symbol; a wildcard position encodes to an
all-zero probability column, every other position to a (optionally
smoothed) one-hot column. Padding is an extra channel appended after the
symbol channels, so every password gets a fixed-length L x (n_symbols + 1)
encoding from which its length is recoverable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

# Reserved sentinels live in the unicode private-use area so that any
# printable character found in a real leak can stay a regular symbol.
DEFAULT_PAD = ""
DEFAULT_WILDCARD = ""

# Display/CLI form of the wildcard.
WILDCARD_CHAR = "*"


@dataclass(frozen=True)
class Alphabet:
    """Ordered character vocabulary plus reserved pad/wildcard sentinels."""

    symbols: str
    pad_symbol: str = DEFAULT_PAD
    wildcard_symbol: str = DEFAULT_WILDCARD
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.symbols:
            raise ValueError("alphabet needs at least one symbol")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("duplicate symbols in alphabet")
        if len(self.pad_symbol) != 1 or len(self.wildcard_symbol) != 1:
            raise ValueError("pad and wildcard must be single characters")
        if self.pad_symbol == self.wildcard_symbol:
            raise ValueError("pad and wildcard must differ")
        if self.pad_symbol in self.symbols or self.wildcard_symbol in self.symbols:
            raise ValueError("pad/wildcard collide with an alphabet symbol")
        object.__setattr__(
            self, "_index", {c: i for i, c in enumerate(self.symbols)}
        )

    @property
    def n_symbols(self) -> int:
        return len(self.symbols)

    @property
    def n_channels(self) -> int:
        """Symbol channels plus the trailing pad channel."""
        return len(self.symbols) + 1

    @property
    def pad_index(self) -> int:
        return len(self.symbols)

    def index_of(self, ch: str) -> int:
        try:
            return self._index[ch]
        except KeyError:
            raise ValueError(f"character {ch!r} not in alphabet") from None

    def is_valid_password(self, x: str, max_len: int | None = None) -> bool:
        if not x:
            return False
        if max_len is not None and len(x) > max_len:
            return False
        return all(c in self._index for c in x)

    def is_valid_template(self, t: str, max_len: int | None = None) -> bool:
        if not t:
            return False
        if max_len is not None and len(t) > max_len:
            return False
        return all(c in self._index or c == self.wildcard_symbol for c in t)

    def parse_template(self, text: str, wildcard_char: str = WILDCARD_CHAR) -> str:
        """Turn a display-form template into the internal one.

        `wildcard_char` marks unspecified positions; escape it with a
        backslash to mean the literal character.
        """
        out = []
        i = 0
        while i < len(text):
            c = text[i]
            if c == "\\" and i + 1 < len(text) and text[i + 1] == wildcard_char:
                out.append(wildcard_char)
                i += 2
                continue
            out.append(self.wildcard_symbol if c == wildcard_char else c)
            i += 1
        t = "".join(out)
        if not self.is_valid_template(t):
            bad = sorted({c for c in t if c != self.wildcard_symbol and c not in self._index})
            raise ValueError(f"template contains characters outside the alphabet: {bad}")
        return t

    def format_template(self, t: str, wildcard_char: str = WILDCARD_CHAR) -> str:
        """Inverse of parse_template (escapes literal wildcard chars)."""
        out = []
        for c in t:
            if c == self.wildcard_symbol:
                out.append(wildcard_char)
            elif c == wildcard_char:
                out.append("\\" + wildcard_char)
            else:
                out.append(c)
        return "".join(out)


def build_alphabet(corpus: Iterable[str]) -> Alphabet:
    """Alphabet of every character observed in `corpus`, sorted by code point."""
    chars: set[str] = set()
    n = 0
    for line in corpus:
        n += 1
        chars.update(line)
    if n == 0 or not chars:
        raise ValueError("empty corpus")
    pad, wild = DEFAULT_PAD, DEFAULT_WILDCARD
    while pad in chars:
        pad = chr(ord(pad) + 2)
    while wild in chars or wild == pad:
        wild = chr(ord(wild) + 2)
    return Alphabet("".join(sorted(chars)), pad_symbol=pad, wildcard_symbol=wild)


def encode(
    x: str,
    a: Alphabet,
    max_len: int,
    gamma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Encode a password as max_len probability columns of dim n_channels.

    Positions past len(x) carry pad one-hots. With gamma > 0 every entry
    receives independent additive noise uniform in [0, gamma) and each
    column is renormalized to sum 1; gamma < 0.5 keeps every argmax intact.
    """
    if len(x) > max_len:
        raise ValueError(f"over-length: {len(x)} > {max_len}")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must be in [0, 1)")
    m = np.zeros((max_len, a.n_channels), dtype=np.float32)
    for pos, c in enumerate(x):
        m[pos, a.index_of(c)] = 1.0
    m[len(x):, a.pad_index] = 1.0
    if gamma > 0.0:
        if rng is None:
            raise ValueError("gamma > 0 requires an rng")
        m += rng.uniform(0.0, gamma, size=m.shape).astype(np.float32)
        m /= m.sum(axis=1, keepdims=True)
    return m


def encode_template(t: str, a: Alphabet, max_len: int) -> np.ndarray:
    """Like encode, but wildcard cells become all-zero columns."""
    if len(t) > max_len:
        raise ValueError(f"over-length: {len(t)} > {max_len}")
    m = np.zeros((max_len, a.n_channels), dtype=np.float32)
    for pos, c in enumerate(t):
        if c == a.wildcard_symbol:
            continue
        m[pos, a.index_of(c)] = 1.0
    m[len(t):, a.pad_index] = 1.0
    return m


def decode(m: np.ndarray, a: Alphabet) -> str:
    """Read a password back out of an encoded matrix.

    Per-column argmax (ties resolve to the lowest index, numpy's argmax
    rule); reading stops at the first pad argmax.
    """
    idx = np.asarray(m).argmax(axis=1)
    chars = []
    for i in idx:
        if i == a.pad_index:
            break
        chars.append(a.symbols[i])
    if not chars:
        raise ValueError("empty decode: matrix argmaxes to pad at position 0")
    return "".join(chars)


def matches(x: str, t: str, a: Alphabet) -> bool:
    """Password-satisfies-template: equal length, every observed cell equal."""
    if len(x) != len(t):
        return False
    return all(tc == a.wildcard_symbol or tc == xc for xc, tc in zip(x, t))


def template_of(x: str) -> str:
    """The fully-observed template of a password (identity cells, no wildcards)."""
    return x


def context_noise(x: str, eps: float, a: Alphabet, rng: np.random.Generator) -> str:
    """Wildcard each position independently with probability min(1, eps/len(x))."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps == 0:
        return x
    p = min(1.0, eps / len(x))
    mask = rng.random(len(x)) < p
    return "".join(a.wildcard_symbol if m else c for c, m in zip(x, mask))


def span_mask_noise(x: str, k: int, a: Alphabet, rng: np.random.Generator) -> str:
    """Wildcard k contiguous positions starting at a uniform i in [0, max(0,len-k)]."""
    if k < 1:
        raise ValueError("k must be >= 1")
    hi = max(0, len(x) - k)
    i = int(rng.integers(0, hi + 1))
    end = min(len(x), i + k)
    return x[:i] + a.wildcard_symbol * (end - i) + x[end:]


def encode_batch(
    xs: list[str],
    a: Alphabet,
    max_len: int,
    gamma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Stack encodings of passwords or templates into [B, L, n_channels]."""
    out = np.zeros((len(xs), max_len, a.n_channels), dtype=np.float32)
    wild = a.wildcard_symbol
    for b, x in enumerate(xs):
        if len(x) > max_len:
            raise ValueError(f"over-length: {len(x)} > {max_len}")
        for pos, c in enumerate(x):
            if c == wild:
                continue
            out[b, pos, a.index_of(c)] = 1.0
        out[b, len(x):, a.pad_index] = 1.0
    if gamma > 0.0:
        if rng is None:
            raise ValueError("gamma > 0 requires an rng")
        noise = rng.uniform(0.0, gamma, size=out.shape).astype(np.float32)
        # wildcard columns stay exactly zero
        zero_cols = out.sum(axis=2, keepdims=True) == 0.0
        out += np.where(zero_cols, 0.0, noise)
        sums = out.sum(axis=2, keepdims=True)
        np.divide(out, sums, out=out, where=sums > 0)
    return out


def decode_batch(logits_or_probs: np.ndarray, a: Alphabet) -> list[str]:
    """Vectorized decode of a [B, L, n_channels] array; '' for all-pad rows."""
    idx = np.asarray(logits_or_probs).argmax(axis=2)
    pad = a.pad_index
    syms = a.symbols
    out = []
    for row in idx:
        chars = []
        for i in row:
            if i == pad:
                break
            chars.append(syms[i])
        out.append("".join(chars))
    return out


def target_indices(xs: list[str], a: Alphabet, max_len: int) -> np.ndarray:
    """Per-position class indices (pad channel past the end), shape [B, L]."""
    out = np.full((len(xs), max_len), a.pad_index, dtype=np.int64)
    for b, x in enumerate(xs):
        if len(x) > max_len:
            raise ValueError(f"over-length: {len(x)} > {max_len}")
        for pos, c in enumerate(x):
            out[b, pos] = a.index_of(c)
    return out
