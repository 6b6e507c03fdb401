"""Synthetic leak generator for the test suite.

Produces password-shaped strings from a handful of structural families
(name+digits, word+digits, all-digit dates, plain words, leet tweaks) with
a Zipf-skewed base-word distribution, so corpora have duplicates, dense
clusters, and a controllable all-digit share.
"""

from __future__ import annotations

import numpy as np

NAMES = [
    "jimmy", "maria", "david", "sarah", "kevin", "laura", "chris", "julia",
    "brian", "karen", "angel", "diana", "frank", "nancy", "oscar", "paula",
    "peter", "rosa", "tommy", "wendy", "alex", "anna", "carlos", "elena",
    "felix", "gina", "harry", "irene", "jorge", "katie", "leo", "mia",
    "nick", "olga", "pablo", "rita", "sam", "tina", "victor", "zoe",
    "danny", "emma", "lucas", "nina", "omar", "sofia", "tyler", "vera",
    "billy", "cindy", "eddie", "fiona", "george", "holly", "ivan", "jenny",
    "mike", "lily", "jack", "ruby", "adam", "bella", "cesar", "daisy",
]

WORDS = [
    "love", "star", "moon", "rock", "blue", "fire", "king", "girl",
    "baby", "cool", "dark", "gold", "hero", "lion", "ninja", "pink",
    "rain", "soul", "tiger", "wolf", "angel", "dream", "flower", "happy",
    "magic", "music", "panda", "queen", "sugar", "sunny", "sweet", "candy",
    "cherry", "dragon", "forever", "monkey", "peace", "power", "shadow", "smile",
]


def _zipf_pick(pool: list[str], rng: np.random.Generator) -> str:
    # rank-skewed pick: early pool entries dominate
    r = rng.zipf(1.6)
    return pool[min(int(r) - 1, len(pool) - 1) % len(pool)]


def _one(rng: np.random.Generator, max_len: int, digit_p: float) -> str:
    roll = rng.random()
    if roll < digit_p:
        kind = "digits"
    else:
        kind = ["name2d", "name4d", "word_d", "cap_name_d", "plain", "leet"][
            int(rng.integers(0, 6))
        ]
    if kind == "digits":
        sub = rng.random()
        if sub < 0.4:  # ddmmyy / ddmmyyyy dates
            d, mo, y = rng.integers(1, 29), rng.integers(1, 13), rng.integers(1950, 2016)
            s = f"{d:02d}{mo:02d}{y:04d}" if rng.random() < 0.5 else f"{d:02d}{mo:02d}{y % 100:02d}"
        elif sub < 0.7:  # repeated/run digits
            base = "0123456789"
            k = int(rng.integers(6, 9))
            start = int(rng.integers(0, 10 - 1))
            s = (base[start:] + base)[:k] if rng.random() < 0.5 else str(base[start]) * k
        else:  # phone-ish
            s = "".join(str(rng.integers(0, 10)) for _ in range(int(rng.integers(6, 9))))
    elif kind == "name2d":
        s = _zipf_pick(NAMES, rng) + f"{rng.integers(0, 100):02d}"
    elif kind == "name4d":
        s = _zipf_pick(NAMES, rng) + str(rng.integers(1950, 2016))
    elif kind == "word_d":
        n = int(rng.integers(1, 5))
        s = _zipf_pick(WORDS, rng) + "".join(str(rng.integers(0, 10)) for _ in range(n))
    elif kind == "cap_name_d":
        base = _zipf_pick(NAMES, rng)
        s = base.capitalize() + f"{rng.integers(0, 100):02d}"
    elif kind == "leet":
        base = _zipf_pick(NAMES + WORDS, rng)
        s = base.replace("a", "4").replace("e", "3").replace("o", "0")
        if rng.random() < 0.5:
            s += str(rng.integers(0, 10))
    else:
        s = _zipf_pick(NAMES + WORDS, rng)
        if len(s) < 6:
            s = s + _zipf_pick(WORDS, rng)
    return s[:max_len]


def make_corpus(n: int, seed: int = 0, max_len: int = 10, digit_p: float = 0.10) -> list[str]:
    """n password occurrences (with natural duplicates)."""
    rng = np.random.default_rng(seed)
    return [_one(rng, max_len, digit_p) for _ in range(n)]


def write_leak(path, passwords: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for p in passwords:
            f.write(p + "\n")
