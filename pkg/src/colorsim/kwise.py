"""K-wise independent hashing via random polynomials over a prime field."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


def is_prime(m: int) -> bool:
    if m < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if m % p == 0:
            return m == p
    # deterministic Miller-Rabin for 64-bit inputs
    d, s = m - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, m)
        if x in (1, m - 1):
            continue
        for _ in range(s - 1):
            x = x * x % m
            if x == m - 1:
                break
        else:
            return False
    return True


def next_prime(m: int) -> int:
    m = max(int(m), 2)
    while not is_prime(m):
        m += 1
    return m


def default_independence(n: int) -> int:
    """K = ceil(2 log2 n), at least 1."""
    return max(1, math.ceil(2 * math.log2(max(n, 2))))


@dataclass(frozen=True)
class KWiseSeed:
    modulus: int
    coefficients: tuple

    def __post_init__(self):
        if len(self.coefficients) < 1:
            raise ParameterError("K must be at least 1")
        if not is_prime(self.modulus):
            raise ParameterError(f"modulus {self.modulus} is not prime")
        if any(not 0 <= c < self.modulus for c in self.coefficients):
            raise ParameterError("coefficients must be field elements")

    @property
    def K(self) -> int:
        return len(self.coefficients)

    @property
    def bit_length(self) -> int:
        return self.K * math.ceil(math.log2(self.modulus))

    def to_dict(self) -> dict:
        return {"modulus": str(self.modulus), "K": self.K,
                "coefficients": [str(c) for c in self.coefficients]}

    @classmethod
    def from_dict(cls, d: dict) -> "KWiseSeed":
        coeffs = tuple(int(c) for c in d["coefficients"])
        if int(d["K"]) != len(coeffs):
            raise ParameterError("K does not match the number of coefficients")
        return cls(int(d["modulus"]), coeffs)


def sample_seed(K: int, modulus: int, rng: np.random.Generator) -> KWiseSeed:
    if K < 1:
        raise ParameterError("K must be at least 1")
    if not is_prime(modulus):
        raise ParameterError(f"modulus {modulus} is not prime")
    coeffs = tuple(int(rng.integers(0, modulus)) for _ in range(K))
    return KWiseSeed(modulus, coeffs)


def raw_eval(seed: KWiseSeed, key: int) -> int:
    """Polynomial value in the field, before reduction to a part index.

    Coefficient ``j`` multiplies ``key**j``.
    """
    if not 0 <= key < seed.modulus:
        raise ParameterError(f"key {key} outside [0, {seed.modulus})")
    acc = 0
    for c in reversed(seed.coefficients):
        acc = (acc * key + c) % seed.modulus
    return acc


def kwise_eval(seed: KWiseSeed, key: int, parts: int) -> int:
    if parts < 1:
        raise ParameterError("parts must be positive")
    return raw_eval(seed, key) % parts


def kwise_eval_many(seed: KWiseSeed, keys, parts: int) -> np.ndarray:
    """Vectorised ``kwise_eval`` over an array of keys."""
    keys = np.asarray(keys, dtype=np.int64)
    m = seed.modulus
    if len(keys) and (keys.min() < 0 or keys.max() >= m):
        raise ParameterError("key outside the field")
    if m < 2 ** 31:
        acc = np.zeros(len(keys), dtype=np.int64)
        for c in reversed(seed.coefficients):
            acc = (acc * keys + c) % m
    else:
        acc = np.array([raw_eval(seed, int(k)) for k in keys.tolist()], dtype=object)
    return (acc % parts).astype(np.int64)
