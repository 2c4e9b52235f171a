"""
Root system of type A_r and the counting quantities of the building.

Realization: alpha_i = e_i - e_{i+1} in the sum-zero hyperplane of
(r+1)-space, fundamental weights lambda_i = e_1 + ... + e_i - i/(r+1) * 1.
Roots have squared length 2, so coroots and roots coincide.

Weights are plain integer tuples of fundamental-weight coordinates
(lambda = sum m_i lambda_i). Internally the Weyl group acts on the
"partition form" x_a = m_a + ... + m_r (x_{r+1} = 0) by permuting entries;
the sum-zero shift is irrelevant for every pairing with roots.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, permutations
from typing import Iterable, Sequence

from .scalars import ScalarQ

Weight = tuple[int, ...]


@dataclass(frozen=True)
class RankParams:
    """Rank r >= 1 of the root system and thickness q >= 2 of the building."""
    r: int
    q: int

    def __post_init__(self):
        if not isinstance(self.r, int) or self.r < 1:
            raise ValueError(f"Rank must be an integer >= 1, got {self.r!r}")
        if not isinstance(self.q, int) or self.q < 2:
            raise ValueError(f"Thickness q must be an integer >= 2, got {self.q!r}")

    @property
    def root_system(self) -> RootSystem:
        return RootSystem.of_rank(self.r)


@dataclass(frozen=True)
class Vector:
    """Point of the sum-zero hyperplane, given by its r+1 coordinates."""
    coords: tuple

    @property
    def rank(self) -> int:
        return len(self.coords) - 1

    def pair(self, other: Vector) -> object:
        return sum(a * b for a, b in zip(self.coords, other.coords))

    def __add__(self, other: Vector) -> Vector:
        return Vector(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: Vector) -> Vector:
        return Vector(tuple(a - b for a, b in zip(self.coords, other.coords)))

    def scale(self, factor) -> Vector:
        return Vector(tuple(factor * a for a in self.coords))

    def weight_coords(self) -> tuple:
        """Pairings with the simple roots, i.e. coordinates in the fundamental-weight basis."""
        c = self.coords
        return tuple(c[j] - c[j + 1] for j in range(len(c) - 1))

    def coroot_coords(self) -> tuple:
        """Pairings with the fundamental weights, i.e. coordinates in the simple-coroot basis."""
        out = []
        running = 0
        for value in self.coords[:-1]:
            running = running + value
            out.append(running)
        return tuple(out)

    @classmethod
    def from_weight_coords(cls, m: Sequence) -> Vector:
        """The vector sum m_i lambda_i (m may be rational or real)."""
        r = len(m)
        x = [sum(m[a:]) if a < r else 0 for a in range(r + 1)]
        if all(isinstance(v, (int, Fraction)) for v in m):
            mean = Fraction(sum(x), r + 1)
        else:
            mean = sum(x) / (r + 1)
        return cls(tuple(v - mean for v in x))

    @classmethod
    def from_coroot_coords(cls, y: Sequence) -> Vector:
        """The vector sum y_i alpha_i."""
        r = len(y)
        padded = [0, *y, 0]
        return cls(tuple(padded[a + 1] - padded[a] for a in range(r + 1)))


@dataclass(frozen=True)
class WeylElement:
    """Permutation of r+1 letters with its sign and Coxeter length."""
    perm: tuple[int, ...]
    sign: int
    length: int

    def act(self, coords: Sequence) -> tuple:
        return tuple(coords[i] for i in self.perm)


def _inversions(perm: Sequence[int]) -> int:
    return sum(1 for i, j in combinations(range(len(perm)), 2) if perm[i] > perm[j])


class RootSystem:
    """Exact A_r geometry; one shared instance per rank."""

    def __init__(self, r: int):
        if r < 1:
            raise ValueError(f"Rank must be >= 1, got {r}")
        self.r = r
        self.positive_root_pairs = [(a, b) for a in range(r + 1) for b in range(a + 1, r + 1)]
        self.positive_roots_m: list[Weight] = [
            self._root_weight(a, b) for a, b in self.positive_root_pairs
        ]
        self.simple_roots_m: list[Weight] = [self._root_weight(i, i + 1) for i in range(r)]
        self.weyl_group: list[WeylElement] = []
        for perm in permutations(range(r + 1)):
            inv = _inversions(perm)
            self.weyl_group.append(WeylElement(perm, -1 if inv % 2 else 1, inv))
        self.rho: Weight = (1,) * r
        # height functional <mu, sum of positive coroots>; equals 2 on simple roots
        self.height_weights = tuple(j * (r + 1 - j) for j in range(1, r + 1))

    @staticmethod
    @lru_cache(maxsize=None)
    def of_rank(r: int) -> RootSystem:
        return RootSystem(r)

    @property
    def n_positive(self) -> int:
        return len(self.positive_root_pairs)

    def _root_weight(self, a: int, b: int) -> Weight:
        x = [0] * (self.r + 1)
        x[a] += 1
        x[b] -= 1
        return self.from_partition(x)

    # coordinate changes

    def to_partition(self, lam: Sequence[int]) -> tuple[int, ...]:
        x = [0] * (self.r + 1)
        running = 0
        for a in range(self.r - 1, -1, -1):
            running += lam[a]
            x[a] = running
        return tuple(x)

    def from_partition(self, x: Sequence[int]) -> Weight:
        return tuple(x[a] - x[a + 1] for a in range(self.r))

    def check_weight(self, lam: Sequence[int]) -> Weight:
        lam = tuple(int(v) for v in lam)
        if len(lam) != self.r:
            raise ValueError(f"Weight {lam} does not have {self.r} coordinates")
        return lam

    def check_dominant(self, lam: Sequence[int]) -> Weight:
        lam = self.check_weight(lam)
        if any(v < 0 for v in lam):
            raise ValueError(f"Weight {lam} is not dominant")
        return lam

    # weights

    def embed(self, lam: Sequence[int]) -> Vector:
        """Exact coordinates of sum m_i lambda_i in the sum-zero hyperplane."""
        return Vector.from_weight_coords([Fraction(v) for v in self.check_weight(lam)])

    @staticmethod
    def is_dominant(lam: Sequence[int]) -> bool:
        return all(v >= 0 for v in lam)

    @staticmethod
    def is_strictly_dominant(lam: Sequence[int]) -> bool:
        return all(v > 0 for v in lam)

    @staticmethod
    def length(lam: Sequence[int]) -> int:
        """Pairing with the highest coroot."""
        return sum(lam)

    def height(self, lam: Sequence[int]) -> int:
        return sum(m * w for m, w in zip(lam, self.height_weights))

    def act(self, w: WeylElement, lam: Sequence[int]) -> Weight:
        return self.from_partition(w.act(self.to_partition(lam)))

    def orbit(self, lam: Sequence[int]) -> list[Weight]:
        x = self.to_partition(lam)
        seen = {self.from_partition(w.act(x)) for w in self.weyl_group}
        return sorted(seen)

    def dominant_representative(self, lam: Sequence[int]) -> Weight:
        return self.from_partition(sorted(self.to_partition(lam), reverse=True))

    def fundamental_weight(self, k: int) -> Weight:
        if not 1 <= k <= self.r:
            raise ValueError(f"Fundamental weight index must be in 1..{self.r}, got {k}")
        return tuple(1 if i == k - 1 else 0 for i in range(self.r))

    def weyl_orbit(self, k: int) -> list[Weight]:
        """Orbit of the k-th fundamental weight; C(r+1, k) elements."""
        return self.orbit(self.fundamental_weight(k))

    def steps(self) -> list[Weight]:
        """All nearest-neighbour increments: the union of the fundamental orbits."""
        return [mu for k in range(1, self.r + 1) for mu in self.weyl_orbit(k)]

    def dominant_weights(self, max_length: int) -> list[Weight]:
        """Dominant weights with length <= max_length, lexicographic order."""
        out: list[Weight] = []

        def extend(prefix: list[int], budget: int):
            if len(prefix) == self.r:
                out.append(tuple(prefix))
                return
            for value in range(budget + 1):
                extend(prefix + [value], budget - value)

        extend([], max_length)
        return sorted(out)

    # pairings and products

    def coroot_pairing(self, root_index: int, lam: Sequence[int]) -> int:
        a, b = self.positive_root_pairs[root_index]
        x = self.to_partition(lam)
        return x[a] - x[b]

    def pairings(self, lam: Sequence[int]) -> list[int]:
        x = self.to_partition(lam)
        return [x[a] - x[b] for a, b in self.positive_root_pairs]

    def pi(self, lam: Sequence[int], subset: Iterable[int] | None = None) -> int:
        """Product of <alpha, lam> over the positive roots (indices in subset, default all)."""
        values = self.pairings(lam)
        indices = range(len(values)) if subset is None else subset
        result = 1
        for i in indices:
            result *= values[i]
        return result

    def positive_roots(self) -> list[Vector]:
        return [self.embed(m) for m in self.positive_roots_m]

    # building counts

    def q_exponent(self, lam: Sequence[int]) -> int:
        """E with q_{t_lam} = q^E; the sum of <lam, alpha> over positive roots."""
        return self.height(lam)

    def q_t_lambda(self, lam: Sequence[int]) -> ScalarQ:
        lam = self.check_dominant(lam)
        return ScalarQ.q_power(self.q_exponent(lam))

    def stabilizer(self, lam: Sequence[int] | None) -> list[WeylElement]:
        if lam is None:
            return list(self.weyl_group)
        x = self.to_partition(self.check_dominant(lam))
        return [w for w in self.weyl_group if w.act(x) == x]

    def poincare(self, lam: Sequence[int] | None = None) -> ScalarQ:
        """Sum of q^(-l(w)) over W_0 (lam None) or over the stabilizer of a dominant lam."""
        counts: dict[int, int] = {}
        for w in self.stabilizer(lam):
            counts[-2 * w.length] = counts.get(-2 * w.length, 0) + 1
        return ScalarQ(counts)

    def sphere_size(self, lam: Sequence[int]) -> ScalarQ:
        """N_lambda = W_0(q^-1) / W_{0 lam}(q^-1) * q_{t_lam}, a polynomial in q."""
        lam = self.check_dominant(lam)
        return self.poincare() / self.poincare(lam) * self.q_t_lambda(lam)
