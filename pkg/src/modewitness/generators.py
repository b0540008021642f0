"""Sets of symmetrized quadrature generators and their locality."""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

MAX_ORDER = 3


def set_size(order: int, modes: int) -> int:
    """Number of generators of degree 1..order on ``modes`` modes."""
    return sum(math.comb(2 * modes + k - 1, k) for k in range(1, order + 1))


def local_count(order: int, modes: int) -> int:
    """Number of single-mode generators of degree 1..order, ``m N (N + 3) / 2``."""
    if order < 1 or modes < 1:
        raise ValueError("order and modes must be >= 1")
    return modes * order * (order + 3) // 2


@dataclass(frozen=True)
class Partition:
    """Disjoint blocks of 0-based mode indices covering ``0..m-1``."""

    blocks: tuple[frozenset[int], ...]

    def __post_init__(self):
        seen: set[int] = set()
        for b in self.blocks:
            if not b:
                raise ValueError("empty partition block")
            if seen & b:
                raise ValueError("partition blocks overlap")
            seen |= b
        if seen != set(range(len(seen))):
            raise ValueError("partition must cover modes 1..m without gaps")

    @classmethod
    def parse(cls, spec: str, modes: int | None = None) -> "Partition":
        """Parse ``"1|2|3"`` or ``"12|3"`` (1-based mode labels).

        Blocks with labels above 9 are written comma separated: ``"1,2|10"``.
        """
        blocks = []
        for part in spec.split("|"):
            part = part.strip()
            labels = part.split(",") if "," in part else list(part)
            try:
                blocks.append(frozenset(int(x) - 1 for x in labels if x.strip()))
            except ValueError:
                raise ValueError(f"bad partition spec {spec!r}") from None
        out = cls(tuple(blocks))
        if modes is not None and out.modes != modes:
            raise ValueError(f"partition {spec!r} covers {out.modes} modes, state has {modes}")
        return out

    @classmethod
    def singletons(cls, modes: int) -> "Partition":
        return cls(tuple(frozenset([i]) for i in range(modes)))

    @property
    def modes(self) -> int:
        return sum(len(b) for b in self.blocks)

    def block_of(self, mode: int) -> int:
        for i, b in enumerate(self.blocks):
            if mode in b:
                return i
        raise ValueError(f"mode {mode} not in partition")

    def shape(self) -> tuple[int, ...]:
        """Block sizes in decreasing order; partitions of equal shape are equivalent."""
        return tuple(sorted((len(b) for b in self.blocks), reverse=True))

    def refines(self, other: "Partition") -> bool:
        return all(any(b <= c for c in other.blocks) for b in self.blocks)

    def __str__(self) -> str:
        sep = "," if self.modes > 9 else ""
        return "|".join(sep.join(str(i + 1) for i in sorted(b)) for b in self.blocks)


def canonical_partitions(modes: int) -> list[Partition]:
    """One representative per partition shape, finest first.

    Representatives group consecutive modes, e.g. ``12|3`` for shape (2, 1).
    """

    def shapes(n, largest):
        if n == 0:
            yield ()
            return
        for k in range(min(n, largest), 0, -1):
            for rest in shapes(n - k, k):
                yield (k,) + rest

    out = []
    for shape in sorted(shapes(modes, modes), key=lambda s: (-len(s), [-x for x in s])):
        if len(shape) == 1:
            continue
        blocks, start = [], 0
        for k in shape:
            blocks.append(frozenset(range(start, start + k)))
            start += k
        out.append(Partition(tuple(blocks)))
    return out


_TOKEN = re.compile(r"([qp])(\d+)(?:\^(\d+))?")


@dataclass(frozen=True)
class Generator:
    """Symmetrized monomial ``S(q_1^k1 .. q_m^km p_1^k(m+1) .. p_m^k2m)``."""

    exponents: tuple[int, ...]

    def __post_init__(self):
        if len(self.exponents) % 2 or not self.exponents:
            raise ValueError("exponent tuple must have even, non-zero length")
        if min(self.exponents) < 0:
            raise ValueError("exponents must be non-negative")
        if self.order < 1:
            raise ValueError("generator order must be >= 1")

    @property
    def modes(self) -> int:
        return len(self.exponents) // 2

    @property
    def order(self) -> int:
        return sum(self.exponents)

    @property
    def support(self) -> frozenset[int]:
        m = self.modes
        return frozenset(i for i in range(m) if self.exponents[i] or self.exponents[m + i])

    def index_vector(self) -> tuple[int, ...]:
        """Sorted quadrature indices with multiplicity (0-based, q's first)."""
        return tuple(j for j, k in enumerate(self.exponents) for _ in range(k))

    def normalization(self) -> int:
        return math.prod(math.factorial(k) for k in self.exponents)

    def __str__(self) -> str:
        m = self.modes
        parts = []
        for j, k in enumerate(self.exponents):
            if k:
                name = f"{'q' if j < m else 'p'}{(j % m) + 1}"
                parts.append(name if k == 1 else f"{name}^{k}")
        return " ".join(parts)

    @classmethod
    def parse(cls, text: str, modes: int) -> "Generator":
        """Inverse of ``str``: ``"q1^2 p2"`` -> exponents."""
        k = [0] * (2 * modes)
        pos = 0
        text = text.strip()
        for match in _TOKEN.finditer(text):
            if text[pos : match.start()].strip():
                raise ValueError(f"cannot parse generator {text!r}")
            pos = match.end()
            quad, mode, power = match.group(1), int(match.group(2)), int(match.group(3) or 1)
            if not 1 <= mode <= modes:
                raise ValueError(f"mode {mode} out of range in {text!r}")
            k[(mode - 1) + (modes if quad == "p" else 0)] += power
        if text[pos:].strip() or not text:
            raise ValueError(f"cannot parse generator {text!r}")
        return cls(tuple(k))


def locality_of(g: Generator, partition: Partition) -> int | None:
    """Index of the block holding every mode of ``g``; ``None`` if non-local."""
    if partition.modes != g.modes:
        raise ValueError("partition and generator disagree on the number of modes")
    for i, b in enumerate(partition.blocks):
        if g.support <= b:
            return i
    return None


class GeneratorSet:
    """All generators of degree 1..order on ``modes`` modes, in canonical order.

    Canonical order: ascending degree, then lexicographic on the index vector
    (equivalently, descending lexicographic on exponent tuples).  The degree-1
    block is therefore ``(q_1, .., q_m, p_1, .., p_m)``.
    """

    def __init__(self, order: int, modes: int, generators: Sequence[Generator] | None = None):
        if order < 1 or modes < 1:
            raise ValueError("order and modes must be >= 1")
        if order > MAX_ORDER:
            raise ValueError(f"generator order {order} exceeds the supported maximum {MAX_ORDER}")
        self.order = order
        self.modes = modes
        if generators is None:
            generators = [
                Generator(tuple(int(x) for x in np.bincount(idx, minlength=2 * modes)))
                for k in range(1, order + 1)
                for idx in itertools.combinations_with_replacement(range(2 * modes), k)
            ]
        self.generators: tuple[Generator, ...] = tuple(generators)

    def __len__(self) -> int:
        return len(self.generators)

    def __iter__(self):
        return iter(self.generators)

    def __getitem__(self, i) -> Generator:
        return self.generators[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, GeneratorSet) and self.generators == other.generators

    @cached_property
    def orders(self) -> np.ndarray:
        return np.array([g.order for g in self.generators])

    def order_blocks(self) -> list[np.ndarray]:
        """Index arrays of the homogeneous-degree blocks."""
        return [np.flatnonzero(self.orders == k) for k in range(1, self.order + 1)]

    def index_of(self, g: Generator | str) -> int:
        if isinstance(g, str):
            g = Generator.parse(g, self.modes)
        return self.generators.index(g)

    def labels(self) -> list[str]:
        return [str(g) for g in self.generators]

    def local_indices(self, partition: Partition) -> np.ndarray:
        return np.array([i for i, g in enumerate(self.generators) if locality_of(g, partition) is not None])

    def block_labels(self, partition: Partition) -> np.ndarray:
        """Block index per generator, -1 for non-local ones."""
        out = [locality_of(g, partition) for g in self.generators]
        return np.array([-1 if b is None else b for b in out])

    def to_json(self) -> dict:
        return {"order": self.order, "modes": self.modes, "generators": [list(g.exponents) for g in self]}

    @classmethod
    def from_json(cls, data: dict) -> "GeneratorSet":
        gens = [Generator(tuple(int(k) for k in e)) for e in data["generators"]]
        return cls(int(data["order"]), int(data["modes"]), gens)


def build_generator_set(order: int, modes: int) -> GeneratorSet:
    return GeneratorSet(order, modes)


def parse_generators(texts: Iterable[str], modes: int) -> list[Generator]:
    return [Generator.parse(t, modes) for t in texts]
