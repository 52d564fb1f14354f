"""Shared domain types, errors and the seeded random source."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

MASK64 = (1 << 64) - 1


class KMeansError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(KMeansError, ValueError):
    """Invalid run configuration (bad k, bad init, ...)."""


class DataError(KMeansError, ValueError):
    """Input data that violates a loader schema or basic sanity checks."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class DomainError(KMeansError, ValueError):
    """A metric is undefined for some row (zero norm, constant row)."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class DistanceKind(enum.Enum):
    CITYBLOCK = "cityblock"
    SQEUCLIDEAN = "sqeuclidean"
    COSINE = "cosine"
    CORRELATION = "correlation"

    @classmethod
    def parse(cls, name: "str | DistanceKind") -> "DistanceKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown metric {name!r} (choose from {choices})") from None

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An n x d table of finite observations, one row per point.

    The array is copied to float64 and made read-only, so a constructed
    matrix can be shared freely.
    """

    values: np.ndarray
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
        bad = np.argwhere(~np.isfinite(arr))
        if len(bad):
            i, j = bad[0]
            raise DataError(f"non-finite value at row {int(i)}, column {int(j)}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != arr.shape[0]:
                raise DataError(f"{len(labels)} labels for {arr.shape[0]} rows")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, DataMatrix):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class InitStrategy:
    """How a replicate picks its starting centroids.

    ``kind`` is one of ``"sample"`` (k distinct rows drawn uniformly),
    ``"spread"`` (greedy farthest-point selection from a random first row)
    or ``"explicit"`` (fixed row indices or fixed centroid vectors).
    """

    kind: str = "sample"
    rows: Optional[tuple[int, ...]] = None
    centroids: Optional[tuple[tuple[float, ...], ...]] = None

    def __post_init__(self):
        if self.kind not in ("sample", "spread", "explicit"):
            raise ConfigError(f"unknown init strategy {self.kind!r}")
        if self.kind == "explicit":
            if (self.rows is None) == (self.centroids is None):
                raise ConfigError("explicit init needs exactly one of rows or centroids")
            if self.rows is not None:
                rows = tuple(int(r) for r in self.rows)
                if len(set(rows)) != len(rows):
                    raise ConfigError(f"explicit init rows must be distinct, got {list(rows)}")
                if any(r < 0 for r in rows):
                    raise ConfigError("explicit init rows must be non-negative")
                object.__setattr__(self, "rows", rows)
            else:
                cents = tuple(tuple(float(v) for v in c) for c in self.centroids)
                if len({len(c) for c in cents}) > 1:
                    raise ConfigError("explicit centroids must all have the same length")
                object.__setattr__(self, "centroids", cents)

    @classmethod
    def sample(cls) -> "InitStrategy":
        return cls("sample")

    @classmethod
    def spread(cls) -> "InitStrategy":
        return cls("spread")

    @classmethod
    def from_rows(cls, rows: Sequence[int]) -> "InitStrategy":
        return cls("explicit", rows=tuple(rows))

    @classmethod
    def from_centroids(cls, centroids) -> "InitStrategy":
        return cls("explicit", centroids=tuple(tuple(c) for c in np.asarray(centroids, dtype=float)))

    @classmethod
    def parse(cls, text: str) -> "InitStrategy":
        """Parse ``sample``, ``spread`` or ``rows:0,5,9``."""
        text = text.strip()
        if text in ("sample", "spread"):
            return cls(text)
        if text.startswith("rows:"):
            try:
                rows = [int(t) for t in text[5:].split(",") if t.strip()]
            except ValueError:
                raise ConfigError(f"bad row list in init spec {text!r}") from None
            return cls.from_rows(rows)
        raise ConfigError(f"unknown init spec {text!r} (use sample, spread or rows:i,j,...)")

    def __str__(self) -> str:
        if self.kind != "explicit":
            return self.kind
        if self.rows is not None:
            return "rows:" + ",".join(str(r) for r in self.rows)
        return "centroids"


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    metric: DistanceKind = DistanceKind.SQEUCLIDEAN
    init: InitStrategy = field(default_factory=InitStrategy.sample)
    replicates: int = 1
    seed: int = 0
    max_iters: int = 100

    def __post_init__(self):
        object.__setattr__(self, "metric", DistanceKind.parse(self.metric))
        if isinstance(self.init, str):
            object.__setattr__(self, "init", InitStrategy.parse(self.init))
        if int(self.k) < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if int(self.replicates) < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        if int(self.max_iters) < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0 <= int(self.seed) <= MASK64:
            raise ConfigError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        init = self.init
        if init.kind == "explicit":
            count = len(init.rows) if init.rows is not None else len(init.centroids)
            if count != self.k:
                raise ConfigError(f"explicit init gives {count} centroids for k={self.k}")

    def check_against(self, data: DataMatrix) -> None:
        if self.k > data.n:
            raise ConfigError(f"k={self.k} exceeds the number of rows n={data.n}")
        init = self.init
        if init.rows is not None and max(init.rows) >= data.n:
            raise ConfigError(f"explicit init row {max(init.rows)} out of range for n={data.n}")
        if init.centroids is not None and len(init.centroids[0]) != data.d:
            raise ConfigError(f"explicit centroids have {len(init.centroids[0])} columns, data has {data.d}")


@dataclass(frozen=True)
class IterationRecord:
    """One row of an ``iter phase num sum`` trace."""

    iter: int
    phase: int
    num: int
    sum: float

    def __post_init__(self):
        if self.phase not in (1, 2):
            raise ValueError(f"phase must be 1 or 2, got {self.phase}")


@dataclass(frozen=True, eq=False)
class ClusteringResult:
    assignment: np.ndarray
    centroids: np.ndarray
    cluster_sums: np.ndarray
    total_sum: float
    trace: tuple[IterationRecord, ...]
    replicate_index: int
    elapsed: float
    metric: DistanceKind
    converged: bool = True
    config: Optional[KMeansConfig] = None

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def same_outcome(self, other: "ClusteringResult") -> bool:
        """Bit-level equality of everything except wall-clock time."""
        return (
            np.array_equal(self.assignment, other.assignment)
            and np.array_equal(self.centroids, other.centroids)
            and np.array_equal(self.cluster_sums, other.cluster_sums)
            and self.total_sum == other.total_sum
            and self.trace == other.trace
            and self.replicate_index == other.replicate_index
            and self.converged == other.converged
        )


def derive_subseed(seed: int, replicate: int) -> int:
    """Seed for replicate ``replicate`` of a run seeded with ``seed``.

    Uses numpy's ``SeedSequence`` with the replicate index as spawn key,
    i.e. the same hashing numpy applies to spawned child streams. The
    mapping is pure and stable across platforms and numpy versions.
    """
    if not 0 <= seed <= MASK64:
        raise ConfigError(f"seed must fit in 64 unsigned bits, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate),))
    return int(ss.generate_state(1, np.uint64)[0])


class Rng:
    """Deterministic 64-bit generator backed by the PCG64 bit stream.

    Only the raw 64-bit outputs of PCG64 are used (stable by numpy's
    policy); bounded draws are built on top with rejection sampling so
    the derived sequences do not depend on numpy's ``Generator`` methods.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._bits = np.random.PCG64(self.seed)

    def next_u64(self) -> int:
        return int(self._bits.random_raw())

    def below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)``."""
        if bound < 1:
            raise ValueError("bound must be >= 1")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound

    def sample(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), in draw order (partial Fisher-Yates)."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot draw {k} distinct values from {n}")
        pool = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
