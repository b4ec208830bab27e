"""Signed spin-pair trials: generation, storage, and sign measurement.

Each trial k carries one direction s_k. Station A receives the carrier
with angular momentum along +s_k, station B the partner along -s_k;
the convention is fixed here and deliberately not configurable. A
station's measurement against a setting direction is the sign of the
dot product, with an explicit tie rule at exact zero.

Trial k's spin is a pure function of (seed, k), drawn from a private
counter-based stream, so a database is reproducible byte for byte no
matter how generation is ordered or partitioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import parallel
from .geometry import (
    NORM_TOLERANCE,
    UnitVector,
    orthonormal_basis,
    sample_uniform_direction,
    unit_rows_for_keys,
)
from .rng import DOMAIN_TRIALS, CounterStream, child_keys, key_uniform_column, root_key

_WEIGHT_TOLERANCE = 1e-12
_SEED_LIMIT = 1 << 64


class ConfigurationError(ValueError):
    """Invalid run configuration (bad field values, missing settings)."""


# ---------------------------------------------------------------------------
# spin direction distributions


class DistributionSpec:
    """Base for spin-direction distributions.

    The correlation estimator's CHSH bound is distribution-free, so the
    simulator accepts arbitrary distributions as stress inputs; the
    physically motivated default is the uniform sphere.
    """

    def tag(self) -> str:
        raise NotImplementedError

    def _sample_rows(self, keys: np.ndarray, offset: int) -> np.ndarray:
        """One spin row per stream key, consuming draws from ``offset``."""
        raise NotImplementedError


@dataclass(frozen=True)
class UniformSphere(DistributionSpec):
    def tag(self) -> str:
        return "uniform-sphere"

    def _sample_rows(self, keys, offset):
        return unit_rows_for_keys(keys, offset)


@dataclass(frozen=True)
class FixedAxis(DistributionSpec):
    """Every trial's spin points along one fixed axis (degenerate stress case)."""

    axis: UnitVector

    def tag(self) -> str:
        return f"fixed-axis({_fmt(self.axis.x)},{_fmt(self.axis.y)},{_fmt(self.axis.z)})"

    def _sample_rows(self, keys, offset):
        return np.tile(self.axis.as_array(), (keys.shape[0], 1))


@dataclass(frozen=True)
class Cap(DistributionSpec):
    """Uniform over the spherical cap of angular radius ``half_angle`` around ``axis``."""

    axis: UnitVector
    half_angle: float

    def __post_init__(self):
        if not 0.0 < self.half_angle <= math.pi:
            raise ConfigurationError(
                f"cap half-angle must be in (0, pi], got {self.half_angle}"
            )

    def tag(self) -> str:
        a = self.axis
        return f"cap({_fmt(a.x)},{_fmt(a.y)},{_fmt(a.z)},{_fmt(self.half_angle)})"

    def _sample_rows(self, keys, offset):
        # cos(alpha) uniform on [cos(half_angle), 1] gives the uniform cap.
        u0 = key_uniform_column(keys.astype(np.uint64), offset)
        u1 = key_uniform_column(keys.astype(np.uint64), offset + 1)
        cos_a = 1.0 - u0 * (1.0 - math.cos(self.half_angle))
        sin_a = np.sqrt(np.maximum(0.0, 1.0 - cos_a * cos_a))
        beta = 2.0 * math.pi * u1
        axis = self.axis.as_array()
        e1, e2 = orthonormal_basis(axis)
        rows = (
            (sin_a * np.cos(beta))[:, None] * e1
            + (sin_a * np.sin(beta))[:, None] * e2
            + cos_a[:, None] * axis
        )
        norm = np.sqrt(rows[:, 0] ** 2 + rows[:, 1] ** 2 + rows[:, 2] ** 2)
        return rows / norm[:, None]


@dataclass(frozen=True)
class Mixture(DistributionSpec):
    """Weighted mixture of component distributions."""

    components: tuple[tuple[float, DistributionSpec], ...]

    def __post_init__(self):
        if not self.components:
            raise ConfigurationError("mixture needs at least one component")
        weights = [w for w, _ in self.components]
        if any(w <= 0.0 for w in weights):
            raise ConfigurationError(f"mixture weights must be positive, got {weights}")
        if abs(sum(weights) - 1.0) > _WEIGHT_TOLERANCE:
            raise ConfigurationError(f"mixture weights must sum to 1, got {sum(weights)}")

    def tag(self) -> str:
        parts = ";".join(f"{_fmt(w)}:{spec.tag()}" for w, spec in self.components)
        return f"mixture({parts})"

    def _sample_rows(self, keys, offset):
        # draw at `offset` selects the component; components draw from offset+1
        u = key_uniform_column(keys.astype(np.uint64), offset)
        cum = np.cumsum([w for w, _ in self.components])
        idx = np.minimum(np.searchsorted(cum, u, side="right"), len(self.components) - 1)
        rows = np.empty((keys.shape[0], 3))
        for i, (_, spec) in enumerate(self.components):
            mask = idx == i
            if mask.any():
                rows[mask] = spec._sample_rows(keys[mask], offset + 1)
        return rows


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _unit_from_components(x: float, y: float, z: float) -> UnitVector:
    # keep already-unit components bit-exact (round-tripping a tag must not
    # renormalize); only repair vectors that genuinely miss the invariant
    if abs(x * x + y * y + z * z - 1.0) <= NORM_TOLERANCE:
        return UnitVector(x, y, z)
    return UnitVector.normalize(x, y, z)


def _split_top_level(text: str, sep: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == sep and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return parts


def parse_distribution(text: str) -> DistributionSpec:
    """Parse a distribution tag, the inverse of ``DistributionSpec.tag()``.

    Grammar: ``uniform-sphere`` | ``fixed-axis(x,y,z)`` |
    ``cap(x,y,z,half_angle_rad)`` | ``mixture(w:spec;w:spec;...)``.
    """
    text = text.strip()
    if text in ("uniform-sphere", "uniform"):
        return UniformSphere()
    for name in ("fixed-axis", "cap", "mixture"):
        if text.startswith(name + "(") and text.endswith(")"):
            body = text[len(name) + 1 : -1]
            try:
                if name == "fixed-axis":
                    x, y, z = (float(p) for p in body.split(","))
                    return FixedAxis(_unit_from_components(x, y, z))
                if name == "cap":
                    x, y, z, half = (float(p) for p in body.split(","))
                    return Cap(_unit_from_components(x, y, z), half)
                entries = []
                for part in _split_top_level(body, ";"):
                    w_text, spec_text = part.split(":", 1)
                    entries.append((float(w_text), parse_distribution(spec_text)))
                return Mixture(tuple(entries))
            except ConfigurationError:
                raise
            except ValueError as exc:
                raise ConfigurationError(f"bad distribution spec {text!r}: {exc}") from exc
    raise ConfigurationError(f"unknown distribution spec {text!r}")


# ---------------------------------------------------------------------------
# trial database


@dataclass(frozen=True, eq=False)
class TrialDatabase:
    """The stored record of n spin directions, immutable once generated."""

    seed: int
    distribution: DistributionSpec
    n: int
    spins: np.ndarray = field(repr=False)  # (n, 3) float64, write-protected

    def __post_init__(self):
        if self.n < 1 or self.spins.shape != (self.n, 3):
            raise ConfigurationError(
                f"database needs spins shaped ({self.n}, 3), got {self.spins.shape}"
            )

    def spin(self, k: int) -> UnitVector:
        return UnitVector.from_array(self.spins[k])


def _spin_rows(seed: int, distribution: DistributionSpec, lo: int, hi: int) -> np.ndarray:
    keys = child_keys(root_key(seed, DOMAIN_TRIALS), lo, hi)
    return distribution._sample_rows(keys, 0)


def _generate_range(args) -> np.ndarray:
    seed, distribution, lo, hi = args
    return _spin_rows(seed, distribution, lo, hi)


def generate_database(
    seed: int,
    distribution: DistributionSpec,
    n: int,
    workers: int = 1,
) -> TrialDatabase:
    """Generate the trial database deterministically from (seed, distribution, n).

    Trial k's direction depends only on (seed, k), so the result is
    identical at any worker count and under any index partitioning.
    """
    if not isinstance(n, int) or n < 1:
        raise ConfigurationError(f"n must be a positive integer, got {n!r}")
    if not isinstance(seed, int) or not 0 <= seed < _SEED_LIMIT:
        raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    if not isinstance(distribution, DistributionSpec):
        raise ConfigurationError(f"not a distribution spec: {distribution!r}")

    if workers <= 1 or n < 4 * workers:
        spins = _spin_rows(seed, distribution, 0, n)
    else:
        ranges = parallel.chunk_ranges(n, workers)
        with parallel.plain_pool(workers) as pool:
            blocks = list(pool.map(_generate_range, [(seed, distribution, lo, hi) for lo, hi in ranges]))
        spins = np.vstack(blocks)
    spins.setflags(write=False)
    return TrialDatabase(seed=seed, distribution=distribution, n=n, spins=spins)


# ---------------------------------------------------------------------------
# sign measurement


@dataclass(frozen=True)
class Outcome:
    """A station's reading: always exactly +1 or -1, never 0.

    ``was_tie`` flags the measure-zero event of an exactly orthogonal
    spin and setting, resolved by the fixed rule sign(0) := +1 so the
    event stays auditable in downstream tallies.
    """

    value: int
    was_tie: bool = False

    def __post_init__(self):
        if self.value not in (-1, 1):
            raise ValueError(f"outcome must be +1 or -1, got {self.value}")


def measure_sign(spin_sign: int, s: UnitVector, setting: UnitVector) -> Outcome:
    """Idealized measurement: sign(spin_sign * (s . setting)).

    ``spin_sign`` is +1 at station A and -1 at station B, selecting
    which member of the pair the station received.
    """
    if spin_sign not in (-1, 1):
        raise ValueError(f"spin_sign must be +1 or -1, got {spin_sign}")
    d = s.dot(setting)
    if d == 0.0:
        return Outcome(value=1, was_tie=True)
    signed = spin_sign * d
    return Outcome(value=1 if signed > 0.0 else -1, was_tie=False)


# ---------------------------------------------------------------------------
# setting selection


@dataclass(frozen=True)
class SettingPolicy:
    """How the reference directions a and b are chosen for a run."""

    kind: str  # 'fixed' | 'from-database' | 'uniform'
    a: UnitVector | None = None
    b: UnitVector | None = None

    def __post_init__(self):
        if self.kind not in ("fixed", "from-database", "uniform"):
            raise ConfigurationError(f"unknown setting policy {self.kind!r}")
        if self.kind == "fixed" and (self.a is None or self.b is None):
            raise ConfigurationError("fixed setting policy requires both vectors")

    @classmethod
    def fixed(cls, a: UnitVector, b: UnitVector) -> "SettingPolicy":
        return cls("fixed", a, b)

    @classmethod
    def from_database(cls) -> "SettingPolicy":
        return cls("from-database")

    @classmethod
    def uniform(cls) -> "SettingPolicy":
        return cls("uniform")


def select_settings(
    policy: SettingPolicy, db: TrialDatabase, stream: CounterStream
) -> tuple[UnitVector, UnitVector]:
    """Draw the setting pair (a, b) according to the policy.

    'from-database' picks both independently, uniformly with
    replacement, from the already observed spin directions. 'uniform'
    draws fresh directions from the sphere. 'fixed' returns the
    configured pair unchanged.
    """
    if policy.kind == "fixed":
        return policy.a, policy.b
    if policy.kind == "from-database":
        ia = stream.index_below(db.n)
        ib = stream.index_below(db.n)
        return UnitVector.from_array(db.spins[ia]), UnitVector.from_array(db.spins[ib])
    a = sample_uniform_direction(stream)
    b = sample_uniform_direction(stream)
    return a, b


# ---------------------------------------------------------------------------
# text serialization (line-oriented, bit-exact round trip)

_DB_HEADER_PREFIX = "bellsim-db v1"


def write_database(db: TrialDatabase, fileobj) -> None:
    """Write the line-oriented text format; floats carry 17 significant digits."""
    fileobj.write(f"{_DB_HEADER_PREFIX} seed={db.seed} dist={db.distribution.tag()} n={db.n}\n")
    for k in range(db.n):
        x, y, z = db.spins[k]
        fileobj.write(f"{k} {_fmt(x)} {_fmt(y)} {_fmt(z)}\n")


def read_database(fileobj) -> TrialDatabase:
    """Parse the text format back into a database, bit-exact."""
    header = fileobj.readline().rstrip("\n")
    fields = header.split(" ")
    if len(fields) != 5 or fields[0] != "bellsim-db" or fields[1] != "v1":
        raise ConfigurationError(f"bad database header: {header!r}")
    try:
        seed = int(fields[2].removeprefix("seed="))
        dist = parse_distribution(fields[3].removeprefix("dist="))
        n = int(fields[4].removeprefix("n="))
    except ValueError as exc:
        raise ConfigurationError(f"bad database header: {header!r}") from exc
    if n < 1:
        raise ConfigurationError("database must contain at least one trial")
    spins = np.empty((n, 3))
    for k in range(n):
        parts = fileobj.readline().split()
        try:
            if len(parts) != 4 or int(parts[0]) != k:
                raise ConfigurationError(f"bad or out-of-order trial line {k}")
            spins[k] = [float(parts[1]), float(parts[2]), float(parts[3])]
        except ValueError as exc:
            raise ConfigurationError(f"bad trial line {k}") from exc
    norm_err = np.abs(np.sum(spins * spins, axis=1) - 1.0)
    if norm_err.max() > NORM_TOLERANCE:
        raise ConfigurationError("database contains non-unit spin rows")
    spins.setflags(write=False)
    return TrialDatabase(seed=seed, distribution=dist, n=n, spins=spins)
