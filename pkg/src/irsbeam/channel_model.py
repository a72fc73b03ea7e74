"""System configuration, channel data and composite IRS-aided channels.

Conventions
-----------
* Users, groups, IRSs and antennas are indexed from 0.
* Channels toward users are stored as *row* vectors, exactly as they enter
  the received signal: ``bs_to_mu[i][q]`` is ``h^H_{b,i,q}`` (length M) and
  ``irs_to_mu[l][i][q]`` is ``h^H_{l,i,q}`` (length N_l).
  ``bs_to_irs[l]`` is the N_l x M matrix ``H_{b,l}``.
* A reflection coefficient is ``beta * exp(1j * theta)``.  The lifted phase
  variable used by the relaxations is the *conjugate* of the stacked
  coefficients (see :meth:`PhaseProfile.stacked_phi`).

Random channel generation consumes one PCG64 stream seeded with ``seed`` in a
fixed order: ``bs_to_irs`` for l = 0..L-1 (row-major), then ``irs_to_mu`` for
(l, i, q) in lexicographic order, then ``bs_to_mu`` for (i, q).  Every complex
entry uses two consecutive standard normals, real part first.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError

CHANNELSET_FORMAT = "irsbeam.channelset/1"


def _frozen(a, dtype=None):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions, user grouping, QoS targets and power budget.

    ``groups`` partitions the users ``0..K-1``; unicast means singleton
    groups, broadcast a single group.
    """

    num_bs_antennas: int
    irs_sizes: tuple
    groups: tuple
    mu_antennas: tuple
    noise_powers: tuple
    sinr_targets: tuple
    power_budget: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "irs_sizes", tuple(int(n) for n in self.irs_sizes))
        object.__setattr__(self, "groups", tuple(tuple(int(i) for i in g) for g in self.groups))
        object.__setattr__(self, "mu_antennas", tuple(int(q) for q in self.mu_antennas))
        object.__setattr__(self, "noise_powers", tuple(float(s) for s in self.noise_powers))
        object.__setattr__(self, "sinr_targets", tuple(float(s) for s in self.sinr_targets))
        object.__setattr__(self, "power_budget", float(self.power_budget))
        self._validate()

    def _validate(self):
        if int(self.num_bs_antennas) < 1:
            raise ConfigError("must be >= 1", "num_bs_antennas")
        if len(self.irs_sizes) < 1 or min(self.irs_sizes) < 1:
            raise ConfigError("need at least one IRS, each with >= 1 element", "irs_sizes")
        K = len(self.mu_antennas)
        if K < 1 or min(self.mu_antennas) < 1:
            raise ConfigError("need at least one user, each with >= 1 antenna", "mu_antennas")
        members = [i for g in self.groups for i in g]
        if any(len(g) == 0 for g in self.groups) or not self.groups:
            raise ConfigError("groups must be nonempty", "groups")
        if sorted(members) != list(range(K)):
            raise ConfigError(f"groups must partition users 0..{K - 1}", "groups")
        if len(self.noise_powers) != K:
            raise ConfigError(f"expected {K} entries", "noise_powers")
        if len(self.sinr_targets) != K:
            raise ConfigError(f"expected {K} entries", "sinr_targets")
        if not all(np.isfinite(s) and s > 0 for s in self.noise_powers):
            raise ConfigError("noise powers must be positive", "noise_powers")
        if not all(np.isfinite(s) and s > 0 for s in self.sinr_targets):
            raise ConfigError("SINR targets must be positive", "sinr_targets")
        if not (np.isfinite(self.power_budget) and self.power_budget >= 0):
            raise ConfigError("power budget must be nonnegative", "power_budget")

    @classmethod
    def unicast(cls, num_bs_antennas, irs_sizes, num_mus, noise_powers=1.0, sinr_targets=1.0,
                power_budget=1.0, mu_antennas=1):
        return cls._uniform(num_bs_antennas, irs_sizes, [[i] for i in range(num_mus)], num_mus,
                            noise_powers, sinr_targets, power_budget, mu_antennas)

    @classmethod
    def broadcast(cls, num_bs_antennas, irs_sizes, num_mus, noise_powers=1.0, sinr_targets=1.0,
                  power_budget=1.0, mu_antennas=1):
        return cls._uniform(num_bs_antennas, irs_sizes, [list(range(num_mus))], num_mus,
                            noise_powers, sinr_targets, power_budget, mu_antennas)

    @classmethod
    def multicast(cls, num_bs_antennas, irs_sizes, groups, noise_powers=1.0, sinr_targets=1.0,
                  power_budget=1.0, mu_antennas=1):
        K = sum(len(g) for g in groups)
        return cls._uniform(num_bs_antennas, irs_sizes, groups, K, noise_powers, sinr_targets,
                            power_budget, mu_antennas)

    @classmethod
    def _uniform(cls, M, irs_sizes, groups, K, noise, gamma, P, Q):
        def per_user(v):
            return [v] * K if np.isscalar(v) else list(v)

        return cls(M, tuple(irs_sizes), tuple(groups), tuple(per_user(Q)), tuple(per_user(noise)),
                   tuple(per_user(gamma)), P)

    @property
    def num_mus(self) -> int:
        return len(self.mu_antennas)

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    @property
    def num_irs(self) -> int:
        return len(self.irs_sizes)

    @property
    def total_elements(self) -> int:
        return sum(self.irs_sizes)

    @property
    def group_of(self) -> np.ndarray:
        """Group index of every user."""
        out = np.empty(self.num_mus, dtype=np.int64)
        for k, g in enumerate(self.groups):
            out[list(g)] = k
        return out

    @property
    def traffic(self) -> str:
        if self.num_groups == 1 and self.num_mus > 1:
            return "broadcast"
        if all(len(g) == 1 for g in self.groups):
            return "unicast"
        return "multicast"

    def replace(self, **changes) -> "SystemConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return SystemConfig(**d)


@dataclass(frozen=True)
class ChannelSet:
    """All complex channel coefficients of one scenario (see module notes)."""

    bs_to_irs: tuple
    irs_to_mu: tuple
    bs_to_mu: tuple

    def __post_init__(self):
        object.__setattr__(self, "bs_to_irs", tuple(_frozen(H, complex) for H in self.bs_to_irs))
        object.__setattr__(self, "irs_to_mu", tuple(
            tuple(_frozen(np.atleast_2d(h), complex) for h in per_irs) for per_irs in self.irs_to_mu))
        object.__setattr__(self, "bs_to_mu", tuple(_frozen(np.atleast_2d(h), complex) for h in self.bs_to_mu))
        for arr in self._arrays():
            if not np.all(np.isfinite(arr)):
                raise ConfigError("channel entries must be finite")

    def _arrays(self):
        yield from self.bs_to_irs
        for per_irs in self.irs_to_mu:
            yield from per_irs
        yield from self.bs_to_mu

    @property
    def num_bs_antennas(self) -> int:
        return self.bs_to_mu[0].shape[1]

    @property
    def irs_sizes(self) -> tuple:
        return tuple(H.shape[0] for H in self.bs_to_irs)

    @property
    def mu_antennas(self) -> tuple:
        return tuple(h.shape[0] for h in self.bs_to_mu)

    def check(self, config: SystemConfig) -> None:
        """Raise :class:`ConfigError` unless shapes match ``config``."""
        M, L, K = config.num_bs_antennas, config.num_irs, config.num_mus
        if len(self.bs_to_irs) != L or len(self.irs_to_mu) != L:
            raise ConfigError(f"expected {L} IRS links", "channels")
        if len(self.bs_to_mu) != K:
            raise ConfigError(f"expected {K} users", "channels.bs_to_mu")
        for l, N in enumerate(config.irs_sizes):
            if self.bs_to_irs[l].shape != (N, M):
                raise ConfigError(f"shape {self.bs_to_irs[l].shape} != {(N, M)}", f"channels.bs_to_irs[{l}]")
            if len(self.irs_to_mu[l]) != K:
                raise ConfigError(f"expected {K} users", f"channels.irs_to_mu[{l}]")
            for i, Q in enumerate(config.mu_antennas):
                if self.irs_to_mu[l][i].shape != (Q, N):
                    raise ConfigError(f"shape {self.irs_to_mu[l][i].shape} != {(Q, N)}",
                                      f"channels.irs_to_mu[{l}][{i}]")
        for i, Q in enumerate(config.mu_antennas):
            if self.bs_to_mu[i].shape != (Q, M):
                raise ConfigError(f"shape {self.bs_to_mu[i].shape} != {(Q, M)}", f"channels.bs_to_mu[{i}]")

    def to_dict(self) -> dict:
        def enc(a):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(a)]

        return {
            "format": CHANNELSET_FORMAT,
            "num_bs_antennas": int(self.num_bs_antennas),
            "irs_sizes": [int(n) for n in self.irs_sizes],
            "mu_antennas": [int(q) for q in self.mu_antennas],
            "bs_to_irs": [enc(H) for H in self.bs_to_irs],
            "irs_to_mu": [[enc(h) for h in per_irs] for per_irs in self.irs_to_mu],
            "bs_to_mu": [enc(h) for h in self.bs_to_mu],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelSet":
        if d.get("format", CHANNELSET_FORMAT) != CHANNELSET_FORMAT:
            raise ConfigError(f"unsupported format {d.get('format')!r}", "format")

        def dec(rows, shape, path):
            arr = np.asarray(rows, dtype=float)
            if arr.size == 0:
                arr = arr.reshape(shape + (2,))
            if arr.shape != shape + (2,):
                raise ConfigError(f"expected shape {shape} of [re, im] pairs", path)
            return arr[..., 0] + 1j * arr[..., 1]

        M, sizes, Q = d["num_bs_antennas"], d["irs_sizes"], d["mu_antennas"]
        bs_to_irs = [dec(H, (N, M), f"bs_to_irs[{l}]") for l, (H, N) in enumerate(zip(d["bs_to_irs"], sizes))]
        irs_to_mu = [[dec(h, (Q[i], N), f"irs_to_mu[{l}][{i}]") for i, h in enumerate(d["irs_to_mu"][l])]
                     for l, N in enumerate(sizes)]
        bs_to_mu = [dec(h, (Q[i], M), f"bs_to_mu[{i}]") for i, h in enumerate(d["bs_to_mu"])]
        return cls(bs_to_irs, irs_to_mu, bs_to_mu)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def loads(cls, text: str) -> "ChannelSet":
        return cls.from_dict(json.loads(text))

    def subset(self, elements=None, antennas=None, users=None) -> "ChannelSet":
        """Slice out the leading IRS elements / BS antennas / users.

        ``elements`` is a per-IRS count, ``antennas`` a BS antenna count and
        ``users`` a user count.  Used to build nested scenario families.
        """
        sizes = self.irs_sizes if elements is None else tuple(elements)
        M = self.num_bs_antennas if antennas is None else int(antennas)
        K = len(self.bs_to_mu) if users is None else int(users)
        return ChannelSet(
            [H[:n, :M] for H, n in zip(self.bs_to_irs, sizes)],
            [[h[:, :n] for h in per_irs[:K]] for per_irs, n in zip(self.irs_to_mu, sizes)],
            [h[:, :M] for h in self.bs_to_mu[:K]],
        )


@dataclass(frozen=True)
class LinkStats:
    """Statistics of one link type: average power gain and Rician K-factor.

    ``gain`` may be a scalar or an array broadcast over the link index
    (IRS index for BS->IRS, (IRS, user) for IRS->user, user for BS->user).
    The line-of-sight part uses half-wavelength ULA steering vectors at the
    given angles (radians).
    """

    gain: object = 1.0
    rician_k: float = 0.0
    aoa: float = 0.0
    aod: float = 0.0


@dataclass(frozen=True)
class ChannelModelParams:
    bs_irs: LinkStats = field(default_factory=LinkStats)
    irs_mu: LinkStats = field(default_factory=LinkStats)
    bs_mu: LinkStats = field(default_factory=LinkStats)

    @classmethod
    def rayleigh(cls, bs_irs_gain=1.0, irs_mu_gain=1.0, bs_mu_gain=1.0):
        return cls(LinkStats(bs_irs_gain), LinkStats(irs_mu_gain), LinkStats(bs_mu_gain))


def _steering(n, angle):
    return np.exp(1j * np.pi * np.arange(n) * np.sin(angle))


def _mix(nlos, los, gain, kf):
    if kf > 0:
        return np.sqrt(gain) * (np.sqrt(kf / (kf + 1.0)) * los + np.sqrt(1.0 / (kf + 1.0)) * nlos)
    return np.sqrt(gain) * nlos


def generate_channels(config: SystemConfig, model: ChannelModelParams | None = None,
                      seed: int = 0) -> ChannelSet:
    """Draw a random :class:`ChannelSet` (see module notes for stream order)."""
    model = model or ChannelModelParams()
    M, sizes, Q, K, L = (config.num_bs_antennas, config.irs_sizes, config.mu_antennas,
                         config.num_mus, config.num_irs)
    counts = [N * M for N in sizes] + [Q[i] * N for N in sizes for i in range(K)] + [q * M for q in Q]
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(2 * sum(counts)).reshape(-1, 2)
    unit = (raw[:, 0] + 1j * raw[:, 1]) / np.sqrt(2.0)

    g_bi = np.broadcast_to(np.asarray(model.bs_irs.gain, float), (L,))
    g_im = np.broadcast_to(np.asarray(model.irs_mu.gain, float), (L, K))
    g_bm = np.broadcast_to(np.asarray(model.bs_mu.gain, float), (K,))

    pos = 0

    def take(shape):
        nonlocal pos
        n = int(np.prod(shape))
        out = unit[pos:pos + n].reshape(shape)
        pos += n
        return out

    bs_to_irs = []
    for l, N in enumerate(sizes):
        los = np.outer(_steering(N, model.bs_irs.aoa), _steering(M, model.bs_irs.aod).conj())
        bs_to_irs.append(_mix(take((N, M)), los, g_bi[l], model.bs_irs.rician_k))
    irs_to_mu = []
    for l, N in enumerate(sizes):
        per = []
        for i in range(K):
            los = np.tile(_steering(N, model.irs_mu.aod).conj(), (Q[i], 1))
            per.append(_mix(take((Q[i], N)), los, g_im[l, i], model.irs_mu.rician_k))
        irs_to_mu.append(per)
    bs_to_mu = []
    for i in range(K):
        los = np.tile(_steering(M, model.bs_mu.aod).conj(), (Q[i], 1))
        bs_to_mu.append(_mix(take((Q[i], M)), los, g_bm[i], model.bs_mu.rician_k))
    return ChannelSet(bs_to_irs, irs_to_mu, bs_to_mu)


AMPLITUDE_MODES = ("fixed_unit", "fixed_values", "free_unit_interval")


@dataclass(frozen=True)
class PhaseProfile:
    """Amplitudes and phases of every IRS element.

    ``tau`` is ``None`` for continuous phases, otherwise the number of
    equally spaced phase levels ``2*pi*m/tau``.
    """

    amplitudes: tuple
    phases: tuple
    amplitude_mode: str = "fixed_unit"
    tau: int | None = None

    def __post_init__(self):
        amps = tuple(_frozen(a, float) for a in self.amplitudes)
        phs = tuple(_frozen(np.mod(p, 2 * np.pi), float) for p in self.phases)
        if len(amps) != len(phs) or any(a.shape != p.shape for a, p in zip(amps, phs)):
            raise ConfigError("amplitude/phase shapes differ", "phase")
        if self.amplitude_mode not in AMPLITUDE_MODES:
            raise ConfigError(f"unknown amplitude mode {self.amplitude_mode!r}", "amplitude_mode")
        for a in amps:
            if np.any(a < 0) or np.any(a > 1):
                raise ConfigError("amplitudes must lie in [0, 1]", "amplitudes")
            if self.amplitude_mode == "fixed_unit" and np.any(a != 1.0):
                raise ConfigError("fixed_unit requires all amplitudes equal to 1", "amplitudes")
        if self.tau is not None:
            tau = int(self.tau)
            if tau < 1:
                raise ConfigError("tau must be a positive integer", "tau")
            snapped = []
            for p in phs:
                m = np.rint(p * tau / (2 * np.pi)).astype(np.int64) % tau
                grid = _frozen(2 * np.pi * m / tau, float)
                if np.any(np.abs(np.mod(p - grid + np.pi, 2 * np.pi) - np.pi) > 1e-9):
                    raise ConfigError("phase not on the discrete grid", "phases")
                snapped.append(grid)
            phs = tuple(snapped)
            object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "phases", phs)

    @classmethod
    def uniform(cls, irs_sizes, theta=0.0, amplitude_mode="fixed_unit", tau=None, beta=1.0):
        return cls([np.full(n, float(beta)) for n in irs_sizes], [np.full(n, float(theta)) for n in irs_sizes],
                   amplitude_mode, tau)

    @classmethod
    def random(cls, irs_sizes, rng, amplitude_mode="fixed_unit", tau=None, amplitudes=None):
        """Phases uniform on the allowed set; amplitudes fixed (or 1 in free mode)."""
        if amplitudes is None:
            amplitudes = [np.ones(n) for n in irs_sizes]
        phases = []
        for n in irs_sizes:
            if tau is None:
                phases.append(rng.uniform(0.0, 2 * np.pi, n))
            else:
                phases.append(2 * np.pi * rng.integers(0, tau, n) / tau)
        return cls(amplitudes, phases, amplitude_mode, tau)

    @classmethod
    def from_stacked(cls, coeffs, irs_sizes, amplitude_mode="fixed_unit", tau=None, amplitudes=None):
        """Build from stacked reflection coefficients ``beta*exp(1j*theta)``.

        If ``amplitudes`` is given it overrides ``abs(coeffs)`` (phases of
        zero coefficients are taken as 0).
        """
        coeffs = np.asarray(coeffs, complex)
        splits = np.cumsum(irs_sizes)[:-1]
        mags = np.abs(coeffs) if amplitudes is None else np.concatenate([np.asarray(a, float) for a in amplitudes])
        if amplitude_mode == "fixed_unit":
            mags = np.ones_like(mags)
        mags = np.clip(mags, 0.0, 1.0)
        ph = np.where(np.abs(coeffs) > 0, np.angle(coeffs), 0.0)
        return cls(np.split(mags, splits), np.split(ph, splits), amplitude_mode, tau)

    @property
    def irs_sizes(self) -> tuple:
        return tuple(a.shape[0] for a in self.amplitudes)

    def reflection(self, l: int) -> np.ndarray:
        """Diagonal of the reflection matrix of IRS ``l``."""
        return self.amplitudes[l] * np.exp(1j * self.phases[l])

    def matrix(self, l: int) -> np.ndarray:
        return np.diag(self.reflection(l))

    def stacked_reflection(self) -> np.ndarray:
        return np.concatenate([self.reflection(l) for l in range(len(self.amplitudes))])

    def stacked_phi(self) -> np.ndarray:
        """Lifted phase vector: the conjugate of the stacked coefficients."""
        return np.conj(self.stacked_reflection())

    def stacked_amplitudes(self) -> np.ndarray:
        return np.concatenate(self.amplitudes)

    def to_dict(self) -> dict:
        return {
            "amplitude_mode": self.amplitude_mode,
            "tau": self.tau,
            "amplitudes": [[float(x) for x in a] for a in self.amplitudes],
            "phases": [[float(x) for x in p] for p in self.phases],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["amplitudes"], d["phases"], d.get("amplitude_mode", "fixed_unit"), d.get("tau"))


@dataclass(frozen=True)
class BeamformingSet:
    """Per-group transmit beamformers stored as columns of an M x g matrix."""

    W: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=complex, copy=True)
        if W.ndim == 1:
            W = W[:, None]
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @classmethod
    def from_vectors(cls, vectors: Sequence) -> "BeamformingSet":
        return cls(np.column_stack([np.asarray(v, complex) for v in vectors]))

    @classmethod
    def zeros(cls, M: int, g: int) -> "BeamformingSet":
        return cls(np.zeros((M, g), complex))

    @property
    def vectors(self) -> list:
        return [self.W[:, k] for k in range(self.W.shape[1])]

    @property
    def num_groups(self) -> int:
        return self.W.shape[1]

    def total_power(self) -> float:
        return float(np.sum(np.abs(self.W) ** 2))

    def to_dict(self) -> dict:
        return {"W": [[[float(z.real), float(z.imag)] for z in col] for col in self.W.T]}

    @classmethod
    def from_dict(cls, d):
        cols = [np.asarray(c, float) for c in d["W"]]
        return cls(np.column_stack([c[:, 0] + 1j * c[:, 1] for c in cols]))


def composite_rows(channels: ChannelSet, phase: PhaseProfile, mu: int) -> np.ndarray:
    """All composite channel rows of user ``mu`` (shape Q_i x M).

    Row q equals ``h^H_{b,i,q} + sum_l h^H_{l,i,q} Phi_l H_{b,l}``.
    """
    K = len(channels.bs_to_mu)
    if not 0 <= mu < K:
        raise IndexError(f"user index {mu} out of range 0..{K - 1}")
    rows = channels.bs_to_mu[mu].copy()
    for l, H in enumerate(channels.bs_to_irs):
        rows = rows + (channels.irs_to_mu[l][mu] * phase.reflection(l)) @ H
    return rows


def composite_rows_single(channels: ChannelSet, phase: PhaseProfile, mu: int) -> np.ndarray:
    """Single-IRS form ``h^H_r Phi H_br + h^H_b`` (requires L = 1)."""
    if len(channels.bs_to_irs) != 1:
        raise ValueError("single-IRS form needs exactly one IRS")
    K = len(channels.bs_to_mu)
    if not 0 <= mu < K:
        raise IndexError(f"user index {mu} out of range 0..{K - 1}")
    return (channels.irs_to_mu[0][mu] * phase.reflection(0)) @ channels.bs_to_irs[0] + channels.bs_to_mu[mu]


def composite_channel(channels: ChannelSet, phase: PhaseProfile, mu: int, antenna: int = 0) -> np.ndarray:
    """Overall downlink row channel to antenna ``antenna`` of user ``mu``."""
    rows = composite_rows(channels, phase, mu)
    if not 0 <= antenna < rows.shape[0]:
        raise IndexError(f"antenna index {antenna} out of range 0..{rows.shape[0] - 1}")
    return rows[antenna]


def effective_gram(channels: ChannelSet, phase: PhaseProfile, mu: int) -> np.ndarray:
    """``sum_q h_{i,q} h_{i,q}^H`` so that ``w^H G w`` is the received power."""
    rows = composite_rows(channels, phase, mu)
    G = rows.conj().T @ rows
    return 0.5 * (G + G.conj().T)


def all_composite_rows(channels: ChannelSet, phase: PhaseProfile, path: str = "general") -> list:
    fn = composite_rows if path == "general" else composite_rows_single
    return [fn(channels, phase, i) for i in range(len(channels.bs_to_mu))]
