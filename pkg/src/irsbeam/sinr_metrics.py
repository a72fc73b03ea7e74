"""SINR, transmit power and min scaled SINR for a (channels, phase, W) triple.

Every solver result is re-checked with these functions; they share no code
with the optimizers beyond the composite channel itself.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channel_model import (BeamformingSet, ChannelSet, PhaseProfile, SystemConfig, composite_rows,
                            effective_gram)


@dataclass(frozen=True)
class SinrReport:
    sinr: tuple
    scaled_sinr: tuple
    total_power: float
    min_scaled_sinr: float
    constraint_slacks: tuple

    def to_dict(self) -> dict:
        return {
            "sinr": list(self.sinr),
            "scaled_sinr": list(self.scaled_sinr),
            "total_power": self.total_power,
            "min_scaled_sinr": self.min_scaled_sinr,
            "constraint_slacks": list(self.constraint_slacks),
        }


def _ratio(num, den):
    if den == 0.0:
        if num != 0.0:
            return float("inf")
        warnings.warn("zero signal and zero noise; SINR taken as 0", RuntimeWarning, stacklevel=3)
        return 0.0
    return num / den


def received_powers(channels: ChannelSet, phase: PhaseProfile, W: BeamformingSet,
                    method: str = "gram") -> np.ndarray:
    """``P[i, j]`` = power of beam j received by user i.

    ``method="gram"`` evaluates ``w^H H_i w``; ``method="rows"`` sums
    ``|h^H_{i,q} w|^2`` over antennas.
    """
    K = len(channels.bs_to_mu)
    out = np.empty((K, W.num_groups))
    for i in range(K):
        if method == "gram":
            H = effective_gram(channels, phase, i)
            out[i] = np.real(np.einsum("mk,mn,nk->k", W.W.conj(), H, W.W))
        else:
            out[i] = np.sum(np.abs(composite_rows(channels, phase, i) @ W.W) ** 2, axis=0)
    return np.maximum(out, 0.0)


def sinr(channels: ChannelSet, phase: PhaseProfile, W: BeamformingSet, mu: int,
         config: SystemConfig) -> float:
    """SINR of user ``mu`` (linear scale)."""
    if not 0 <= mu < config.num_mus:
        raise IndexError(f"user index {mu} out of range 0..{config.num_mus - 1}")
    k = int(config.group_of[mu])
    H = effective_gram(channels, phase, mu)
    p = [float(np.real(np.vdot(w, H @ w))) for w in W.vectors]
    interference = sum(p[j] for j in range(len(p)) if j != k)
    return _ratio(max(p[k], 0.0), max(interference, 0.0) + config.noise_powers[mu])


def sinr_from_powers(P: np.ndarray, config: SystemConfig) -> np.ndarray:
    grp = config.group_of
    K = config.num_mus
    sig = P[np.arange(K), grp]
    interf = P.sum(axis=1) - sig
    return np.array([_ratio(sig[i], interf[i] + config.noise_powers[i]) for i in range(K)])


def evaluate(channels: ChannelSet, phase: PhaseProfile, W: BeamformingSet, config: SystemConfig,
             method: str = "gram") -> SinrReport:
    s = sinr_from_powers(received_powers(channels, phase, W, method), config)
    gamma = np.asarray(config.sinr_targets)
    scaled = s / gamma
    return SinrReport(
        sinr=tuple(float(x) for x in s),
        scaled_sinr=tuple(float(x) for x in scaled),
        total_power=W.total_power(),
        min_scaled_sinr=float(np.min(scaled)),
        constraint_slacks=tuple(float(x) for x in s - gamma),
    )
