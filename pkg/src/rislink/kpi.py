"""Link KPIs: RMS error vector magnitude and bit error rate.

BER is the count of received bits in error over the count transmitted,
computed on fully compensated receiver output. EVM is measured on the
post-compensation, pre-decision symbols, normalized to the constellation
maximum (unity for unit-energy QPSK) and reported in percent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, Environment, link_gain
from .phy import (
    FrameSpec,
    ImpairmentModel,
    ImpairmentSpec,
    apply_channel,
    build_frame,
    map_qpsk,
    random_payload,
    rx_chain,
)
from .ris import RisConfig
from .seeding import STREAM_IMPAIRMENT, STREAM_NOISE, STREAM_PAYLOAD, derive_seed

__all__ = [
    "SYNC_FAIL_EVM_PCT",
    "SYNC_FAIL_BER",
    "KpiSample",
    "ber",
    "evm_rms",
    "measure_link",
]

# Worst-case-ordered penalty for a configuration that breaks the link:
# chance-level BER and a saturated EVM keep the optimizer's objective
# finite and any working configuration strictly better.
SYNC_FAIL_EVM_PCT = 100.0
SYNC_FAIL_BER = 0.5


@dataclass(frozen=True)
class KpiSample:
    """KPIs of one link measurement (possibly pooled over several frames)."""

    evm_rms_pct: float
    ber: float
    n_bits: int
    sync_ok: bool

    def __post_init__(self) -> None:
        if self.sync_ok and not np.isfinite(self.evm_rms_pct):
            raise ValueError("EVM must be finite when the link is in sync")
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError("BER must lie in [0, 1]")


def ber(received_bits: np.ndarray, transmitted_bits: np.ndarray) -> float:
    """Fraction of received bits in error (Hamming distance over length)."""
    rx = np.asarray(received_bits)
    tx = np.asarray(transmitted_bits)
    if rx.size == 0 or rx.size != tx.size:
        raise ValueError(
            f"bit vectors must be equal-length and non-empty, got {rx.size} vs {tx.size}"
        )
    return float(np.count_nonzero(rx != tx)) / rx.size


def evm_rms(received_symbols: np.ndarray, reference_symbols: np.ndarray) -> float:
    """RMS EVM in percent, normalized to the largest reference magnitude."""
    rx = np.asarray(received_symbols, dtype=complex)
    ref = np.asarray(reference_symbols, dtype=complex)
    if rx.size == 0 or rx.size != ref.size:
        raise ValueError(
            f"symbol vectors must be equal-length and non-empty, got {rx.size} vs {ref.size}"
        )
    normalizer = float(np.max(np.abs(ref)))
    if normalizer <= 0.0:
        raise ValueError("reference symbols must not all be zero")
    return 100.0 * float(np.sqrt(np.mean(np.abs(rx - ref) ** 2))) / normalizer


def measure_link(
    real: ChannelRealization,
    configs: tuple[RisConfig, RisConfig],
    env: Environment,
    link: int,
    frame_spec: FrameSpec,
    imp: ImpairmentSpec | ImpairmentModel,
    n_frames: int,
    seed: int,
) -> KpiSample:
    """Measure one link's KPIs over ``n_frames`` independent frames.

    The channel realization and configurations stay fixed; payload and
    noise are fresh per frame. When ``imp`` is an `ImpairmentModel`, one
    concrete impairment set is drawn per call (the capture conditions of
    one measurement). EVM is averaged and bit errors are pooled across
    frames; if any frame loses sync the whole sample takes the failure
    penalty.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if isinstance(imp, ImpairmentModel):
        imp = imp.draw(derive_seed(seed, STREAM_IMPAIRMENT), frame_spec)
    gain = link_gain(real, configs, env, link)

    total_bits = n_frames * frame_spec.payload_bits
    errors = 0
    evms = []
    for i in range(n_frames):
        payload = random_payload(frame_spec, derive_seed(seed, STREAM_PAYLOAD, i))
        frame = build_frame(frame_spec, payload)
        samples = apply_channel(frame, gain, imp, seed=derive_seed(seed, STREAM_NOISE, i))
        result = rx_chain(samples, frame_spec)
        if not result.sync_ok:
            return KpiSample(
                evm_rms_pct=SYNC_FAIL_EVM_PCT,
                ber=SYNC_FAIL_BER,
                n_bits=total_bits,
                sync_ok=False,
            )
        errors += int(np.count_nonzero(result.recovered_bits != payload))
        evms.append(evm_rms(result.synced_symbols, map_qpsk(payload)))

    return KpiSample(
        evm_rms_pct=float(np.mean(evms)),
        ber=errors / total_bits,
        n_bits=total_bits,
        sync_ok=True,
    )
