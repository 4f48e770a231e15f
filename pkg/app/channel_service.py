"""Rayleigh fading channel generation and random vector quantization."""

import logging
from functools import lru_cache
from typing import Sequence

import numpy as np

from app.models import ChannelSet, ComplexArray, QuantizedChannelSet, SimConfig
from app.numerics import normalize

logger = logging.getLogger(__name__)

# Spawn-key namespaces keep channel draws and codebooks on disjoint streams.
CHANNEL_STREAM = 0
CODEBOOK_STREAM = 1
ID_USERS = 0
EH_USERS = 1

CACHED_CODEBOOKS = 1024
CACHED_CODEBOOK_ENTRIES = 2**12

TrialSeed = int | Sequence[int]


def trial_seed_sequence(seed: int, trial_seed: TrialSeed) -> np.random.SeedSequence:
    """Seed of one trial: entropy ``seed``, spawn key ``(CHANNEL_STREAM, *trial_seed)``."""
    key = (trial_seed,) if isinstance(trial_seed, int) else tuple(trial_seed)
    return np.random.SeedSequence(entropy=seed, spawn_key=(CHANNEL_STREAM, *key))


def complex_gaussian(rng: np.random.Generator, shape: tuple[int, ...]) -> ComplexArray:
    """Circularly symmetric complex Gaussian entries with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def generate_channels(cfg: SimConfig, trial_seed: TrialSeed) -> ChannelSet:
    """Draw ID and EH channels for one trial; deterministic in ``(cfg.seed, trial_seed)``."""
    id_stream, eh_stream = trial_seed_sequence(cfg.seed, trial_seed).spawn(2)
    h = complex_gaussian(np.random.default_rng(id_stream), (cfg.k_id, cfg.m))
    g = complex_gaussian(np.random.default_rng(eh_stream), (cfg.k_eh, cfg.m))
    h.setflags(write=False)
    g.setflags(write=False)
    return ChannelSet(h=h, g=g, effective_snr=cfg.effective_snr)


def draw_codebook(bits: int, m: int, codebook_seed: tuple[int, ...]) -> ComplexArray:
    """``2**bits`` i.i.d. isotropic unit codewords stored as rows."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=codebook_seed[0], spawn_key=codebook_seed[1:]))
    codewords = complex_gaussian(rng, (2**bits, m))
    codewords /= np.linalg.norm(codewords, axis=1, keepdims=True)
    codewords.setflags(write=False)
    return codewords


# Holds at most CACHED_CODEBOOKS * CACHED_CODEBOOK_ENTRIES complex entries (64 MiB).
cached_codebook = lru_cache(maxsize=CACHED_CODEBOOKS)(draw_codebook)


def rvq_codebook(bits: int, m: int, codebook_seed: tuple[int, ...]) -> ComplexArray:
    """Codebook of one user; small ones are memoized, larger ones are redrawn on every call."""
    if 2**bits * m <= CACHED_CODEBOOK_ENTRIES:
        return cached_codebook(bits, m, codebook_seed)
    return draw_codebook(bits, m, codebook_seed)


def quantize_with_codebook(direction: ComplexArray, codebook: ComplexArray) -> ComplexArray:
    """Codeword maximizing ``|direction c^H|``; ties resolve to the lowest codeword index."""
    index = int(np.argmax(np.abs(codebook.conj() @ direction)))
    return codebook[index].copy()


def rvq_quantize(h: ComplexArray, bits: int, codebook_seed: tuple[int, ...]) -> ComplexArray:
    """Quantized channel direction of ``h``; ``bits == 0`` returns the exact direction."""
    if bits < 0:
        raise ValueError(f"feedback bits must be nonnegative, got {bits}")
    direction = normalize(h)
    if bits == 0:
        return direction
    return quantize_with_codebook(direction, rvq_codebook(bits, direction.size, tuple(codebook_seed)))


def user_codebook_seed(seed: int, population: int, user: int) -> tuple[int, ...]:
    return (seed, CODEBOOK_STREAM, population, user)


def quantize_all(cs: ChannelSet, cfg: SimConfig) -> QuantizedChannelSet:
    """RVQ every user's direction with its own fixed codebook; magnitudes are copied exactly."""
    h_magnitudes = np.linalg.norm(cs.h, axis=1)
    g_magnitudes = np.linalg.norm(cs.g, axis=1)
    h_hat = np.array(
        [rvq_quantize(row, cfg.b_id, user_codebook_seed(cfg.seed, ID_USERS, k)) for k, row in enumerate(cs.h)]
    )
    g_hat = np.array(
        [rvq_quantize(row, cfg.b_eh, user_codebook_seed(cfg.seed, EH_USERS, k)) for k, row in enumerate(cs.g)]
    )
    return QuantizedChannelSet(h_hat=h_hat, g_hat=g_hat, h_magnitudes=h_magnitudes, g_magnitudes=g_magnitudes)


def quantization_error(h: ComplexArray, h_hat: ComplexArray) -> float:
    """``1 - |h_bar h_hat^H|^2``, the chordal distance of a quantized direction."""
    return float(1.0 - np.abs(np.vdot(h_hat, normalize(h))) ** 2)
