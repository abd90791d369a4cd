"""Shared fixtures: the reference deployment at 28 GHz, terms cached on disk."""

from __future__ import annotations

from pathlib import Path

import pytest

from bdris.scenario import ScenarioConfig, load_or_build

PAPER_TX = (5.0, -5.0, 3.0)
PAPER_RX = (5.0, 5.0, 1.0)
PAPER_FREQ_HZ = 28e9

CACHE_DIR = Path(__file__).parent / "_terms_cache"


def paper_config(m: int, d_fraction: float, **kwargs) -> ScenarioConfig:
    lam = 299_792_458.0 / PAPER_FREQ_HZ
    return ScenarioConfig(
        frequency_hz=PAPER_FREQ_HZ,
        tx_position=PAPER_TX,
        rx_position=PAPER_RX,
        m=m,
        spacing=d_fraction * lam,
        **kwargs,
    )


def paper_terms(m: int, d_fraction: float, **kwargs):
    return load_or_build(paper_config(m, d_fraction, **kwargs), cache_dir=CACHE_DIR)


@pytest.fixture(scope="session")
def terms_m16():
    """Reference scenario, M = 16, quarter-wavelength spacing."""
    return paper_terms(16, 0.25)


@pytest.fixture(scope="session")
def terms_m16_per_d():
    return {d: paper_terms(16, d) for d in (0.5, 0.25, 0.125)}


@pytest.fixture(scope="session")
def terms_m2_d8():
    return paper_terms(2, 0.125)


@pytest.fixture(scope="session")
def terms_m1_d8():
    return paper_terms(1, 0.125)
