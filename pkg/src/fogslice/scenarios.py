"""Scenario builders: the demo region, random test instances, starved regimes.

Demo defaults (not taken from any published table): three services
labelled text/audio/video with task units of 5e3, 3.2e4 and 1e5 bits and
latency bounds of 0.5, 0.1 and 0.05 s; 30 MHz per BS; one fog node of
180 units/s per BS; arrival rates drawn per BS from 5-20 (text), 5-15
(audio) and 10-20 (video) units/s and link SNRs from 15-30 dB, using a
seeded PCG64 generator. Video traffic is kept above the others so that the
arrival-proportional compute split of the bandwidth-only baseline still
meets the 50 ms video bound.
"""

from __future__ import annotations

import numpy as np

from .model import BaseStationSpec, FogNodeSpec, LinkParams, Scenario, ServiceClass, ServiceLoad

DEMO_SERVICES = (
    ("text", 5e3, 0.5),
    ("audio", 3.2e4, 0.1),
    ("video", 1e5, 0.05),
)

_DEMO_RATES = ((5.0, 20.0), (5.0, 15.0), (10.0, 20.0))

_NOISE_W = 1e-9
_TX_W = 1.0


def link_for_snr(snr: float) -> LinkParams:
    return LinkParams(tx_power=_TX_W, noise=_NOISE_W, channel_gain=float(snr) * _NOISE_W / _TX_W)


def build_scenario(d, tcap, lam, snr, beta, b0, fog_caps, gamma=None, confidence=0.9) -> Scenario:
    """Assemble a Scenario from plain arrays (``lam`` and ``snr`` are S x N)."""
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    snr = np.atleast_2d(np.asarray(snr, dtype=float))
    S, N = lam.shape
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (S,))
    b0 = np.broadcast_to(np.asarray(b0, dtype=float), (S,))
    services = tuple(ServiceClass(id=n, data_size_bits=float(d[n]), max_latency_s=float(tcap[n])) for n in range(N))
    stations = tuple(
        BaseStationSpec(
            id=s,
            total_bandwidth_hz=float(beta[s]),
            min_bandwidth_hz=float(b0[s]),
            per_service=tuple(
                ServiceLoad(service_id=n, link=link_for_snr(snr[s, n]), mean_arrival_rate=float(lam[s, n]))
                for n in range(N)
            ),
        )
        for s in range(S)
    )
    fogs = tuple(FogNodeSpec(id=f, capacity=float(cap)) for f, cap in enumerate(np.atleast_1d(fog_caps)))
    gamma = float(sum(f.capacity for f in fogs)) if gamma is None else float(gamma)
    return Scenario(services=services, base_stations=stations, fog_nodes=fogs, gamma=gamma, confidence=float(confidence))


def demo_scenario(n_stations: int, seed: int = 0, bandwidth_hz: float = 30e6, fog_capacity: float = 180.0,
                  confidence: float = 0.9, min_bandwidth_hz: float = 25e3) -> Scenario:
    rng = np.random.default_rng(seed)
    N = len(DEMO_SERVICES)
    lam = np.column_stack([np.round(rng.uniform(lo, hi, size=n_stations), 1) for lo, hi in _DEMO_RATES])
    snr = 10.0 ** (rng.uniform(15.0, 30.0, size=(n_stations, N)) / 10.0)
    return build_scenario(
        d=[x[1] for x in DEMO_SERVICES],
        tcap=[x[2] for x in DEMO_SERVICES],
        lam=lam,
        snr=snr,
        beta=bandwidth_hz,
        b0=min_bandwidth_hz,
        fog_caps=[fog_capacity] * n_stations,
        confidence=confidence,
    )


def random_scenario(rng: np.random.Generator, n_stations: int, n_services: int) -> Scenario:
    """A random instance with moderate budgets; feasibility is not guaranteed."""
    S, N = n_stations, n_services
    d = rng.uniform(5e3, 1e5, size=N)
    tcap = rng.uniform(0.1, 1.0, size=N)
    lam = rng.uniform(2.0, 30.0, size=(S, N))
    snr = 10.0 ** (rng.uniform(5.0, 25.0, size=(S, N)) / 10.0)
    beta = rng.uniform(5e6, 30e6, size=S)
    headroom = rng.uniform(0.3, 2.0) * lam.sum()
    gamma = lam.sum() + headroom
    return build_scenario(d, tcap, lam, snr, beta, 25e3, [gamma], confidence=rng.uniform(0.6, 0.95))


def starved_scenario(kind: str) -> Scenario:
    """Two-BS, three-service region short on one resource.

    ``"bandwidth"``: generous compute, tight radio budgets, so communication
    delay dominates. ``"compute"``: generous radio, compute barely above the
    arrival load, so queueing delay dominates. Traffic is heterogeneous so
    that optimising either resource matters.
    """
    d = [x[1] for x in DEMO_SERVICES]
    tcap = [5.0, 5.0, 5.0]
    lam = np.array([[4.0, 10.0, 20.0], [25.0, 8.0, 3.0]])
    snr = np.array([[30.0, 100.0, 300.0], [300.0, 30.0, 100.0]])
    total = lam.sum()
    if kind == "bandwidth":
        return build_scenario(d, tcap, lam, snr, beta=2e6, b0=1e3, fog_caps=[10.0 * total])
    if kind == "compute":
        return build_scenario(d, tcap, lam, snr, beta=200e6, b0=1e3, fog_caps=[total + 6.0])
    raise ValueError(f"unknown starvation kind {kind!r}")
