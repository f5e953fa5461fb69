"""Domain types, scenario validation and scenario file I/O.

Units are fixed across the package: bandwidth in Hz, task-unit sizes in
bits, arrival and service rates in task units per second, delays in
seconds, transmit and noise power in watts.

Scenario files are YAML documents (see ``save_scenario`` for the exact
layout). Floats are written with ``repr`` precision, so a save/load cycle
reproduces every field exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ScenarioError

SCHEMA_VERSION = 1

#: Slack turning the strict inequalities b > b0 and mu > lambda into closed
#: constraints, in native units.
EPS = 1e-6


@dataclass(frozen=True)
class ServiceClass:
    id: int
    data_size_bits: float
    max_latency_s: float


@dataclass(frozen=True)
class LinkParams:
    tx_power: float
    noise: float
    channel_gain: float

    @property
    def snr(self) -> float:
        return self.channel_gain * self.tx_power / self.noise


@dataclass(frozen=True)
class ServiceLoad:
    """Link and traffic statistics of one service class at one base station."""

    service_id: int
    link: LinkParams
    mean_arrival_rate: float


@dataclass(frozen=True)
class BaseStationSpec:
    id: int
    total_bandwidth_hz: float
    min_bandwidth_hz: float
    per_service: tuple[ServiceLoad, ...]

    def load_for(self, service_id: int) -> ServiceLoad:
        for entry in self.per_service:
            if entry.service_id == service_id:
                return entry
        raise KeyError(f"base station {self.id} has no entry for service {service_id}")


@dataclass(frozen=True)
class FogNodeSpec:
    id: int
    capacity: float


@dataclass(frozen=True)
class Scenario:
    """One sub-region: its base stations, service classes and fog pool.

    ``gamma`` is the compute reserved for the region; the fog-node list only
    serves to check that the reservation fits in the physical capacity.
    """

    services: tuple[ServiceClass, ...]
    base_stations: tuple[BaseStationSpec, ...]
    fog_nodes: tuple[FogNodeSpec, ...]
    gamma: float
    confidence: float

    @property
    def n_services(self) -> int:
        return len(self.services)

    @property
    def n_stations(self) -> int:
        return len(self.base_stations)

    def arrival_rates(self) -> np.ndarray:
        """S x N matrix of mean arrival rates, columns in ``services`` order."""
        return np.array(
            [[bs.load_for(sv.id).mean_arrival_rate for sv in self.services] for bs in self.base_stations],
            dtype=float,
        )


@dataclass
class Allocation:
    """Bandwidth per task unit ``b`` and service rate ``mu``, both S x N."""

    b: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        self.b = np.array(self.b, dtype=float)
        self.mu = np.array(self.mu, dtype=float)
        if self.b.shape != self.mu.shape or self.b.ndim != 2:
            raise ValueError(f"b and mu must be matching 2-D arrays, got {self.b.shape} and {self.mu.shape}")
        if not (np.all(np.isfinite(self.b)) and np.all(np.isfinite(self.mu))):
            raise ValueError("allocation entries must be finite")
        if np.any(self.b < 0) or np.any(self.mu < 0):
            raise ValueError("allocation entries must be nonnegative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.b.shape

    def __eq__(self, other):
        if not isinstance(other, Allocation):
            return NotImplemented
        return np.array_equal(self.b, other.b) and np.array_equal(self.mu, other.mu)


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    provisioning_tight: bool = False
    tight_reasons: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.errors

    @property
    def solvable(self) -> bool:
        """Valid and not trivially infeasible by provisioning."""
        return self.valid and not self.provisioning_tight


def _positive(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x) and x > 0


def validate_scenario(scenario: Scenario) -> ValidationReport:
    """Check structural invariants and flag provisioning that cannot work.

    Never raises; every violated invariant is listed in ``errors``.
    """
    from .latency import poisson_quantile

    report = ValidationReport()
    err = report.errors.append

    if len(scenario.services) < 1:
        err("at least one service class is required")
    if len(scenario.base_stations) < 1:
        err("at least one base station is required")

    service_ids = [sv.id for sv in scenario.services]
    if len(set(service_ids)) != len(service_ids):
        err(f"duplicate service ids: {service_ids}")
    for sv in scenario.services:
        if not _positive(sv.data_size_bits):
            err(f"service {sv.id}: data_size_bits must be > 0, got {sv.data_size_bits}")
        if not _positive(sv.max_latency_s):
            err(f"service {sv.id}: max_latency_s must be > 0, got {sv.max_latency_s}")

    bs_ids = [bs.id for bs in scenario.base_stations]
    if len(set(bs_ids)) != len(bs_ids):
        err(f"duplicate base station ids: {bs_ids}")
    for bs in scenario.base_stations:
        if not _positive(bs.total_bandwidth_hz):
            err(f"base station {bs.id}: total_bandwidth_hz must be > 0")
        if not _positive(bs.min_bandwidth_hz):
            err(f"base station {bs.id}: min_bandwidth_hz must be > 0")
        listed = [e.service_id for e in bs.per_service]
        if sorted(listed) != sorted(service_ids) or len(set(listed)) != len(listed):
            err(f"base station {bs.id}: per_service must list each service exactly once, got {listed}")
        for e in bs.per_service:
            tag = f"base station {bs.id}, service {e.service_id}"
            for name in ("tx_power", "noise", "channel_gain"):
                if not _positive(getattr(e.link, name)):
                    err(f"{tag}: {name} must be > 0")
            rate = e.mean_arrival_rate
            if not (isinstance(rate, (int, float)) and math.isfinite(rate) and rate >= 0):
                err(f"{tag}: mean_arrival_rate must be finite and >= 0")

    fog_ids = [f.id for f in scenario.fog_nodes]
    if len(set(fog_ids)) != len(fog_ids):
        err(f"duplicate fog node ids: {fog_ids}")
    for f in scenario.fog_nodes:
        if not _positive(f.capacity):
            err(f"fog node {f.id}: capacity must be > 0")
    if not _positive(scenario.gamma):
        err(f"gamma must be > 0, got {scenario.gamma}")
    else:
        pool = sum(f.capacity for f in scenario.fog_nodes)
        if scenario.gamma > pool:
            err(f"gamma={scenario.gamma} exceeds total fog capacity {pool}")

    theta = scenario.confidence
    if not (isinstance(theta, (int, float)) and 0.0 < theta < 1.0):
        err(f"confidence must lie strictly inside (0, 1), got {theta}")

    if report.errors:
        return report

    lam = scenario.arrival_rates()
    for s, bs in enumerate(scenario.base_stations):
        quantiles = [poisson_quantile(theta, rate) for rate in lam[s]]
        for n, k in enumerate(quantiles):
            if k == 0:
                # A cell provisioned for zero units never enters the bandwidth
                # budget, so its bandwidth (and the problem) would be unbounded.
                err(
                    f"base station {bs.id}, service {scenario.services[n].id}: arrival rate {lam[s, n]} "
                    f"provisions 0 units at confidence {theta}; raise the rate or the confidence"
                )
        units = sum(quantiles)
        if units * bs.min_bandwidth_hz > bs.total_bandwidth_hz:
            report.tight_reasons.append(
                f"base station {bs.id}: provisioning {units} units at min bandwidth "
                f"{bs.min_bandwidth_hz} Hz exceeds total {bs.total_bandwidth_hz} Hz"
            )
    if report.errors:
        return report
    total_arrivals = float(lam.sum())
    if total_arrivals >= scenario.gamma:
        report.tight_reasons.append(
            f"queue_stability conflicts with compute_budget: gamma={scenario.gamma} does not exceed "
            f"the total arrival rate {total_arrivals}, so service rates above every arrival rate "
            f"cannot fit under the compute budget"
        )
    report.provisioning_tight = bool(report.tight_reasons)
    return report


# --------------------------------------------------------------------------
# File I/O


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "services": [
            {"id": sv.id, "data_size_bits": sv.data_size_bits, "max_latency_s": sv.max_latency_s}
            for sv in scenario.services
        ],
        "base_stations": [
            {
                "id": bs.id,
                "total_bandwidth_hz": bs.total_bandwidth_hz,
                "min_bandwidth_hz": bs.min_bandwidth_hz,
                "per_service": [
                    {
                        "service_id": e.service_id,
                        "tx_power": e.link.tx_power,
                        "noise": e.link.noise,
                        "channel_gain": e.link.channel_gain,
                        "mean_arrival_rate": e.mean_arrival_rate,
                    }
                    for e in bs.per_service
                ],
            }
            for bs in scenario.base_stations
        ],
        "fog_nodes": [{"id": f.id, "capacity": f.capacity} for f in scenario.fog_nodes],
        "gamma": scenario.gamma,
        "confidence": scenario.confidence,
    }


def _take(mapping, key, path, kind):
    if not isinstance(mapping, dict):
        raise ScenarioError("expected a mapping", field=path)
    if key not in mapping:
        raise ScenarioError("missing required field", field=f"{path}.{key}" if path else key)
    value = mapping[key]
    where = f"{path}.{key}" if path else key
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(f"expected an integer, got {value!r}", field=where)
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(f"expected a number, got {value!r}", field=where)
        return float(value)
    if kind is list:
        if not isinstance(value, list):
            raise ScenarioError(f"expected a list, got {type(value).__name__}", field=where)
        return value
    raise TypeError(kind)


def scenario_from_dict(data: Any) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("top level of a scenario file must be a mapping")
    version = _take(data, "schema_version", "", int)
    if version != SCHEMA_VERSION:
        raise ScenarioError(
            f"unsupported schema version {version} (expected {SCHEMA_VERSION})", field="schema_version"
        )
    services = tuple(
        ServiceClass(
            id=_take(item, "id", f"services[{i}]", int),
            data_size_bits=_take(item, "data_size_bits", f"services[{i}]", float),
            max_latency_s=_take(item, "max_latency_s", f"services[{i}]", float),
        )
        for i, item in enumerate(_take(data, "services", "", list))
    )
    stations = []
    for i, item in enumerate(_take(data, "base_stations", "", list)):
        path = f"base_stations[{i}]"
        loads = []
        for j, e in enumerate(_take(item, "per_service", path, list)):
            epath = f"{path}.per_service[{j}]"
            loads.append(
                ServiceLoad(
                    service_id=_take(e, "service_id", epath, int),
                    link=LinkParams(
                        tx_power=_take(e, "tx_power", epath, float),
                        noise=_take(e, "noise", epath, float),
                        channel_gain=_take(e, "channel_gain", epath, float),
                    ),
                    mean_arrival_rate=_take(e, "mean_arrival_rate", epath, float),
                )
            )
        stations.append(
            BaseStationSpec(
                id=_take(item, "id", path, int),
                total_bandwidth_hz=_take(item, "total_bandwidth_hz", path, float),
                min_bandwidth_hz=_take(item, "min_bandwidth_hz", path, float),
                per_service=tuple(loads),
            )
        )
    fogs = tuple(
        FogNodeSpec(id=_take(item, "id", f"fog_nodes[{i}]", int), capacity=_take(item, "capacity", f"fog_nodes[{i}]", float))
        for i, item in enumerate(_take(data, "fog_nodes", "", list))
    )
    return Scenario(
        services=services,
        base_stations=tuple(stations),
        fog_nodes=fogs,
        gamma=_take(data, "gamma", "", float),
        confidence=_take(data, "confidence", "", float),
    )


def save_scenario(scenario: Scenario, path) -> None:
    """Write ``scenario`` as a YAML document with ``schema_version: 1``."""
    text = yaml.safe_dump(scenario_to_dict(scenario), sort_keys=False, default_flow_style=False)
    Path(path).write_text(text)


def load_scenario(path, validate: bool = True) -> Scenario:
    """Read a scenario file.

    Raises ScenarioError on YAML syntax errors (with line number), missing or
    mistyped fields (with the field path), a schema-version mismatch, or, when
    ``validate`` is set, any structural invariant reported by
    ``validate_scenario``. Tight provisioning is not an error here.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", line=line) from exc
    scenario = scenario_from_dict(data)
    if validate:
        report = validate_scenario(scenario)
        if not report.valid:
            raise ScenarioError("; ".join(report.errors))
    return scenario
