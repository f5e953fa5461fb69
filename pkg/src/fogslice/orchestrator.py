"""Regional orchestrator: consensus (z) update, dual update, residuals, stopping.

Duals are kept in scaled form: ``lam`` here is the unscaled multiplier
divided by rho, so the augmented term reads ``rho/2 ||x - z + lam||^2``.

All per-BS quantities are rows of an S x 2N array laid out as
``[b_s1..b_sN, mu_s1..mu_sN]``. An optional diagonal metric ``w`` (same
shape, strictly positive, equal on every mu entry) replaces the Euclidean
norm; with ``w = 1`` everything reduces to the textbook form.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

MESSAGE_VERSION = 1


def project_halfspace(v, gamma: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{u : sum(u) <= gamma}``."""
    v = np.asarray(v, dtype=float)
    excess = v.sum() - gamma
    if excess <= 0:
        return v.copy()
    return v - excess / v.size


@dataclass
class ConsensusState:
    z: np.ndarray
    lam: np.ndarray
    k: int = 0

    @property
    def n_services(self) -> int:
        return self.z.shape[1] // 2


def z_update(x_new: np.ndarray, state: ConsensusState, gamma: float) -> np.ndarray:
    """Bandwidth entries pass through; service rates are projected jointly."""
    n = state.n_services
    v = x_new + state.lam
    z = v.copy()
    z[:, n:] = project_halfspace(v[:, n:].ravel(), gamma).reshape(v.shape[0], n)
    return z


def dual_update(state: ConsensusState, x_new: np.ndarray, z_new: np.ndarray) -> np.ndarray:
    return state.lam + x_new - z_new


@dataclass(frozen=True)
class Residuals:
    primal: float
    dual: float
    objective: float
    # scales for the relative part of the stopping rule
    norm_x: float = 0.0
    norm_z: float = 0.0
    norm_dual: float = 0.0
    size: int = 1


def residuals(x, z_new, z_old, lam, rho, objective, w=None) -> Residuals:
    """Primal ``||x - z||`` and dual ``rho ||z_new - z_old||`` in the W-norm."""
    sw = np.ones_like(x) if w is None else np.sqrt(w)
    return Residuals(
        primal=float(np.linalg.norm(sw * (x - z_new))),
        dual=float(rho * np.linalg.norm(sw * (z_new - z_old))),
        objective=float(objective),
        norm_x=float(np.linalg.norm(sw * x)),
        norm_z=float(np.linalg.norm(sw * z_new)),
        norm_dual=float(rho * np.linalg.norm(sw * lam)),
        size=int(x.size),
    )


def check_stop(res: Residuals, eps_abs: float = 1e-6, eps_rel: float = 1e-4) -> bool:
    root = math.sqrt(res.size)
    primal_tol = root * eps_abs + eps_rel * max(res.norm_x, res.norm_z)
    dual_tol = root * eps_abs + eps_rel * res.norm_dual
    return res.primal <= primal_tol and res.dual <= dual_tol


# --------------------------------------------------------------------------
# Messages


@dataclass(frozen=True)
class BsReport:
    s: int
    k: int
    x: np.ndarray
    version: int = MESSAGE_VERSION


@dataclass(frozen=True)
class RoFeedback:
    s: int
    k: int
    z: np.ndarray
    lam: np.ndarray
    stop: bool
    rho: float
    version: int = MESSAGE_VERSION


def encode_frame(msg) -> bytes:
    """Length-prefixed frame: 4-byte big-endian payload length + UTF-8 JSON.

    Floats are written with ``repr`` precision so decoding is exact.
    """
    if isinstance(msg, BsReport):
        body = {"type": "bs_report", "version": msg.version, "s": msg.s, "k": msg.k, "x": msg.x.tolist()}
    elif isinstance(msg, RoFeedback):
        body = {
            "type": "ro_feedback",
            "version": msg.version,
            "s": msg.s,
            "k": msg.k,
            "z": msg.z.tolist(),
            "lam": msg.lam.tolist(),
            "stop": msg.stop,
            "rho": msg.rho,
        }
    else:
        raise TypeError(f"cannot frame {type(msg).__name__}")
    payload = json.dumps(body, separators=(",", ":")).encode()
    return struct.pack(">I", len(payload)) + payload


def decode_frame(buf: bytes):
    """Inverse of ``encode_frame``; returns ``(message, remaining_bytes)``."""
    if len(buf) < 4:
        raise ValueError("incomplete frame header")
    (size,) = struct.unpack(">I", buf[:4])
    if len(buf) < 4 + size:
        raise ValueError("incomplete frame payload")
    body = json.loads(buf[4 : 4 + size])
    if body.get("version") != MESSAGE_VERSION:
        raise ValueError(f"unsupported message version {body.get('version')}")
    kind = body.get("type")
    if kind == "bs_report":
        msg = BsReport(s=body["s"], k=body["k"], x=np.array(body["x"], dtype=float))
    elif kind == "ro_feedback":
        msg = RoFeedback(
            s=body["s"], k=body["k"], z=np.array(body["z"], dtype=float),
            lam=np.array(body["lam"], dtype=float), stop=bool(body["stop"]), rho=float(body["rho"]),
        )
    else:
        raise ValueError(f"unknown message type {kind!r}")
    return msg, buf[4 + size :]


@dataclass
class RegionalOrchestrator:
    """Sequential coordinator for one sub-region.

    Consumes exactly one report per BS per round, then answers every BS.
    It never sees BS-private data, only the reported iterates.
    """

    state: ConsensusState
    gamma: float
    rho: float
    w: np.ndarray | None = None
    eps_abs: float = 1e-6
    eps_rel: float = 1e-4
    last: Residuals | None = field(default=None, init=False)

    def step(self, reports: list[BsReport], objective: float = float("nan")) -> list[RoFeedback]:
        S = self.state.z.shape[0]
        if sorted(r.s for r in reports) != list(range(S)):
            raise ValueError("need exactly one report from every base station")
        k = self.state.k + 1
        if any(r.k != k for r in reports):
            raise ValueError(f"stale report: expected round {k}")
        x = np.empty_like(self.state.z)
        for r in reports:
            x[r.s] = r.x
        z_new = z_update(x, self.state, self.gamma)
        lam_new = dual_update(self.state, x, z_new)
        self.last = residuals(x, z_new, self.state.z, lam_new, self.rho, objective, self.w)
        stop = check_stop(self.last, self.eps_abs, self.eps_rel)
        self.state = ConsensusState(z=z_new, lam=lam_new, k=k)
        return [RoFeedback(s=s, k=k, z=z_new[s].copy(), lam=lam_new[s].copy(), stop=stop, rho=self.rho) for s in range(S)]

    def rescale_rho(self, factor: float) -> None:
        """Change rho, keeping the unscaled multiplier rho * lam fixed."""
        self.rho *= factor
        self.state = ConsensusState(z=self.state.z, lam=self.state.lam / factor, k=self.state.k)
