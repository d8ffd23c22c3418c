"""Rule-based sub-metric oracle and the aggregate planning scores.

All sub-metric thresholds are toy proxies and live in MetricThresholds so
the ablation harness can report sensitivity. Binary gates (NC, DAC, TTC,
C, DDC, LK) follow the benchmark's gate style; EP is the only ratio.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .scene import Scenario
from .trajectory import DT, T_F, Trajectory

EVAL_CSV_HEADER = "scenario_id,nc,dac,ttc,comfort,ep,ddc,lk,pdms,epdms,failed"


@dataclass(frozen=True)
class MetricThresholds:
    ttc_horizon_s: float = 1.0
    max_accel: float = 4.0
    max_jerk: float = 8.0
    lane_keep_m: float = 0.5
    ddc_max_angle_deg: float = 90.0
    ep_min_expert_progress: float = 0.5


DEFAULT_THRESHOLDS = MetricThresholds()


@dataclass
class SubScores:
    """Per-scenario metric vector; every field lies in [0, 1].

    tl, hc, and ec are externally supplied values (traffic lights, human
    comfort, extended comfort) and default to 1.
    """

    nc: float
    dac: float
    ttc: float
    comfort: float
    ep: float
    ddc: float
    lk: float
    tl: float = 1.0
    hc: float = 1.0
    ec: float = 1.0

    def __post_init__(self):
        for name in ("nc", "dac", "ttc", "comfort", "ep", "ddc", "lk", "tl", "hc", "ec"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"sub-score {name}={v} outside [0, 1]")

    @classmethod
    def zeros(cls) -> "SubScores":
        return cls(nc=0.0, dac=0.0, ttc=0.0, comfort=0.0, ep=0.0, ddc=0.0, lk=0.0)


def pdms(s: SubScores) -> float:
    """NC x DAC x (5 TTC + 2 C + 5 EP) / 12."""
    return s.nc * s.dac * (5.0 * s.ttc + 2.0 * s.comfort + 5.0 * s.ep) / 12.0


def epdms(s: SubScores) -> float:
    """NC x DAC x DDC x TL x (5 TTC + 2 C + 5 EP + 5 LK + 5 EC) / 22."""
    gates = s.nc * s.dac * s.ddc * s.tl
    graded = 5.0 * s.ttc + 2.0 * s.comfort + 5.0 * s.ep + 5.0 * s.lk + 5.0 * s.ec
    return gates * graded / 22.0


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------


def segment_point_distance(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Distance from points p to segments (a, b); all arrays broadcast on rows."""
    ab = b - a
    denom = np.einsum("...k,...k->...", ab, ab)
    ap = p - a
    t = np.divide(np.einsum("...k,...k->...", ap, ab), denom,
                  out=np.zeros_like(denom), where=denom > 0)
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[..., None] * ab
    d = p - closest
    return np.sqrt(np.einsum("...k,...k->...", d, d))


def _paths_with_origin(trajs: np.ndarray, origin: np.ndarray) -> np.ndarray:
    n = trajs.shape[0]
    start = np.broadcast_to(origin, (n, 1, 2))
    return np.concatenate([start, trajs], axis=1)


def _min_ttc(paths: np.ndarray, velocities: np.ndarray, scenario: Scenario,
             dt: float) -> np.ndarray:
    """Min constant-velocity time-to-collision over segments and obstacles."""
    n, m = velocities.shape[0], velocities.shape[1]
    times = np.arange(m) * dt
    best = np.full(n, np.inf)
    for obs in scenario.obstacles:
        centers = obs.center_at(times)                       # (m, 2)
        dp = centers[None, :, :] - paths[:, :m, :]           # (n, m, 2)
        dv = obs.velocity[None, None, :] - velocities        # (n, m, 2)
        a = np.einsum("nmk,nmk->nm", dv, dv)
        b = 2.0 * np.einsum("nmk,nmk->nm", dp, dv)
        c = np.einsum("nmk,nmk->nm", dp, dp) - obs.radius**2
        ttc = np.full((n, m), np.inf)
        ttc[c <= 0.0] = 0.0                                  # already overlapping
        disc = b * b - 4.0 * a * c
        hit = (c > 0.0) & (a > 1e-12) & (disc >= 0.0)
        root = np.where(hit, (-b - np.sqrt(np.maximum(disc, 0.0))) / np.where(hit, 2.0 * a, 1.0), np.inf)
        ttc = np.where(hit & (root >= 0.0), root, ttc)
        best = np.minimum(best, ttc.min(axis=1))
    return best


def sub_metrics_batch(trajs: np.ndarray, scenario: Scenario,
                      thresholds: MetricThresholds = DEFAULT_THRESHOLDS) -> dict:
    """Vectorized sub-metrics for a batch of candidate waypoint arrays (n, T_F, 2)."""
    trajs = np.asarray(trajs, dtype=np.float64)
    if trajs.ndim == 2:
        trajs = trajs[None, :, :]
    n = trajs.shape[0]
    corridor = scenario.corridor
    if corridor.length <= 0.0:
        raise ValueError("degenerate corridor")
    origin = scenario.ego.position
    paths = _paths_with_origin(trajs, origin)                # (n, 9, 2)
    dt = DT

    # NC: swept segments against obstacles propagated to segment midpoint times
    seg_a, seg_b = paths[:, :-1, :], paths[:, 1:, :]
    collided = np.zeros(n, dtype=bool)
    mid_times = (np.arange(T_F) + 0.5) * dt
    for obs in scenario.obstacles:
        centers = obs.center_at(mid_times)                   # (8, 2)
        d = segment_point_distance(seg_a, seg_b, centers[None, :, :])
        collided |= (d < obs.radius).any(axis=1)
    nc = (~collided).astype(np.float64)

    # DAC: every waypoint within the corridor band
    flat = trajs.reshape(-1, 2)
    _, lateral, _ = corridor.project(flat)
    lateral = lateral.reshape(n, T_F)
    dac = (np.abs(lateral) <= corridor.half_width).all(axis=1).astype(np.float64)

    # TTC: constant-velocity look-ahead from each segment start
    seg_vel = np.diff(paths, axis=1) / dt                    # (n, 8, 2)
    min_ttc = _min_ttc(paths, seg_vel, scenario, dt)
    ttc = (min_ttc > thresholds.ttc_horizon_s).astype(np.float64)

    # comfort: finite differences over the plan's own waypoints (the leading
    # origin segment is excluded; it straddles the localization offset)
    wp_vel = np.diff(trajs, axis=1) / dt
    accel = np.diff(wp_vel, axis=1) / dt
    jerk = np.diff(accel, axis=1) / dt
    accel_ok = np.linalg.norm(accel, axis=2).max(axis=1) <= thresholds.max_accel
    jerk_ok = np.linalg.norm(jerk, axis=2).max(axis=1) <= thresholds.max_jerk
    comfort = (accel_ok & jerk_ok).astype(np.float64)

    # EP: arc-length progress against the expert's
    s_all, _, _ = corridor.project(np.concatenate([origin[None, :], trajs[:, -1, :]]))
    s0 = s_all[0]
    progress = s_all[1:] - s0
    s_expert, _, _ = corridor.project(scenario.expert.waypoints[-1][None, :])
    expert_progress = float(s_expert[0] - s0)
    if expert_progress < thresholds.ep_min_expert_progress:
        ep = np.ones(n)
    else:
        ep = np.clip(progress / expert_progress, 0.0, 1.0)

    # DDC: segment headings stay within the allowed angle of the local tangent
    seg_diff = np.diff(paths, axis=1)
    seg_len = np.linalg.norm(seg_diff, axis=2)
    mids = 0.5 * (seg_a + seg_b)
    _, _, tangents = corridor.project(mids.reshape(-1, 2))
    tangents = tangents.reshape(n, T_F, 2)
    dots = np.einsum("nmk,nmk->nm", seg_diff, tangents)
    cos_lim = math.cos(math.radians(thresholds.ddc_max_angle_deg))
    moving = seg_len > 1e-9
    # stationary segments have no driving direction and are compliant
    ddc_ok = np.where(moving, dots > cos_lim * seg_len, True)
    ddc = ddc_ok.all(axis=1).astype(np.float64)

    # LK: mean absolute lateral deviation over waypoints
    lk = (np.abs(lateral).mean(axis=1) <= thresholds.lane_keep_m).astype(np.float64)

    return {"nc": nc, "dac": dac, "ttc": ttc, "comfort": comfort, "ep": ep,
            "ddc": ddc, "lk": lk, "min_ttc": min_ttc}


def sub_metrics(traj: Trajectory, scenario: Scenario,
                thresholds: MetricThresholds = DEFAULT_THRESHOLDS,
                tl: float = 1.0, hc: float = 1.0, ec: float = 1.0) -> SubScores:
    """Sub-metric vector for one trajectory in its scenario."""
    batch = sub_metrics_batch(traj.waypoints[None, :, :], scenario, thresholds)
    return SubScores(nc=float(batch["nc"][0]), dac=float(batch["dac"][0]),
                     ttc=float(batch["ttc"][0]), comfort=float(batch["comfort"][0]),
                     ep=float(batch["ep"][0]), ddc=float(batch["ddc"][0]),
                     lk=float(batch["lk"][0]), tl=tl, hc=hc, ec=ec)


# ---------------------------------------------------------------------------
# dataset-level evaluation
# ---------------------------------------------------------------------------

_MEAN_FIELDS = ("nc", "dac", "ttc", "comfort", "ep", "ddc", "lk", "pdms", "epdms")


@dataclass
class EvalRow:
    scenario_id: str
    scores: SubScores
    pdms: float
    epdms: float
    failed: bool


@dataclass
class EvalReport:
    """Per-scenario scores plus aggregate means."""

    rows: list
    planner_id: str = ""
    config_hash: str = ""

    @property
    def means(self) -> dict:
        out = {}
        for name in _MEAN_FIELDS:
            if name in ("pdms", "epdms"):
                vals = [getattr(r, name) for r in self.rows]
            else:
                vals = [getattr(r.scores, name) for r in self.rows]
            out[name] = float(np.mean(vals)) if vals else 0.0
        return out

    @property
    def failure_count(self) -> int:
        return sum(1 for r in self.rows if r.failed)

    def to_csv(self) -> str:
        lines = [EVAL_CSV_HEADER]
        for r in self.rows:
            s = r.scores
            lines.append(",".join([
                r.scenario_id,
                repr(s.nc), repr(s.dac), repr(s.ttc), repr(s.comfort), repr(s.ep),
                repr(s.ddc), repr(s.lk), repr(r.pdms), repr(r.epdms),
                str(int(r.failed)),
            ]))
        return "\n".join(lines) + "\n"

    def aggregate_dict(self) -> dict:
        return {
            "planner": self.planner_id,
            "config_hash": self.config_hash,
            "count": len(self.rows),
            "failures": self.failure_count,
            "means": self.means,
        }

    def save(self, csv_path: str, json_path: str | None = None) -> None:
        _atomic_write(csv_path, self.to_csv())
        if json_path is not None:
            payload = json.dumps(self.aggregate_dict(), separators=(",", ":"), sort_keys=True)
            _atomic_write(json_path, payload + "\n")


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def evaluate_planner(scenarios, planner, thresholds: MetricThresholds = DEFAULT_THRESHOLDS,
                     planner_id: str = "", config_hash: str = "",
                     external_scores: dict | None = None) -> EvalReport:
    """Score planner(scenario) on every scenario; failures become zero rows.

    external_scores optionally maps scenario id -> dict with tl/hc/ec values.
    Rows are ordered by scenario id for deterministic output.
    """
    rows = []
    for scenario in sorted(scenarios, key=lambda s: s.id):
        ext = (external_scores or {}).get(scenario.id, {})
        try:
            traj = planner(scenario)
            scores = sub_metrics(traj, scenario, thresholds,
                                 tl=ext.get("tl", 1.0), hc=ext.get("hc", 1.0),
                                 ec=ext.get("ec", 1.0))
            failed = False
        except Exception:
            scores = SubScores.zeros()
            failed = True
        rows.append(EvalRow(scenario_id=scenario.id, scores=scores,
                            pdms=pdms(scores), epdms=epdms(scores), failed=failed))
    return EvalReport(rows=rows, planner_id=planner_id, config_hash=config_hash)
