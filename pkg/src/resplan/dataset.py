"""Scenario dataset files: JSON Lines with a leading manifest object.

Line 1 is the manifest; every following line is one scenario with a fixed
field order, so identical inputs serialize to identical bytes.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .scene import Corridor, Obstacle, Scenario
from .trajectory import DT, T_F, EgoState, Trajectory

FORMAT_VERSION = 1


class DatasetError(ValueError):
    """Malformed or incompatible dataset file."""


@dataclass
class DatasetManifest:
    count: int
    config_hash: str = ""
    horizon: int = T_F
    dt: float = DT
    format_version: int = FORMAT_VERSION

    def to_json_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "count": self.count,
            "config_hash": self.config_hash,
            "horizon": self.horizon,
            "dt": self.dt,
        }


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "id": s.id,
        "seed": s.seed,
        "ego": {
            "position": s.ego.position.tolist(),
            "heading": s.ego.heading,
            "velocity": s.ego.velocity.tolist(),
        },
        "obstacles": [
            {"center": o.center.tolist(), "radius": o.radius, "velocity": o.velocity.tolist()}
            for o in s.obstacles
        ],
        "corridor": {
            "centerline": s.corridor.centerline.tolist(),
            "half_width": s.corridor.half_width,
        },
        "expert": s.expert.waypoints.tolist(),
        "features": s.features.tolist(),
    }


def scenario_from_dict(d: dict) -> Scenario:
    ego = EgoState(position=np.array(d["ego"]["position"]),
                   heading=d["ego"]["heading"],
                   velocity=np.array(d["ego"]["velocity"]))
    obstacles = [Obstacle(center=np.array(o["center"]), radius=o["radius"],
                          velocity=np.array(o["velocity"])) for o in d["obstacles"]]
    corridor = Corridor(centerline=np.array(d["corridor"]["centerline"]),
                        half_width=d["corridor"]["half_width"])
    return Scenario(id=d["id"], seed=d["seed"], ego=ego, obstacles=obstacles,
                    corridor=corridor, expert=Trajectory(np.array(d["expert"])),
                    features=np.array(d["features"]))


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"))


def write_dataset(scenarios, path: str, config_hash: str = "") -> DatasetManifest:
    """Write manifest + scenarios atomically; returns the manifest."""
    scenarios = list(scenarios)
    manifest = DatasetManifest(count=len(scenarios), config_hash=config_hash)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(_dumps(manifest.to_json_dict()) + "\n")
        for s in scenarios:
            fh.write(_dumps(scenario_to_dict(s)) + "\n")
    os.replace(tmp, path)
    return manifest


def read_dataset(path: str):
    """Read (manifest, scenarios); raises DatasetError naming the bad line."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetError("line 1: missing manifest")
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetError(f"line 1: malformed manifest ({exc.msg})") from exc
    if head.get("format_version") != FORMAT_VERSION:
        raise DatasetError(
            f"line 1: unsupported format version {head.get('format_version')!r}, "
            f"expected {FORMAT_VERSION}")
    manifest = DatasetManifest(count=head["count"], config_hash=head["config_hash"],
                               horizon=head["horizon"], dt=head["dt"],
                               format_version=head["format_version"])
    scenarios = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            raise DatasetError(f"line {lineno}: blank record")
        try:
            scenarios.append(scenario_from_dict(json.loads(raw)))
        except json.JSONDecodeError as exc:
            raise DatasetError(f"line {lineno}: malformed record ({exc.msg})") from exc
        except (KeyError, ValueError, TypeError) as exc:
            raise DatasetError(f"line {lineno}: invalid record ({exc})") from exc
    if len(scenarios) != manifest.count:
        raise DatasetError(
            f"line {len(lines)}: expected {manifest.count} records, found {len(scenarios)}")
    return manifest, scenarios
