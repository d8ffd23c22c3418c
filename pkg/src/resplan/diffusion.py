"""Denoiser training (DDPM) and few-step deterministic sampling (DDIM).

Per-sample noise draws are seeded by (seed, scenario id, epoch), so loss
logs and checkpoints are reproducible even if the dataset order changes.
"""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .codecs import (
    FLAT_DIM,
    GlobalTrajectoryCodec,
    PRNormResidualCodec,
    codec_from_manifest,
    fit_codec,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .denoiser import DenoiserNet, ZeroDenoiser
from .rng import RngStream, derive_seed
from .schedule import NoiseSchedule, ddim_step_sequence, forward_noise, make_schedule
from .scene import Scenario
from .trajectory import Trajectory, inertial_reference, perturb_references

CHECKPOINT_KIND = "denoiser"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    lr: float = 1e-3
    grad_clip: float = 1.0
    k_train: int = 20
    k_infer: int = 200
    ddim_steps: int = 2
    sigma_long: float = 1.0
    sigma_lat: float = 0.5
    gamma: float = 1.0
    eps0: float = 1e-6
    seed: int = 0
    loss: str = "l1"                     # "l1" | "mse"
    loss_space: str = "normalized"       # "normalized" | "denormalized"
    diffusion_steps: int = 1000
    beta_min: float = 1e-4
    beta_max: float = 2e-2
    hidden: int = 256
    cond_dim: int = 128
    codec_kind: str = PRNormResidualCodec.kind

    def __post_init__(self):
        if self.loss not in ("l1", "mse"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.loss_space not in ("normalized", "denormalized"):
            raise ValueError(f"unknown loss space {self.loss_space!r}")


@dataclass
class Planner:
    """A trained denoiser plus everything needed to plan from a scenario."""

    net: object
    schedule: NoiseSchedule
    codec: object
    feature_dim: int
    config: TrainConfig
    config_hash: str = ""

    def sample_normalized(self, features_rows: np.ndarray, ref_rows: np.ndarray,
                          rng: RngStream, steps: int | None = None) -> np.ndarray:
        """Eta-0 DDIM from pure noise; returns predicted clean targets (k, 16)."""
        k = len(ref_rows)
        steps = self.config.ddim_steps if steps is None else steps
        z = rng.normal((k, FLAT_DIM))
        taus = ddim_step_sequence(steps, self.schedule.steps)
        for j, tau in enumerate(taus):
            nxt = taus[j + 1] if j + 1 < len(taus) else 0
            x0 = self.net.predict(z, features_rows, np.full(k, tau), ref_rows)
            abar_cur = self.schedule.alpha_bar[tau]
            abar_nxt = self.schedule.alpha_bar[nxt]
            eps_hat = (z - np.sqrt(abar_cur) * x0) / np.sqrt(1.0 - abar_cur)
            z = np.sqrt(abar_nxt) * x0 + np.sqrt(1.0 - abar_nxt) * eps_hat
        return z

    def predict_waypoints(self, scenario: Scenario, k: int | None = None,
                          sigma=None, rng: RngStream | None = None,
                          ddim_steps: int | None = None):
        """K candidate waypoint arrays plus diagnostics."""
        cfg = self.config
        k = cfg.k_infer if k is None else k
        sigma = (cfg.sigma_long, cfg.sigma_lat) if sigma is None else sigma
        rng = rng or RngStream(derive_seed(cfg.seed, "sample", scenario.id))
        cluster = perturb_references(scenario.ego, sigma, k, rng)
        refs = cluster.waypoint_array()
        feats = np.tile(scenario.features, (k, 1))
        normed = self.sample_normalized(feats, refs, rng, steps=ddim_steps)
        decoded = self.codec.decode(normed, refs)
        diagnostics = {"out_of_range": _out_of_range(normed, self.codec)}
        return decoded, diagnostics

    def predict_trajectories(self, scenario: Scenario, k: int | None = None,
                             sigma=None, rng: RngStream | None = None) -> list:
        decoded, _ = self.predict_waypoints(scenario, k=k, sigma=sigma, rng=rng)
        return [Trajectory(w) for w in decoded]

    def save(self, path: str) -> None:
        if not isinstance(self.net, DenoiserNet):
            raise TypeError("only DenoiserNet-backed planners can be saved")
        manifest = {
            "kind": CHECKPOINT_KIND,
            "params": self.net.param_manifest(),
            "schedule": {"steps": self.schedule.steps,
                         "beta_min": self.schedule.beta_min,
                         "beta_max": self.schedule.beta_max},
            "codec": self.codec.to_manifest(),
            "feature_dim": self.feature_dim,
            "train_config": asdict(self.config),
            "config_hash": self.config_hash,
        }
        save_checkpoint(path, manifest, self.net.state_dict())

    @classmethod
    def load(cls, path: str) -> "Planner":
        manifest, weights = load_checkpoint(path)
        if manifest.get("kind") != CHECKPOINT_KIND:
            raise ValueError(f"{path}: checkpoint kind {manifest.get('kind')!r} "
                             f"is not a {CHECKPOINT_KIND}")
        cfg = TrainConfig(**manifest["train_config"])
        net = DenoiserNet(manifest["feature_dim"], hidden=cfg.hidden,
                          cond_dim=cfg.cond_dim, seed=0)
        net.load_state_dict(weights)
        sched = manifest["schedule"]
        return cls(net=net,
                   schedule=make_schedule(sched["steps"], sched["beta_min"], sched["beta_max"]),
                   codec=codec_from_manifest(manifest["codec"]),
                   feature_dim=manifest["feature_dim"], config=cfg,
                   config_hash=manifest.get("config_hash", ""))


def _out_of_range(normed: np.ndarray, codec) -> int:
    if isinstance(codec, PRNormResidualCodec):
        return int((np.abs(normed) > codec.stats.gamma).sum())
    return int(((normed < 0.0) | (normed > 1.0)).sum())


def _batch_rows(scenarios, batch_idx, cfg: TrainConfig, codec, schedule, epoch: int):
    zs, feats, steps, refs, targets = [], [], [], [], []
    for idx in batch_idx:
        sc = scenarios[int(idx)]
        sr = RngStream(derive_seed(cfg.seed, "noise", sc.id, epoch))
        cluster = perturb_references(sc.ego, (cfg.sigma_long, cfg.sigma_lat),
                                     cfg.k_train, sr)
        ref_wp = cluster.waypoint_array()
        tgt = codec.encode(sc.expert.waypoints, ref_wp)
        step_i = sr.integers(1, schedule.steps + 1, (cfg.k_train,))
        eps = sr.normal((cfg.k_train, FLAT_DIM))
        zs.append(forward_noise(tgt, step_i, eps, schedule))
        feats.append(np.tile(sc.features, (cfg.k_train, 1)))
        steps.append(step_i)
        refs.append(ref_wp)
        targets.append(tgt)
    return (np.concatenate(zs), np.concatenate(feats), np.concatenate(steps),
            np.concatenate(refs), np.concatenate(targets))


def train(scenarios, cfg: TrainConfig, codec=None, config_hash: str = "",
          loss_callback=None):
    """Train a denoiser; returns (Planner, loss log [(step, loss), ...])."""
    scenarios = list(scenarios)
    if not scenarios:
        raise ValueError("cannot train on an empty dataset")
    feature_dim = scenarios[0].features.shape[0]
    if codec is None:
        refs = [inertial_reference(s.ego) for s in scenarios]
        codec = fit_codec(cfg.codec_kind, scenarios, refs, gamma=cfg.gamma, eps0=cfg.eps0)
    schedule = make_schedule(cfg.diffusion_steps, cfg.beta_min, cfg.beta_max)
    net = DenoiserNet(feature_dim, hidden=cfg.hidden, cond_dim=cfg.cond_dim,
                      seed=derive_seed(cfg.seed, "init"))
    opt = ad.Adam(net.params, lr=cfg.lr, clip_norm=cfg.grad_clip)
    slope = codec.slope()
    log = []
    step = 0
    for epoch in range(cfg.epochs):
        order = RngStream(derive_seed(cfg.seed, "order", epoch)).permutation(len(scenarios))
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo:lo + cfg.batch_size]
            z, feats, steps_i, refs, targets = _batch_rows(
                scenarios, batch, cfg, codec, schedule, epoch)

            def loss_fn():
                cond = net.condition(feats, steps_i, refs)
                pred = net.forward(ad.constant(z), cond)
                err = ad.sub(pred, ad.constant(targets))
                if cfg.loss_space == "denormalized":
                    err = ad.mul(err, ad.constant(slope))
                per = ad.abs_(err) if cfg.loss == "l1" else ad.square(err)
                # sum over the K members of Eq-style reconstruction terms,
                # averaged over scenarios and components
                return ad.scale(ad.mean(per), cfg.k_train)

            loss = ad.eval_with_grad(loss_fn, net.params)
            if not np.isfinite(loss):
                raise ad.NumericsError(f"non-finite training loss at step {step}")
            opt.step()
            log.append((step, loss))
            if loss_callback is not None:
                loss_callback(step, loss)
            step += 1
    planner = Planner(net=net, schedule=schedule, codec=codec,
                      feature_dim=feature_dim, config=cfg, config_hash=config_hash)
    return planner, log


def write_loss_log(log, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("step,loss\n")
        for step, loss in log:
            fh.write(f"{step},{loss!r}\n")
    os.replace(tmp, path)


def zero_stub_planner(feature_dim: int, cfg: TrainConfig, codec) -> Planner:
    """Planner around the zero-predicting stub denoiser (contract tests)."""
    return Planner(net=ZeroDenoiser(), schedule=make_schedule(cfg.diffusion_steps,
                   cfg.beta_min, cfg.beta_max), codec=codec,
                   feature_dim=feature_dim, config=cfg)
