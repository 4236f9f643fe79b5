"""Feedforward control policy over the observation vector.

A two-layer tanh network (default 64 units per layer) over the normalized
observation; outputs squash through tanh onto the joint ranges minus the
safety margin. The gait phase entry, when present, is expanded to (sin, cos)
features internally so the wrap at 1.0 stays smooth; the observation itself
is unchanged.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HIDDEN_DEFAULT = 64


def _obs_features(
    obs: np.ndarray, has_phase: bool, center: np.ndarray, scale: np.ndarray
) -> np.ndarray:
    normed = (obs - center) / scale
    if not has_phase:
        return normed
    phase = obs[-1]
    return np.concatenate(
        [normed[:-1], [np.sin(2.0 * np.pi * phase), np.cos(2.0 * np.pi * phase)]]
    )


@dataclass
class PolicyShape:
    obs_size: int
    act_size: int
    has_phase: bool
    hidden: int = HIDDEN_DEFAULT

    @property
    def feat_size(self) -> int:
        return self.obs_size + (1 if self.has_phase else 0)

    @property
    def n_params(self) -> int:
        f, h, a = self.feat_size, self.hidden, self.act_size
        return f * h + h + h * h + h + h * a + a

    def layout_hash(self, obs_layout: str) -> str:
        key = f"{obs_layout}|hidden={self.hidden}|phase={self.has_phase}"
        return hashlib.sha256(key.encode()).hexdigest()[:16]


class MLPPolicy:
    """Policy with a flat parameter vector, evaluated with plain numpy."""

    def __init__(
        self,
        shape: PolicyShape,
        q_lo: np.ndarray,
        q_hi: np.ndarray,
        margin: float = 0.02,
        params: np.ndarray | None = None,
        obs_center: np.ndarray | None = None,
        obs_scale: np.ndarray | None = None,
    ):
        self.shape = shape
        self.mid = 0.5 * (q_lo + q_hi)
        self.half = 0.5 * (q_hi - q_lo) - margin
        self.obs_center = (
            obs_center if obs_center is not None else np.zeros(shape.obs_size)
        )
        self.obs_scale = (
            obs_scale if obs_scale is not None else np.ones(shape.obs_size)
        )
        self.params = (
            params.astype(float).copy()
            if params is not None
            else np.zeros(shape.n_params)
        )

    def _views(self, params: np.ndarray):
        f, h, a = self.shape.feat_size, self.shape.hidden, self.shape.act_size
        i = 0
        w1 = params[i : i + f * h].reshape(h, f)
        i += f * h
        b1 = params[i : i + h]
        i += h
        w2 = params[i : i + h * h].reshape(h, h)
        i += h * h
        b2 = params[i : i + h]
        i += h
        w3 = params[i : i + h * a].reshape(a, h)
        i += h * a
        b3 = params[i : i + a]
        return w1, b1, w2, b2, w3, b3

    def raw_output(self, obs: np.ndarray, params: np.ndarray | None = None):
        p = self.params if params is None else params
        w1, b1, w2, b2, w3, b3 = self._views(p)
        feat = _obs_features(obs, self.shape.has_phase, self.obs_center, self.obs_scale)
        h1 = np.tanh(w1 @ feat + b1)
        h2 = np.tanh(w2 @ h1 + b2)
        return w3 @ h2 + b3

    def action(self, obs: np.ndarray, params: np.ndarray | None = None):
        return self.mid + self.half * np.tanh(self.raw_output(obs, params))

    def target_to_raw(self, action: np.ndarray) -> np.ndarray:
        """Inverse of the output squash, used by the warm-start regression."""
        u = np.clip((action - self.mid) / self.half, -0.95, 0.95)
        return np.arctanh(u)

    def init_random(self, rng: np.random.Generator, scale: float = 0.1) -> None:
        f = self.shape.feat_size
        self.params = rng.normal(0.0, scale / np.sqrt(f), self.shape.n_params)

    def fit(
        self,
        observations: np.ndarray,  # (B, obs_size)
        actions: np.ndarray,  # (B, act_size)
        rng: np.random.Generator,
        steps: int = 1200,
        lr: float = 6e-3,
        reinit: bool = True,
    ) -> float:
        """Full-batch Adam regression onto demonstrated actions.

        The loss lives in the pre-squash output space, so this is plain MSE
        through the tanh layers. Returns the RMS action reproduction error
        (rad).
        """
        f, h, a = self.shape.feat_size, self.shape.hidden, self.shape.act_size
        feats = np.stack(
            [
                _obs_features(o, self.shape.has_phase, self.obs_center, self.obs_scale)
                for o in observations
            ]
        )
        raw = np.stack([self.target_to_raw(x) for x in actions])
        if reinit or not self.params.any():
            w1 = rng.normal(0.0, 1.4 / np.sqrt(f), (h, f))
            b1 = rng.normal(0.0, 0.3, h)
            w2 = rng.normal(0.0, 1.0 / np.sqrt(h), (h, h))
            b2 = np.zeros(h)
            w3 = np.zeros((a, h))
            b3 = raw.mean(axis=0)
        else:
            w1, b1, w2, b2, w3, b3 = (p.copy() for p in self._views(self.params))
        params = [w1, b1, w2, b2, w3, b3]
        m = [np.zeros_like(p) for p in params]
        v = [np.zeros_like(p) for p in params]
        B = len(feats)
        for t in range(1, steps + 1):
            h1 = np.tanh(feats @ params[0].T + params[1])
            h2 = np.tanh(h1 @ params[2].T + params[3])
            out = h2 @ params[4].T + params[5]
            du = 2.0 * (out - raw) / B
            g_w3 = du.T @ h2
            g_b3 = du.sum(axis=0)
            dh2 = (du @ params[4]) * (1.0 - h2 * h2)
            g_w2 = dh2.T @ h1
            g_b2 = dh2.sum(axis=0)
            dh1 = (dh2 @ params[2]) * (1.0 - h1 * h1)
            g_w1 = dh1.T @ feats
            g_b1 = dh1.sum(axis=0)
            grads = [g_w1, g_b1, g_w2, g_b2, g_w3, g_b3]
            b1c, b2c = 1.0 - 0.9**t, 1.0 - 0.999**t
            for k in range(6):
                m[k] = 0.9 * m[k] + 0.1 * grads[k]
                v[k] = 0.999 * v[k] + 0.001 * grads[k] ** 2
                params[k] -= lr * (m[k] / b1c) / (np.sqrt(v[k] / b2c) + 1e-8)
        self.params = np.concatenate([p.ravel() for p in params])
        h1 = np.tanh(feats @ params[0].T + params[1])
        h2 = np.tanh(h1 @ params[2].T + params[3])
        pred = self.mid + self.half * np.tanh(h2 @ params[4].T + params[5])
        return float(np.sqrt(np.mean((pred - actions) ** 2)))


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(
    path: str | Path,
    policy: MLPPolicy,
    mode: str,
    obs_layout: str,
    extra: dict | None = None,
) -> None:
    doc = {
        "format": "animech-policy",
        "version": 1,
        "mode": mode,
        "obs_size": policy.shape.obs_size,
        "act_size": policy.shape.act_size,
        "has_phase": policy.shape.has_phase,
        "hidden": policy.shape.hidden,
        "obs_layout": obs_layout,
        "layout_hash": policy.shape.layout_hash(obs_layout),
        "q_mid": policy.mid.tolist(),
        "q_half": policy.half.tolist(),
        "obs_center": policy.obs_center.tolist(),
        "obs_scale": policy.obs_scale.tolist(),
        "params": policy.params.tolist(),
    }
    if extra:
        doc["extra"] = extra
    Path(path).write_text(json.dumps(doc) + "\n")


def load_checkpoint(path: str | Path) -> tuple[MLPPolicy, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "animech-policy":
        raise ValueError("not a policy checkpoint")
    shape = PolicyShape(
        obs_size=int(doc["obs_size"]),
        act_size=int(doc["act_size"]),
        has_phase=bool(doc["has_phase"]),
        hidden=int(doc["hidden"]),
    )
    mid = np.array(doc["q_mid"])
    half = np.array(doc["q_half"])
    policy = MLPPolicy(
        shape,
        mid - half,
        mid + half,
        margin=0.0,
        obs_center=np.array(doc["obs_center"]),
        obs_scale=np.array(doc["obs_scale"]),
    )
    # restore the squash parameters exactly (reconstruction rounds an ulp)
    policy.mid = mid
    policy.half = half
    policy.params = np.array(doc["params"], dtype=float)
    if len(policy.params) != shape.n_params:
        raise ValueError("checkpoint parameter count does not match its shape")
    return policy, doc
