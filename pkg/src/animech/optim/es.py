"""Antithetic evolution-strategy training over rollout returns.

Desk-scale substitute for large-scale policy-gradient training: policies are
seeded by regressing the model-based reference controller onto the
observation space (extreme-learning-machine style), then refined with
rank-normalized antithetic ES. Population members share episode seeds within
a pair (common random numbers), and results reduce in a fixed order so the
worker count never changes the outcome.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from animech import rewards
from animech.core.character import CharacterDescription, from_json_dict, to_json_dict
from animech.refgen import (
    STANDING,
    WALKING,
    CommandRanges,
    ControlInput,
    ControlSampler,
    GaitParams,
    RefGenConfig,
)
from animech.sim.env import EnvConfig, PlanarEnv
from animech.optim.policy import MLPPolicy, PolicyShape, save_checkpoint
from animech.optim.teacher import ReferenceController
from animech.thermal import ThermalCbfConfig


@dataclass(frozen=True)
class TrainConfig:
    mode: str = STANDING
    iterations: int = 60
    population: int = 32  # antithetic pairs; must be even
    sigma: float = 0.005
    lr: float = 0.003
    episode_s: float = 6.0
    seed: int = 0
    workers: int = 0  # 0 = serial
    hidden: int = 64
    warm_start_episodes: int = 16
    scenarios: int = 3  # fixed training scenarios; the objective is the mean
    # return over them, deterministic across iterations so ES sees pure signal
    heldout_episodes: int = 2
    checkpoint_every: int = 20
    walking_speed_range: tuple[float, float] = (0.15, 0.35)
    walking_neck_range: tuple[float, float] = (-0.6, 0.2)  # head-up walking is
    # outside the stabilizer envelope; standing keeps the full neck range
    weight_overrides: dict = field(default_factory=dict)
    gait_overrides: dict = field(default_factory=dict)
    # shipped training distribution: posture commands stay inside the
    # closed-loop stability margin; the neck keeps its full range
    command_overrides: dict = field(
        default_factory=lambda: {"torso_pitch": 0.06, "height_delta": 0.025}
    )
    scenario_profile: str = "random"  # or "cruise": fixed forward walk /
    # neutral stance; used by the ablation arms so the deterministic
    # objective is not dominated by early falls

    def __post_init__(self):
        if self.population % 2 != 0:
            raise ValueError("population must be even (antithetic pairs)")


@dataclass
class RolloutResult:
    reward_sum: float
    survival_s: float
    track_err: float  # mean |q - q_ref|, rad
    peak_temp: float  # C, unclipped
    peak_dv: float  # m/s
    steps: int


def build_env(desc: CharacterDescription, cfg: TrainConfig) -> PlanarEnv:
    weights = rewards.RewardWeights().override(cfg.weight_overrides)
    gait = GaitParams(**cfg.gait_overrides) if cfg.gait_overrides else GaitParams()
    ranges = CommandRanges(**cfg.command_overrides) if cfg.command_overrides else CommandRanges()
    env = PlanarEnv(
        desc,
        EnvConfig(),
        refgen_cfg=RefGenConfig(gait=gait, ranges=ranges),
        weights=weights,
        thermal_cfg=ThermalCbfConfig(),
        mode=cfg.mode,
    )
    return env


class CommandSampler:
    """Piecewise-constant commands for training episodes.

    Walking speeds draw from the configured forward band (the shipped planar
    character walks a forward envelope; see README).
    """

    def __init__(self, env: PlanarEnv, cfg: TrainConfig, rng: np.random.Generator):
        self.env = env
        self.cfg = cfg
        self.inner = ControlSampler(
            rng, env.mode, env.refgen.cfg, env.refgen.nominal_height()
        )
        self.rng = rng
        self._remap()

    def _remap(self):
        if self.cfg.scenario_profile == "cruise":
            if self.env.mode == WALKING:
                self.inner.current = ControlInput(
                    mode=WALKING, velocity=(0.25, 0.0, 0.0)
                )
            else:
                self.inner.current = replace(
                    self.inner.current, torso_pitch=0.0, height=None
                )
            return
        if self.env.mode == WALKING:
            lo, hi = self.cfg.walking_speed_range
            vx = float(self.rng.uniform(lo, hi))
            nlo, nhi = self.cfg.walking_neck_range
            neck = tuple(
                min(max(v, nlo), nhi) for v in self.inner.current.neck
            )
            self.inner.current = replace(
                self.inner.current, velocity=(vx, 0.0, 0.0), neck=neck
            )

    def advance(self, dt: float) -> ControlInput:
        before = self.inner.current
        g = self.inner.advance(dt)
        if g is not before:
            self._remap()
            g = self.inner.current
        return g


def policy_shape(env: PlanarEnv, hidden: int) -> PolicyShape:
    return PolicyShape(
        obs_size=env.observation_size(),
        act_size=env.n,
        has_phase=env.mode == WALKING,
        hidden=hidden,
    )


def make_policy(env: PlanarEnv, hidden: int = 64) -> MLPPolicy:
    center, scale = env.observation_normalization()
    return MLPPolicy(
        policy_shape(env, hidden),
        env.model.q_lo,
        env.model.q_hi,
        obs_center=center,
        obs_scale=scale,
    )


def rollout(
    env: PlanarEnv,
    act_fn,
    horizon_s: float,
    rng: np.random.Generator,
    training: bool = False,
    sampler=None,
    fixed_control: ControlInput | None = None,
    initial_temps: float | None = None,
) -> RolloutResult:
    """Run one episode; `act_fn(obs, state) -> action` drives the character."""
    import dataclasses

    env.training = training
    state = env.reset(rng)
    if initial_temps is not None:
        temps = state.temps.copy()
        temps[env.thermal_idx] = initial_temps
        state = dataclasses.replace(state, temps=temps)
    if fixed_control is not None:
        env.set_control(fixed_control)
    steps = int(round(horizon_s / env.cfg.control_dt))
    obs = env.observe(state)
    total = 0.0
    track = 0.0
    peak_temp = -np.inf
    peak_dv = 0.0
    k = 0
    for k in range(1, steps + 1):
        if sampler is not None:
            env.set_control(sampler.advance(env.cfg.control_dt))
        action = act_fn(obs, state)
        r = env.step(state, action)
        state = r.state
        obs = r.observation
        total += r.reward.total
        if r.target is not None:
            track += float(np.mean(np.abs(state.q - r.target.q)))
        if len(env.thermal_idx):
            peak_temp = max(peak_temp, float(np.max(state.temps[env.thermal_idx])))
        peak_dv = max(peak_dv, max(r.dv))
        if r.terminated:
            break
    return RolloutResult(
        reward_sum=float(total),
        survival_s=k * env.cfg.control_dt,
        track_err=track / max(k, 1),
        peak_temp=float(peak_temp),
        peak_dv=float(peak_dv),
        steps=k,
    )


def rank_gradient(eps: np.ndarray, returns: np.ndarray, sigma: float) -> np.ndarray:
    """Rank-normalized antithetic gradient estimate.

    `eps` is (half, n_params); `returns` interleaves the +/- pair returns.
    """
    ranks = returns.argsort().argsort().astype(float)
    ranks = ranks / (len(ranks) - 1) - 0.5
    pair_w = ranks[0::2] - ranks[1::2]
    return (pair_w @ eps) / (len(eps) * sigma)


def _episode_rng(seed: int, iteration: int, index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence((seed & 0xFFFFFFFF, iteration + 1_000_000, index))
    )


def _resample_hold(cfg: TrainConfig):
    # shorter command holds during teaching improve coverage
    return (1.5, 3.0)


def _policy_act_fn(policy: MLPPolicy, params: np.ndarray):
    def act(obs, state):
        return policy.action(obs, params)

    return act


def teacher_act_fn(ctl: ReferenceController):
    def act(obs, state):
        return ctl.action(state)

    return act


def collect_demonstrations(
    env: PlanarEnv, cfg: TrainConfig, driver=None, round_id: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Observation / teacher-action pairs under observation noise.

    `driver(obs, state)` chooses the actions actually executed; the teacher
    always provides the labels. Driving with the current policy (DAgger
    style) covers the states the policy will actually visit.
    """
    ctl = ReferenceController(env)
    frames, acts = [], []
    env.disturbances_enabled = False  # clean demonstrations and observations
    try:
        for ep in range(cfg.warm_start_episodes):
            rng = _episode_rng(cfg.seed, 1 + 10 * round_id, ep)
            env.training = False
            state = env.reset(rng)
            ctl.reset()
            sampler = CommandSampler(env, cfg, _episode_rng(cfg.seed, 2 + 10 * round_id, ep))
            obs = env.observe(state)
            steps = int(round(cfg.episode_s / env.cfg.control_dt))
            ep_frames, ep_acts = [], []
            terminated = False
            for _ in range(steps):
                env.set_control(sampler.advance(env.cfg.control_dt))
                if abs(state.pitch) > 0.3:
                    break  # outside the teacher's competence region
                label = ctl.action(state)
                ep_frames.append(obs)
                ep_acts.append(label)
                a = label if driver is None else driver(obs, state)
                r = env.step(state, a)
                state, obs = r.state, r.observation
                if r.terminated:
                    terminated = True
                    break
            if terminated:  # drop the pre-fall tail; falling is not a lesson
                ep_frames = ep_frames[:-20]
                ep_acts = ep_acts[:-20]
            frames.extend(ep_frames)
            acts.extend(ep_acts)
    finally:
        env.disturbances_enabled = True
    return np.stack(frames), np.stack(acts)


def warm_start_policy(
    env: PlanarEnv, cfg: TrainConfig, dagger_rounds: int = 3, log=print
) -> tuple[MLPPolicy, float]:
    """Behavior-clone the reference controller, with DAgger refinement."""
    policy = make_policy(env, cfg.hidden)
    frames, acts = collect_demonstrations(env, cfg)
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed & 0xFFFFFFFF, 55)))
    rms = policy.fit(frames, acts, rng, steps=2500)
    log(f"warm start round 0: {len(frames)} frames, rms {rms:.4f} rad")
    all_frames, all_acts = [frames], [acts]
    for rd in range(1, dagger_rounds + 1):
        f2, a2 = collect_demonstrations(
            env, cfg, driver=_policy_act_fn(policy, policy.params), round_id=rd
        )
        all_frames.append(f2)
        all_acts.append(a2)
        rms = policy.fit(
            np.concatenate(all_frames),
            np.concatenate(all_acts),
            rng,
            steps=1200,
            reinit=False,
        )
        log(f"warm start round {rd}: +{len(f2)} frames, rms {rms:.4f} rad")
    return policy, rms


# ---------------------------------------------------------------------------
# parallel evaluation plumbing

_WORKER: dict = {}


def _worker_init(desc_doc: dict, cfg: TrainConfig):
    desc = from_json_dict(desc_doc)
    env = build_env(desc, cfg)
    _WORKER["env"] = env
    _WORKER["cfg"] = cfg
    _WORKER["policy"] = make_policy(env, cfg.hidden)


def scenario_return(env: PlanarEnv, cfg: TrainConfig, policy: MLPPolicy,
                    params: np.ndarray, scenario: int) -> float:
    """Deterministic return of one fixed training scenario."""
    res = rollout(
        env,
        _policy_act_fn(policy, params),
        cfg.episode_s,
        _episode_rng(cfg.seed, 0, scenario),
        training=True,
        sampler=CommandSampler(env, cfg, _episode_rng(cfg.seed, 50_000, scenario)),
    )
    return res.reward_sum


def _worker_eval(task):
    params, index = task
    env: PlanarEnv = _WORKER["env"]
    cfg: TrainConfig = _WORKER["cfg"]
    policy: MLPPolicy = _WORKER["policy"]
    total = 0.0
    for scenario in range(cfg.scenarios):
        total += scenario_return(env, cfg, policy, params, scenario)
    return index, total / cfg.scenarios


@dataclass
class TrainResult:
    policy: MLPPolicy
    curve: list[dict]
    best_return: float
    warm_start_rms: float


def train(
    desc: CharacterDescription,
    cfg: TrainConfig,
    out_dir: str | Path | None = None,
    log=print,
    initial_params: np.ndarray | None = None,
) -> TrainResult:
    env = build_env(desc, cfg)
    if initial_params is not None:
        policy = make_policy(env, cfg.hidden)
        policy.params = np.asarray(initial_params, dtype=float).copy()
        ws_rms = float("nan")
    else:
        policy, ws_rms = warm_start_policy(env, cfg, log=log)

    theta = policy.params.copy()
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 777)))
    half = cfg.population // 2

    pool = None
    if cfg.workers > 0:
        pool = ProcessPoolExecutor(
            max_workers=cfg.workers,
            initializer=_worker_init,
            initargs=(to_json_dict(desc), cfg),
        )

    def evaluate_population(tasks):
        if pool is None:
            _WORKER["env"] = env
            _WORKER["cfg"] = cfg
            _WORKER["policy"] = policy
            results = [_worker_eval(t) for t in tasks]
        else:
            results = list(pool.map(_worker_eval, tasks, chunksize=1))
        results.sort(key=lambda kv: kv[0])
        return np.array([r for _, r in results])

    def objective(theta_now):
        _WORKER["env"] = env
        _WORKER["cfg"] = cfg
        _WORKER["policy"] = policy
        return _worker_eval((theta_now, 0))[1]

    def heldout(theta_now):
        scores = []
        for e in range(cfg.heldout_episodes):
            r = rollout(
                env,
                _policy_act_fn(policy, theta_now),
                cfg.episode_s,
                _episode_rng(cfg.seed, 900_000 + e, 0),
                training=False,
                sampler=CommandSampler(env, cfg, _episode_rng(cfg.seed, 910_000 + e, 0)),
            )
            scores.append(r.reward_sum)
        return float(np.mean(scores))

    curve = []
    best_theta = theta.copy()
    best_return = objective(theta)
    log(f"iter   -1: objective {best_return:10.1f} (warm start)")
    try:
        for it in range(cfg.iterations):
            eps = rng.normal(0.0, 1.0, (half, len(theta)))
            tasks = []
            for k in range(half):
                tasks.append((theta + cfg.sigma * eps[k], 2 * k))
                tasks.append((theta - cfg.sigma * eps[k], 2 * k + 1))
            returns = evaluate_population(tasks)
            finite = np.isfinite(returns)
            if not finite.all():
                log(f"iter {it}: discarding {int((~finite).sum())} non-finite returns")
                returns = np.where(finite, returns, np.min(returns[finite]))
            grad = rank_gradient(eps, returns, cfg.sigma)
            candidate = theta + cfg.lr * grad
            cand_ret = objective(candidate)
            pop_best = float(np.max(returns))
            # accept whichever moved the deterministic objective most
            if pop_best > max(cand_ret, best_return):
                k_best = int(np.argmax(returns))
                sign = 1.0 if k_best % 2 == 0 else -1.0
                theta = theta + sign * cfg.sigma * eps[k_best // 2]
                accepted = pop_best
            elif cand_ret >= best_return:
                theta = candidate
                accepted = cand_ret
            else:
                theta = best_theta.copy()
                accepted = best_return
            if accepted > best_return:
                best_return = accepted
                best_theta = theta.copy()

            mean_ret = float(np.mean(returns))
            curve.append(
                {
                    "iteration": it,
                    "mean_return": mean_ret,
                    "eval_return": accepted,
                    "best_return": best_return,
                    "grad_norm": float(np.linalg.norm(grad)),
                }
            )
            if it % 5 == 0 or it == cfg.iterations - 1:
                log(
                    f"iter {it:4d}: pop mean {mean_ret:10.1f}  accepted {accepted:10.1f}"
                    f"  best {best_return:10.1f}"
                )
            if out_dir and cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0:
                policy.params = best_theta
                save_checkpoint(
                    Path(out_dir) / f"checkpoint_{it + 1:04d}.json",
                    policy,
                    cfg.mode,
                    env.observation_layout(),
                )
    finally:
        if pool is not None:
            pool.shutdown()

    held = heldout(best_theta)
    log(f"held-out return of best params: {held:10.1f}")
    policy.params = best_theta
    return TrainResult(
        policy=policy, curve=curve, best_return=best_return, warm_start_rms=ws_rms
    )
