"""Desk-scale tasks, scripted experts, and recorded expert trajectories.

``cartpole`` is the classic pole-balancing benchmark (Euler integration,
500-step cap).  ``dotchase`` is an 8x8 pixel task where the agent pixel
(0.5) chases the target pixel (1.0) for 100 steps, scoring 1 per catch.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, DatasetError, FormatError
from .rng import RngStream, derive_stream

# ----------------------------------------------------------------------
# cart-pole

GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
TOTAL_MASS = CART_MASS + POLE_MASS
HALF_LENGTH = 0.5
POLEMASS_LENGTH = POLE_MASS * HALF_LENGTH
FORCE = 10.0
TAU = 0.02
X_LIMIT = 2.4
THETA_LIMIT = 12 * 2 * math.pi / 360
CARTPOLE_STEPS = 500

LEFT, RIGHT = 0, 1

# expert: push right iff this linear form of (x, x_dot, theta, theta_dot) is positive
EXPERT_GAINS = (0.05, 0.1, 0.5, 1.0)


@dataclass(frozen=True)
class CartPoleState:
    x: float
    x_dot: float
    theta: float
    theta_dot: float
    steps: int = 0

    @property
    def obs(self) -> tuple[float, float, float, float]:
        return (self.x, self.x_dot, self.theta, self.theta_dot)

    @property
    def terminal(self) -> bool:
        return (abs(self.x) > X_LIMIT or abs(self.theta) > THETA_LIMIT
                or self.steps >= CARTPOLE_STEPS)


def cartpole_reset(rng: RngStream) -> CartPoleState:
    x, x_dot, theta, theta_dot = (float(v) for v in rng.uniform(-0.05, 0.05, 4))
    return CartPoleState(x, x_dot, theta, theta_dot, 0)


def cartpole_step(state: CartPoleState, action: int, force: float = FORCE):
    """One Euler step; returns ``(state, reward, done)``."""
    if state.terminal:
        raise ContractError("step on a terminal cart-pole state")
    if action not in (LEFT, RIGHT):
        raise ContractError(f"bad cart-pole action {action}")
    f = force if action == RIGHT else -force
    x, x_dot, theta, theta_dot = state.obs
    cos, sin = math.cos(theta), math.sin(theta)
    temp = (f + POLEMASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS
    theta_acc = (GRAVITY * sin - cos * temp) / (
        HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / TOTAL_MASS))
    x_acc = temp - POLEMASS_LENGTH * theta_acc * cos / TOTAL_MASS
    nxt = CartPoleState(x + TAU * x_dot, x_dot + TAU * x_acc,
                        theta + TAU * theta_dot, theta_dot + TAU * theta_acc, state.steps + 1)
    return nxt, 1.0, nxt.terminal


def cartpole_expert(obs) -> int:
    x, x_dot, theta, theta_dot = obs
    gx, gxd, gt, gtd = EXPERT_GAINS
    return RIGHT if gt * theta + gtd * theta_dot + gx * x + gxd * x_dot > 0 else LEFT


# ----------------------------------------------------------------------
# dot-chase

GRID = 8
DOTCHASE_STEPS = 100
UP, DOWN, WEST, EAST, STAY = range(5)
_MOVES = {UP: (-1, 0), DOWN: (1, 0), WEST: (0, -1), EAST: (0, 1), STAY: (0, 0)}
AGENT_PIXEL = 0.5
TARGET_PIXEL = 1.0


@dataclass(frozen=True)
class DotChaseState:
    agent: tuple[int, int]
    target: tuple[int, int]
    steps: int = 0

    @property
    def obs(self) -> np.ndarray:
        img = np.zeros((1, GRID, GRID))
        img[0][self.agent] = AGENT_PIXEL
        img[0][self.target] = TARGET_PIXEL
        return img

    @property
    def terminal(self) -> bool:
        return self.steps >= DOTCHASE_STEPS


def _random_cell(rng: RngStream, avoid=None) -> tuple[int, int]:
    cells = [(r, c) for r in range(GRID) for c in range(GRID) if (r, c) != avoid]
    return rng.choice(cells)


def dotchase_reset(rng: RngStream) -> DotChaseState:
    agent = _random_cell(rng)
    return DotChaseState(agent, _random_cell(rng, avoid=agent), 0)


def dotchase_step(state: DotChaseState, action: int, rng: RngStream):
    if state.terminal:
        raise ContractError("step on a terminal dot-chase state")
    if action not in _MOVES:
        raise ContractError(f"bad dot-chase action {action}")
    dr, dc = _MOVES[action]
    r = min(max(state.agent[0] + dr, 0), GRID - 1)
    c = min(max(state.agent[1] + dc, 0), GRID - 1)
    agent, target, reward = (r, c), state.target, 0.0
    if agent == target:
        reward = 1.0
        target = _random_cell(rng, avoid=agent)
    nxt = DotChaseState(agent, target, state.steps + 1)
    return nxt, reward, nxt.terminal


def dotchase_expert(state: DotChaseState) -> int:
    """Greedy Manhattan move, closing the row gap first."""
    (ar, ac), (tr, tc) = state.agent, state.target
    if tr != ar:
        return UP if tr < ar else DOWN
    if tc != ac:
        return WEST if tc < ac else EAST
    return STAY


def dotchase_expert_obs(obs) -> int:
    img = np.asarray(obs)[0]
    agent = tuple(int(v) for v in np.argwhere(img == AGENT_PIXEL)[0])
    target = tuple(int(v) for v in np.argwhere(img == TARGET_PIXEL)[0])
    return dotchase_expert(DotChaseState(agent, target))


# ----------------------------------------------------------------------
# uniform env wrapper used by rollouts


class Env:
    """Stateful single-owner episode runner for one task."""

    name: str
    n_actions: int
    obs_shape: tuple[int, ...]
    max_steps: int

    def reset(self, seed: int):
        raise NotImplementedError

    def step(self, action: int):
        raise NotImplementedError

    def expert(self) -> int:
        raise NotImplementedError


class CartPole(Env):
    name = "cartpole"
    n_actions = 2
    obs_shape = (4,)
    max_steps = CARTPOLE_STEPS

    def reset(self, seed: int):
        self.state = cartpole_reset(derive_stream(seed, 0))
        return self.state.obs

    def step(self, action: int):
        self.state, reward, done = cartpole_step(self.state, action)
        return self.state.obs, reward, done

    def expert(self) -> int:
        return cartpole_expert(self.state.obs)


class DotChase(Env):
    name = "dotchase"
    n_actions = 5
    obs_shape = (1, GRID, GRID)
    max_steps = DOTCHASE_STEPS

    def reset(self, seed: int):
        self.rng = derive_stream(seed, 0)
        self.state = dotchase_reset(self.rng)
        return self.state.obs

    def step(self, action: int):
        self.state, reward, done = dotchase_step(self.state, action, self.rng)
        return self.state.obs, reward, done

    def expert(self) -> int:
        return dotchase_expert(self.state)


TASKS = {"cartpole": CartPole, "dotchase": DotChase}


def make_env(task: str) -> Env:
    try:
        return TASKS[task]()
    except KeyError:
        raise ConfigError(f"unknown task {task!r}") from None


def expert_action(task: str, obs) -> int:
    """Expert action from an observation alone."""
    if task == "cartpole":
        return cartpole_expert(obs)
    if task == "dotchase":
        return dotchase_expert_obs(obs)
    raise ConfigError(f"unknown task {task!r}")


# ----------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    obs: np.ndarray  # (T, *obs_shape)
    actions: np.ndarray  # (T,)

    def __len__(self):
        return len(self.actions)

    def __eq__(self, other):
        return (isinstance(other, Trajectory) and self.obs.shape == other.obs.shape
                and np.array_equal(self.obs, other.obs) and np.array_equal(self.actions, other.actions))


@dataclass
class Dataset:
    obs_shape: tuple[int, ...]
    n_actions: int
    T: int
    trajectories: list[Trajectory]

    def __len__(self):
        return len(self.trajectories)

    def __getitem__(self, i) -> Trajectory:
        return self.trajectories[i]


def record_expert(task: str, n: int, T: int, seed: int, max_attempts: int = 100) -> Dataset:
    """``n`` expert trajectories of exactly ``T`` steps, each from its own episode.

    An episode ending before ``T`` actions is discarded and redrawn.
    """
    if n < 1 or T < 1:
        raise ConfigError("need n >= 1 and T >= 1")
    env = make_env(task)
    if T > env.max_steps:
        raise DatasetError(f"T={T} exceeds the {task} episode length {env.max_steps}")
    rng = derive_stream(seed, 0)
    trajs = []
    for _ in range(n):
        for _attempt in range(max_attempts):
            obs = env.reset(rng.seed64())
            steps_obs, steps_act, done = [], [], False
            while len(steps_act) < T and not done:
                a = env.expert()
                steps_obs.append(np.asarray(obs, dtype=float))
                steps_act.append(a)
                obs, _, done = env.step(a)
            if len(steps_act) == T:
                trajs.append(Trajectory(np.stack(steps_obs), np.asarray(steps_act, dtype=int)))
                break
        else:
            raise DatasetError(f"expert failed to reach {T} steps in {max_attempts} attempts")
    return Dataset(env.obs_shape, env.n_actions, T, trajs)


TRAJ_HEADER = "NEVO-TRAJ v1"


def dumps_dataset(ds: Dataset) -> str:
    shape = "x".join(str(s) for s in ds.obs_shape)
    lines = [TRAJ_HEADER, f"obs={shape},act={ds.n_actions},T={ds.T},n={len(ds)}"]
    for k, tr in enumerate(ds.trajectories):
        if k:
            lines.append("")
        for o, a in zip(tr.obs, tr.actions):
            lines.append(",".join(repr(float(v)) for v in np.ravel(o)) + f",{int(a)}")
    return "\n".join(lines) + "\n"


def loads_dataset(text: str) -> Dataset:
    lines = text.split("\n")
    if not lines or lines[0].strip() != TRAJ_HEADER:
        raise FormatError("not a NEVO-TRAJ v1 file")
    try:
        meta = dict(kv.split("=", 1) for kv in lines[1].strip().split(","))
        shape = tuple(int(s) for s in meta["obs"].split("x"))
        n_actions, T, n = int(meta["act"]), int(meta["T"]), int(meta["n"])
    except (KeyError, ValueError, IndexError) as e:
        raise FormatError(f"bad trajectory metadata line: {e}") from e
    size = int(np.prod(shape))
    blocks, cur = [], []
    for ln in lines[2:]:
        if ln.strip():
            cur.append(ln)
        elif cur:
            blocks.append(cur)
            cur = []
    if cur:
        blocks.append(cur)
    if len(blocks) != n:
        raise FormatError(f"expected {n} trajectories, found {len(blocks)}")
    trajs = []
    for block in blocks:
        if len(block) != T:
            raise FormatError(f"trajectory has {len(block)} steps, expected {T}")
        try:
            rows = [ln.split(",") for ln in block]
            obs = np.array([[float(v) for v in r[:-1]] for r in rows])
            acts = np.array([int(r[-1]) for r in rows])
        except ValueError as e:
            raise FormatError(f"bad step line: {e}") from e
        if obs.shape != (T, size) or acts.min() < 0 or acts.max() >= n_actions:
            raise FormatError("step line does not match the declared shape")
        trajs.append(Trajectory(obs.reshape((T,) + shape), acts))
    return Dataset(shape, n_actions, T, trajs)


def write_dataset(path, ds: Dataset):
    from .report import atomic_write_text
    atomic_write_text(path, dumps_dataset(ds))


def read_dataset(path) -> Dataset:
    with open(os.fspath(path)) as fh:
        return loads_dataset(fh.read())
