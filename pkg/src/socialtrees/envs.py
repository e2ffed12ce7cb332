"""Episodic environments and a value-iteration oracle.

Every environment exposes ``reset(seed=None) -> obs``,
``step(action) -> (obs, reward, done)`` and ``spec``. Reaching
``spec.max_steps`` ends the episode (``done=True``); stepping afterwards is
an error until the next ``reset``.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .actionmap import DiscretizedActionMap


class EpisodeOver(RuntimeError):
    pass


class UnsupportedEnvironment(TypeError):
    pass


@dataclass(frozen=True)
class EnvSpec:
    n_inputs: int
    action_kind: str          # "discrete" or "continuous"
    n: int                    # k discrete actions, or n_a continuous channels in [-1, 1]
    max_steps: int

    def __post_init__(self):
        if self.action_kind not in ("discrete", "continuous"):
            raise ValueError(f"unknown action kind {self.action_kind!r}")
        if self.action_kind == "discrete" and self.n < 2:
            raise ValueError("discrete action spaces need at least 2 actions")
        if self.action_kind == "continuous" and self.n < 1:
            raise ValueError("continuous action spaces need at least 1 channel")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


class Environment:
    spec: EnvSpec

    def __init__(self):
        self.rng = np.random.default_rng()
        self.t = 0
        self.done = True

    def reset(self, seed=None):
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.t = 0
        self.done = False
        return self._reset()

    def step(self, action):
        if self.done:
            raise EpisodeOver("step() called on a finished episode; call reset() first")
        obs, reward, terminal = self._step(action)
        self.t += 1
        self.done = terminal or self.t >= self.spec.max_steps
        return obs, reward, self.done

    def _reset(self):
        raise NotImplementedError

    def _step(self, action):
        raise NotImplementedError


class CartPole(Environment):
    """Cart-pole with classic constants and a continuous force in [-1, 1].

    Observation is ``(x, theta, x_dot, theta_dot)``. Reward is 1 per step; the
    episode ends when ``|theta| > 0.2`` rad, ``|x| > 2.4`` or after
    ``max_steps`` steps.
    """

    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    length = 0.5            # half the pole length
    force_mag = 10.0
    tau = 0.02
    theta_limit = 0.2
    x_limit = 2.4

    def __init__(self, max_steps=1000, init_noise=0.01):
        super().__init__()
        self.spec = EnvSpec(4, "continuous", 1, max_steps)
        self.init_noise = init_noise
        self.total_mass = self.masspole + self.masscart
        self.polemass_length = self.masspole * self.length
        self.state = (0.0, 0.0, 0.0, 0.0)

    def _obs(self):
        x, th, v, om = self.state
        return np.array([x, th, v, om])

    def _reset(self):
        self.state = tuple(self.rng.uniform(-self.init_noise, self.init_noise, 4).tolist())
        return self._obs()

    def _step(self, action):
        u = float(action[0]) if hasattr(action, "__len__") else float(action)
        u = min(max(u, -1.0), 1.0)
        x, th, v, om = self.state
        force = self.force_mag * u
        c, s = math.cos(th), math.sin(th)
        temp = (force + self.polemass_length * om * om * s) / self.total_mass
        th_acc = (self.gravity * s - c * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * c * c / self.total_mass))
        x_acc = temp - self.polemass_length * th_acc * c / self.total_mass
        # semi-implicit Euler
        v = v + self.tau * x_acc
        x = x + self.tau * v
        om = om + self.tau * th_acc
        th = th + self.tau * om
        self.state = (x, th, v, om)
        terminal = abs(th) > self.theta_limit or abs(x) > self.x_limit
        return self._obs(), 1.0, terminal


class ChainMDP(Environment):
    """Deterministic chain with actions {0: left, 1: right}.

    States ``0 .. n-1``; ``n-1`` is terminal and is reached by moving right
    from ``n-2`` for ``goal_reward``. Every other step pays 0 and left from 0
    stays put. Observation is the one-hot state followed by its index.
    """

    LEFT, RIGHT = 0, 1

    def __init__(self, n_states=3, goal_reward=1.0, max_steps=None):
        super().__init__()
        if n_states < 2:
            raise ValueError("a chain needs at least 2 states")
        self.n_states = int(n_states)
        self.goal_reward = float(goal_reward)
        self.spec = EnvSpec(self.n_states + 1, "discrete", 2, max_steps or 4 * self.n_states)
        self.state = 0

    def observe(self, state):
        obs = np.zeros(self.n_states + 1)
        obs[state] = 1.0
        obs[-1] = state
        return obs

    def _reset(self):
        self.state = 0
        return self.observe(0)

    def _step(self, action):
        nxt, r, terminal = self.model(self.state, int(action))
        self.state = nxt
        return self.observe(nxt), r, terminal

    def model(self, s, a):
        if a not in (self.LEFT, self.RIGHT):
            raise ValueError(f"invalid chain action {a}")
        last = self.n_states - 1
        if s == last:
            return s, 0.0, True
        if a == self.LEFT:
            return max(s - 1, 0), 0.0, False
        if s + 1 == last:
            return last, self.goal_reward, True
        return s + 1, 0.0, False

    def tabular(self):
        """``(next_state, reward, terminal)`` arrays of shape ``(n_states, 2)``."""
        n = self.n_states
        nxt = np.zeros((n, 2), dtype=int)
        rew = np.zeros((n, 2))
        term = np.zeros((n, 2), dtype=bool)
        for s in range(n):
            for a in (0, 1):
                nxt[s, a], rew[s, a], term[s, a] = self.model(s, a)
        return nxt, rew, term


class Lander1D(Environment):
    """Vertical lander with actions {0: coast, 1: thrust}.

    Observation is ``(altitude, velocity, fuel fraction)``. Thrusting costs
    ``thrust_penalty`` per step while fuel lasts. Touching down with
    ``|velocity| < safe_speed`` pays +100, faster contact pays -100.
    ``fuel=None`` means unlimited fuel.
    """

    gravity = 1.62
    thrust_acc = 4.0
    dt = 0.1
    safe_speed = 1.0
    thrust_penalty = 0.3

    def __init__(self, max_steps=500, fuel=60, altitude=(8.0, 12.0), velocity=0.0):
        super().__init__()
        self.spec = EnvSpec(3, "discrete", 2, max_steps)
        self.fuel_capacity = fuel
        self.altitude_range = altitude
        self.initial_velocity = velocity
        self.h = self.v = 0.0
        self.fuel = 0

    def _obs(self):
        frac = 1.0 if self.fuel_capacity is None else self.fuel / self.fuel_capacity
        return np.array([self.h, self.v, frac])

    def _reset(self):
        lo, hi = self.altitude_range
        self.h = float(self.rng.uniform(lo, hi)) if hi > lo else float(lo)
        self.v = float(self.initial_velocity)
        self.fuel = self.fuel_capacity
        return self._obs()

    def _step(self, action):
        a = int(action)
        if a not in (0, 1):
            raise ValueError(f"invalid lander action {a}")
        reward = 0.0
        acc = -self.gravity
        if a == 1 and (self.fuel is None or self.fuel > 0):
            acc += self.thrust_acc
            reward -= self.thrust_penalty
            if self.fuel is not None:
                self.fuel -= 1
        self.v += self.dt * acc
        self.h += self.dt * self.v
        if self.h <= 0.0:
            self.h = 0.0
            reward += 100.0 if abs(self.v) < self.safe_speed else -100.0
            return self._obs(), reward, True
        return self._obs(), reward, False


class DiscreteActions(Environment):
    """Discrete view of a continuous-action environment through a bin map."""

    def __init__(self, env, bins=7):
        if env.spec.action_kind != "continuous":
            raise UnsupportedEnvironment("DiscreteActions wraps continuous environments only")
        self.env = env
        self.action_map = DiscretizedActionMap(env.spec.n, bins)
        self.spec = EnvSpec(env.spec.n_inputs, "discrete", self.action_map.total_actions,
                            env.spec.max_steps)
        self._vectors = [self.action_map.to_continuous(a) for a in range(self.action_map.total_actions)]

    def reset(self, seed=None):
        return self.env.reset(seed)

    def step(self, action):
        if not 0 <= action < len(self._vectors):
            self.action_map.channel_bin(action)   # raises InvalidAction
        return self.env.step(self._vectors[action])

    @property
    def done(self):
        return self.env.done


class TraceRecorder:
    """Wraps an environment and appends ``step,obs...,action,reward,done`` rows to a CSV file."""

    def __init__(self, env, path):
        self.env = env
        self.spec = env.spec
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(["step"] + [f"obs{i}" for i in range(env.spec.n_inputs)]
                         + ["action", "reward", "done"])
        self._obs = None
        self._t = 0

    def reset(self, seed=None):
        self._obs = self.env.reset(seed)
        self._t = 0
        return self._obs

    def step(self, action):
        obs, r, done = self.env.step(action)
        self._w.writerow([self._t] + [repr(float(v)) for v in self._obs] + [action, repr(float(r)), int(done)])
        self._obs = obs
        self._t += 1
        return obs, r, done

    def close(self):
        self._fh.close()


def value_iteration(env, gamma, tol=1e-10, max_iter=100000):
    """Optimal Q-table of a tabular environment by Bellman-optimality iteration."""
    if not hasattr(env, "tabular"):
        raise UnsupportedEnvironment(f"{type(env).__name__} has no tabular model")
    nxt, rew, term = env.tabular()
    Q = np.zeros(rew.shape)
    cont = (~term).astype(float)
    for _ in range(max_iter):
        new = rew + gamma * cont * Q.max(axis=1)[nxt]
        delta = np.abs(new - Q).max()
        Q = new
        if delta < tol:
            break
    return Q


def make_cartpole(**kwargs):
    return CartPole(**kwargs)


def make_chain_mdp(n_states=3, goal_reward=1.0, **kwargs):
    return ChainMDP(n_states, goal_reward, **kwargs)


def make_lander1d(**kwargs):
    return Lander1D(**kwargs)


ENVIRONMENTS = {
    "cartpole": make_cartpole,
    "chain": make_chain_mdp,
    "lander1d": make_lander1d,
}


def make_env(name, bins=7, **kwargs):
    """Registered environment with a discrete action space (continuous ones get binned)."""
    try:
        ctor = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; known: {sorted(ENVIRONMENTS)}") from None
    env = ctor(**kwargs)
    if env.spec.action_kind == "continuous":
        env = DiscreteActions(env, bins)
    return env


@dataclass(frozen=True)
class EnvFactory:
    """Picklable zero-argument environment constructor."""

    name: str
    bins: int = 7
    kwargs: dict = field(default_factory=dict)

    def __call__(self):
        return make_env(self.name, self.bins, **self.kwargs)
