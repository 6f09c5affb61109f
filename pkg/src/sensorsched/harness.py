"""Scenario generation, persistence, policy evaluation, and comparison.

A scenario bundles N process models, M loss channels, and the per-process
steady-state caches.  Generation draws symmetric A matrices through random
orthogonal conjugation of uniform eigenvalues, uniform measurement rows,
conjugated uniform noise spectra, and uniform channel rates, rejecting
draws until the structural checks (and, by default, the boundedness
condition) pass.  Everything is reproducible: one seed fixes the scenario,
and a saved file round trips byte for byte.
"""

from __future__ import annotations

import csv
import json
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .analysis import stability_check
from .channel import ChannelModel, spawn_channel_rngs
from .dqn import scheduling_policy_from, train
from .environment import env_reset, env_step
from .errors import (ChecksumError, GenerationError, MalformedFileError,
                     NumericalError, RiccatiConvergenceError,
                     TrainingDivergedError, VersionMismatchError)
from .estimation import ProcessModel, steady_state_covariance
from .policies import (POLICY_NAMES, policy_greedy_covariance,
                       policy_greedy_holding, policy_random,
                       policy_round_robin)

_FORMAT = "sensorsched-scenario"
_VERSION = 1


@dataclass
class Scenario:
    processes: list
    channels: list
    caches: list
    seed: int
    metadata: dict = field(default_factory=dict)

    @property
    def n_sensors(self):
        return len(self.processes)

    @property
    def n_channels(self):
        return len(self.channels)


def _random_orthogonal(dim, rng):
    """Haar-distributed orthogonal matrix: QR with sign-corrected diagonal."""
    gauss = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(gauss)
    return q * np.sign(np.diag(r))


def _draw_process(rng, state_dim, meas_dim, eig_low, eig_high,
                  noise_low, noise_high):
    basis = _random_orthogonal(state_dim, rng)
    eigs = rng.uniform(eig_low, eig_high, size=state_dim)
    A = basis @ np.diag(eigs) @ basis.T
    C = rng.uniform(0.0, 1.0, size=(meas_dim, state_dim))
    wq = _random_orthogonal(state_dim, rng)
    W = wq @ np.diag(rng.uniform(noise_low, noise_high, size=state_dim)) @ wq.T
    vq = _random_orthogonal(meas_dim, rng)
    V = vq @ np.diag(rng.uniform(noise_low, noise_high, size=meas_dim)) @ vq.T
    return ProcessModel(A, C, W, V)


def scenario_generate(n_sensors, n_channels, seed, require_stable=True,
                      state_dim=2, meas_dim=1, eig_range=(0.0, 1.3),
                      noise_range=(0.2, 1.0), max_attempts=1000):
    """Draw a random scenario, rejecting invalid or (optionally) unstable ones.

    Each attempt uses its own RNG substream, so the accepted scenario is a
    pure function of the seed regardless of how many draws were rejected.
    """
    if n_channels > n_sensors:
        raise GenerationError(
            f"need n_channels <= n_sensors, got {n_channels} > {n_sensors}")
    children = np.random.SeedSequence(seed).spawn(max_attempts)
    for attempt in range(max_attempts):
        rng = np.random.Generator(np.random.Philox(children[attempt]))
        try:
            processes = [
                _draw_process(rng, state_dim, meas_dim, *eig_range,
                              *noise_range)
                for _ in range(n_sensors)]
        except ValueError:
            continue  # failed a structural check; redraw
        channels = [ChannelModel(p=float(rng.uniform()),
                                 q=float(rng.uniform()))
                    for _ in range(n_channels)]
        try:
            caches = [steady_state_covariance(p) for p in processes]
        except RiccatiConvergenceError:
            continue
        scenario = Scenario(
            processes=processes, channels=channels, caches=caches,
            seed=int(seed),
            metadata={"attempt": attempt, "require_stable": require_stable,
                      "state_dim": state_dim, "meas_dim": meas_dim})
        if require_stable and not stability_check(scenario).satisfied:
            continue
        return scenario
    raise GenerationError(
        f"no acceptable scenario in {max_attempts} attempts (seed={seed}, "
        f"require_stable={require_stable})")


def _scenario_payload(scenario):
    return {
        "format": _FORMAT,
        "version": _VERSION,
        "seed": scenario.seed,
        "metadata": scenario.metadata,
        "processes": [{"A": p.A.tolist(), "C": p.C.tolist(),
                       "W": p.W.tolist(), "V": p.V.tolist()}
                      for p in scenario.processes],
        "channels": [{"p": c.p, "q": c.q} for c in scenario.channels],
    }


def _payload_checksum(payload):
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return zlib.crc32(canonical.encode()) & 0xFFFFFFFF


def save_scenario(scenario, path):
    payload = _scenario_payload(scenario)
    payload["checksum"] = _payload_checksum(payload)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_scenario(path):
    """Parse, verify checksum and version, and rebuild the derived caches."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedFileError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict) or data.get("format") != _FORMAT:
        raise MalformedFileError(f"{path}: not a scenario file")
    version = data.get("version")
    if version != _VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version}, supported: {_VERSION}")
    stored = data.pop("checksum", None)
    if stored is None:
        raise MalformedFileError(f"{path}: missing checksum")
    if _payload_checksum(data) != stored:
        raise ChecksumError(f"{path}: checksum mismatch")
    try:
        processes = [ProcessModel(p["A"], p["C"], p["W"], p["V"])
                     for p in data["processes"]]
        channels = [ChannelModel(p=float(c["p"]), q=float(c["q"]))
                    for c in data["channels"]]
        seed = int(data["seed"])
        metadata = dict(data["metadata"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFileError(f"{path}: bad field: {exc}") from exc
    caches = [steady_state_covariance(p) for p in processes]
    return Scenario(processes=processes, channels=channels, caches=caches,
                    seed=seed, metadata=metadata)


@dataclass
class EvalReport:
    policy: str
    steps: int
    empirical_avg_cost: float
    per_sensor_mean_trace: list
    seed: int
    overflow_step: object = None  # step index where cost first overflowed


def make_policy(name, scenario, weights=None):
    """Policy factory: (EnvState, rng) -> SchedAction closures by name."""
    if name == "random":
        return policy_random
    if name == "roundrobin":
        return policy_round_robin
    if name == "greedy-tau":
        return policy_greedy_holding
    if name == "greedy-cov":
        return lambda state, rng: policy_greedy_covariance(state, scenario, rng)
    if name == "dqn":
        if weights is None:
            raise ValueError("the dqn policy needs trained weights")
        return scheduling_policy_from(weights, scenario)
    raise ValueError(f"unknown policy {name!r}; choose from {POLICY_NAMES}")


def evaluate_policy(scenario, policy, steps, seed=0, name="policy"):
    """Average per-step cost of a policy over one continuous trajectory.

    No resets: long-run behavior is what matters for a continuing task.
    A cost overflow (unbounded covariance) stops the run and reports +inf
    together with the step at which it happened.
    """
    ss_chan, ss_policy = np.random.SeedSequence(seed).spawn(2)
    chan_rngs = spawn_channel_rngs(ss_chan, scenario.n_channels)
    policy_rng = np.random.Generator(np.random.Philox(ss_policy))
    state = env_reset(scenario)
    total = 0.0
    per_sensor = np.zeros(scenario.n_sensors)
    overflow_step = None
    completed = 0
    # cost overflow is an anticipated, reported outcome here, so the
    # run-up to it should not spray numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            try:
                action = policy(state, policy_rng)
            except NumericalError:
                # a learned policy reads the covariance traces; once those
                # overflow its network cannot evaluate, which is the same
                # unbounded-covariance event as an infinite step cost
                overflow_step = k
                break
            state, reward = env_step(scenario, state, action, chan_rngs)
            cost = -reward
            if not np.isfinite(cost):
                overflow_step = k
                break
            total += cost
            for i, cache in enumerate(scenario.caches):
                per_sensor[i] += cache.trace_at(int(state.tau[i]))
            completed += 1
    if overflow_step is not None:
        avg = float("inf")
        mean_trace = [float("inf")] * scenario.n_sensors
    else:
        avg = total / completed
        mean_trace = (per_sensor / completed).tolist()
    return EvalReport(policy=name, steps=completed,
                      empirical_avg_cost=avg,
                      per_sensor_mean_trace=mean_trace, seed=int(seed),
                      overflow_step=overflow_step)


def write_eval_report(report, path):
    with open(path, "w") as fh:
        json.dump(asdict(report), fh, sort_keys=True, indent=2)
        fh.write("\n")


@dataclass
class CompareRow:
    policy: str
    avg_cost: float
    steps: int
    seed: int
    note: str = ""


def compare_all(scenario, config, eval_steps=50_000, eval_seed=0,
                include_ablation=True, timing=False):
    """Evaluate the four baselines plus trained (and ablated) schedulers.

    All evaluations share one seed, which in particular gives every policy
    the identical channel sample path.  A diverged training run becomes a
    row with NaN cost and an explanatory note instead of aborting the whole
    comparison.  Returns (rows, artifacts); artifacts carries the trained
    weights and curves keyed by policy name.
    """
    rows = []
    artifacts = {}
    for name in ("random", "roundrobin", "greedy-tau", "greedy-cov"):
        report = evaluate_policy(scenario, make_policy(name, scenario),
                                 eval_steps, seed=eval_seed, name=name)
        rows.append(CompareRow(policy=name,
                               avg_cost=report.empirical_avg_cost,
                               steps=report.steps, seed=eval_seed))
    variants = [("dqn", config)]
    if include_ablation:
        variants.append(("dqn-ablated", config.ablated()))
    for name, cfg in variants:
        try:
            weights, curve = train(cfg, scenario, timing=timing)
        except TrainingDivergedError as exc:
            rows.append(CompareRow(policy=name, avg_cost=float("nan"),
                                   steps=0, seed=eval_seed,
                                   note=f"training diverged: {exc}"))
            artifacts[name] = {"weights": None, "curve": exc.curve}
            continue
        artifacts[name] = {"weights": weights, "curve": curve}
        policy = make_policy("dqn", scenario, weights=weights)
        report = evaluate_policy(scenario, policy, eval_steps,
                                 seed=eval_seed, name=name)
        rows.append(CompareRow(policy=name,
                               avg_cost=report.empirical_avg_cost,
                               steps=report.steps, seed=eval_seed))
    return rows, artifacts


def write_compare_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "avg_cost", "steps", "seed", "note"])
        for row in rows:
            writer.writerow([row.policy, repr(row.avg_cost), row.steps,
                             row.seed, row.note])
