"""Policy-bridge protocol: drive episodes from an external process.

One JSON object per line in each direction.  The engine sends, per step, the
observations of every bridge-controlled robot (plus the step's reward
breakdowns and done flag); the client replies with action codes for exactly
those robots.  After the final step the engine emits a closing outcome
object and the session ends.

Engine -> client step message::

    {"v":1,"kind":"obs","step":n,"robots":[{"id":i,"team":"captor|target",
     "obs":{"agent":[...],"obstacle":[[0,1,...],...]}},...],
     "rewards":{"0":{"competition":..,"private":..,"total":..},...}|null,
     "done":false}

Client -> engine reply::

    {"v":1,"step":n,"actions":[{"id":i,"a":0..4},...]}

Violations (malformed JSON, wrong step echo, wrong or missing robot ids, bad
action codes, premature EOF) terminate the session with a protocol error.
"""

from __future__ import annotations

import json

import numpy as np

from .agents import resolve_policy
from .dynamics import Action
from .engine import (EpisodeConfig, StepRecord, TrajectoryLog, WorldState,
                     map_hash, observation_set, select_grid, spawn, step)
from .perception import observation_json, observe

PROTOCOL_VERSION = 1


class BridgeProtocolError(RuntimeError):
    """The client broke the line protocol."""


def controlled_indices(world: WorldState, control: str) -> list[int]:
    if control == "captors":
        return world.captor_indices
    if control == "target":
        return [world.target_index]
    if control == "all":
        return list(range(len(world.states)))
    raise ValueError(f"unknown control spec {control!r}")


def _obs_message(world: WorldState, indices: list[int], rewards, done: bool) -> dict:
    robots = []
    for i in indices:
        agent, obstacle = observe(world, i)
        robots.append({
            "id": i,
            "team": world.specs[i].team.value,
            "obs": observation_json(agent, obstacle),
        })
    reward_obj = None
    if rewards is not None:
        reward_obj = {str(i): r.to_json() for i, r in enumerate(rewards)}
    return {"v": PROTOCOL_VERSION, "kind": "obs", "step": world.step,
            "robots": robots, "rewards": reward_obj, "done": done}


def _read_actions(reader, expect_step: int, expect_ids: list[int]) -> dict[int, Action]:
    line = reader.readline()
    if not line:
        raise BridgeProtocolError("client closed the stream mid-episode")
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise BridgeProtocolError(f"malformed JSON from client: {exc}") from None
    if not isinstance(msg, dict) or msg.get("v") != PROTOCOL_VERSION:
        raise BridgeProtocolError("missing or wrong protocol version")
    if msg.get("step") != expect_step:
        raise BridgeProtocolError(
            f"step echo mismatch: expected {expect_step}, got {msg.get('step')}")
    actions = msg.get("actions")
    if not isinstance(actions, list):
        raise BridgeProtocolError("reply lacks an actions list")
    out: dict[int, Action] = {}
    for item in actions:
        try:
            rid = item["id"]
            code = item["a"]
        except (TypeError, KeyError):
            raise BridgeProtocolError(f"bad action entry {item!r}") from None
        if rid in out:
            raise BridgeProtocolError(f"duplicate action for robot {rid}")
        try:
            out[rid] = Action(code)
        except ValueError:
            raise BridgeProtocolError(f"invalid action code {code!r}") from None
    if sorted(out) != sorted(expect_ids):
        raise BridgeProtocolError(
            f"actions cover {sorted(out)}, expected {sorted(expect_ids)}")
    return out


def serve_episode(config: EpisodeConfig, reader, writer,
                  control: str = "captors",
                  captor_policy="heuristic-pursuer",
                  target_policy="heuristic-evader",
                  record_observations: bool = False) -> TrajectoryLog:
    """Run one bridged episode over a line-based transport.

    Robots not under bridge control fall back to the configured internal
    policies.  Returns the same trajectory log a local run would produce.
    """

    def send(obj: dict):
        writer.write(json.dumps(obj, separators=(",", ":")) + "\n")
        writer.flush()

    rng = np.random.default_rng(np.random.PCG64(config.seed))
    grid = select_grid(config, rng)
    world = spawn(grid, config, rng)
    indices = controlled_indices(world, control)

    policies = {}
    if control in ("captors", "all"):
        policies["captor"] = None
    else:
        policies["captor"] = resolve_policy(captor_policy,
                                            n_captors=config.n_captors,
                                            team="captor")
    if control in ("target", "all"):
        policies["target"] = None
    else:
        policies["target"] = resolve_policy(target_policy,
                                            n_captors=config.n_captors,
                                            team="target")

    log = TrajectoryLog(
        config=config, map_name=grid.name, map_hash=map_hash(grid),
        map_text=grid.to_text(), spawn_states=world.states,
        policy_names={"bridge": control})
    if record_observations:
        log.observations = [observation_set(world)]

    send(_obs_message(world, indices, None, False))
    while not world.done:
        acts = _read_actions(reader, world.step, indices)
        if policies["captor"] is not None:
            acts.update(policies["captor"].act(world, world.captor_indices, rng))
        if policies["target"] is not None:
            acts.update(policies["target"].act(world, [world.target_index], rng))
        actions = tuple(acts[i] for i in range(len(world.states)))
        world, breakdowns, done, info = step(world, list(actions))
        log.steps.append(StepRecord(
            step=world.step, states=world.states, actions=actions,
            fv=tuple(info["fv"]), collided=tuple(info["collided"]),
            rewards=tuple(breakdowns), captured=info["captured"]))
        if record_observations:
            log.observations.append(observation_set(world))
        send(_obs_message(world, indices, breakdowns, done))
    log.success = world.captured
    send({"v": PROTOCOL_VERSION, "kind": "outcome", "success": log.success,
          "steps_used": log.steps_used})
    return log
