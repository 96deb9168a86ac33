"""Line-delimited environment service over standard streams.

One session per process: JSON requests in, JSON responses out.
Requests:  {"cmd": "reset", "seed": int}
           {"cmd": "step", "action": [float, ...]}
           {"cmd": "spec"}
Responses carry "ok"; steps report state, reward, terminated, truncated, and
a cause.  Malformed requests get an error response and the session survives;
end of input ends the process cleanly.
"""

from __future__ import annotations

import json
import sys

from .config import DEFAULTS, Defaults
from .mdp import reset, state_dim, step
from .network import running_example


class EnvSession:
    def __init__(self, defaults: Defaults = DEFAULTS):
        self.defaults = defaults
        self.traffic = None
        self.state = None
        self.steps_taken = 0
        self.done = False

    def handle(self, request: dict) -> dict:
        cmd = request.get("cmd")
        if cmd == "spec":
            reference = running_example(self.defaults)
            return {
                "ok": True,
                "state_dim": state_dim(reference),
                "action_dim": len(reference.cars),
                "max_steps": self.defaults.max_episode_steps,
                "max_speed": float(self.defaults.max_speed),
                "max_accel": float(self.defaults.max_accel),
                "max_decel": float(self.defaults.max_decel),
                "success_reward": float(self.defaults.success_reward),
            }
        if cmd == "reset":
            seed = request.get("seed")
            if not isinstance(seed, int):
                return {"ok": False, "error": "reset needs an integer seed"}
            self.traffic, _, state = reset(seed, self.defaults)
            self.state = state
            self.steps_taken = 0
            self.done = False
            return {"ok": True, "state": state.tolist(), "info": {"seed": seed}}
        if cmd == "step":
            if self.traffic is None or self.state is None:
                return {"ok": False, "error": "step before reset"}
            if self.done:
                return {"ok": False, "error": "episode over; reset first"}
            action = request.get("action")
            if not isinstance(action, list):
                return {"ok": False, "error": "step needs an action list"}
            try:
                outcome = step(self.state, action, self.traffic, self.defaults)
            except Exception as exc:  # malformed action contents
                return {"ok": False, "error": f"step failed: {exc}"}
            self.state = outcome.state
            self.steps_taken += 1
            truncated = (not outcome.terminated
                         and self.steps_taken >= self.defaults.max_episode_steps)
            self.done = outcome.terminated or truncated
            return {
                "ok": True,
                "state": outcome.state.tolist(),
                "reward": outcome.reward,
                "terminated": outcome.terminated,
                "truncated": truncated,
                "info": {"cause": outcome.cause, "t": self.steps_taken},
            }
        return {"ok": False, "error": f"unknown command {cmd!r}"}


def serve(stdin=None, stdout=None, defaults: Defaults = DEFAULTS) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    session = EnvSession(defaults)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            response = {"ok": False, "error": f"bad json: {exc}"}
        else:
            response = session.handle(request)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
    return 0
