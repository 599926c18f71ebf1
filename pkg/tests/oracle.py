"""Brute-force articulated-chain simulator used as a test oracle.

Works directly on joint angles in degrees and gripper holdings, with the
action contracts written out by hand.  It shares no code with the PDDL
parser, grounding or validator, so agreement with them is evidence rather
than tautology.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

GRIPPERS = ("gleft", "gright")

_ROTATE = re.compile(r"^(increase|decrease)_angle_first_child_(\d+)$")
_MACRO = re.compile(r"^grasp-(increase|decrease)-release_(\d+)$")
_STEP = re.compile(r"^\s*\d+(?:\.\d+)?\s*:\s*\(\s*([^()\s]+)((?:\s+[^()\s]+)*)\s*\)\s*$")


class Reject(Exception):
    pass


@dataclass
class Chain:
    n_joints: int
    step: int
    increments: tuple[int, ...]
    macros: bool
    angles: dict[int, int]
    held: dict[str, int | None] = field(default_factory=lambda: {g: None for g in GRIPPERS})

    def copy(self) -> "Chain":
        return Chain(self.n_joints, self.step, self.increments, self.macros, dict(self.angles), dict(self.held))

    # argument decoding ------------------------------------------------------

    def _joint(self, name: str) -> int:
        m = re.fullmatch(r"joint(\d+)", name)
        if not m or not 1 <= int(m.group(1)) <= self.n_joints:
            raise Reject(f"not a joint: {name}")
        return int(m.group(1))

    def _angle(self, name: str) -> int:
        m = re.fullmatch(r"angle(\d+)", name)
        if not m or int(m.group(1)) >= 360 or int(m.group(1)) % self.step:
            raise Reject(f"not an angle: {name}")
        return int(m.group(1))

    def _gripper(self, name: str) -> str:
        if name not in GRIPPERS:
            raise Reject(f"not a gripper: {name}")
        return name

    # dynamics ---------------------------------------------------------------

    def _rotate(self, j: int, delta: int) -> None:
        for k in range(j, self.n_joints + 1):
            self.angles[k] = (self.angles[k] + delta) % 360

    def step_action(self, name: str, args: tuple[str, ...]) -> None:
        """Apply one action in place, raising Reject if it is not applicable."""
        if name == "link-to-central-grasp":
            if len(args) != 2:
                raise Reject("arity")
            self._joint(args[0])
            g = self._gripper(args[1])
            if self.held[g] is not None:
                raise Reject("gripper busy")
            self.held[g] = self._joint(args[0])
            return
        if name == "release-links":
            if len(args) != 2:
                raise Reject("arity")
            j, g = self._joint(args[0]), self._gripper(args[1])
            if self.held[g] != j:
                raise Reject("not holding")
            self.held[g] = None
            return
        m = _MACRO.match(name) if self.macros else _ROTATE.match(name)
        if not m or int(m.group(2)) not in self.increments:
            raise Reject(f"unknown action {name}")
        if len(args) != 4:
            raise Reject("arity")
        j, a1, a2, g = self._joint(args[0]), self._angle(args[1]), self._angle(args[2]), self._gripper(args[3])
        delta = int(m.group(2)) * (1 if m.group(1) == "increase" else -1)
        if self.macros:
            if self.held[g] is not None:
                raise Reject("gripper busy")
        elif self.held[g] != j:
            raise Reject("joint not held by gripper")
        if self.angles[j] != a1 or (a1 + delta) % 360 != a2:
            raise Reject("angle mismatch")
        self._rotate(j, delta)

    def goal_met(self, goal: dict[int, int]) -> bool:
        return all(self.angles[j] == a for j, a in goal.items())


def parse_line(line: str) -> tuple[str, tuple[str, ...]]:
    m = _STEP.match(line.lower())
    if not m:
        raise ValueError(f"bad plan line {line!r}")
    return m.group(1), tuple(m.group(2).split())


def simulate(chain: Chain, steps, goal: dict[int, int]) -> tuple[str, int | None, Chain]:
    """Return (verdict, failing step index, final chain) for a step sequence.

    Verdicts use the same vocabulary as the validator under test: ``valid``,
    ``invalid`` (a step could not be applied) or ``unsolved-goal``.
    """
    sim = chain.copy()
    for i, (name, args) in enumerate(steps):
        try:
            sim.step_action(name, tuple(args))
        except Reject:
            return "invalid", i, sim
    return ("valid" if sim.goal_met(goal) else "unsolved-goal"), None, sim


# --------------------------------------------------------------------------
# conversion helpers (used only at the test boundary)


def chain_from_state(state, n_joints: int, step: int, increments, macros: bool) -> Chain:
    angles, held = {}, {g: None for g in GRIPPERS}
    for atom in state:
        pred, args = atom[0], atom[1]
        if pred == "angle_joint":
            angles[int(args[1][5:])] = int(args[0][5:])
        elif pred == "held":
            held[args[1]] = int(args[0][5:])
    return Chain(n_joints, step, tuple(increments), macros, angles, held)


def goal_angles(goal_literals) -> dict[int, int]:
    return {int(l.atom.args[1][5:]): int(l.atom.args[0][5:]) for l in goal_literals if l.atom.predicate == "angle_joint"}


def chain_atoms(chain: Chain) -> set[tuple[str, tuple[str, ...]]]:
    """Dynamic facts of a chain as (predicate, args) pairs."""
    out = {("angle_joint", (f"angle{a}", f"joint{j}")) for j, a in chain.angles.items()}
    for g, j in chain.held.items():
        out.add(("free", (g,)) if j is None else ("held", (f"joint{j}", g)))
    return out
