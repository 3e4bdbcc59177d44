"""
Joint topologies: which annotated joints form the palm and which form the five finger chains.

Presets follow the joint subsets of the common depth benchmarks:
- msra: 21 joints, 1 palm joint (wrist), 4 joints per finger
- icvl: 16 joints, 1 palm joint, 3 joints per finger
- nyu:  14 joints, 4 palm landmarks, 2 joints per finger (placeholder split, overridable)

Custom topologies are read from a JSON descriptor with the same fields as `to_dict`.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError, ValidationError

FINGER_NAMES = ("thumb", "index", "middle", "ring", "little")


@dataclass(frozen=True)
class FingerChain:
    name: str
    joints: tuple  # annotation indices, MCP (root) first, tip last

    @property
    def length(self):
        return len(self.joints)


@dataclass(frozen=True)
class JointTopology:
    name: str
    joint_names: tuple
    palm: tuple
    fingers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if len(self.palm) < 1:
            raise ValidationError(f"topology '{self.name}': at least one palm joint required")
        if len(self.fingers) != 5:
            raise ValidationError(f"topology '{self.name}': exactly 5 fingers required, got {len(self.fingers)}")
        names = [finger.name for finger in self.fingers]
        if sorted(names) != sorted(FINGER_NAMES):
            raise ValidationError(f"topology '{self.name}': fingers must be {list(FINGER_NAMES)}, got {names}")
        for finger in self.fingers:
            if finger.length < 1:
                raise ValidationError(f"topology '{self.name}': finger '{finger.name}' has no joints")
        indices = list(self.palm) + [j for finger in self.fingers for j in finger.joints]
        if sorted(indices) != list(range(len(self.joint_names))):
            raise ValidationError(
                f"topology '{self.name}': palm and finger indices must cover joints 0..{len(self.joint_names) - 1} once"
            )
        if len(set(self.joint_names)) != len(self.joint_names):
            raise ValidationError(f"topology '{self.name}': joint names must be unique")

    @property
    def joint_count(self):
        return len(self.joint_names)

    @property
    def palm_count(self):
        return len(self.palm)

    @property
    def chain_lengths(self):
        return tuple(finger.length for finger in self.fingers)

    @property
    def max_chain_length(self):
        return max(self.chain_lengths)

    def finger(self, name):
        for finger in self.fingers:
            if finger.name == name:
                return finger
        raise ValidationError(f"topology '{self.name}' has no finger '{name}'")

    def palm_names(self):
        return [self.joint_names[i] for i in self.palm]

    def to_dict(self):
        return {
            "name": self.name,
            "joint_names": list(self.joint_names),
            "palm": list(self.palm),
            "fingers": [{"name": f.name, "joints": list(f.joints)} for f in self.fingers],
        }

    @classmethod
    def from_dict(cls, document):
        try:
            return cls(
                name=str(document["name"]),
                joint_names=tuple(document["joint_names"]),
                palm=tuple(int(i) for i in document["palm"]),
                fingers=tuple(
                    FingerChain(str(f["name"]), tuple(int(i) for i in f["joints"]))
                    for f in document["fingers"]
                ),
            )
        except (KeyError, TypeError, ValueError) as error:
            raise ValidationError(f"malformed topology descriptor: {error}") from error

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as error:
            raise ValidationError(f"{path}: topology descriptor is not valid JSON ({error})") from error
        return cls.from_dict(document)


def _chain_names(finger, parts):
    return [f"{finger}_{part}" for part in parts]


def msra():
    # wrist, then index/middle/ring/little/thumb, each MCP -> PIP -> DIP -> TIP
    order = ("index", "middle", "ring", "little", "thumb")
    names = ["wrist"]
    fingers = {}
    for k, finger in enumerate(order):
        names += _chain_names(finger, ("mcp", "pip", "dip", "tip"))
        fingers[finger] = tuple(range(1 + 4 * k, 5 + 4 * k))
    return JointTopology(
        name="msra",
        joint_names=tuple(names),
        palm=(0,),
        fingers=tuple(FingerChain(f, fingers[f]) for f in FINGER_NAMES),
    )


def icvl():
    # palm, then thumb/index/middle/ring/little, each root -> mid -> tip
    order = ("thumb", "index", "middle", "ring", "little")
    names = ["palm"]
    fingers = {}
    for k, finger in enumerate(order):
        names += _chain_names(finger, ("mcp", "pip", "tip"))
        fingers[finger] = tuple(range(1 + 3 * k, 4 + 3 * k))
    return JointTopology(
        name="icvl",
        joint_names=tuple(names),
        palm=(0,),
        fingers=tuple(FingerChain(f, fingers[f]) for f in FINGER_NAMES),
    )


def nyu():
    # tips and middle joints little -> thumb, then thumb root, two wrist points, palm centre
    names = []
    fingers = {}
    for k, finger in enumerate(("little", "ring", "middle", "index", "thumb")):
        names += [f"{finger}_tip", f"{finger}_pip"]
        fingers[finger] = (2 * k + 1, 2 * k)
    names += ["thumb_root", "wrist_radial", "wrist_ulnar", "palm"]
    return JointTopology(
        name="nyu",
        joint_names=tuple(names),
        palm=(13, 11, 12, 10),
        fingers=tuple(FingerChain(f, fingers[f]) for f in FINGER_NAMES),
    )


PRESETS = {"msra": msra, "icvl": icvl, "nyu": nyu}


def resolve_topology(spec):
    """A preset name, a descriptor path, a dict, or an existing JointTopology"""
    if isinstance(spec, JointTopology):
        return spec
    if isinstance(spec, dict):
        return JointTopology.from_dict(spec)
    if spec in PRESETS:
        return PRESETS[spec]()
    path = Path(str(spec))
    if path.suffix == ".json" and path.exists():
        return JointTopology.load(path)
    raise ConfigurationError(f"unknown topology '{spec}', expected one of {sorted(PRESETS)} or a descriptor file")
