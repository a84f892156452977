"""Binary policy checkpoints.

Layout: magic bytes ``SLAPCKPT``; little-endian u16 format version, u32
observation dim, u32 action dim, u32 signature length; a JSON signature block
binding the parameters to the shortcut's initial/terminal atoms, relevant
objects, and dimensions; then the parameter block as little-endian 32-bit
reals in fixed layer order (policy w1,b1,w2,b2,w3,b3; value w1,b1,w2,b2,w3,b3;
log_std).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from slap.nets import HIDDEN, DenseNet, PolicyParams
from slap.structs import AbstractState, Atom, Object

MAGIC = b"SLAPCKPT"
VERSION = 1

_PARAM_ORDER = ("w1", "b1", "w2", "b2", "w3", "b3")


class CheckpointError(Exception):
    """Corrupt file or a signature incompatible with the requested use."""


def atoms_to_lists(s: AbstractState) -> list[list[str]]:
    return [[a.predicate, *a.args] for a in s.atoms]


def atoms_from_lists(lists: list[list[str]]) -> AbstractState:
    return AbstractState(Atom(e[0], tuple(e[1:])) for e in lists)


def make_signature(s_init: AbstractState, s_term: AbstractState,
                   rel_objects: tuple[Object, ...], obs_dim: int,
                   act_dim: int) -> dict:
    return {
        "s_init": atoms_to_lists(s_init),
        "s_term": atoms_to_lists(s_term),
        "rel_objects": [[o.name, o.otype] for o in rel_objects],
        "obs_dim": obs_dim,
        "act_dim": act_dim,
    }


def save_checkpoint(path: str | Path, params: PolicyParams,
                    signature: dict) -> None:
    sig_bytes = json.dumps(signature, sort_keys=True).encode("utf-8")
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<HIII", VERSION, params.obs_dim, params.act_dim,
                        len(sig_bytes))
    blob += sig_bytes
    for net in (params.policy, params.value):
        arrays = net.arrays()
        for key in _PARAM_ORDER:
            blob += np.ascontiguousarray(arrays[key],
                                         dtype="<f4").tobytes()
    blob += np.ascontiguousarray(params.log_std, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path: str | Path) -> tuple[PolicyParams, dict]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    version, obs_dim, act_dim, sig_len = struct.unpack_from("<HIII", data, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    off = 8 + struct.calcsize("<HIII")
    signature = json.loads(data[off:off + sig_len].decode("utf-8"))
    if signature.get("obs_dim") != obs_dim or \
            signature.get("act_dim") != act_dim:
        raise CheckpointError(f"{path}: signature/header dimension mismatch")
    off += sig_len

    def read(shape):
        nonlocal off
        n = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=off)
        off += 4 * n
        return arr.reshape(shape).copy()

    def read_net(out_dim):
        return DenseNet(read((obs_dim, HIDDEN)), read((HIDDEN,)),
                        read((HIDDEN, HIDDEN)), read((HIDDEN,)),
                        read((HIDDEN, out_dim)), read((out_dim,)))

    policy = read_net(act_dim)
    value = read_net(1)
    log_std = read((act_dim,))
    if off != len(data):
        raise CheckpointError(f"{path}: trailing bytes")
    return PolicyParams(policy, value, log_std), signature


def signature_states(
        signature: dict) -> tuple[AbstractState, AbstractState, tuple]:
    """Decode the bound (s_init, s_term, rel_objects) from a signature."""
    rel = tuple(Object(name, otype)
                for name, otype in signature["rel_objects"])
    return (atoms_from_lists(signature["s_init"]),
            atoms_from_lists(signature["s_term"]), rel)
