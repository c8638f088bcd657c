"""Binary checkpoint format for nets and the distillation state.

Layout: magic ``UCDG``, version u32, tensor count u32, then per tensor a
u32 name length, the UTF-8 name, rank u32, one u32 per dim, and the data
as little-endian float64. Round trips are bit-exact. Net hyperparameters
ride along as reserved rank-0 ``meta.*`` tensors so a file is
self-describing.
"""

import struct

import numpy as np

from .dino import DinoState
from .errors import FormatError
from .nets import HEAD_CONDITIONAL, HEAD_LOGITS, CondSpec, DiscriminatorNet, GeneratorNet

MAGIC = b"UCDG"
VERSION = 1

_HEAD_CODES = {HEAD_CONDITIONAL: 0.0, HEAD_LOGITS: 1.0}


def _named_tensors(gen, disc, dino_state):
    meta = {
        "meta.cardinality": float(gen.cond.cardinality),
        "meta.embedding_dim": float(gen.cond.embedding_dim),
        "meta.latent_dim": float(gen.latent_dim),
        "meta.sample_dim": float(gen.sample_dim),
        "meta.g_hidden": float(gen.hidden),
        "meta.d_hidden": float(disc.hidden),
        "meta.feature_dim": float(disc.feature_dim),
        "meta.head_kind": _HEAD_CODES[disc.head_kind],
    }
    entries = [(name, np.float64(val)) for name, val in meta.items()]
    entries.append(("g.embed", gen.embed.data))
    for i, layer in enumerate((gen.l0, gen.l1, gen.l2)):
        entries.append((f"g.l{i}.w", layer.w.data))
        entries.append((f"g.l{i}.b", layer.b.data))
    for i, layer in enumerate((disc.l0, disc.l1, disc.l2)):
        entries.append((f"d.l{i}.w", layer.w.data))
        entries.append((f"d.l{i}.b", layer.b.data))
    entries.append(("d.head.w", disc.head.w.data))
    entries.append(("d.head.b", disc.head.b.data))
    if disc.embed is not None:
        entries.append(("d.embed", disc.embed.data))
    if dino_state is not None:
        entries.append(("dino.center", dino_state.center))
        entries.append(("dino.tau", np.float64(dino_state.temperature)))
        entries.append(("dino.momentum", np.float64(dino_state.center_momentum)))
    return entries


def save_checkpoint(path, gen, disc, dino_state=None):
    entries = _named_tensors(gen, disc, dino_state)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(entries)))
        for name, arr in entries:
            arr = np.asarray(arr, dtype=np.float64)
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<I", dim))
            f.write(arr.astype("<f8", copy=False).tobytes())


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"checkpoint truncated while reading {what}")
    return buf


def _read_tensors(path):
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise FormatError(f"bad magic in {path}; not a checkpoint")
        version, count = struct.unpack("<II", _read_exact(f, 8, "header"))
        if version != VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(f, 4, "name length"))
            name = _read_exact(f, name_len, "name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(f, 4, f"rank of {name}"))
            dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank, f"dims of {name}")) if rank else ()
            n_bytes = 8 * int(np.prod(dims, dtype=np.int64)) if rank else 8
            data = np.frombuffer(_read_exact(f, n_bytes, f"data of {name}"), dtype="<f8")
            tensors[name] = data.reshape(dims).copy()
        if f.read(1):
            raise FormatError("trailing bytes after last tensor")
    return tensors


def _meta_int(tensors, name):
    if name not in tensors:
        raise FormatError(f"missing tensor {name}")
    return int(tensors[name])


def _fill(param, tensors, name):
    if name not in tensors:
        raise FormatError(f"missing tensor {name}")
    arr = tensors[name]
    if arr.shape != param.data.shape:
        raise FormatError(f"tensor {name}: stored shape {arr.shape} != expected {param.data.shape}")
    param.data = np.ascontiguousarray(arr)


def load_checkpoint(path):
    """Rebuild (generator, discriminator, dino state or None) from a file."""
    tensors = _read_tensors(path)
    cond = CondSpec(_meta_int(tensors, "meta.cardinality"), _meta_int(tensors, "meta.embedding_dim"))
    head_code = _meta_int(tensors, "meta.head_kind")
    head_kind = HEAD_LOGITS if head_code else HEAD_CONDITIONAL
    gen = GeneratorNet(
        _meta_int(tensors, "meta.latent_dim"),
        cond,
        _meta_int(tensors, "meta.sample_dim"),
        hidden=_meta_int(tensors, "meta.g_hidden"),
    )
    disc = DiscriminatorNet(
        _meta_int(tensors, "meta.sample_dim"),
        cond,
        head_kind,
        hidden=_meta_int(tensors, "meta.d_hidden"),
        feature_dim=_meta_int(tensors, "meta.feature_dim"),
    )
    _fill(gen.embed, tensors, "g.embed")
    for i, layer in enumerate((gen.l0, gen.l1, gen.l2)):
        _fill(layer.w, tensors, f"g.l{i}.w")
        _fill(layer.b, tensors, f"g.l{i}.b")
    for i, layer in enumerate((disc.l0, disc.l1, disc.l2)):
        _fill(layer.w, tensors, f"d.l{i}.w")
        _fill(layer.b, tensors, f"d.l{i}.b")
    _fill(disc.head.w, tensors, "d.head.w")
    _fill(disc.head.b, tensors, "d.head.b")
    if disc.embed is not None:
        _fill(disc.embed, tensors, "d.embed")
    dino_state = None
    if "dino.center" in tensors:
        dino_state = DinoState(
            center=tensors["dino.center"],
            temperature=float(tensors["dino.tau"]),
            center_momentum=float(tensors["dino.momentum"]),
        )
    return gen, disc, dino_state
