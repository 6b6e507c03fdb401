"""Context Wasserstein autoencoder over fixed-length password encodings.

Encoder E maps an encoded (possibly wildcarded) string to a k-dimensional
latent point; decoder G maps latent points back to per-position symbol
logits. Training feeds character-dropout ("context noise") inputs and
reconstructs the clean password, with an MMD penalty pulling the encoded
batch toward the N(0, I) prior so the latent space stays samplable.

Architecture is a fully-connected residual stack on both sides; desk-size
corpora with short max lengths get nothing from convolution, so the block
count and hidden width are the only depth knobs.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import charspace as cs

CKPT_MAGIC = b"LGCK"
CKPT_VERSION = 1


class CheckpointError(Exception):
    pass


@dataclass(frozen=True)
class ModelConfig:
    alphabet: cs.Alphabet
    latent_dim: int = 32
    max_len: int = 10
    hidden: int = 256
    blocks: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.latent_dim < 2:
            raise ValueError("latent_dim must be >= 2")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        if self.blocks < 1:
            raise ValueError("blocks must be >= 1")

    @property
    def flat_dim(self) -> int:
        return self.max_len * self.alphabet.n_channels


@dataclass(frozen=True)
class TrainHyper:
    """Training knobs; `lam` weights the MMD term, `eps` the context noise."""

    lam: float = 4.0
    eps: float = 5.0
    gamma: float = 0.01
    batch_size: int = 128
    lr: float = 1e-3
    epochs: int = 25
    noise_mode: str = "char"  # "char" = per-character dropout, "span" = contiguous mask
    span_k: int = 5

    def __post_init__(self):
        if self.lam < 0 or self.eps < 0:
            raise ValueError("lam and eps must be >= 0")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (the MMD term needs pairs)")
        if self.noise_mode not in ("char", "span"):
            raise ValueError(f"unknown noise_mode: {self.noise_mode}")


# Model/training presets. "desk" fits CPU budgets and small corpora;
# "paper" carries the full-scale reference configuration.
PRESETS: dict[str, dict] = {
    "desk": dict(
        latent_dim=32, max_len=10, hidden=256, blocks=4,
        lam=4.0, eps=5.0, gamma=0.01, batch_size=128, lr=1e-3, epochs=30,
    ),
    "paper": dict(
        latent_dim=128, max_len=16, hidden=512, blocks=7,
        lam=8.0, eps=5.0, gamma=0.01, batch_size=256, lr=1e-4, epochs=25,
    ),
}


@dataclass
class LossRecord:
    reconstruction: float
    mmd: float
    total: float


class ModelParams:
    """Encoder + decoder parameter stores plus config and train metadata."""

    def __init__(self, config: ModelConfig, encoder: ad.ParamStore, decoder: ad.ParamStore):
        self.config = config
        self.encoder = encoder
        self.decoder = decoder
        self.meta: dict = {"epochs_seen": 0, "final_losses": None}

    @property
    def alphabet(self) -> cs.Alphabet:
        return self.config.alphabet


def _uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def _init_stack(rng, store: ad.ParamStore, prefix: str, d_in: int, hidden: int,
                blocks: int, d_out: int) -> None:
    store.add(f"{prefix}.in.w", _uniform_init(rng, d_in, (d_in, hidden)))
    store.add(f"{prefix}.in.b", np.zeros(hidden, dtype=np.float32))
    for i in range(blocks):
        store.add(f"{prefix}.blk{i}.w1", _uniform_init(rng, hidden, (hidden, hidden)))
        store.add(f"{prefix}.blk{i}.b1", np.zeros(hidden, dtype=np.float32))
        store.add(f"{prefix}.blk{i}.w2", _uniform_init(rng, hidden, (hidden, hidden)))
        store.add(f"{prefix}.blk{i}.b2", np.zeros(hidden, dtype=np.float32))
    store.add(f"{prefix}.out.w", _uniform_init(rng, hidden, (hidden, d_out)))
    store.add(f"{prefix}.out.b", np.zeros(d_out, dtype=np.float32))


def init_model(cfg: ModelConfig, rng: np.random.Generator | None = None) -> ModelParams:
    """Fresh model with fan-in-scaled uniform weights (deterministic per seed)."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    enc = ad.ParamStore()
    dec = ad.ParamStore()
    _init_stack(rng, enc, "enc", cfg.flat_dim, cfg.hidden, cfg.blocks, cfg.latent_dim)
    _init_stack(rng, dec, "dec", cfg.latent_dim, cfg.hidden, cfg.blocks, cfg.flat_dim)
    return ModelParams(cfg, enc, dec)


def _stack_forward(store: ad.ParamStore, prefix: str, blocks: int, x: ad.Tensor) -> ad.Tensor:
    p = store.params
    h = ad.leaky_relu(ad.add(ad.matmul(x, p[f"{prefix}.in.w"]), p[f"{prefix}.in.b"]))
    for i in range(blocks):
        inner = ad.leaky_relu(ad.add(ad.matmul(h, p[f"{prefix}.blk{i}.w1"]), p[f"{prefix}.blk{i}.b1"]))
        h = ad.add(h, ad.add(ad.matmul(inner, p[f"{prefix}.blk{i}.w2"]), p[f"{prefix}.blk{i}.b2"]))
    return ad.add(ad.matmul(h, p[f"{prefix}.out.w"]), p[f"{prefix}.out.b"])


def encoder_forward(m: ModelParams, enc_in: ad.Tensor) -> ad.Tensor:
    """enc_in: [B, L*V] flattened encoding -> [B, k] latents."""
    return _stack_forward(m.encoder, "enc", m.config.blocks, enc_in)


def decoder_forward(m: ModelParams, z: ad.Tensor) -> ad.Tensor:
    """z: [B, k] -> [B, L, V] logits."""
    flat = _stack_forward(m.decoder, "dec", m.config.blocks, z)
    cfg = m.config
    return ad.reshape(flat, (z.shape[0], cfg.max_len, cfg.alphabet.n_channels))


def encode_latent_batch(m: ModelParams, texts: list[str]) -> np.ndarray:
    """Latent points for passwords or templates (wildcards allowed), [B, k]."""
    cfg = m.config
    for t in texts:
        if len(t) > cfg.max_len:
            raise ValueError(f"over-length: {len(t)} > {cfg.max_len}")
    enc = cs.encode_batch(texts, cfg.alphabet, cfg.max_len)
    x = ad.constant(enc.reshape(len(texts), -1))
    return encoder_forward(m, x).data.copy()


def encode_latent(m: ModelParams, text: str) -> np.ndarray:
    """Latent point of one password or template, shape [k]."""
    return encode_latent_batch(m, [text])[0]


def generate_batch(m: ModelParams, z: np.ndarray) -> list[str]:
    """Decode a [B, k] batch of latent points to passwords ('' if all-pad)."""
    z = np.asarray(z, dtype=np.float32)
    if z.ndim != 2 or z.shape[1] != m.config.latent_dim:
        raise ValueError(
            f"dimension mismatch: z is {z.shape}, model latent_dim is {m.config.latent_dim}"
        )
    logits = decoder_forward(m, ad.constant(z)).data
    return cs.decode_batch(logits, m.config.alphabet)


def generate(m: ModelParams, z: np.ndarray) -> str:
    """Decode one latent point; total on R^k (an all-pad argmax yields '')."""
    z = np.asarray(z, dtype=np.float32)
    if z.shape != (m.config.latent_dim,):
        raise ValueError(
            f"dimension mismatch: z is {z.shape}, model latent_dim is {m.config.latent_dim}"
        )
    return generate_batch(m, z[None, :])[0]


TRAIN_MMD_SCALES = (0.1, 0.25, 0.5, 1.0, 2.5, 5.0, 10.0)


def _imq_kernel(d2: ad.Tensor, c: float) -> ad.Tensor:
    # inverse multiquadratic: C / (C + ||u - v||^2)
    return ad.scale(ad.reciprocal(ad.add(ad.constant(np.float32(c)), d2)), c)


def mmd_graph(a: ad.Tensor, b: ad.Tensor, scales: tuple[float, ...] = (1.0,)) -> ad.Tensor:
    """Unbiased squared-MMD estimate between latent samples a and b.

    Inverse-multiquadratic kernel with C = 2 * dim (prior variance 1),
    averaged over `scales` multiples of C. Equal sample sizes use the
    paired U-statistic (diagonal excluded from every term), which is
    exactly zero for identical samples; unequal sizes fall back to the
    general unbiased form.
    """
    n, m = a.shape[0], b.shape[0]
    if n < 2 or m < 2:
        raise ValueError("mmd needs at least 2 samples per side")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    c0 = 2.0 * a.shape[1]
    d_aa = ad.pairwise_sqdist(a, a)
    d_bb = ad.pairwise_sqdist(b, b)
    d_ab = ad.pairwise_sqdist(a, b)
    off_n = ad.constant((1.0 - np.eye(n, dtype=np.float32)))
    off_m = ad.constant((1.0 - np.eye(m, dtype=np.float32)))
    total: ad.Tensor | None = None
    for s in scales:
        c = c0 * s
        s_aa = ad.tsum(ad.mul(_imq_kernel(d_aa, c), off_n))
        s_bb = ad.tsum(ad.mul(_imq_kernel(d_bb, c), off_m))
        if n == m:
            s_ab = ad.tsum(ad.mul(_imq_kernel(d_ab, c), off_n))
            est = ad.scale(ad.sub(ad.add(s_aa, s_bb), ad.scale(s_ab, 2.0)),
                           1.0 / (n * (n - 1)))
        else:
            s_ab = ad.tsum(_imq_kernel(d_ab, c))
            est = ad.sub(
                ad.add(ad.scale(s_aa, 1.0 / (n * (n - 1))),
                       ad.scale(s_bb, 1.0 / (m * (m - 1)))),
                ad.scale(s_ab, 2.0 / (n * m)),
            )
        total = est if total is None else ad.add(total, est)
    return ad.scale(total, 1.0 / len(scales))


def mmd(a: np.ndarray, b: np.ndarray) -> float:
    """Squared-MMD estimate between two latent samples (numpy in, float out)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    return float(mmd_graph(ad.constant(a), ad.constant(b)).data)


def _make_noisy(batch: list[str], h: TrainHyper, alphabet: cs.Alphabet,
                rng: np.random.Generator) -> list[str]:
    if h.noise_mode == "span":
        return [cs.span_mask_noise(x, h.span_k, alphabet, rng) for x in batch]
    return [cs.context_noise(x, h.eps, alphabet, rng) for x in batch]


def train_step(m: ModelParams, batch: list[str], h: TrainHyper,
               rng: np.random.Generator) -> LossRecord:
    """One optimization step: noisy input -> clean-password reconstruction
    + lam * MMD(encoded batch, fresh prior sample of equal size)."""
    if len(batch) < 2:
        raise ValueError("batch_size must be >= 2 (the MMD term needs pairs)")
    cfg = m.config
    noisy = _make_noisy(batch, h, cfg.alphabet, rng)
    enc_in = cs.encode_batch(noisy, cfg.alphabet, cfg.max_len, gamma=h.gamma, rng=rng)

    x = ad.constant(enc_in.reshape(len(batch), -1))
    z = encoder_forward(m, x)
    logits = decoder_forward(m, z)
    rec = ad.softmax_cross_entropy(logits, cs.target_indices(batch, cfg.alphabet, cfg.max_len))

    prior = rng.standard_normal((len(batch), cfg.latent_dim)).astype(np.float32)
    # training uses a multi-scale kernel so the pull toward the prior keeps
    # a usable gradient even when the encoded cloud drifts wide
    mmd_t = mmd_graph(z, ad.constant(prior), scales=TRAIN_MMD_SCALES)
    loss = ad.add(rec, ad.scale(mmd_t, h.lam))

    m.encoder.zero_grad()
    m.decoder.zero_grad()
    ad.backward(loss)
    ad.adam_step(m.encoder, {k: p.grad if p.grad is not None else np.zeros_like(p.data)
                             for k, p in m.encoder.params.items()}, h.lr)
    ad.adam_step(m.decoder, {k: p.grad if p.grad is not None else np.zeros_like(p.data)
                             for k, p in m.decoder.params.items()}, h.lr)

    rec_v = float(rec.data)
    mmd_v = float(mmd_t.data)
    return LossRecord(rec_v, mmd_v, rec_v + h.lam * mmd_v)


def train(m: ModelParams, passwords: list[str], h: TrainHyper,
          rng: np.random.Generator, checkpoint_path=None,
          progress=None) -> list[LossRecord]:
    """Epoch loop with seeded shuffling; returns per-epoch mean losses.

    A checkpoint is rewritten after every epoch when `checkpoint_path` is
    given. `progress(epoch, record)` is called after each epoch.
    """
    if not passwords:
        raise ValueError("empty dataset")
    history: list[LossRecord] = []
    n = len(passwords)
    for epoch in range(h.epochs):
        perm = rng.permutation(n)
        sums = np.zeros(3, dtype=np.float64)
        steps = 0
        for lo in range(0, n, h.batch_size):
            idx = perm[lo:lo + h.batch_size]
            if idx.size < 2:
                continue
            batch = [passwords[i] for i in idx]
            rec = train_step(m, batch, h, rng)
            sums += (rec.reconstruction, rec.mmd, rec.total)
            steps += 1
        avg = LossRecord(*(sums / max(1, steps)))
        history.append(avg)
        m.meta["epochs_seen"] = m.meta.get("epochs_seen", 0) + 1
        m.meta["final_losses"] = [avg.reconstruction, avg.mmd, avg.total]
        if checkpoint_path is not None:
            save_checkpoint(m, checkpoint_path)
        if progress is not None:
            progress(epoch, avg)
    return history


# -- checkpoint wire format -------------------------------------------------
# magic | u32 version | u32 json_len | config+meta JSON | u32 tensor_count |
# per tensor: u32 name_len, name, u32 ndim, u32*ndim dims, f32-LE data.

def _config_blob(m: ModelParams) -> bytes:
    cfg = m.config
    doc = {
        "latent_dim": cfg.latent_dim,
        "max_len": cfg.max_len,
        "hidden": cfg.hidden,
        "blocks": cfg.blocks,
        "seed": cfg.seed,
        "alphabet": {
            "symbols": cfg.alphabet.symbols,
            "pad": cfg.alphabet.pad_symbol,
            "wildcard": cfg.alphabet.wildcard_symbol,
        },
        "meta": m.meta,
    }
    return json.dumps(doc, ensure_ascii=True, sort_keys=True).encode("utf-8")


def save_checkpoint(m: ModelParams, path) -> None:
    buf = io.BytesIO()
    buf.write(CKPT_MAGIC)
    buf.write(struct.pack("<I", CKPT_VERSION))
    blob = _config_blob(m)
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    tensors = {**m.encoder.state_tensors(), **m.decoder.state_tensors()}
    buf.write(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        nb = name.encode("utf-8")
        buf.write(struct.pack("<I", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def _read_exact(f, n: int) -> bytes:
    b = f.read(n)
    if len(b) != n:
        raise CheckpointError("truncated checkpoint")
    return b


def load_checkpoint(path, expect_config: ModelConfig | None = None) -> ModelParams:
    """Rebuild a model from disk; bit-exact tensor roundtrip.

    With `expect_config`, the stored architecture and alphabet must match
    (distinct "config mismatch" / "alphabet mismatch" errors otherwise).
    """
    with open(path, "rb") as f:
        if _read_exact(f, 4) != CKPT_MAGIC:
            raise CheckpointError("bad magic: not a latentguess checkpoint")
        (version,) = struct.unpack("<I", _read_exact(f, 4))
        if version != CKPT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version: {version}")
        (blob_len,) = struct.unpack("<I", _read_exact(f, 4))
        try:
            doc = json.loads(_read_exact(f, blob_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"corrupt config block: {e}") from None
        alpha = doc["alphabet"]
        alphabet = cs.Alphabet(alpha["symbols"], pad_symbol=alpha["pad"],
                               wildcard_symbol=alpha["wildcard"])
        cfg = ModelConfig(
            alphabet=alphabet,
            latent_dim=doc["latent_dim"],
            max_len=doc["max_len"],
            hidden=doc["hidden"],
            blocks=doc["blocks"],
            seed=doc["seed"],
        )
        if expect_config is not None:
            want = expect_config
            if (want.latent_dim, want.max_len, want.hidden, want.blocks) != (
                    cfg.latent_dim, cfg.max_len, cfg.hidden, cfg.blocks):
                raise CheckpointError(
                    "config mismatch: checkpoint has "
                    f"(k={cfg.latent_dim}, L={cfg.max_len}, hidden={cfg.hidden}, "
                    f"blocks={cfg.blocks})"
                )
            if want.alphabet.symbols != cfg.alphabet.symbols:
                raise CheckpointError("alphabet mismatch")
        (count,) = struct.unpack("<I", _read_exact(f, 4))
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(f, 4))
            name = _read_exact(f, name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", _read_exact(f, 4))
            shape = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim))
            size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            data = np.frombuffer(_read_exact(f, 4 * size), dtype="<f4").reshape(shape)
            tensors[name] = data.copy()
    model = init_model(cfg, rng=np.random.default_rng(cfg.seed))
    model.encoder.load_tensors({k: v for k, v in tensors.items() if k.startswith("enc.")})
    model.decoder.load_tensors({k: v for k, v in tensors.items() if k.startswith("dec.")})
    model.meta = doc.get("meta", model.meta)
    return model
