"""On-disk format for trained pair bundles.

A bundle is a directory::

    manifest.txt          key=value lines (format version, dims, ladder, quantizer, seed)
    entry_1/enc_W0.f64    one array per file
    entry_1/enc_b0.f64
    ...
    entry_1/mu.f64
    entry_1/trace.f64

Each array file starts with a single ASCII line ``shape=d0,d1,...`` followed
by the raw little-endian float64 values in row-major order.  Floats in the
manifest are written with ``repr`` so that loading is bit-exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..bsc import BitFlipSet
from ..quantizer import QuantizerSpec
from .ladder import BundleEntry, PairBundle

FORMAT_VERSION = 1
MANIFEST = "manifest.txt"


class BundleFormatError(ValueError):
    pass


def write_array(path, array) -> None:
    array = np.ascontiguousarray(array, dtype="<f8")
    header = "shape=" + ",".join(str(d) for d in array.shape) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(array.tobytes(order="C"))


def read_array(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        payload = fh.read()
    if not header.startswith("shape="):
        raise BundleFormatError(f"{path}: missing shape header")
    dims = header[len("shape="):]
    shape = tuple(int(d) for d in dims.split(",")) if dims else ()
    array = np.frombuffer(payload, dtype="<f8")
    if array.size != int(np.prod(shape, dtype=np.int64)):
        raise BundleFormatError(f"{path}: {array.size} values do not fill shape {shape}")
    return array.reshape(shape).astype(np.float64)


def _floats(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def save_bundle(bundle: PairBundle, directory) -> Path:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    q = bundle.quantizer
    first = bundle.entries[0]
    manifest = {
        "format_version": FORMAT_VERSION,
        "K": bundle.K,
        "lambdas": _floats(bundle.lambdas),
        "input_dim": bundle.input_dim,
        "feature_dim": bundle.feature_dim,
        "encoder_layers": len(first.encoder),
        "decoder_layers": len(first.decoder),
        "quant_bits": q.B,
        "v_min": repr(float(q.v_min)),
        "v_max": repr(float(q.v_max)),
        "tau": repr(float(bundle.tau)),
        "seed": bundle.seed,
        "regularizer": bundle.regularizer,
        "target_mu": "" if bundle.target_mu is None else repr(float(bundle.target_mu)),
    }
    with open(root / MANIFEST, "w") as fh:
        for key, value in manifest.items():
            fh.write(f"{key}={value}\n")
    for k, entry in enumerate(bundle.entries, start=1):
        sub = root / f"entry_{k}"
        sub.mkdir(exist_ok=True)
        for prefix, layers in (("enc", entry.encoder), ("dec", entry.decoder)):
            for i, (W, b) in enumerate(layers):
                write_array(sub / f"{prefix}_W{i}.f64", W)
                write_array(sub / f"{prefix}_b{i}.f64", b)
        write_array(sub / "mu.f64", entry.mu.mu)
        write_array(sub / "trace.f64", entry.trace)
    return root


def read_manifest(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise BundleFormatError(f"malformed manifest line: {line!r}")
            out[key.strip()] = value.strip()
    return out


def load_bundle(directory) -> PairBundle:
    root = Path(directory)
    if not (root / MANIFEST).is_file():
        raise BundleFormatError(f"{root} has no {MANIFEST}")
    meta = read_manifest(root / MANIFEST)
    try:
        if int(meta["format_version"]) != FORMAT_VERSION:
            raise BundleFormatError(f"unsupported bundle format {meta['format_version']}")
        K = int(meta["K"])
        lambdas = [float(x) for x in meta["lambdas"].split(",")]
        n_enc, n_dec = int(meta["encoder_layers"]), int(meta["decoder_layers"])
        quantizer = QuantizerSpec(int(meta["quant_bits"]), float(meta["v_min"]), float(meta["v_max"]))
    except KeyError as exc:
        raise BundleFormatError(f"manifest lacks {exc}") from None
    if len(lambdas) != K:
        raise BundleFormatError("lambda count does not match K")
    entries = []
    for k in range(1, K + 1):
        sub = root / f"entry_{k}"
        enc = [(read_array(sub / f"enc_W{i}.f64"), read_array(sub / f"enc_b{i}.f64")) for i in range(n_enc)]
        dec = [(read_array(sub / f"dec_W{i}.f64"), read_array(sub / f"dec_b{i}.f64")) for i in range(n_dec)]
        mu = BitFlipSet(read_array(sub / "mu.f64"))
        entries.append(BundleEntry(enc, dec, mu, lambdas[k - 1], read_array(sub / "trace.f64")))
    target = meta.get("target_mu", "")
    return PairBundle(
        entries,
        input_dim=int(meta["input_dim"]),
        quantizer=quantizer,
        tau=float(meta["tau"]),
        seed=int(meta["seed"]),
        regularizer=meta.get("regularizer", "l2"),
        target_mu=float(target) if target else None,
    )
