"""Single-file model artifact (``.npz``) holding the frozen encoder, the decoder
and free-form provenance. Arrays are stored verbatim, so a loaded model
reproduces encodings and predictions bit for bit."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .gplm import GplmDecoder
from .spectral import KernelParams, SpectralModel

FORMAT = "lisa-model/1"


@dataclass
class ModelBundle:
    encoder: SpectralModel
    decoder: GplmDecoder
    extras: dict = field(default_factory=dict)  # name -> ndarray
    provenance: dict = field(default_factory=dict)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


def save_model(path, bundle: ModelBundle) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    enc, dec = bundle.encoder, bundle.decoder
    enc_meta = {k: v for k, v in enc.metadata.items() if not k.startswith("_")}
    header = {
        "format": FORMAT,
        "encoder": {"kernel": asdict(enc.kernel), "rank": enc.rank,
                    "window_shape": list(enc.window_shape), "metadata": enc_meta},
        "decoder": {"kernel": asdict(dec.kernel), "noise_var": dec.noise_var},
        "extras": sorted(bundle.extras),
        "provenance": bundle.provenance,
    }
    arrays = {
        "enc_train_windows": enc.train_windows,
        "enc_eigenvalues": enc.eigenvalues,
        "enc_eigenvectors": enc.eigenvectors,
        "enc_density": enc.density,
        "dec_train_latents": dec.train_latents,
        "dec_train_targets": dec.train_targets,
        "dec_gram_factor": dec.gram_factor,
        "dec_weights": dec.weights,
    }
    arrays.update({f"extra_{k}": np.asarray(v) for k, v in bundle.extras.items()})
    with path.open("wb") as fh:
        np.savez(fh, header=np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8),
                 **arrays)
    return path


def load_model(path) -> ModelBundle:
    with np.load(Path(path), allow_pickle=False) as z:
        header = json.loads(bytes(z["header"]).decode())
        if header.get("format") != FORMAT:
            raise ValueError(f"{path} is not a {FORMAT} artifact")
        a = {k: _readonly(z[k]) for k in z.files if k != "header"}
    e = header["encoder"]
    encoder = SpectralModel(
        train_windows=a["enc_train_windows"],
        window_shape=tuple(e["window_shape"]),
        kernel=KernelParams(**e["kernel"]),
        eigenvalues=a["enc_eigenvalues"],
        eigenvectors=a["enc_eigenvectors"],
        density=a["enc_density"],
        rank=int(e["rank"]),
        metadata=dict(e["metadata"]),
    )
    d = header["decoder"]
    decoder = GplmDecoder(a["dec_train_latents"], a["dec_train_targets"], KernelParams(**d["kernel"]),
                          float(d["noise_var"]), a["dec_gram_factor"], a["dec_weights"])
    extras = {k: a[f"extra_{k}"] for k in header["extras"]}
    return ModelBundle(encoder, decoder, extras, header["provenance"])
