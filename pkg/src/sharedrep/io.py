"""On-disk formats.

Dataset bundle (a directory)::

    manifest.json        format tag, version, dimensions, partitions, seeds
    ground_truth.npz     B_star, alphas, gamma_params (absent for identity)
    clients/client_00000.csv, ...   header x_1..x_d,y then one row per sample

Estimate file: a ``# {json}`` metadata line, a ``b_1..b_k`` header, then
``d`` rows of the orthonormal basis.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DimensionError
from .model import FederatedDataset, GroundTruth
from .subspace import SubspaceEstimate

__all__ = [
    "BUNDLE_FORMAT",
    "BUNDLE_VERSION",
    "save_bundle",
    "load_bundle",
    "write_client_csv",
    "read_client_csv",
    "save_estimate",
    "load_estimate",
]

BUNDLE_FORMAT = "shared-rep-bundle"
BUNDLE_VERSION = 1
ESTIMATE_FORMAT = "shared-rep-estimate"
_FMT = "%.17g"


def write_client_csv(path, X, y) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    header = ",".join([f"x_{j + 1}" for j in range(X.shape[1])] + ["y"])
    np.savetxt(path, np.column_stack([X, np.asarray(y, dtype=float)]), fmt=_FMT, delimiter=",", header=header, comments="")


def read_client_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if not header or header[-1] != "y" or any(h != f"x_{j + 1}" for j, h in enumerate(header[:-1])):
        raise ConfigurationError(f"{path}: expected header x_1..x_d,y")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(header):
        raise DimensionError(f"{path}: rows have {data.shape[1]} columns, header has {len(header)}")
    return data[:, :-1], data[:, -1]


def save_bundle(directory, dataset: FederatedDataset, gt: Optional[GroundTruth] = None, **meta) -> Path:
    directory = Path(directory)
    (directory / "clients").mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "d": dataset.d,
        "M": dataset.M,
        "N": dataset.N,
        "partitions": [int(n) for n in dataset.partitions],
        "ground_truth": gt is not None,
    }
    if gt is not None:
        manifest.update(
            k=gt.k,
            gamma_kind=gt.gamma_kind,
            noise_sigma=gt.noise_sigma,
            alpha_bound=gt.alpha_bound,
            gamma_cond_bound=gt.gamma_cond_bound,
        )
        arrays = {"B_star": gt.B_star, "alphas": gt.alphas}
        if gt.gamma_params is not None:
            arrays["gamma_params"] = gt.gamma_params
        np.savez(directory / "ground_truth.npz", **arrays)
    manifest["meta"] = meta
    for i, (X, y) in enumerate(dataset.clients):
        write_client_csv(directory / "clients" / f"client_{i:05d}.csv", X, y)
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return directory


def load_bundle(directory):
    """Return ``(dataset, ground_truth_or_None, manifest)``."""
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"{directory} has no manifest.json") from exc
    if manifest.get("format") != BUNDLE_FORMAT:
        raise ConfigurationError(f"{directory}: not a {BUNDLE_FORMAT}")
    if manifest.get("version") != BUNDLE_VERSION:
        raise ConfigurationError(f"{directory}: unsupported bundle version {manifest.get('version')}")
    clients = [read_client_csv(directory / "clients" / f"client_{i:05d}.csv") for i in range(manifest["M"])]
    dataset = FederatedDataset.from_clients(clients)
    if list(dataset.partitions) != manifest["partitions"]:
        raise DimensionError(f"{directory}: client files disagree with manifest partitions")
    gt = None
    if manifest.get("ground_truth"):
        with np.load(directory / "ground_truth.npz") as z:
            gt = GroundTruth(
                B_star=z["B_star"],
                alphas=z["alphas"],
                gamma_kind=manifest["gamma_kind"],
                gamma_params=z["gamma_params"] if "gamma_params" in z else None,
                noise_sigma=manifest["noise_sigma"],
                alpha_bound=manifest["alpha_bound"],
                gamma_cond_bound=manifest["gamma_cond_bound"],
            )
    return dataset, gt, manifest


def save_estimate(path, estimate: SubspaceEstimate, **meta) -> None:
    header = {"format": ESTIMATE_FORMAT, "estimator": estimate.source, "d": estimate.d, "k": estimate.k}
    header.update(meta)
    path = Path(path)
    if path.parent != Path(""):
        os.makedirs(path.parent, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        fh.write(",".join(f"b_{j + 1}" for j in range(estimate.k)) + "\n")
        np.savetxt(fh, estimate.basis, fmt=_FMT, delimiter=",")


def load_estimate(path):
    """Return ``(SubspaceEstimate, metadata)``."""
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("# "):
        raise ConfigurationError(f"{path}: missing JSON metadata line")
    meta = json.loads(first[2:])
    if meta.get("format") != ESTIMATE_FORMAT:
        raise ConfigurationError(f"{path}: not a {ESTIMATE_FORMAT} file")
    basis = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    if basis.shape != (meta["d"], meta["k"]):
        raise DimensionError(f"{path}: basis shape {basis.shape} disagrees with header ({meta['d']}, {meta['k']})")
    return SubspaceEstimate(basis, meta.get("estimator", "")), meta
