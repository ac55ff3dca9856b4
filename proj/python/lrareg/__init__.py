"""2D/3D registration of a CT-like volume to a single X-ray projection."""

import json

from ._core import (
    Camera,
    InvalidArgument,
    IoError,
    NumericalError,
    Volume,
    default_landmarks,
    gc,
    lncc,
    load_volume,
    make_phantom,
    mncc,
    mtre,
    ncc,
    pose_error,
    project,
    save_volume,
)
from . import _core

__all__ = [
    "Camera",
    "InvalidArgument",
    "IoError",
    "NumericalError",
    "Volume",
    "default_landmarks",
    "gc",
    "lncc",
    "load_volume",
    "make_phantom",
    "mncc",
    "mtre",
    "ncc",
    "pose_error",
    "project",
    "register",
    "run_benchmark",
    "save_volume",
    "similarity",
]


def similarity(a, b, **config):
    """Similarity of two images; keyword arguments as in the similarity config."""
    return _core.similarity(a, b, json.dumps(config))


def register(volume, camera, fixed, initial=(0.0,) * 6, **config):
    """Registers `volume` to the image `fixed`.

    Keyword arguments form the registration config (optimizer, sigma0,
    generations, lambda, seed, similarity, lra, ...). Returns a dict with the
    best pose, its cost, evaluation counts, the resolved config and the
    per-generation trace.
    """
    return json.loads(_core.register_json(volume, camera, fixed, list(initial), json.dumps(config)))


def run_benchmark(methods=None, **config):
    """Runs the benchmark protocol.

    `methods` is a list of {"name": ..., "registration": {...}}; by default
    lra-cma with lambda 5 against cma-es with lambda 50. Keyword arguments
    form the benchmark config (cases, seed, dims, camera, ...). Returns the
    report as a dict with the text table under "table".
    """
    if methods is None:
        methods = [
            {"name": "lra-cma", "registration": {"lambda": 5}},
            {"name": "cma-es", "registration": {"optimizer": "cma-es", "lambda": 50}},
        ]
    return json.loads(_core.benchmark_json(json.dumps(config), json.dumps(methods)))
