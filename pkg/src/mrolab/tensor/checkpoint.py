"""JSON checkpoint container for parameter sets.

Layout (one JSON object):
  {"format": "mrolab-checkpoint-1",
   "config": {...},                      # whatever produced the parameters
   "params": {name: {"shape": [...], "values": [...]}},
   "optimizer": {"step": int, "m": {name: [...]}, "v": {name: [...]}}}

Floats are serialized with Python's shortest round-trip repr, so a
save/load/save cycle is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .nn import ParamSet

FORMAT = "mrolab-checkpoint-1"


def save_paramset(path: str | Path, params: ParamSet, config: dict) -> None:
    doc = {
        "format": FORMAT,
        "config": config,
        "params": {
            name: {"shape": list(t.data.shape), "values": t.data.reshape(-1).tolist()}
            for name, t in params.params.items()
        },
        "optimizer": {
            "step": params.step,
            "m": {name: arr.reshape(-1).tolist() for name, arr in params.m.items()},
            "v": {name: arr.reshape(-1).tolist() for name, arr in params.v.items()},
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_paramset(path: str | Path) -> tuple[ParamSet, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != FORMAT:
        raise ValueError(f"not a {FORMAT} file: {path}")
    ps = ParamSet()
    for name, entry in doc["params"].items():
        shape = tuple(entry["shape"])
        ps.add(name, np.asarray(entry["values"], dtype=np.float64).reshape(shape))
    opt = doc.get("optimizer", {})
    ps.step = int(opt.get("step", 0))
    for name, flat in opt.get("m", {}).items():
        ps.m[name] = np.asarray(flat, dtype=np.float64).reshape(ps.params[name].data.shape)
    for name, flat in opt.get("v", {}).items():
        ps.v[name] = np.asarray(flat, dtype=np.float64).reshape(ps.params[name].data.shape)
    return ps, doc.get("config", {})
