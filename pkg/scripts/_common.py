"""Shared plumbing: dataclass configs overridable from the command line."""

import argparse
import dataclasses
import json
import sys

import numpy as np


def parse_config(cls, argv=None):
    """Instance of dataclass ``cls`` with fields overridden by --field value."""
    p = argparse.ArgumentParser(description=cls.__doc__)
    for f in dataclasses.fields(cls):
        kind = type(f.default) if f.default is not dataclasses.MISSING else str
        if kind in (tuple, list):
            p.add_argument(f"--{f.name.replace('_', '-')}", default=None, help=f"comma separated, default {f.default}")
        else:
            p.add_argument(f"--{f.name.replace('_', '-')}", type=kind, default=f.default)
    ns = vars(p.parse_args(argv))
    out = {}
    for f in dataclasses.fields(cls):
        v = ns[f.name]
        if isinstance(f.default, tuple):
            v = f.default if v is None else tuple(type(f.default[0])(s) for s in v.split(","))
        out[f.name] = v
    return cls(**out)


def rng_for(seed, worker=0):
    return np.random.Generator(np.random.Philox(key=[int(seed), int(worker)]))


def emit(config, rows, header):
    """CSV on stdout with the config as a leading comment line."""
    sys.stdout.write("# config: " + json.dumps(dataclasses.asdict(config), sort_keys=True) + "\n")
    sys.stdout.write(",".join(header) + "\n")
    for r in rows:
        sys.stdout.write(",".join(str(v) for v in r) + "\n")
