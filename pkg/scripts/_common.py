"""Small helpers shared by the experiment scripts."""

import argparse
import dataclasses
import json
import time
from pathlib import Path

SCENES = Path(__file__).resolve().parent / "scenes"


def parse_config(cls, description):
    """Expose every dataclass field as a --flag with its default."""
    ap = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        ap.add_argument(f"--{f.name.replace('_', '-')}", type=type(f.default), default=f.default)
    return cls(**vars(ap.parse_args()))


def save(path, payload):
    if path:
        Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True, default=str) + "\n")


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0
