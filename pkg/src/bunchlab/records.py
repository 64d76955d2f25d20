"""File formats: line-delimited click/snapshot records, CSV tables, manifests.

Click records are JSON lines ``{"traj": int, "t": float, "ch": "L"|"R"}``;
snapshots are ``{"traj": int, "t": float, "pop": [floats]}``. Every output
file starts with a header line carrying the manifest hash so that analysis
stages can refuse to mix data from different runs.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .trajectory import CHANNEL_LEFT, CHANNEL_RIGHT, ClickStream, SnapshotSet

__all__ = [
    "ExperimentConfig",
    "manifest_hash",
    "write_manifest",
    "read_manifest",
    "write_clicks",
    "read_clicks",
    "write_snapshots",
    "read_snapshots",
    "write_csv",
    "read_csv_rows",
    "MixedManifestError",
]

_CH_NAME = {CHANNEL_LEFT: "L", CHANNEL_RIGHT: "R"}
_CH_CODE = {"L": CHANNEL_LEFT, "R": CHANNEL_RIGHT}


class MixedManifestError(RuntimeError):
    """Raised when inputs from different runs are combined."""


@dataclass
class ExperimentConfig:
    """Reproducible experiment plan consumed by the CLI.

    ``drive_grid`` lists effective drive amplitudes omega/(gamma sqrt(N)).
    ``t_in_policy`` is "eq_arrival" (use the closed-form arrival window) or a
    number; ``t_out_policy`` is "quantile:<p>" or a number. Serializes to and
    from JSON losslessly.
    """

    n_atoms: int
    drive_grid: list[float]
    t_end: float = 50.0
    burn_in: float = 10.0
    gamma: float = 1.0
    dt: float | None = None
    seed: int = 7041
    n_trajectories: int = 2000
    t_in_policy: object = "eq_arrival"
    t_out_policy: object = "quantile:0.99"
    output_dir: str = "runs"

    def __post_init__(self):
        if not self.drive_grid:
            raise ValueError("drive_grid must not be empty")
        if any(d <= 0 for d in self.drive_grid):
            raise ValueError("drive amplitudes must be positive")
        for name in ("t_end", "burn_in", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls(**json.loads(text))

    def resolve_t_in(self) -> float:
        from .timescales import t_in

        if self.t_in_policy == "eq_arrival":
            return t_in(self.n_atoms, self.gamma)
        return float(self.t_in_policy)

    def resolve_t_out(self) -> float:
        from .timescales import relaxation_model, t_out_quantile

        policy = self.t_out_policy
        if isinstance(policy, str) and policy.startswith("quantile:"):
            p = float(policy.split(":", 1)[1])
            return t_out_quantile(relaxation_model(self.n_atoms, self.gamma), p)
        return float(policy)


def manifest_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(config.to_json().encode()).hexdigest()[:16]


def write_manifest(path, config: ExperimentConfig, extra: dict | None = None) -> str:
    digest = manifest_hash(config)
    payload = {"manifest": digest, "config": json.loads(config.to_json())}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return digest


def read_manifest(path) -> tuple[str, ExperimentConfig]:
    payload = json.loads(Path(path).read_text())
    return payload["manifest"], ExperimentConfig(**payload["config"])


def _header_line(kind: str, digest: str, meta: dict) -> str:
    record = {"manifest": digest, "kind": kind}
    record.update(meta)
    return json.dumps(record)


def write_clicks(path, stream: ClickStream, digest: str):
    meta = {
        "n_trajectories": stream.n_trajectories,
        "t_start": stream.t_start,
        "t_end": stream.t_end,
    }
    with open(path, "w") as fh:
        fh.write(_header_line("clicks", digest, meta) + "\n")
        for traj, t, ch in zip(stream.traj, stream.t, stream.channel):
            fh.write(json.dumps({"traj": int(traj), "t": float(t), "ch": _CH_NAME[int(ch)]}) + "\n")


def read_clicks(path) -> tuple[ClickStream, str]:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "clicks":
            raise ValueError(f"{path} is not a click-record file")
        traj, t, ch = [], [], []
        for line in fh:
            rec = json.loads(line)
            traj.append(rec["traj"])
            t.append(rec["t"])
            ch.append(_CH_CODE[rec["ch"]])
    stream = ClickStream(
        traj=np.asarray(traj, dtype=np.int64),
        t=np.asarray(t, dtype=float),
        channel=np.asarray(ch, dtype=np.uint8),
        n_trajectories=header["n_trajectories"],
        t_start=header["t_start"],
        t_end=header["t_end"],
    )
    return stream, header["manifest"]


def write_snapshots(path, snapshots: SnapshotSet, digest: str):
    with open(path, "w") as fh:
        fh.write(_header_line("snapshots", digest, {}) + "\n")
        for traj, t, ordinal, pops in zip(
            snapshots.traj, snapshots.t, snapshots.click_ordinal, snapshots.populations
        ):
            fh.write(
                json.dumps(
                    {
                        "traj": int(traj),
                        "t": float(t),
                        "click": int(ordinal),
                        "pop": [float(p) for p in pops],
                    }
                )
                + "\n"
            )


def read_snapshots(path) -> tuple[SnapshotSet, str]:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "snapshots":
            raise ValueError(f"{path} is not a snapshot file")
        traj, t, ordinal, pops = [], [], [], []
        for line in fh:
            rec = json.loads(line)
            traj.append(rec["traj"])
            t.append(rec["t"])
            ordinal.append(rec["click"])
            pops.append(rec["pop"])
    dim = len(pops[0]) if pops else 0
    snapshots = SnapshotSet(
        traj=np.asarray(traj, dtype=np.int64),
        t=np.asarray(t, dtype=float),
        click_ordinal=np.asarray(ordinal, dtype=np.int64),
        populations=np.asarray(pops, dtype=float).reshape(len(pops), dim),
    )
    return snapshots, header["manifest"]


def write_csv(path, header: list[str], rows, digest: str | None = None):
    with open(path, "w") as fh:
        if digest is not None:
            fh.write(f"# manifest={digest}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(c) for c in row) + "\n")


def _format_cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_csv_rows(path) -> tuple[list[str], list[list[str]], str | None]:
    digest = None
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first.startswith("# manifest="):
            digest = first.split("=", 1)[1]
            first = fh.readline().rstrip("\n")
        header = first.split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    return header, rows, digest


def check_same_manifest(digests: list[str]):
    unique = set(digests)
    if len(unique) > 1:
        raise MixedManifestError(
            f"inputs come from different runs: manifest hashes {sorted(unique)}"
        )
