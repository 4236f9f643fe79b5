"""Trajectory traces: per-step records exported as CSV or JSON.

The same record structure feeds the CLI `export` command and the telemetry
path, so plots and the operator console read identical quantities.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


class TraceRecorder:
    def __init__(self, env, config_hash: str = ""):
        self.env = env
        self.config_hash = config_hash
        self.rows: list[dict] = []

    def record(self, state, action, result) -> None:
        row = {
            "time_s": state.time,
            "pos_x": float(state.pos[0]),
            "pos_z": float(state.pos[2]),
            "pitch": float(state.pitch),
            "vel_x": float(state.linvel[0]),
            "vel_z": float(state.linvel[2]),
            "phase": state.phase,
            "pf_x": state.path_frame.x,
            "contact_left": int(state.contact_left),
            "contact_right": int(state.contact_right),
            "dv_left": result.dv[0],
            "dv_right": result.dv[1],
            "reward_total": result.reward.total,
            "terminated": int(result.terminated),
        }
        for name, value in result.reward.groups.items():
            row[f"reward_{name}"] = value
        for j, name in enumerate(self.env.desc.joint_names()):
            row[f"q_{name}"] = float(state.q[j])
            row[f"a_{name}"] = float(action[j])
            row[f"temp_{name}"] = float(state.temps[j])
        if result.target is not None:
            for j, name in enumerate(self.env.desc.joint_names()):
                row[f"qref_{name}"] = float(result.target.q[j])
        self.rows.append(row)

    def write_csv(self, path: str | Path) -> None:
        if not self.rows:
            raise ValueError("empty trace")
        fields = list(self.rows[0].keys())
        with open(path, "w", newline="") as fh:
            fh.write(f"# animech trace, config_hash={self.config_hash}\n")
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(self.rows)

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(
                {"config_hash": self.config_hash, "records": self.rows}
            )
            + "\n"
        )


def read_trace_csv(path: str | Path) -> tuple[list[str], np.ndarray, str]:
    """(column names, data matrix, config hash) from an exported trace."""
    with open(path, newline="") as fh:
        first = fh.readline()
        config_hash = ""
        if first.startswith("#"):
            if "config_hash=" in first:
                config_hash = first.strip().split("config_hash=")[1]
        else:
            fh.seek(0)
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, np.array(rows), config_hash
