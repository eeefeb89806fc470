"""CSV and JSON wire formats for every table the package produces.

All floats are written with Python's shortest round-trip repr, so files are
locale-independent and re-read bit-exactly.  JSON payloads carry a
``schema: 1`` version field.

Formats:
  joint table    CSV header ``s,t,p`` (s-major row order)
                 JSON {"schema", "params", "tol", "probs", "tail_bound"}
  count dist     CSV header ``s,p``
                 JSON {"schema", "probs", "tail_bound", "tol", "mean"}
  conditional    JSON {"schema", "t", "params", "gamma_min", "weights",
                 "tail_bound", "M_t"}
  shot record    CSV header ``s,t`` (one integer pair per row)
                 JSON {"schema", "meta", "shots"}
  sweep          CSV header ``axis,value,delta,delta_R,S_state,S_ref``
                 JSON {"schema", "metadata", "rows"}

``format_*`` builds the text; ``write_*`` puts it on disk.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .conditional import ConditionalState
from .core import JointDistribution, PhotoCountDistribution
from .errors import ParameterError
from .nongauss import SweepRow
from .params import ExperimentParams
from .sampling import ShotRecord

SCHEMA = 1


def _fmt(x: float) -> str:
    return repr(float(x))


def params_to_dict(params: ExperimentParams | None) -> dict | None:
    if params is None:
        return None
    return {"mu": params.mu, "eta": params.eta, "mean_counts": params.mean_counts}


def params_from_dict(data: dict | None) -> ExperimentParams | None:
    if data is None:
        return None
    return ExperimentParams(
        data["mu"], data["eta"], data["mean_counts"],
        allow_unit_eta=data["eta"] == 1.0,
    )


# --- joint tables ---------------------------------------------------------


def format_joint_csv(table: JointDistribution) -> str:
    lines = ["s,t,p"]
    probs = table.probs
    for s in range(probs.shape[0]):
        for t in range(probs.shape[1]):
            lines.append(f"{s},{t},{_fmt(probs[s, t])}")
    return "\n".join(lines) + "\n"


def read_joint_csv(path) -> np.ndarray:
    rows = Path(path).read_text().strip().splitlines()
    if not rows or rows[0].strip() != "s,t,p":
        raise ParameterError(f"{path}: expected header 's,t,p'")
    triples = [line.split(",") for line in rows[1:]]
    s_max = max(int(r[0]) for r in triples)
    t_max = max(int(r[1]) for r in triples)
    out = np.zeros((s_max + 1, t_max + 1))
    for r in triples:
        out[int(r[0]), int(r[1])] = float(r[2])
    return out


def format_joint_json(table: JointDistribution) -> str:
    payload = {
        "schema": SCHEMA,
        "params": params_to_dict(table.params),
        "tol": table.tol,
        "probs": table.probs.tolist(),
        "tail_bound": table.tail_bound,
    }
    return json.dumps(payload) + "\n"


def read_joint_json(path) -> JointDistribution:
    payload = json.loads(Path(path).read_text())
    probs = np.asarray(payload["probs"], dtype=float)
    symmetric = probs.shape[0] == probs.shape[1] and np.array_equal(probs, probs.T)
    return JointDistribution(
        probs=probs,
        tail_bound=payload["tail_bound"],
        params=params_from_dict(payload.get("params")),
        tol=payload["tol"],
        symmetric=symmetric,
    )


# --- one-beam count distributions -----------------------------------------


def format_counts_csv(dist: PhotoCountDistribution) -> str:
    lines = ["s,p"]
    lines += [f"{s},{_fmt(p)}" for s, p in enumerate(dist.probs)]
    return "\n".join(lines) + "\n"


def read_counts_csv(path) -> np.ndarray:
    rows = Path(path).read_text().strip().splitlines()
    if not rows or rows[0].strip() != "s,p":
        raise ParameterError(f"{path}: expected header 's,p'")
    pairs = [line.split(",") for line in rows[1:]]
    out = np.zeros(max(int(r[0]) for r in pairs) + 1)
    for r in pairs:
        out[int(r[0])] = float(r[1])
    return out


def format_counts_json(dist: PhotoCountDistribution) -> str:
    payload = {
        "schema": SCHEMA,
        "probs": dist.probs.tolist(),
        "tail_bound": dist.tail_bound,
        "tol": dist.tol,
        "mean": dist.mean,
    }
    return json.dumps(payload) + "\n"


# --- conditional states ----------------------------------------------------


def format_state_json(state: ConditionalState) -> str:
    payload = {
        "schema": SCHEMA,
        "t": state.t,
        "params": params_to_dict(state.params),
        "gamma_min": state.gamma_min,
        "weights": state.weights.tolist(),
        "tail_bound": state.tail_bound,
        "M_t": state.M_t,
    }
    return json.dumps(payload) + "\n"


# --- shot records -----------------------------------------------------------


def format_shots_csv(record: ShotRecord) -> str:
    lines = ["s,t"]
    lines += [f"{s},{t}" for s, t in record.shots]
    return "\n".join(lines) + "\n"


def read_shots_csv(path) -> ShotRecord:
    rows = Path(path).read_text().strip().splitlines()
    if not rows or rows[0].strip() != "s,t":
        raise ParameterError(f"{path}: expected header 's,t'")
    shots = np.array(
        [[int(v) for v in line.split(",")] for line in rows[1:]], dtype=np.int64
    )
    return ShotRecord(shots=shots, meta={"source": str(path)})


def format_shots_json(record: ShotRecord) -> str:
    payload = {
        "schema": SCHEMA,
        "meta": record.meta,
        "shots": record.shots.tolist(),
    }
    return json.dumps(payload) + "\n"


def read_shots_json(path) -> ShotRecord:
    payload = json.loads(Path(path).read_text())
    return ShotRecord(
        shots=np.asarray(payload["shots"], dtype=np.int64),
        meta=payload.get("meta", {}),
    )


def read_record(path) -> ShotRecord:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return read_shots_json(path)
    return read_shots_csv(path)


# --- sweeps ------------------------------------------------------------------


def format_sweep_csv(rows: list[SweepRow]) -> str:
    lines = ["axis,value,delta,delta_R,S_state,S_ref"]
    for r in rows:
        lines.append(
            f"{r.axis},{_fmt(r.value)},{_fmt(r.delta)},{_fmt(r.delta_R)},"
            f"{_fmt(r.S_state)},{_fmt(r.S_ref)}"
        )
    return "\n".join(lines) + "\n"


def format_sweep_json(rows: list[SweepRow], metadata: dict) -> str:
    payload = {
        "schema": SCHEMA,
        "metadata": {"log_base": "e", **metadata},
        "rows": [
            {
                "axis": r.axis, "value": r.value, "delta": r.delta,
                "delta_R": r.delta_R, "S_state": r.S_state, "S_ref": r.S_ref,
            }
            for r in rows
        ],
    }
    return json.dumps(payload) + "\n"


# --- generic table reader (for fidelity between files) ----------------------


def read_table(path) -> np.ndarray:
    """Load a probability table of either dimensionality from CSV or JSON."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        payload = json.loads(path.read_text())
        return np.asarray(payload["probs"], dtype=float)
    header = path.read_text().lstrip().splitlines()[0].strip()
    if header == "s,t,p":
        return read_joint_csv(path)
    if header == "s,p":
        return read_counts_csv(path)
    raise ParameterError(f"{path}: unrecognised table header {header!r}")


def resolve_output(path, default_dir_env: str = "TWINBEAM_OUTDIR"):
    """Relative output paths land in $TWINBEAM_OUTDIR when it is set."""
    if path is None:
        return None
    path = Path(path)
    base = os.environ.get(default_dir_env)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_text(path, text: str) -> Path:
    path = resolve_output(path)
    path.write_text(text)
    return path


# Thin file wrappers.

def write_joint_csv(path, table):
    return write_text(path, format_joint_csv(table))


def write_joint_json(path, table):
    return write_text(path, format_joint_json(table))


def write_counts_csv(path, dist):
    return write_text(path, format_counts_csv(dist))


def write_counts_json(path, dist):
    return write_text(path, format_counts_json(dist))


def write_state_json(path, state):
    return write_text(path, format_state_json(state))


def write_shots_csv(path, record):
    return write_text(path, format_shots_csv(record))


def write_shots_json(path, record):
    return write_text(path, format_shots_json(record))


def write_sweep_csv(path, rows):
    return write_text(path, format_sweep_csv(rows))


def write_sweep_json(path, rows, metadata):
    return write_text(path, format_sweep_json(rows, metadata))
