"""CSV and JSON artifacts: atomic writes, metadata sidecars, region summaries."""

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

from src.config import TIME_UNIT
from src.dde import Trajectory
from src.models import NodeModel


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _clean(value):
    """Replace non-finite floats with None so the JSON stays standard."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (float, np.floating)) and not math.isfinite(value):
        return None
    return value


def atomic_write_text(path, text: str):
    """
    Write text to path through a temporary file in the same directory.

    Raises:
        OSError: With the target path in the message
    """
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix='.tmp')
        try:
            with os.fdopen(fd, 'w', newline='') as f:
                f.write(text)
            os.replace(tmp_name, target)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as e:
        raise OSError(f"Failed to write {target}: {e}") from e


def write_json(path, data: dict):
    atomic_write_text(path, json.dumps(_clean(data), indent=2, default=_json_default) + '\n')


def read_json(path) -> dict:
    file = Path(path)
    if not file.exists():
        raise ValueError(f"File not found: {path}")
    return json.loads(file.read_text())


def metadata_path(path) -> Path:
    """Sidecar location: region.csv -> region.csv.meta.json."""
    path = Path(path)
    return path.with_name(path.name + '.meta.json')


def write_csv(path, frame: pd.DataFrame, metadata: dict | None = None):
    """
    Write a frame as CSV with shortest round-trip floats, plus a metadata sidecar.

    The sidecar always carries the time unit convention.
    """
    atomic_write_text(path, frame.to_csv(index=False, lineterminator='\n'))
    meta = {'time_unit': TIME_UNIT}
    meta.update(metadata or {})
    write_json(metadata_path(path), meta)


def trajectory_frame(traj: Trajectory, model: NodeModel) -> pd.DataFrame:
    """Long format: one row per (recorded time, node), columns t, node, state names."""
    states = traj.states
    if states.ndim != 3:
        raise ValueError(f"Expected an unbatched network trajectory, got shape {states.shape}")
    n_times, k, _ = states.shape

    frame = pd.DataFrame(states.reshape(n_times * k, -1), columns=list(model.state_names))
    frame.insert(0, 'node', np.tile(np.arange(1, k + 1), n_times))
    frame.insert(0, 't', np.repeat(traj.times, k))
    return frame


def region_summary(region, curve, optimum, spectrum: dict | None, config: dict, unimodality=None) -> dict:
    """JSON summary of a sweep: optimum, spectrum, boundary diagnostics and config echo."""
    summary = {
        'graph': region.metadata.get('graph'),
        'gamma_star_emp': optimum.gamma_star_emp if optimum else None,
        'tau_star_emp': optimum.tau_star_emp if optimum else None,
        'spectrum': spectrum,
        'cells': int(region.verdicts.size),
        'synchronized_cells': int(region.verdicts.sum()),
        'diverged_cells': int(region.diverged.sum()),
        'boundary_points': len(curve),
        'holes': {str(k): v for k, v in curve.holes.items()},
        'tau_step': curve.tau_step,
        'time_unit': TIME_UNIT,
        'config': config,
    }
    if optimum is None:
        summary['message'] = 'no synchronized cells'
    if unimodality is not None:
        summary['unimodal'] = unimodality.is_unimodal
        summary['unimodality_violations'] = unimodality.violations
    return summary


def emit_region_artifacts(
    region,
    curve,
    optimum,
    config: dict,
    region_path,
    boundary_path=None,
    summary_path=None,
    spectrum: dict | None = None,
    unimodality=None,
) -> dict:
    """
    Write the region CSV, the boundary CSV and the JSON summary.

    Returns:
        dict: The summary that was written
    """
    meta = {'config': config, 'sweep': region.metadata}
    write_csv(region_path, region.to_frame(), meta)

    if boundary_path is not None:
        write_csv(boundary_path, curve.to_frame(), meta)

    summary = region_summary(region, curve, optimum, spectrum, config, unimodality)
    if summary_path is not None:
        write_json(summary_path, summary)
    return summary
