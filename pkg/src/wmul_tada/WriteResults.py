"""
@Author = 'Michael Stanley'

Writers for everything a run leaves on disk. CSVs go through pandas with a header row and no index. A file that
already exists is first renamed to <stem>_old<suffix>, replacing any earlier _old file.

============ Change Log ============
2026-Oct-18 = Created.

============ License ============
Copyright (C) 2026 Michael Stanley

This file is part of wmul_tada.

wmul_tada is free software: you can redistribute it and/or modify it
under the terms of the GNU General Public License as published by the Free
Software Foundation, either version 3 of the License, or (at your option) any
later version.

wmul_tada is distributed in the hope that it will be useful, but WITHOUT
ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS
FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.

You should have received a copy of the GNU General Public License along with
wmul_tada. If not, see <https://www.gnu.org/licenses/>.
"""
import dataclasses
import json
from pathlib import Path

import numpy as np
import pandas as pd

import wmul_logger

_logger = wmul_logger.get_logger()

FLOAT_FORMAT = "%.17g"


def move_aside(output_filename):
    output_filename = Path(output_filename)
    if output_filename.exists():
        new_filename = output_filename.parent / (output_filename.stem + "_old" + output_filename.suffix)
        new_filename.unlink(missing_ok=True)
        output_filename.rename(new_filename)
        _logger.info(f"Moved the existing {output_filename} to {new_filename}")


def _write_frame(frame, output_filename):
    output_filename = Path(output_filename)
    output_filename.parent.mkdir(parents=True, exist_ok=True)
    move_aside(output_filename)
    with open(str(output_filename), newline="", mode="wt", errors="replace") as output_file:
        frame.to_csv(output_file, index=False, float_format=FLOAT_FORMAT)
    _logger.info(f"Wrote {len(frame)} rows to {output_filename}")
    return output_filename


def _dimension_columns(prefix, d):
    return [f"{prefix}_{i}" for i in range(d)]


def samples_frame(samples, first_sample_id=0):
    samples = np.asarray(samples, dtype=float)
    frame = pd.DataFrame(samples, columns=_dimension_columns("dim", samples.shape[1]))
    frame.insert(0, "sample_id", np.arange(first_sample_id, first_sample_id + samples.shape[0]))
    return frame


def write_samples_csv(samples, output_filename, first_sample_id=0):
    return _write_frame(samples_frame(samples, first_sample_id), output_filename)


def trajectory_frame(recorder):
    frames = []
    for step, (t, y, x_hat) in enumerate(recorder.rows):
        d = y.shape[-1]
        frame = pd.DataFrame(np.hstack([y, x_hat]),
                             columns=_dimension_columns("y", d) + _dimension_columns("x_hat", d))
        frame.insert(0, "sample_id", np.arange(y.shape[0]))
        frame.insert(0, "t", t)
        frame.insert(0, "step", step)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def write_trajectory_csv(recorder, output_filename):
    return _write_frame(trajectory_frame(recorder), output_filename)


def write_metrics_csv(rows, output_filename, key_columns=("run_id",)):
    frame = pd.DataFrame(rows, columns=[*key_columns, "metric_name", "value"])
    return _write_frame(frame, output_filename)


def write_table_csv(rows, output_filename):
    return _write_frame(pd.DataFrame(rows), output_filename)


def write_run_meta(meta, output_filename):
    output_filename = Path(output_filename)
    output_filename.parent.mkdir(parents=True, exist_ok=True)
    move_aside(output_filename)
    output_filename.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str))
    return output_filename


def write_scatter_image(samples, output_filename, title=""):
    """Scatter of the first two dimensions. Skipped with a warning when matplotlib is not installed."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        _logger.warning(f"matplotlib is not available, not writing {output_filename}")
        return None

    samples = np.asarray(samples, dtype=float)
    output_filename = Path(output_filename)
    output_filename.parent.mkdir(parents=True, exist_ok=True)
    move_aside(output_filename)
    figure, axes = plt.subplots(figsize=(5, 5))
    second = samples[:, 1] if samples.shape[1] > 1 else np.zeros(samples.shape[0])
    axes.scatter(samples[:, 0], second, s=2, alpha=0.5)
    axes.set_aspect("equal")
    axes.set_title(title)
    figure.savefig(output_filename, dpi=100)
    plt.close(figure)
    return output_filename


def write_verify_report(results, output_filename):
    frame = pd.DataFrame([dataclasses.asdict(result) for result in results],
                         columns=["name", "tolerance", "observed", "passed"])
    return _write_frame(frame, output_filename)
