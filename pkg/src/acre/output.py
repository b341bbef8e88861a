"""Writers for field snapshots (legacy VTK, ASCII) and per-step diagnostics (CSV)."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .coupling import SimState
from .diagnostics import StepDiagnostics
from .mesh import Mesh

CSV_HEADER = [
    "step",
    "t",
    "mineral_volume",
    "phi_int",
    "delta_phi_int",
    "reaction_integral",
    "conservation_residual",
    "coupling_iters",
    "lscheme_iters_total",
    "newton_iters",
]

VTK_ARRAYS = ("phi", "c", "T", "phi_c")


def _num(x: float) -> str:
    return "%.17g" % x


def write_fields(state: SimState, mesh: Mesh, path) -> Path:
    """Write ``phi``, ``c``, ``T`` and ``phi*c`` as point data on the grid of cell centers."""
    path = Path(path)
    arrays = {"phi": state.phi, "c": state.c, "T": state.T, "phi_c": state.phi * state.c}
    lines = [
        "# vtk DataFile Version 3.0",
        f"step {state.step} t {_num(state.t)}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {mesh.nx} {mesh.ny} 1",
        f"ORIGIN {_num(mesh.hx / 2)} {_num(mesh.hy / 2)} 0",
        f"SPACING {_num(mesh.hx)} {_num(mesh.hy)} 1",
        f"POINT_DATA {mesh.n_cells}",
    ]
    for name in VTK_ARRAYS:
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_num(v) for v in arrays[name])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_fields(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a file written by :func:`write_fields`; returns ``(header, arrays)``."""
    lines = Path(path).read_text().splitlines()
    header: dict = {}
    words = lines[1].split()
    header["step"], header["t"] = int(words[1]), float(words[3])
    arrays: dict[str, np.ndarray] = {}
    i = 2
    n = None
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        key = parts[0]
        if key == "DIMENSIONS":
            header["dimensions"] = tuple(int(v) for v in parts[1:])
        elif key in ("ORIGIN", "SPACING"):
            header[key.lower()] = tuple(float(v) for v in parts[1:])
        elif key == "POINT_DATA":
            n = int(parts[1])
        elif key == "SCALARS":
            if n is None:
                raise ValueError(f"{path}: SCALARS before POINT_DATA")
            start = i + 2  # skip LOOKUP_TABLE
            arrays[parts[1]] = np.array([float(v) for v in lines[start : start + n]])
            i = start + n
            continue
        i += 1
    return header, arrays


def diagnostics_row(d: StepDiagnostics) -> list[str]:
    return [
        str(d.step),
        _num(d.t),
        _num(d.mineral_volume),
        _num(d.phi_int),
        _num(d.delta_phi_int),
        _num(d.reaction_integral),
        _num(d.conservation_residual),
        str(d.coupling_iterations),
        str(d.lscheme_total),
        "" if d.newton_iterations is None else str(d.newton_iterations),
    ]


class DiagnosticsWriter:
    """Stream diagnostics rows to a CSV file as the run progresses."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(CSV_HEADER)

    def write(self, d: StepDiagnostics) -> None:
        self._writer.writerow(diagnostics_row(d))

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_diagnostics(history: list[StepDiagnostics], path) -> Path:
    with DiagnosticsWriter(path) as w:
        for d in history:
            w.write(d)
    return Path(path)


__all__ = [
    "CSV_HEADER",
    "DiagnosticsWriter",
    "diagnostics_row",
    "read_fields",
    "write_diagnostics",
    "write_fields",
]
