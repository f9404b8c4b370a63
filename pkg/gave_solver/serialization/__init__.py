"""
File formats for problems, traces and benchmark tables.

Problems are JSON objects with row-major matrices:

    GAVE: {"n": int, "A": [...], "B": [...], "c": [...]}   (optional "x_star")
    LCP:  {"l": int, "M": [...], "q": [...]}
    HLCP: {"l": int, "C": [...], "D": [...], "p": [...]}

Floats are written with Python's shortest round-trip repr, so reading a file
back reproduces every value exactly. Traces and benchmark tables are CSV with
17 significant digits.
"""

import csv
import json
import logging
import math
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..core import (
    BenchRow,
    DimensionError,
    GaveProblem,
    HlcpProblem,
    IterateLog,
    LcpProblem,
    Matrix,
    ProblemFormatError,
    Trajectory,
    Vector,
)

logger = logging.getLogger(__name__)

BENCH_COLUMNS = (
    "seed",
    "n",
    "gap",
    "t_max",
    "t_max_lyyhc",
    "k_star",
    "steps_used",
    "final_residual",
    "reference_residual",
    "wall_time",
)


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _numbers(data: Dict[str, Any], key: str, length: int) -> List[float]:
    if key not in data:
        raise ProblemFormatError(f"Missing key '{key}'")
    value = data[key]
    if isinstance(value, list) and value and all(isinstance(row, list) for row in value):
        value = [item for row in value for item in row]
    if not isinstance(value, list):
        raise ProblemFormatError(f"'{key}' must be a list of numbers")
    if len(value) != length:
        raise ProblemFormatError(f"'{key}' has {len(value)} entries, expected {length}")
    for item in value:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ProblemFormatError(f"'{key}' contains a non-numeric entry: {item!r}")
        if not math.isfinite(item):
            raise ProblemFormatError(f"'{key}' contains a non-finite entry")
    return [float(item) for item in value]


def _size(data: Dict[str, Any], key: str) -> int:
    if not isinstance(data, dict):
        raise ProblemFormatError("Problem file must hold a JSON object")
    size = data.get(key)
    if isinstance(size, bool) or not isinstance(size, int) or size < 1:
        raise ProblemFormatError(f"'{key}' must be a positive integer, got {size!r}")
    return size


def _matrix(data: Dict[str, Any], key: str, size: int) -> Matrix:
    return np.array(_numbers(data, key, size * size)).reshape(size, size)


def _vector(data: Dict[str, Any], key: str, size: int) -> Vector:
    return np.array(_numbers(data, key, size))


def _flat(M: Matrix) -> List[float]:
    return [float(v) for v in np.asarray(M).ravel()]


def problem_to_dict(problem: GaveProblem, x_star: Optional[Vector] = None) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        "n": problem.n,
        "A": _flat(problem.A),
        "B": _flat(problem.B),
        "c": _flat(problem.c),
    }
    if x_star is not None:
        data["x_star"] = _flat(problem.check_vector(x_star, "x_star"))
    return data


def problem_from_dict(data: Dict[str, Any]) -> GaveProblem:
    """
    Build a GaveProblem from its JSON object. Unknown keys are ignored.

    Raises:
        ProblemFormatError: If a key is missing or has the wrong shape or type
    """
    n = _size(data, "n")
    try:
        return GaveProblem(
            A=_matrix(data, "A", n), B=_matrix(data, "B", n), c=_vector(data, "c", n)
        )
    except DimensionError as e:
        raise ProblemFormatError(str(e)) from e


def lcp_to_dict(lcp: LcpProblem) -> Dict[str, Any]:
    return {"l": lcp.size, "M": _flat(lcp.M), "q": _flat(lcp.q)}


def lcp_from_dict(data: Dict[str, Any]) -> LcpProblem:
    size = _size(data, "l")
    return LcpProblem(M=_matrix(data, "M", size), q=_vector(data, "q", size))


def hlcp_to_dict(hlcp: HlcpProblem) -> Dict[str, Any]:
    return {"l": hlcp.size, "C": _flat(hlcp.C), "D": _flat(hlcp.D), "p": _flat(hlcp.p)}


def hlcp_from_dict(data: Dict[str, Any]) -> HlcpProblem:
    size = _size(data, "l")
    return HlcpProblem(
        C=_matrix(data, "C", size), D=_matrix(data, "D", size), p=_vector(data, "p", size)
    )


def read_json(path: str) -> Dict[str, Any]:
    """
    Load a JSON object from disk.

    Raises:
        ProblemFormatError: If the file is missing, unreadable or not valid JSON
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ProblemFormatError(f"Input file not found: {path}")
    except (OSError, UnicodeDecodeError) as e:
        raise ProblemFormatError(f"Error reading input file '{path}': {e}") from e
    except json.JSONDecodeError as e:
        raise ProblemFormatError(f"Malformed JSON in '{path}': {e}") from e
    if not isinstance(data, dict):
        raise ProblemFormatError(f"'{path}' must hold a JSON object")
    return data


def write_json(path: str, data: Dict[str, Any]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, allow_nan=False)
        f.write("\n")
    logger.debug(f"Wrote {path}")


def read_problem(path: str) -> GaveProblem:
    return problem_from_dict(read_json(path))


def write_problem(path: str, problem: GaveProblem, x_star: Optional[Vector] = None) -> None:
    write_json(path, problem_to_dict(problem, x_star))


def read_embedded_solution(path: str) -> Optional[Vector]:
    """The "x_star" vector stored next to a problem, if any."""
    data = read_json(path)
    if "x_star" not in data:
        return None
    return _vector(data, "x_star", _size(data, "n"))


def read_lcp(path: str) -> LcpProblem:
    try:
        return lcp_from_dict(read_json(path))
    except DimensionError as e:
        raise ProblemFormatError(str(e)) from e


def write_lcp(path: str, lcp: LcpProblem) -> None:
    write_json(path, lcp_to_dict(lcp))


def read_hlcp(path: str) -> HlcpProblem:
    try:
        return hlcp_from_dict(read_json(path))
    except DimensionError as e:
        raise ProblemFormatError(str(e)) from e


def write_hlcp(path: str, hlcp: HlcpProblem) -> None:
    write_json(path, hlcp_to_dict(hlcp))


def _trace_header(n: int) -> List[str]:
    return ["k_or_t"] + [f"x_{i}" for i in range(1, n + 1)] + ["residual_norm"]


def _write_trace(
    path: str, keys: Sequence[str], states: Matrix, residual_norms: Vector
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_trace_header(states.shape[1]))
        for key, state, r_norm in zip(keys, states, residual_norms):
            writer.writerow([key] + [_fmt(v) for v in state] + [_fmt(r_norm)])
    logger.info(f"Wrote {len(keys)} trace rows to {path}")


def write_iterate_log_csv(path: str, log: IterateLog) -> None:
    """One row per iterate; the first column is the step index k."""
    keys = [str(k) for k in range(log.steps_taken + 1)]
    _write_trace(path, keys, log.iterates, log.residual_norms)


def write_trajectory_csv(path: str, traj: Trajectory) -> None:
    """One row per sample; the first column is the time t."""
    keys = [_fmt(t) for t in traj.times]
    _write_trace(path, keys, traj.states, traj.residual_norms)


def read_trace_csv(path: str) -> Tuple[Vector, Matrix, Vector]:
    """
    Parse a trace written by write_iterate_log_csv or write_trajectory_csv.

    Returns:
        Tuple of (k_or_t, states, residual_norms)

    Raises:
        ProblemFormatError: If the header or a row is malformed
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise ProblemFormatError(f"Error reading trace '{path}': {e}") from e
    if not rows:
        raise ProblemFormatError(f"Trace '{path}' is empty")
    header = rows[0]
    n = len(header) - 2
    if n < 1 or header != _trace_header(n):
        raise ProblemFormatError(f"Unexpected trace header: {','.join(header)}")
    try:
        table = np.array([[float(v) for v in row] for row in rows[1:]], dtype=np.float64)
    except ValueError as e:
        raise ProblemFormatError(f"Malformed trace row in '{path}': {e}") from e
    if table.size == 0 or table.shape[1] != n + 2:
        raise ProblemFormatError(f"Trace '{path}' has no rows or ragged rows")
    return table[:, 0], table[:, 1:-1], table[:, -1]


def _bench_cells(row: BenchRow) -> List[str]:
    return [
        str(row.seed),
        str(row.n),
        _fmt(row.gap),
        _fmt(row.t_max),
        "" if row.t_max_lyyhc is None else _fmt(row.t_max_lyyhc),
        str(row.k_star),
        str(row.steps_used),
        _fmt(row.final_residual),
        _fmt(row.reference_residual),
        _fmt(row.wall_time),
    ]


def write_bench_csv(path: str, rows: Iterable[BenchRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(BENCH_COLUMNS)
        for row in rows:
            writer.writerow(_bench_cells(row))
    logger.info(f"Wrote benchmark table to {path}")


def read_bench_csv(path: str) -> List[BenchRow]:
    """
    Raises:
        ProblemFormatError: If the header or a row is malformed
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != BENCH_COLUMNS:
                raise ProblemFormatError(f"Unexpected benchmark header in '{path}'")
            records = list(reader)
    except OSError as e:
        raise ProblemFormatError(f"Error reading benchmark table '{path}': {e}") from e
    try:
        return [
            BenchRow(
                seed=int(r["seed"]),
                n=int(r["n"]),
                gap=float(r["gap"]),
                t_max=float(r["t_max"]),
                t_max_lyyhc=float(r["t_max_lyyhc"]) if r["t_max_lyyhc"] else None,
                k_star=int(r["k_star"]),
                steps_used=int(r["steps_used"]),
                final_residual=float(r["final_residual"]),
                reference_residual=float(r["reference_residual"]),
                wall_time=float(r["wall_time"]),
            )
            for r in records
        ]
    except (TypeError, ValueError) as e:
        raise ProblemFormatError(f"Malformed benchmark row in '{path}': {e}") from e
