"""Output and probe-point utilities."""

import csv
import json
import math
import typing as t
from pathlib import Path

import numpy as np
from scipy.stats import qmc

__all__ = [
    "Header",
    "provenance_line",
    "write_csv",
    "read_csv",
    "write_json",
    "complex_pair",
    "fmt",
    "halton",
    "quarter_plane_probes",
    "loglog_slope",
]

Header = t.Optional[t.Dict[str, t.Any]]


def provenance_line(header: Header, /) -> str:
    """Render run metadata as a single ``# {...}`` comment line (sorted keys, deterministic)."""
    return "# " + json.dumps(header or {}, sort_keys=True, default=_json_default) + "\n"


def fmt(value: float, /) -> str:
    """17 significant digits, enough to round-trip a double."""
    return f"{float(value):.17g}"


def write_csv(
    path: t.Union[str, Path],
    columns: t.Sequence[str],
    rows: t.Iterable[t.Sequence[t.Any]],
    /,
    header: Header = None,
) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        f.write(provenance_line(header))
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path: t.Union[str, Path], /) -> t.List[t.Dict[str, str]]:
    with open(path, newline="") as f:
        return list(csv.DictReader(line for line in f if not line.startswith("#")))


def complex_pair(value: complex, /) -> t.List[float]:
    """JSON form of a complex number.

    >>> complex_pair(1 - 2j)
    [1.0, -2.0]
    """
    value = complex(value)
    return [value.real, value.imag]


def _json_default(value: t.Any):
    if isinstance(value, complex):
        return complex_pair(value)
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(path: t.Union[str, Path], data: t.Any, /) -> Path:
    path = Path(path)
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")
    return path


def halton(count: int, dim: int = 2, /) -> np.ndarray:
    """First ``count`` points of the unscrambled Halton sequence in ``[0, 1)^dim`` (the origin skipped).

    >>> halton(3, 2).round(4).tolist()
    [[0.5, 0.3333], [0.25, 0.6667], [0.75, 0.1111]]
    """
    engine = qmc.Halton(d=dim, scramble=False)
    engine.fast_forward(1)
    return engine.random(count)


def quarter_plane_probes(
    count: int, /, re_range: t.Tuple[float, float] = (-5.0, 0.0), im_range: t.Tuple[float, float] = (0.1, 5.0)
) -> np.ndarray:
    """Deterministic probe frequencies ``z`` with ``Re z`` and ``Im z`` in the given ranges."""
    u = halton(count, 2)
    re = re_range[0] + (re_range[1] - re_range[0]) * u[:, 0]
    im = im_range[0] + (im_range[1] - im_range[0]) * u[:, 1]
    return re + 1j * im


def loglog_slope(x: t.Sequence[float], y: t.Sequence[float], /) -> float:
    """Least-squares slope of ``log y`` against ``log x``.

    >>> round(loglog_slope([1, 2, 4], [1, 0.5, 0.25]), 12)
    -1.0
    """
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if x.size < 2 or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        return math.nan
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
