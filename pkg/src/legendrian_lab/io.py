"""Run directories, CSV tables and manifests.

Tables are written with a fixed float format and carry the config hash and
package versions on every row, so identical runs give identical bytes.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import scipy

from . import __version__


def versions() -> str:
    return f"legendrian_lab {__version__}; numpy {np.__version__}; scipy {scipy.__version__}"


def _plain(x):
    """JSON-safe, deterministic representation."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in sorted(x.items(), key=lambda kv: str(kv[0]))}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(np.real(x)), float(np.imag(x))]
    return x


def config_hash(config: dict) -> str:
    blob = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    if isinstance(v, (complex, np.complexfloating)):
        return f"{format(float(np.real(v)), '.12g')}{'+' if np.imag(v) >= 0 else '-'}{format(abs(float(np.imag(v))), '.12g')}j"
    return str(v)


def write_csv(path: Path, header: list, rows, chash: str) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(list(header) + ["config_hash", "version"])
        ver = versions()
        for r in rows:
            wr.writerow([fmt(v) for v in r] + [chash, ver])
    return path


def read_csv(path: Path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def qgraph_rows(qg):
    return qg.rows()


def write_qgraph_csv(path: Path, qg, chash: str) -> Path:
    return write_csv(path, ["s", "t", "branch", "re_phi", "im_phi", "alpha"],
                     ([r[0], r[1], int(r[2]), r[3], r[4], r[5]] for r in qg.rows()), chash)


def write_gridfunction_csv(path: Path, gf, chash: str) -> Path:
    return write_csv(path, ["s", "t", "re", "im"], gf.rows(), chash)
