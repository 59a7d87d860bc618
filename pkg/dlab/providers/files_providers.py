from .._compat import StrEnum
from pathlib import Path
from typing import Any
import io
import json
import os
import tempfile

import numpy as np
import pandas as pd

from .algebra_providers import AlgebraDescriptor, AlgebraKind, Base, make_algebra
from .config_providers import TOOL_VERSION
from .dset_providers import DSet, make_dset
from .errors_providers import DlabValidationError, FileFormatError
from .setops_providers import PairSet, make_pairset


FORMAT_TAG = "#dlab v1"
CONFIG_TAG = "#config"


class SetTag(StrEnum):
    points = "points"
    pairs = "pairs"


def header_line(alg: AlgebraDescriptor, radius_exp: int, tag: SetTag | None = None) -> str:
    fields = [FORMAT_TAG, f"base={alg.base}", f"p={alg.p if alg.p is not None else '-'}",
              f"d={alg.d}", f"m={alg.m}", f"Rexp={radius_exp}"]
    if alg.defining_poly is not None:
        fields.append("poly=" + ",".join(str(c) for c in alg.defining_poly))
    if tag is not None:
        fields.append(f"set={tag}")
    fields.append(f"tool={TOOL_VERSION}")
    return " ".join(fields)


def config_line(config: dict[str, Any] | None) -> str | None:
    if config is None:
        return None
    return f"{CONFIG_TAG} {json.dumps(config, sort_keys=True, default=str)}"


def parse_header(line: str) -> tuple[AlgebraDescriptor, int, SetTag | None]:
    """Rebuild the algebra, the radius exponent and the set tag from a ``#dlab v1`` header line."""
    if not line.startswith(FORMAT_TAG):
        raise FileFormatError(f"Header {line.strip()!r} does not start with {FORMAT_TAG!r}")
    fields = dict(item.split("=", 1) for item in line[len(FORMAT_TAG):].split() if "=" in item)
    try:
        base = Base(fields["base"])
        d = int(fields["d"])
        m = int(fields["m"])
        radius_exp = int(fields["Rexp"])
        tag = SetTag(fields["set"]) if "set" in fields else None
        if base is Base.real:
            alg = make_algebra(AlgebraKind.R, d=d, m=m)
        else:
            poly = [int(c) for c in fields["poly"].split(",")] if "poly" in fields else None
            kind = AlgebraKind.Qp if d == 1 else AlgebraKind.Qp_ext
            alg = make_algebra(kind, p=int(fields["p"]), d=d, m=m, poly=poly)
    except (KeyError, ValueError, DlabValidationError) as e:
        raise FileFormatError(f"Error occurred parsing header {line.strip()!r}: {e}") from e
    return alg, radius_exp, tag


def write_text_atomic(path: str | Path, text: str) -> None:
    """
    Write ``text`` to ``path`` through a temporary file in the same directory and ``os.replace``.

    ### External Effects
    Creates or replaces ``path``; a failed write leaves no partial file behind.
    """
    target = Path(path)
    directory = target.parent if str(target.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile("w", dir=directory, prefix=f".{target.name}.", suffix=".tmp",
                                         delete=False, encoding="utf-8", newline="\n")
    try:
        with handle:
            handle.write(text)
        os.replace(handle.name, target)
    except BaseException:
        Path(handle.name).unlink(missing_ok=True)
        raise


def _render(lines: list[str | None], rows: np.ndarray) -> str:
    buffer = io.StringIO()
    for line in lines:
        if line is not None:
            buffer.write(line + "\n")
    for row in rows:
        buffer.write(" ".join(str(int(c)) for c in row) + "\n")
    return buffer.getvalue()


def write_dset(A: DSet, path: str | Path, config: dict[str, Any] | None = None) -> None:
    write_text_atomic(path, _render([header_line(A.alg, A.radius_exp, SetTag.points), config_line(config)],
                                    A.points))


def write_pairs(G: PairSet, path: str | Path, config: dict[str, Any] | None = None) -> None:
    write_text_atomic(path, _render([header_line(G.alg, G.radius_exp, SetTag.pairs), config_line(config)],
                                    G.pairs))


def _read_rows(path: str | Path, width: int) -> tuple[str, np.ndarray]:
    try:
        with open(path, encoding="utf-8") as f:
            header = f.readline()
        frame = pd.read_csv(path, comment="#", header=None, sep=r"\s+", dtype=np.int64)
    except pd.errors.EmptyDataError:
        return header, np.zeros((0, width), dtype=np.int64)
    except (OSError, ValueError) as e:
        raise FileFormatError(f"Error occurred reading {path}: {e}") from e
    rows = frame.to_numpy(dtype=np.int64)
    if rows.shape[1] != width:
        raise FileFormatError(f"Rows of {path} have {rows.shape[1]} integers, expected {width}")
    return header, rows


def read_header(path: str | Path) -> tuple[AlgebraDescriptor, int, SetTag | None]:
    try:
        with open(path, encoding="utf-8") as f:
            return parse_header(f.readline())
    except OSError as e:
        raise FileFormatError(f"Error occurred reading {path}: {e}") from e


def read_dset(path: str | Path) -> DSet:
    """
    Read a point file written by ``write_dset``.

    ### Returns
    ``DSet`` equal to the one written, bit for bit
    """
    alg, radius_exp, tag = read_header(path)
    if tag is SetTag.pairs:
        raise FileFormatError(f"{path} holds a pair set, expected points")
    _, rows = _read_rows(path, alg.d)
    try:
        return make_dset(alg, rows, radius_exp=radius_exp)
    except DlabValidationError as e:
        raise FileFormatError(f"Error occurred loading {path}: {e}") from e


def read_pairs(path: str | Path) -> PairSet:
    alg, radius_exp, tag = read_header(path)
    if tag is SetTag.points:
        raise FileFormatError(f"{path} holds a point set, expected pairs")
    _, rows = _read_rows(path, 2 * alg.d)
    try:
        return make_pairset(alg, rows, radius_exp=radius_exp)
    except DlabValidationError as e:
        raise FileFormatError(f"Error occurred loading {path}: {e}") from e


def write_frame(frame: pd.DataFrame, path: str | Path, header: str, config: dict[str, Any] | None = None) -> None:
    """CSV through pandas, preceded by the ``#dlab`` header and ``#config`` comment lines."""
    text = _render([header, config_line(config)], np.zeros((0, 0))) + frame.to_csv(index=False, lineterminator="\n")
    write_text_atomic(path, text)


def write_json(payload: Any, path: str | Path, header: str, config: dict[str, Any] | None = None) -> None:
    text = _render([header, config_line(config)], np.zeros((0, 0))) + json.dumps(payload, sort_keys=True, indent=2) + "\n"
    write_text_atomic(path, text)


def tool_header(tool: str) -> str:
    return f"{FORMAT_TAG} tool={TOOL_VERSION} output={tool}"
