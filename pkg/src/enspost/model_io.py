"""Plain-text model serialization (round-trip exact).

Format, one model per file:

    ENSPOST-LSTM v1 D=<d> H=<h> Lw=<w>
    W_f
    <H lines of D floats>
    U_f
    <H lines of H floats>
    b_f
    <one line of H floats>
    ...                         (same pattern for g, i, o gates)
    W_d
    <one line of H floats>
    b_d
    <one line, 1 float>
    scaler_in
    <mins line, D floats>
    <maxs line, D floats>
    scaler_out
    <min line, 1 float>
    <max line, 1 float>

Floats are written with 17 significant digits, which reproduces IEEE
doubles exactly on reload.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .lstm import GATES, LstmParams
from .scaling import MinMaxScaler
from .training import LstmModel

_HEADER_PREFIX = "ENSPOST-LSTM v1"


def _fmt_row(row: np.ndarray) -> str:
    return " ".join(f"{v:.17g}" for v in np.atleast_1d(row))


def _block_lines(name: str, tensor: np.ndarray) -> list[str]:
    lines = [name]
    t = np.atleast_2d(tensor)
    for row in t:
        lines.append(_fmt_row(row))
    return lines


def save_model(model: LstmModel, path: str | Path) -> None:
    d, h = model.input_size, model.hidden_size
    lines = [f"{_HEADER_PREFIX} D={d} H={h} Lw={model.lookback}"]
    p = model.params
    for g in GATES:
        lines += _block_lines(f"W_{g}", p[f"W_{g}"])
        lines += _block_lines(f"U_{g}", p[f"U_{g}"])
        lines += _block_lines(f"b_{g}", p[f"b_{g}"])
    lines += _block_lines("W_d", p["W_d"][0])
    lines += _block_lines("b_d", p["b_d"])
    lines += _block_lines("scaler_in", np.vstack([model.scaler_in.mins, model.scaler_in.maxs]))
    lines += _block_lines("scaler_out", np.vstack([model.scaler_out.mins, model.scaler_out.maxs]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path: str | Path) -> LstmModel:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(_HEADER_PREFIX):
        raise DataFormatError(f"{path}: missing '{_HEADER_PREFIX}' header")
    try:
        fields = dict(part.split("=") for part in lines[0].split()[2:])
        d, h, lw = int(fields["D"]), int(fields["H"]), int(fields["Lw"])
    except (ValueError, KeyError) as exc:
        raise DataFormatError(f"{path}: malformed header {lines[0]!r}") from exc

    pos = 1

    def read_block(name: str, n_rows: int, n_cols: int) -> np.ndarray:
        nonlocal pos
        if pos >= len(lines) or lines[pos].strip() != name:
            got = lines[pos].strip() if pos < len(lines) else "<eof>"
            raise DataFormatError(f"{path}: expected block {name!r}, got {got!r}")
        pos += 1
        rows = []
        for _ in range(n_rows):
            if pos >= len(lines):
                raise DataFormatError(f"{path}: truncated block {name!r}")
            vals = [float(v) for v in lines[pos].split()]
            if len(vals) != n_cols:
                raise DataFormatError(
                    f"{path}: block {name!r} row has {len(vals)} values, expected {n_cols}"
                )
            rows.append(vals)
            pos += 1
        return np.array(rows)

    tensors: dict[str, np.ndarray] = {}
    for g in GATES:
        tensors[f"W_{g}"] = read_block(f"W_{g}", h, d)
        tensors[f"U_{g}"] = read_block(f"U_{g}", h, h)
        tensors[f"b_{g}"] = read_block(f"b_{g}", 1, h)[0]
    tensors["W_d"] = read_block("W_d", 1, h)
    tensors["b_d"] = read_block("b_d", 1, 1)[0]
    s_in = read_block("scaler_in", 2, d)
    s_out = read_block("scaler_out", 2, 1)
    return LstmModel(
        params=LstmParams(tensors),
        scaler_in=MinMaxScaler(s_in[0], s_in[1]),
        scaler_out=MinMaxScaler(s_out[0], s_out[1]),
        lookback=lw,
    )
