"""The 2D field-frequency transmission map and its CSV file format.

File layout (UTF-8)::

    # magnon-cavity-lab spectrum v1
    # key=value            (any number of metadata lines)
    field_mT,freq_GHz,s21_db
    0,5.0999999999999996,-61.23...
    ...

Rows run over frequency fastest (row-major in field). Numbers carry 17
significant digits. Axis values are the exact decimal products of the stored
tesla / hertz floats, so parsing them back is bit-exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal

import numpy as np

from .errors import SpectrumFormatError, SpectrumStructureError

MAGIC = "# magnon-cavity-lab spectrum v1"
COLUMNS = ("field_mT", "freq_GHz", "s21_db")
_T_TO_MT = Decimal(1000)
_HZ_TO_GHZ = Decimal("1e-9")
_MT_TO_T = Decimal("1e-3")
_GHZ_TO_HZ = Decimal(10 ** 9)


@dataclass(eq=False)
class Spectrum2D:
    field_axis: np.ndarray  # T
    freq_axis: np.ndarray  # Hz
    power: np.ndarray  # dB, shape (n_field, n_freq)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.field_axis = np.asarray(self.field_axis, dtype=float)
        self.freq_axis = np.asarray(self.freq_axis, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        if self.field_axis.ndim != 1 or self.freq_axis.ndim != 1:
            raise SpectrumStructureError("axes must be one-dimensional")
        shape = (self.field_axis.size, self.freq_axis.size)
        if self.power.shape != shape:
            raise SpectrumStructureError(f"power has shape {self.power.shape}, expected {shape}")
        if not np.all(np.isfinite(self.power)):
            raise SpectrumStructureError("power values must be finite")
        self.meta = {str(k): str(v) for k, v in self.meta.items()}

    @property
    def shape(self):
        return self.power.shape

    @property
    def linear_power(self) -> np.ndarray:
        return 10.0 ** (self.power / 10.0)

    def __eq__(self, other):
        if not isinstance(other, Spectrum2D):
            return NotImplemented
        return (np.array_equal(self.field_axis, other.field_axis)
                and np.array_equal(self.freq_axis, other.freq_axis)
                and np.array_equal(self.power, other.power)
                and self.meta == other.meta)


def _decimal_scaled(values, factor: Decimal) -> list[str]:
    # exact decimal product rounded to 17 digits; converting back is then exact
    return [format(Decimal(float(v)) * factor, ".17g") for v in values]


def _parse_scaled(text: str, factor: Decimal) -> float:
    return float(Decimal(text) * factor)


def _parse_column(texts, factor):
    if factor is None:
        return np.array(texts, dtype=float)
    # axis columns repeat heavily, so each distinct string is converted once
    cache = {t: _parse_scaled(t, factor) for t in set(texts)}
    return np.array([cache[t] for t in texts])


def _locate_bad_number(text, start, order):
    parsers = (lambda t: _parse_scaled(t, _MT_TO_T), lambda t: _parse_scaled(t, _GHZ_TO_HZ), float)
    for k, line in enumerate(text[start:], start=start):
        if not line.strip():
            continue
        parts = line.split(",")
        for j, parse in zip(order, parsers):
            try:
                parse(parts[j])
            except (ValueError, ArithmeticError):
                col = sum(len(q) + 1 for q in parts[:j]) + 1
                raise SpectrumFormatError(f"cannot parse number {parts[j]!r}", line=k + 1, offset=col) from None


def write_spectrum(s: Spectrum2D, path) -> None:
    meta = dict(s.meta)
    meta["n_field"] = str(s.field_axis.size)
    meta["n_freq"] = str(s.freq_axis.size)
    lines = [MAGIC]
    for k, v in meta.items():
        if "\n" in k or "\n" in v or "=" in k:
            raise ValueError(f"metadata key/value not serialisable: {k!r}")
        lines.append(f"# {k}={v}")
    lines.append(",".join(COLUMNS))
    fstr = _decimal_scaled(s.field_axis, _T_TO_MT)
    gstr = _decimal_scaled(s.freq_axis, _HZ_TO_GHZ)
    for i, b in enumerate(fstr):
        row = s.power[i]
        lines.extend(f"{b},{g},{p:.17g}" for g, p in zip(gstr, row.tolist()))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def read_spectrum(path) -> Spectrum2D:
    """Parse a spectrum file.

    Raises
    ------
    SpectrumFormatError
        On a bad magic line, a missing or unknown column, or an unparsable
        number; the message carries the 1-based line and column.
    SpectrumStructureError
        If the rows do not form a complete row-major field x frequency grid.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read().splitlines()
    if not text or text[0].strip() != MAGIC:
        raise SpectrumFormatError(f"first line must be {MAGIC!r}", line=1)
    meta = {}
    lineno = 1
    while lineno < len(text) and text[lineno].startswith("#"):
        body = text[lineno][1:].strip()
        if "=" not in body:
            raise SpectrumFormatError("metadata line must be '# key=value'", line=lineno + 1)
        k, v = body.split("=", 1)
        meta[k.strip()] = v
        lineno += 1
    if lineno >= len(text):
        raise SpectrumFormatError("missing column header", line=lineno + 1)
    header = [h.strip() for h in text[lineno].split(",")]
    for col in COLUMNS:
        if col not in header:
            raise SpectrumFormatError(f"missing header column {col!r}", line=lineno + 1)
    extra = [h for h in header if h not in COLUMNS]
    if extra:
        raise SpectrumFormatError(f"unknown header column {extra[0]!r}", line=lineno + 1)
    order = [header.index(c) for c in COLUMNS]
    start = lineno + 1
    lines = [ln for ln in text[start:] if ln.strip()]
    if not lines:
        raise SpectrumStructureError("no data rows")
    ncol = len(COLUMNS)
    flat = ",".join(lines).split(",")
    if len(flat) != ncol * len(lines):
        for k, line in enumerate(text[start:], start=start):
            n = line.count(",") + 1
            if line.strip() and n != ncol:
                raise SpectrumFormatError(f"expected {ncol} fields, got {n}", line=k + 1)
    try:
        cols = [_parse_column(flat[j::ncol], factor) for j, factor in zip(order, (_MT_TO_T, _GHZ_TO_HZ, None))]
    except (ValueError, ArithmeticError):
        _locate_bad_number(text, start, order)
        raise
    data = np.column_stack(cols)
    try:
        n_field = int(meta.pop("n_field")) if "n_field" in meta else np.unique(data[:, 0]).size
        n_freq = int(meta.pop("n_freq")) if "n_freq" in meta else np.unique(data[:, 1]).size
    except ValueError:
        raise SpectrumStructureError("n_field / n_freq metadata must be integers") from None
    if data.shape[0] != n_field * n_freq:
        raise SpectrumStructureError(f"{data.shape[0]} rows do not fill a {n_field} x {n_freq} grid")
    grid = data.reshape(n_field, n_freq, 3)
    field_t = grid[:, 0, 0]
    freq_hz = grid[0, :, 1]
    if not (np.all(grid[:, :, 0] == field_t[:, None]) and np.all(grid[:, :, 1] == freq_hz[None, :])):
        raise SpectrumStructureError("rows are not in row-major field-then-frequency order")
    return Spectrum2D(field_t, freq_hz, grid[:, :, 2], meta)
