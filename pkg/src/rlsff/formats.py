"""Configuration files and CSV formats.

Data CSV: header ``k,psi_0_0,...,psi_{m-1}_{n-1},y_0,...,y_{n-1}`` with the
regressor flattened row-major, one row per sample, ``k`` strictly increasing
from 1. Row ``k`` holds ``(psi[k-1], y[k])``.

Floats are written with ``repr``, the shortest string that round-trips.
"""

import csv
import io as _io
import json
import logging
import os
import re
import tempfile

import numpy as np

from .batch import History
from .errors import InvalidConfigurationError, InvalidInputError
from .estimator import EstimatorConfig
from .simulation import (
    Constant,
    Cycling,
    RandomGaussian,
    RandomOrthonormalCycle,
    ScenarioSpec,
)

log = logging.getLogger(__name__)

CONFIG_KEYS = {"m", "n", "lambda", "T", "P_init", "theta_init", "scenario"}
SCENARIO_KEYS = {"theta_true", "regressor_policy", "noise_bound", "steps", "seed"}

_PSI_COL = re.compile(r"psi_(\d+)_(\d+)$")
_Y_COL = re.compile(r"y_(\d+)$")


class CSVFormatError(InvalidInputError):
    """Malformed CSV content; ``row`` is the 1-based line number (header = 1)."""

    def __init__(self, message, row=None):
        where = f"row {row}: " if row is not None else ""
        super().__init__(where + message)
        self.row = row


def fmt(x):
    return repr(float(x))


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _warn_unknown(keys, allowed, where):
    unknown = sorted(set(keys) - allowed)
    if unknown:
        log.warning("ignoring unknown keys in %s: %s", where, ", ".join(unknown))
    return unknown


def _require(doc, key, where=""):
    if key not in doc:
        raise InvalidConfigurationError(where + key, "missing")
    return doc[key]


def parse_policy(block, m, n):
    if not isinstance(block, dict) or "kind" not in block:
        raise InvalidConfigurationError("scenario.regressor_policy", "needs a 'kind' entry")
    kind = block["kind"]
    try:
        if kind == "constant":
            return Constant(np.asarray(block["psi"], dtype=float).reshape(m, n))
        if kind == "cycling":
            psis = np.asarray(block["psis"], dtype=float).reshape(-1, m, n)
            return Cycling(tuple(psis))
        if kind == "random_gaussian":
            return RandomGaussian(float(block.get("scale", 1.0)))
        if kind == "random_orthonormal_cycle":
            return RandomOrthonormalCycle()
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidConfigurationError("scenario.regressor_policy", str(exc)) from None
    raise InvalidConfigurationError("scenario.regressor_policy", f"unknown kind {kind!r}")


def parse_scenario(block, m, n, steps=None, noise_bound=None, seed=None):
    """Build a :class:`ScenarioSpec`; explicit arguments override the block."""
    if not isinstance(block, dict):
        raise InvalidConfigurationError("scenario", "must be an object")
    _warn_unknown(block, SCENARIO_KEYS, "scenario")
    theta = _require(block, "theta_true", "scenario.")
    policy = parse_policy(_require(block, "regressor_policy", "scenario."), m, n)
    steps = block.get("steps", 100) if steps is None else steps
    noise_bound = block.get("noise_bound", 0.0) if noise_bound is None else noise_bound
    seed = block.get("seed", 0) if seed is None else seed
    try:
        return ScenarioSpec(
            m=m,
            n=n,
            theta_true=np.asarray(theta, dtype=float),
            regressor_policy=policy,
            noise_bound=float(noise_bound),
            steps=int(steps),
            seed=int(seed),
        )
    except (InvalidInputError, ValueError, TypeError) as exc:
        raise InvalidConfigurationError("scenario", str(exc)) from None


def config_from_dict(doc):
    """Return ``(EstimatorConfig, scenario block or None)`` from a parsed document."""
    if not isinstance(doc, dict):
        raise InvalidConfigurationError("config", "top level must be a JSON object")
    _warn_unknown(doc, CONFIG_KEYS, "config")
    m = _require(doc, "m")
    n = _require(doc, "n")
    values = {}
    for key in ("lambda", "T", "P_init", "theta_init"):
        raw = _require(doc, key)
        try:
            values[key] = np.asarray(raw, dtype=float)
        except (ValueError, TypeError):
            raise InvalidConfigurationError(key, "not numeric") from None
    for key, shape in (("T", (n, n)), ("P_init", (m, m))):
        arr = values[key]
        if arr.ndim == 1 and isinstance(m, int) and isinstance(n, int) and arr.size == shape[0] * shape[1]:
            values[key] = arr.reshape(shape)
    if values["lambda"].ndim != 0:
        raise InvalidConfigurationError("lambda", "must be a scalar")
    config = EstimatorConfig(
        m=m,
        n=n,
        lam=float(values["lambda"]),
        T=values["T"],
        P_init=values["P_init"],
        theta_init=values["theta_init"],
    )
    return config, doc.get("scenario")


def load_config(path):
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfigurationError("config", f"invalid JSON: {exc}") from None
    return config_from_dict(doc)


def data_header(m, n):
    cols = ["k"]
    cols += [f"psi_{i}_{j}" for i in range(m) for j in range(n)]
    cols += [f"y_{j}" for j in range(n)]
    return cols


def _dims_from_header(header):
    if not header or header[0] != "k":
        raise CSVFormatError("header must start with 'k'", row=1)
    psi_idx = [_PSI_COL.match(c) for c in header[1:]]
    y_idx = [_Y_COL.match(c) for c in header[1:]]
    pairs = [(int(p.group(1)), int(p.group(2))) for p in psi_idx if p]
    ys = [int(y.group(1)) for y in y_idx if y]
    if not pairs or not ys:
        raise CSVFormatError("header lacks psi_* or y_* columns", row=1)
    m = max(i for i, _ in pairs) + 1
    n = max(ys) + 1
    expected = data_header(m, n)
    if header != expected:
        raise CSVFormatError(
            f"expected {len(expected)} columns {','.join(expected)}; got {len(header)}", row=1
        )
    return m, n


def format_data_csv(psis, ys):
    psis = np.asarray(psis, dtype=float)
    ys = np.asarray(ys, dtype=float)
    k, m, n = psis.shape
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(data_header(m, n))
    for i in range(k):
        writer.writerow([str(i + 1)] + [fmt(v) for v in psis[i].ravel()] + [fmt(v) for v in ys[i]])
    return buf.getvalue()


def write_data_csv(path, psis, ys):
    atomic_write(path, format_data_csv(psis, ys))


def parse_data_csv(text):
    """Parse data CSV text into a :class:`History`."""
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows:
        raise CSVFormatError("file is empty")
    m, n = _dims_from_header(rows[0])
    width = 1 + m * n + n
    psis, ys = [], []
    last_k = 0
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise CSVFormatError(f"expected {width} fields, got {len(row)}", row=line)
        try:
            k = int(row[0])
            values = np.array([float(v) for v in row[1:]])
        except ValueError as exc:
            raise CSVFormatError(str(exc), row=line) from None
        if k <= last_k or (last_k == 0 and k != 1):
            raise CSVFormatError(f"k must increase strictly from 1, got {k}", row=line)
        if not np.all(np.isfinite(values)):
            raise CSVFormatError("non-finite value", row=line)
        last_k = k
        psis.append(values[: m * n].reshape(m, n))
        ys.append(values[m * n:])
    if not psis:
        raise CSVFormatError("no data rows")
    return History(np.stack(psis), np.stack(ys))


def read_data_csv(path):
    with open(path, newline="") as fh:
        return parse_data_csv(fh.read())


def format_trace_csv(trace):
    """Per-step estimate, innovation, squared error and Lyapunov value."""
    m = trace.history.m
    n = trace.history.n
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["k"] + [f"theta_hat_{i}" for i in range(m)] + [f"innovation_{j}" for j in range(n)]
        + ["error_norm_sq", "W"]
    )
    for r in trace.records:
        writer.writerow(
            [str(r.k)] + [fmt(v) for v in r.theta_hat] + [fmt(v) for v in r.innovation]
            + [fmt(r.error_norm_sq), fmt(r.W)]
        )
    return buf.getvalue()


def format_estimate_csv(trace):
    """Per-step estimate and innovation norm."""
    m = trace.history.m
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k"] + [f"theta_hat_{i}" for i in range(m)] + ["innovation_norm"])
    for r in trace.records:
        writer.writerow(
            [str(r.k)] + [fmt(v) for v in r.theta_hat] + [fmt(np.linalg.norm(r.innovation))]
        )
    return buf.getvalue()


def read_table(path):
    """Read a numeric CSV with a header; return ``(header, array)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CSVFormatError("file is empty")
    return rows[0], np.array([[float(v) for v in row] for row in rows[1:] if row])
