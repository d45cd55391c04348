"""Reading and writing model description files.

Files are TOML with three tables::

    [system]        # dim, hbar, H1, c (list of matrices)
    [measurement]   # M, or preset = {type = "homodyne"|"heterodyne", eta = ...}
    [feedback]      # f (list of matrices)

Every complex scalar is written as a two-element array ``[re, im]``; a d x d
matrix is a list of d rows of d such pairs.  This keeps the format
unambiguous (a bare number is never accepted where a complex entry is
expected).
"""

import os

import numpy as np

try:
    import tomllib as _toml
except ModuleNotFoundError:  # Python < 3.11
    import tomli as _toml

from .errors import ParseError
from .model import MODEL_TOL, Measurement, SystemModel
from .numkit import require_hermitian


def _as_complex_scalar(obj, where: str) -> complex:
    if (
        isinstance(obj, (list, tuple))
        and len(obj) == 2
        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in obj)
    ):
        return complex(obj[0], obj[1])
    raise ParseError(f"{where}: expected a [re, im] pair, got {obj!r}")


def parse_matrix(obj, where: str) -> np.ndarray:
    """Parse a nested list of [re, im] pairs into a 2-D complex array."""
    if not isinstance(obj, list) or not obj:
        raise ParseError(f"{where}: expected a non-empty list of rows")
    rows = []
    for i, row in enumerate(obj):
        if not isinstance(row, list):
            raise ParseError(f"{where}: row {i} is not a list")
        rows.append([_as_complex_scalar(x, f"{where}[{i}][{j}]") for j, x in enumerate(row)])
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ParseError(f"{where}: rows have unequal lengths")
    return np.array(rows, dtype=complex)


def format_matrix(m: np.ndarray) -> list:
    """Inverse of :func:`parse_matrix`."""
    m = np.asarray(m, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def _load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return _toml.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except _toml.TOMLDecodeError as exc:
        raise ParseError(f"{path}: invalid TOML: {exc}") from exc


def _preset_measurement(preset, n_channels: int, n_currents: int, hbar: float,
                        where: str) -> Measurement:
    if not isinstance(preset, dict) or "type" not in preset:
        raise ParseError(f"{where}: preset must be a table with a 'type' key")
    kind = preset["type"]
    eta = preset.get("eta", 1.0)
    if not isinstance(eta, (int, float)) or isinstance(eta, bool):
        raise ParseError(f"{where}: eta must be a number, got {eta!r}")
    if kind == "homodyne":
        if (n_channels, n_currents) != (1, 1):
            raise ParseError(
                f"{where}: homodyne preset needs 1 coupling operator and "
                f"1 feedback operator, got L={n_channels}, R={n_currents}"
            )
        return Measurement(np.array([[np.sqrt(hbar * eta)]], dtype=complex), hbar)
    if kind == "heterodyne":
        if (n_channels, n_currents) != (1, 2):
            raise ParseError(
                f"{where}: heterodyne preset needs 1 coupling operator and "
                f"2 feedback operators, got L={n_channels}, R={n_currents}"
            )
        mat = np.sqrt(hbar * eta / 2.0) * np.array([[1.0, 1.0j]], dtype=complex)
        return Measurement(mat, hbar)
    raise ParseError(f"{where}: unknown preset type {kind!r}")


def load_model(path) -> SystemModel:
    """Load a :class:`SystemModel` from a TOML model file.

    File-shape problems raise ParseError; physics-level problems (e.g. a
    non-Hermitian H1) propagate as the corresponding validation errors,
    with messages naming the offending field.
    """
    data = _load_toml(path)
    system = data.get("system")
    if not isinstance(system, dict) or "dim" not in system:
        raise ParseError(f"{path}: missing [system] table with a 'dim' key")
    dim = system["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ParseError(f"{path}: system.dim must be a positive integer, got {dim!r}")
    hbar = system.get("hbar", 1.0)
    if not isinstance(hbar, (int, float)) or isinstance(hbar, bool) or hbar <= 0:
        raise ParseError(f"{path}: system.hbar must be a positive number, got {hbar!r}")

    def _check_shape(mat, where):
        if mat.shape != (dim, dim):
            raise ParseError(
                f"{where}: expected a {dim} x {dim} matrix, got shape {mat.shape}"
            )
        return mat

    if "H1" in system:
        hamiltonian = _check_shape(parse_matrix(system["H1"], "system.H1"), "system.H1")
        require_hermitian(hamiltonian, tol=MODEL_TOL, name="system.H1")
    else:
        hamiltonian = np.zeros((dim, dim), dtype=complex)

    couplings = system.get("c", [])
    if not isinstance(couplings, list):
        raise ParseError(f"{path}: system.c must be a list of matrices")
    coupling = [
        _check_shape(parse_matrix(m, f"system.c[{k}]"), f"system.c[{k}]")
        for k, m in enumerate(couplings)
    ]

    fb_table = data.get("feedback", {})
    if not isinstance(fb_table, dict):
        raise ParseError(f"{path}: [feedback] must be a table")
    fbs = fb_table.get("f", [])
    if not isinstance(fbs, list):
        raise ParseError(f"{path}: feedback.f must be a list of matrices")
    feedback = []
    for k, m in enumerate(fbs):
        mat = _check_shape(parse_matrix(m, f"feedback.f[{k}]"), f"feedback.f[{k}]")
        feedback.append(require_hermitian(mat, tol=MODEL_TOL, name=f"feedback.f[{k}]"))

    meas_table = data.get("measurement", {})
    if not isinstance(meas_table, dict):
        raise ParseError(f"{path}: [measurement] must be a table")
    has_m = "M" in meas_table
    has_preset = "preset" in meas_table
    if has_m and has_preset:
        raise ParseError(f"{path}: give measurement.M or measurement.preset, not both")
    if has_m:
        meas = Measurement(parse_matrix(meas_table["M"], "measurement.M"), float(hbar))
    elif has_preset:
        meas = _preset_measurement(
            meas_table["preset"], len(coupling), len(feedback), float(hbar),
            "measurement.preset",
        )
    else:
        # default: all-zero M (currents are pure noise; with f present they still drive feedback)
        meas = Measurement(np.zeros((len(coupling), len(feedback)), dtype=complex), float(hbar))

    return SystemModel(
        dim=dim,
        hbar=float(hbar),
        hamiltonian=hamiltonian,
        coupling=coupling,
        feedback=feedback,
        measurement=meas,
    )


def _fmt_toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_fmt_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def save_model(model: SystemModel, path) -> None:
    """Write a model file that :func:`load_model` reads back identically.

    Always writes the explicit measurement matrix (presets are not
    round-tripped as presets).
    """
    lines = ["[system]"]
    lines.append(f"dim = {model.dim}")
    lines.append(f"hbar = {_fmt_toml_value(model.hbar)}")
    lines.append(f"H1 = {_fmt_toml_value(format_matrix(model.hamiltonian))}")
    lines.append(
        "c = " + _fmt_toml_value([format_matrix(m) for m in model.coupling])
    )
    lines.append("")
    lines.append("[measurement]")
    lines.append(f"M = {_fmt_toml_value(format_matrix(model.measurement.matrix))}")
    lines.append("")
    lines.append("[feedback]")
    lines.append(
        "f = " + _fmt_toml_value([format_matrix(m) for m in model.feedback])
    )
    lines.append("")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))


def load_state(path, dim: int | None = None) -> np.ndarray:
    """Load a density matrix from a TOML file with a top-level or [state] 'rho' key."""
    data = _load_toml(path)
    obj = data.get("rho")
    if obj is None and isinstance(data.get("state"), dict):
        obj = data["state"].get("rho")
    if obj is None:
        raise ParseError(f"{path}: no 'rho' entry found")
    rho = parse_matrix(obj, "rho")
    if rho.shape[0] != rho.shape[1]:
        raise ParseError(f"{path}: rho must be square, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise ParseError(f"{path}: rho has dimension {rho.shape[0]}, expected {dim}")
    return rho


def save_state(rho, path) -> None:
    """Write a density matrix in the format :func:`load_state` reads."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rho = " + _fmt_toml_value(format_matrix(rho)) + "\n")


def load_observable(path, dim: int | None = None):
    """Load a named observable matrix from a TOML file with a 'matrix' key."""
    data = _load_toml(path)
    if "matrix" not in data:
        raise ParseError(f"{path}: no 'matrix' entry found")
    mat = parse_matrix(data["matrix"], "matrix")
    if mat.shape[0] != mat.shape[1]:
        raise ParseError(f"{path}: matrix must be square, got shape {mat.shape}")
    if dim is not None and mat.shape[0] != dim:
        raise ParseError(f"{path}: matrix has dimension {mat.shape[0]}, expected {dim}")
    name = data.get("name")
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]
    return str(name), mat
