"""INI run configurations for the command-line front end.

Each subcommand has a schema: section -> key -> (parser, default). A default
of ``REQUIRED`` makes the key mandatory. Unknown sections and keys are
rejected. ``[coeffs]`` and ``[u0]`` are free-form parameter sections whose
keys are checked against the chosen registry entry.

Numbers accept fractions (``dx = 1/32``); lists are comma separated.
"""

import configparser
from fractions import Fraction

from .errors import ConfigurationError

REQUIRED = object()


def _float(s):
    s = s.strip()
    try:
        return float(Fraction(s)) if "/" in s else float(s)
    except (ValueError, ZeroDivisionError):
        raise ConfigurationError(f"not a number: {s!r}") from None


def _int(s):
    try:
        return int(s.strip())
    except ValueError:
        raise ConfigurationError(f"not an integer: {s!r}") from None


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {s!r}")


def _str(s):
    return s.strip()


def _opt(parser):
    def parse(s):
        return None if s.strip() in ("", "none", "auto") else parser(s)
    return parse


def _floats(s):
    return [_float(p) for p in s.split(",") if p.strip()]


def _strs(s):
    return [p.strip() for p in s.split(",") if p.strip()]


def _points(s):
    # "t x y L; t x y L; ..."
    out = []
    for chunk in s.split(";"):
        if not chunk.strip():
            continue
        vals = [_float(v) for v in chunk.split()]
        if len(vals) != 4:
            raise ConfigurationError(f"extra point needs 't x y L', got {chunk.strip()!r}")
        out.append(tuple(vals))
    return out


_RUN = {"threads": (_opt(_int), None)}
_REPORT = {"report": (_opt(_str), None)}

SCHEMAS = {
    "kernels-verify": {
        "run": _RUN,
        "kernels": {
            "series_tol": (_float, 1e-12),
            "n_dual": (_int, 500),
            "n_identity": (_int, 100),
            "n_bounds": (_int, 10_000),
            "seed": (_int, 0),
            "extra_points": (_points, []),
        },
        "output": _REPORT,
    },
    "gronwall-verify": {
        "run": _RUN,
        "gronwall": {
            "variants": (_strs, ["stochastic", "nodrift", "deterministic"]),
            "C_values": (_floats, [0.5, 1.0, 2.0]),
            "T": (_float, 1.0),
            "dt": (_float, 1e-3),
            "dx": (_float, 0.02),
            "n_terms": (_int, 10),
            "t_min": (_float, 0.1),
            "t_max": (_float, 1.0),
            "tol": (_float, 0.10),
            "deterministic_tol": (_float, 0.05),
            "warn_tol": (_float, 0.05),
            "picard_iters": (_int, 20),
            "picard_dt": (_float, 0.01),
            "picard_dx": (_float, 0.05),
            "picard_tol": (_float, 0.02),
        },
        "output": _REPORT,
    },
    "simulate": {
        "run": _RUN,
        "simulate": {
            "bc": (_str, REQUIRED),
            "L": (_float, REQUIRED),
            "dx": (_float, REQUIRED),
            "T": (_float, REQUIRED),
            "dt": (_opt(_float), None),
            "coeffs": (_str, "zero"),
            "u0": (_str, "zero"),
            "seed": (_int, REQUIRED),
            "snapshot_times": (_opt(_floats), None),
            "oracle": (_bool, False),
        },
        "coeffs": None,
        "u0": None,
        "output": {"csv": (_str, REQUIRED)},
    },
    "sweep": {
        "run": _RUN,
        "sweep": {
            "bc": (_str, REQUIRED),
            "L_values": (_floats, REQUIRED),
            "t_values": (_floats, REQUIRED),
            "x_values": (_floats, [0.0]),
            "p": (_float, 2.0),
            "n_reps": (_int, 1000),
            "dx": (_float, 1 / 32),
            "dt": (_opt(_float), None),
            "coeffs": (_str, "linear"),
            "u0": (_str, "zero"),
            "base_seed": (_int, REQUIRED),
            "method": (_str, "auto"),
            "L_master": (_opt(_float), None),
        },
        "coeffs": None,
        "u0": None,
        "output": {"csv": (_str, REQUIRED), "json": (_str, REQUIRED)},
    },
    "small-l-check": {
        "run": _RUN,
        "small_l": {
            "t": (_float, 0.5),
            "L_values": (_floats, [0.2, 0.1, 0.05]),
        },
        "output": _REPORT,
    },
}


def _parser():
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str  # keys are case sensitive (L, T, C_values)
    return cp


def load(command, path=None, text=None, overrides=()):
    """Resolve a configuration for ``command``.

    Parameters
    ----------
    path : str, optional
        INI file; ``text`` may be given instead.
    overrides : sequence of str
        ``section.key=value`` items applied after the file.

    Returns
    -------
    dict
        ``{section: {key: value}}`` with defaults filled in; free-form
        sections map keys to floats.
    """
    schema = SCHEMAS[command]
    cp = _parser()
    try:
        if path is not None:
            with open(path) as fh:
                cp.read_file(fh, source=str(path))
        elif text is not None:
            cp.read_string(text)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path!r}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not (sep and dot and section and name):
            raise ConfigurationError(f"override must look like section.key=value, got {item!r}")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, name, value)

    unknown = [s for s in cp.sections() if s not in schema]
    if unknown:
        raise ConfigurationError(
            f"unknown section(s) {unknown} for {command}; allowed: {sorted(schema)}"
        )
    out = {}
    for section, keys in schema.items():
        raw = dict(cp[section]) if cp.has_section(section) else {}
        if keys is None:
            out[section] = {k: _float(v) for k, v in raw.items()}
            continue
        extra = sorted(set(raw) - set(keys))
        if extra:
            raise ConfigurationError(f"unknown key(s) {extra} in [{section}]")
        vals = {}
        for key, (parse, default) in keys.items():
            if key in raw:
                try:
                    vals[key] = parse(raw[key])
                except ConfigurationError as exc:
                    raise ConfigurationError(f"[{section}] {key}: {exc}") from None
            elif default is REQUIRED:
                raise ConfigurationError(f"missing required key {key!r} in [{section}]")
            else:
                vals[key] = default
        out[section] = vals
    return out


def _text(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return " ".join(_text(x) for x in v)
    if isinstance(v, list):
        sep = "; " if v and isinstance(v[0], tuple) else ", "
        return sep.join(_text(x) for x in v)
    return str(v)


def dump(cfg):
    """Resolved configuration as INI text (stable key order)."""
    lines = []
    for section, keys in cfg.items():
        lines.append(f"[{section}]")
        lines += [f"{k} = {_text(v)}" for k, v in keys.items()]
        lines.append("")
    return "\n".join(lines)
