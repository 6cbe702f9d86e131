"""Plain-text ``key = value`` configuration and model construction from specs.

Example::

    # null-recurrent power law
    model = powerlaw
    alpha = 0.75
    n = 2^8..2^13
"""

from __future__ import annotations

import re

from .errors import ConfigError, DomainError
from .rv import Const, InvLog, LogPow, RegVarFn
from .tails import ExplicitP, FromQ, Geometric, PowerLawTail, RegVarTail

MODELS = ("powerlaw", "geometric", "explicit", "regvar", "fromq")
LFAMILIES = ("const", "logpow", "invlog")

_KEY = re.compile(r"^[A-Za-z][A-Za-z0-9_-]*$")


def parse_config_text(text, source="<config>"):
    """Map of normalised keys (``-`` becomes ``_``) to raw string values.

    Raises :class:`ConfigError` with the offending line for malformed or
    duplicated entries.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"{source}: bad key {key!r}", line=lineno, field=key)
        key = key.replace("-", "_")
        if key in out:
            raise ConfigError(f"{source}: duplicate key", line=lineno, field=key)
        if not value:
            raise ConfigError(f"{source}: empty value", line=lineno, field=key)
        out[key] = (value, lineno)
    return out


def load_config(path):
    with open(path) as fh:
        return parse_config_text(fh.read(), source=str(path))


def parse_int(text, field="value"):
    """Integer with optional ``2^k`` power notation."""
    text = str(text).strip()
    try:
        if "^" in text:
            base, exp = text.split("^", 1)
            return int(base) ** int(exp)
        value = float(text)
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}", field=field) from None
    if value != int(value):
        raise ConfigError(f"not an integer: {text!r}", field=field)
    return int(value)


def parse_grid(text, field="grid"):
    """Sorted unique integers from ``2^a..2^b``, ``a..b``, a single value or a comma list."""
    items = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = (s.strip() for s in part.split("..", 1))
            if lo.startswith("2^") and hi.startswith("2^"):
                a, b = parse_int(lo[2:], field), parse_int(hi[2:], field)
                items.extend(1 << k for k in range(a, b + 1))
            else:
                items.extend(range(parse_int(lo, field), parse_int(hi, field) + 1))
        else:
            items.append(parse_int(part, field))
    if not items:
        raise ConfigError(f"empty grid {text!r}", field=field)
    return sorted(set(items))


def parse_floats(text, field="value"):
    try:
        return [float(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"not a list of numbers: {text!r}", field=field) from None


def _float(spec, key, default=None):
    if spec.get(key) is None:
        if default is None:
            raise ConfigError(f"missing {key!r} for model {spec.get('model')!r}", field=key)
        return default
    try:
        return float(spec[key])
    except (TypeError, ValueError):
        raise ConfigError(f"not a number: {spec[key]!r}", field=key) from None


def build_rv(spec, prefix=""):
    """``RegVarFn`` from ``alpha``, ``lfamily``, ``gamma``, ``c``, ``a`` (optionally prefixed)."""
    get = lambda k: spec.get(prefix + k)  # noqa: E731
    fam = (get("lfamily") or "const").lower()
    if fam == "const":
        lf = Const(_float(spec, prefix + "c", 1.0))
    elif fam == "logpow":
        lf = LogPow(_float(spec, prefix + "gamma"))
    elif fam == "invlog":
        lf = InvLog()
    else:
        raise ConfigError(f"unknown lfamily {fam!r}; choose from {LFAMILIES}", field=prefix + "lfamily")
    return RegVarFn(_float(spec, prefix + "alpha"), lf, _float(spec, prefix + "a", 1.0))


def build_model(spec):
    """Tail model from a flat option dict (string or numeric values)."""
    kind = (spec.get("model") or "").lower()
    try:
        if kind == "powerlaw":
            return PowerLawTail(_float(spec, "alpha"), _float(spec, "c", 1.0))
        if kind == "geometric":
            return Geometric(_float(spec, "q"))
        if kind == "explicit":
            if spec.get("p") is None:
                raise ConfigError("missing 'p' for model 'explicit'", field="p")
            return ExplicitP(parse_floats(spec["p"], "p"))
        if kind == "regvar":
            return RegVarTail(build_rv(spec))
        if kind == "fromq":
            if spec.get("q") is None:
                raise ConfigError("missing 'q' for model 'fromq'", field="q")
            return FromQ(parse_floats(spec["q"], "q"))
    except DomainError as exc:
        raise ConfigError(str(exc), field="model") from exc
    raise ConfigError(f"unknown model {kind!r}; choose from {MODELS}", field="model")


def envelope(spec, model):
    """The ``rho`` used by bound suites: explicit ``rv_*`` keys, else the model's own."""
    if spec.get("rv_alpha") is not None:
        return build_rv(spec, prefix="rv_")
    return model.rv
