"""Flat ``key = value`` configuration files.

One assignment per line, ``#`` starts a comment, lists are comma separated.
Values are returned as strings; callers coerce with the helpers below.
"""

import math


class ConfigError(ValueError):
    pass


def parse_text(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read(path):
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read())


def format_value(v):
    if isinstance(v, (list, tuple)):
        return ", ".join(format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump(cfg):
    return "".join(f"{k} = {format_value(v)}\n" for k, v in cfg.items())


def check_keys(cfg, allowed):
    unknown = sorted(set(cfg) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


def as_float(v):
    try:
        x = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"not a number: {v!r}") from None
    if math.isnan(x):
        raise ConfigError("NaN is not allowed")
    return x


def as_int(v):
    try:
        f = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"not an integer: {v!r}") from None
    if f != int(f):
        raise ConfigError(f"not an integer: {v!r}")
    return int(f)


def as_float_list(v):
    if isinstance(v, (list, tuple)):
        return [as_float(x) for x in v]
    v = str(v).strip()
    if not v:
        return []
    return [as_float(x) for x in v.split(",")]


def as_int_list(v):
    if isinstance(v, (list, tuple)):
        return [as_int(x) for x in v]
    v = str(v).strip()
    if not v:
        return []
    return [as_int(x) for x in v.split(",")]


def as_bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")
