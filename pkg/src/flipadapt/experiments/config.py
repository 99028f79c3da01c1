"""Line-oriented ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored.  Keys match the long CLI flag
names with dashes or underscores (``snr-grid`` and ``snr_grid`` are the
same key).  Values are kept as strings; the CLI parses them with the same
converters it uses for flags.
"""

from __future__ import annotations


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def load_config(path) -> dict[str, str]:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None
