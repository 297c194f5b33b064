import re

from . import config as configlib


class Flags:
    """Maps `--key value ...` command lines onto a `Config`.

    Bare arguments before the first flag are returned as positionals (the
    subcommand); flags that match no key are returned untouched so a caller
    can parse in stages, as `parse_known` does for `--configs`.
    """

    def __init__(self, *args, **kwargs):
        self._config = configlib.Config(*args, **kwargs)

    def parse(self, argv):
        parsed, positionals, remaining = self.parse_known(argv)
        for flag in remaining:
            if flag.startswith("--"):
                raise KeyError(f"Flag '{flag}' did not match any config key.")
        return parsed, positionals

    def parse_known(self, argv):
        values = {}
        positionals, remaining = [], []
        key, vals = None, []
        for arg in list(argv):
            if arg.startswith("--"):
                self._submit(key, vals, values, remaining)
                key, vals = arg, []
                if "=" in arg:
                    key, val = arg.split("=", 1)
                    vals = [val]
            elif key:
                vals.append(arg)
            else:
                positionals.append(arg)
        self._submit(key, vals, values, remaining)
        return self._config.update(values), positionals, remaining

    def help(self):
        lines = str(self._config).split("\n")[2:]
        return "\n".join("--" + re.sub(r"[:,\[\]]", "", line) for line in lines)

    def _submit(self, key, vals, values, remaining):
        if not key:
            return
        name = key[len("--") :]
        if name not in self._config or isinstance(self._config[name], dict):
            remaining.extend([key] + vals)
            return
        if not vals:
            raise ValueError(f"Flag '{key}' was not followed by any values.")
        values[name] = self._parse_value(self._config[name], vals, name)

    def _parse_value(self, default, vals, name):
        if isinstance(default, tuple):
            if len(vals) == 1 and "," in vals[0]:
                vals = vals[0].split(",")
            return tuple(self._parse_value(default[0], [x], name) for x in vals)
        if len(vals) != 1:
            raise ValueError(f"Flag '--{name}' takes one value but got {vals}.")
        value = vals[0]
        if isinstance(default, bool):
            if value not in ("True", "False"):
                raise TypeError(f"Expected True or False for '--{name}', got '{value}'.")
            return value == "True"
        if isinstance(default, int):
            number = float(value)  # Allows 2e6 for integer counts.
            if not number.is_integer():
                raise TypeError(f"Expected an integer for '--{name}', got '{value}'.")
            return int(number)
        if isinstance(default, float):
            return float(value)
        return value

