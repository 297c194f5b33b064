import io
import json
import math
import pathlib
import re


class Config(dict):
    """Immutable nested run configuration addressed by dotted keys.

    Values keep the type of their defaults: `update()` coerces incoming
    values and refuses keys that the defaults do not declare, so a typo in a
    flag or a config file fails before any sampling starts.
    """

    SEP = "."
    IS_PATTERN = re.compile(r".*[^A-Za-z0-9_.-].*")

    def __init__(self, *args, **kwargs):
        flat = self._flatten(dict(*args, **kwargs))
        for key in flat:
            assert not self.IS_PATTERN.match(key), key
        flat = {key: self._normalize(key, value) for key, value in flat.items()}
        self._flat = flat
        self._nested = self._nest(flat)
        super().__init__(self._nested)

    @property
    def flat(self):
        return self._flat.copy()

    @classmethod
    def load(cls, filename):
        filename = pathlib.Path(filename)
        text = filename.read_text()
        if filename.suffix == ".json":
            return cls(json.loads(text))
        if filename.suffix in (".yml", ".yaml"):
            import ruamel.yaml as yaml

            return cls(yaml.YAML(typ="safe").load(text))
        raise NotImplementedError(filename.suffix)

    def save(self, filename):
        filename = pathlib.Path(filename)
        if filename.suffix == ".json":
            filename.write_text(json.dumps(dict(self), indent=2))
        elif filename.suffix in (".yml", ".yaml"):
            import ruamel.yaml as yaml

            with io.StringIO() as stream:
                yaml.YAML(typ="safe").dump(self._plain(self._nested), stream)
                filename.write_text(stream.getvalue())
        else:
            raise NotImplementedError(filename.suffix)

    def __contains__(self, name):
        try:
            self[name]
        except KeyError:
            return False
        return True

    def __getattr__(self, name):
        if name.startswith("_"):
            return super().__getattribute__(name)
        try:
            return self[name]
        except KeyError:
            raise AttributeError(name)

    def __getitem__(self, name):
        node = self._nested
        for part in name.split(self.SEP):
            if not isinstance(node, dict) or part not in node:
                raise KeyError(name)
            node = node[part]
        return type(self)(node) if isinstance(node, dict) else node

    def __setattr__(self, key, value):
        if key.startswith("_"):
            return super().__setattr__(key, value)
        raise AttributeError(f"Config is immutable, use update() to set '{key}'.")

    def __setitem__(self, key, value):
        raise AttributeError(f"Config is immutable, use update() to set '{key}'.")

    def __reduce__(self):
        return (type(self), (dict(self),))

    def __str__(self):
        rows = [(k + ":", self._format(v), self._typename(v)) for k, v in self._flat.items()]
        if not rows:
            return "\nConfig:"
        width_key = max(len(r[0]) for r in rows)
        width_val = max(len(r[1]) for r in rows)
        lines = ["\nConfig:"]
        for key, val, typ in rows:
            lines.append(f"{key.ljust(width_key)}  {val.ljust(width_val)}  ({typ})")
        return "\n".join(lines)

    def update(self, *args, **kwargs):
        result = self._flat.copy()
        for key, new in self._flatten(dict(*args, **kwargs)).items():
            if self.IS_PATTERN.match(key):
                pattern = re.compile(key)
                targets = [k for k in result if pattern.match(k)]
            else:
                targets = [key] if key in result else []
            if not targets:
                raise KeyError(f"Unknown config key or pattern '{key}'.")
            for target in targets:
                result[target] = self._coerce(target, result[target], new)
        return type(self)(result)

    def _coerce(self, key, old, new):
        if isinstance(old, tuple):
            new = new if isinstance(new, (list, tuple)) else (new,)
            return tuple(self._coerce(key, old[0], x) for x in new)
        if old is None:
            return new
        try:
            if isinstance(old, bool):
                if isinstance(new, str):
                    return {"True": True, "False": False}[new]
                return bool(new)
            if isinstance(old, int):
                value = float(new)
                if not value.is_integer():
                    raise ValueError(f"Cannot convert fractional '{new}' to int.")
                return int(value)
            return type(old)(new)
        except (KeyError, ValueError, TypeError):
            raise TypeError(
                f"Cannot convert '{new}' to {type(old).__name__} for key '{key}' "
                f"with default '{old}'."
            )

    def _flatten(self, mapping):
        result = {}
        for key, value in mapping.items():
            if isinstance(value, dict):
                for inner, leaf in self._flatten(value).items():
                    escaped = self.IS_PATTERN.match(key) or self.IS_PATTERN.match(inner)
                    sep = "\\" + self.SEP if escaped else self.SEP
                    result[f"{key}{sep}{inner}"] = leaf
            else:
                result[key] = value
        return result

    def _nest(self, flat):
        result = {}
        for key, value in flat.items():
            *parents, leaf = key.split(self.SEP)
            node = result
            for part in parents:
                node = node.setdefault(part, {})
            node[leaf] = value
        return result

    def _normalize(self, key, value):
        if isinstance(value, list):
            value = tuple(value)
        if isinstance(value, tuple):
            if not value:
                raise TypeError(f"Empty list for key '{key}' has no element type.")
            kinds = {type(x) for x in value}
            if kinds == {int, float}:
                value = tuple(float(x) for x in value)
            elif len(kinds) != 1:
                raise TypeError(f"Mixed element types for key '{key}': {value}.")
            if not isinstance(value[0], (str, float, int, bool)):
                raise TypeError(f"Unsupported element type for key '{key}'.")
        elif isinstance(value, float) and math.isinf(value):
            raise TypeError(f"Infinite value for key '{key}'.")
        return value

    def _plain(self, node):
        if isinstance(node, dict):
            return {k: self._plain(v) for k, v in node.items()}
        if isinstance(node, tuple):
            return list(node)
        return node

    def _format(self, value):
        if isinstance(value, tuple):
            return "[" + ", ".join(self._format(x) for x in value) + "]"
        return str(value)

    def _typename(self, value):
        if isinstance(value, tuple):
            return self._typename(value[0]) + "s"
        return type(value).__name__
