import collections
import concurrent.futures
import contextlib
import json
import pathlib
import re
import time

import numpy as np


class Logger:
    """Collects scalar records of a run and hands them to its outputs.

    Records are `(name, value)` pairs grouped under an optional prefix; stage
    durations measured with `scope()` are recorded as `timer/<name>`.
    """

    def __init__(self, outputs):
        assert outputs, "Provide a list of logger outputs."
        self.outputs = outputs
        self._records = []
        self._durations = collections.defaultdict(float)

    def add(self, mapping, prefix=None):
        for name, value in dict(mapping).items():
            name = f"{prefix}/{name}" if prefix else name
            value = np.asarray(value)
            if value.ndim != 0:
                raise ValueError(f"Record '{name}' has shape {value.shape}, not a scalar.")
            self._records.append((name, value.item()))

    @contextlib.contextmanager
    def scope(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self._durations[name] += time.perf_counter() - start

    def write(self):
        for name, duration in self._durations.items():
            self._records.append((f"timer/{name}", duration))
        self._durations.clear()
        if not self._records:
            return
        for output in self.outputs:
            output(tuple(self._records))
        self._records.clear()


class TerminalOutput:

    def __init__(self, pattern=r".*", name=None):
        self._pattern = re.compile(pattern)
        self._name = name
        try:
            import rich.console

            self._console = rich.console.Console(highlight=False)
        except ImportError:
            self._console = None

    def __call__(self, records):
        shown = [(k, v) for k, v in records if self._pattern.search(k)]
        if not shown:
            return
        text = " / ".join(f"{k} {self._format_value(v)}" for k, v in shown)
        if self._console:
            self._console.rule(f"[green bold]{self._name or 'levelgeom'}")
            self._console.print(text.replace(" / ", " [blue]/[/blue] "))
        else:
            prefix = f"[{self._name}] " if self._name else ""
            print(prefix + text, flush=True)

    def _format_value(self, value):
        if isinstance(value, (bool, str)):
            return str(value)
        value = float(value)
        if value == 0:
            return "0"
        if 0.01 < abs(value) < 10000:
            return f"{value:.4g}"
        return f"{value:.1e}".replace("+0", "").replace("+", "").replace("-0", "-")


class JSONLOutput:
    """Appends one JSON object per write to `<logdir>/<filename>`; writing
    happens on a single background thread so it never blocks sampling."""

    def __init__(self, logdir, filename="events.jsonl", pattern=r".*", parallel=True):
        self._path = pathlib.Path(logdir) / filename
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._pattern = re.compile(pattern)
        self._executor = parallel and concurrent.futures.ThreadPoolExecutor(max_workers=1)
        self._future = None

    def __call__(self, records):
        if self._executor:
            self._future and self._future.result()
            self._future = self._executor.submit(self._write, records)
        else:
            self._write(records)

    def flush(self):
        self._future and self._future.result()

    def _write(self, records):
        entry = {k: v for k, v in records if self._pattern.search(k)}
        with self._path.open("a") as f:
            f.write(json.dumps(entry) + "\n")
