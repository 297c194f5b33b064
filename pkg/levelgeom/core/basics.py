import builtins

import numpy as np

try:
    import rich.console

    console = rich.console.Console(highlight=False)
except ImportError:
    console = None


def print_(value, color=None):
    value = format_(value)
    if console:
        if color:
            value = f"[{color}]{value}[/{color}]"
        console.print(value)
    else:
        builtins.print(value)


def warn(message):
    print_(f"warning: {message}", color="yellow")


def format_(value, digits=4):
    """Human-readable rendering; numbers are rounded to `digits` significant
    digits, which is only meant for terminal summaries."""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{digits}g}"
    if isinstance(value, dict):
        items = [f"{format_(k)}: {format_(v, digits)}" for k, v in value.items()]
        return "{" + ", ".join(items) + "}"
    if isinstance(value, (list, tuple)):
        inner = ", ".join(format_(x, digits) for x in value)
        return f"[{inner}]" if isinstance(value, list) else f"({inner})"
    if isinstance(value, np.ndarray):
        if value.size <= 8:
            return format_(tuple(value.tolist()), digits)
        shape = ",".join(str(x) for x in value.shape)
        return f"{value.dtype.name}[{shape}]"
    return str(value)


def full(value):
    """Full-precision rendering for artifacts (17 significant digits)."""
    return f"{float(value):.17g}"
