import dataclasses
import math

IDENTITIES = ("COAREA", "THM_A", "COR_VPRIME", "THM_B", "PROP_A", "PROP_B")
EXTRA_IDENTITIES = ("GB_LEVEL",)


@dataclasses.dataclass(frozen=True)
class IntegralEstimate:
    """Estimate of an integral with its standard error. Exact values carry a
    zero error and `samples_used == 0`."""

    value: float
    std_error: float = 0.0
    samples_used: int = 0
    hit_fraction: float = 0.0
    notes: tuple = ()

    def __post_init__(self):
        assert self.std_error >= 0, self.std_error
        assert 0.0 <= self.hit_fraction <= 1.0, self.hit_fraction

    @classmethod
    def exact(cls, value):
        return cls(float(value))

    @property
    def empty(self):
        return self.samples_used > 0 and self.hit_fraction == 0.0

    def scaled(self, factor):
        return dataclasses.replace(
            self, value=self.value * factor, std_error=self.std_error * abs(factor)
        )

    def minus(self, other):
        """Difference of two independent estimates."""
        return dataclasses.replace(
            self,
            value=self.value - other.value,
            std_error=math.hypot(self.std_error, other.std_error),
            notes=self.notes + other.notes,
        )

    def to_json(self):
        return {"value": self.value, "stderr": self.std_error}


@dataclasses.dataclass(frozen=True)
class IdentityReport:
    identity: str
    lhs: IntegralEstimate = None
    rhs: IntegralEstimate = None
    abs_diff: float = math.nan
    tolerance: float = math.nan
    verdict: str = "skipped"
    notes: tuple = ()
    label: str = ""

    @property
    def passed(self):
        return self.verdict == "pass"

    @property
    def skipped(self):
        return self.verdict == "skipped"

    def to_json(self):
        entry = {"identity": self.identity}
        if self.label:
            entry["label"] = self.label
        entry.update(
            lhs=self.lhs.to_json() if self.lhs else None,
            rhs=self.rhs.to_json() if self.rhs else None,
            diff=None if math.isnan(self.abs_diff) else self.abs_diff,
            tolerance=None if math.isnan(self.tolerance) else self.tolerance,
            verdict=self.verdict,
            notes=list(self.notes),
        )
        return entry


def make_report(identity, lhs, rhs, rtol=1e-3, k_sigma=3.0, notes=(), label="", scale=None):
    """Compares two estimates. The tolerance is the larger of a relative
    floor and `k_sigma` combined standard errors; with `scale` the floor is
    taken relative to that magnitude instead of the two sides."""
    assert identity in IDENTITIES + EXTRA_IDENTITIES, identity
    diff = abs(lhs.value - rhs.value)
    sigma = math.hypot(lhs.std_error, rhs.std_error)
    if scale is None:
        floor = rtol * max(abs(lhs.value), abs(rhs.value), 1.0)
    else:
        floor = rtol * max(abs(scale), abs(lhs.value), abs(rhs.value))
    tolerance = max(floor, k_sigma * sigma)
    notes = tuple(notes) + lhs.notes + rhs.notes
    notes = tuple(dict.fromkeys(notes))
    verdict = "pass" if diff <= tolerance else "fail"
    return IdentityReport(identity, lhs, rhs, diff, tolerance, verdict, notes, label)


def skipped_report(identity, reason, label=""):
    return IdentityReport(identity, notes=(reason,), label=label)
