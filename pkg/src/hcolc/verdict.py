"""Result records returned by the validators."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Verdict:
    """Outcome of a differential or property check.

    `status` is "Equal"/"Pass" on success, "Counterexample"/"Fail" otherwise.
    """

    status: str
    checked: int = 0
    detail: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in ("Equal", "Pass")

    def to_json(self):
        return {"status": self.status, "checked": self.checked, "detail": _plain(self.detail)}


def equal(checked, **detail):
    return Verdict("Equal", checked, detail)


def counterexample(checked, **detail):
    return Verdict("Counterexample", checked, detail)


@dataclass
class FactsReport:
    """Violations found by a structural-facts or purity check."""

    checked: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def status(self) -> str:
        return "Pass" if self.ok else "Fail"

    def add(self, what, **detail):
        self.violations.append({"violation": what, **_plain(detail)})

    def to_json(self):
        return {"status": self.status, "checked": self.checked, "violations": self.violations[:20]}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (int, float, str, bool)) or obj is None:
        return obj
    return str(obj)
