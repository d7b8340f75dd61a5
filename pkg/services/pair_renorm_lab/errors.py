"""Exception hierarchy for the renormalization lab.

Every failure the lab reports on purpose derives from :class:`LabError`; the
CLI turns those into exit code 2 plus a machine-readable error document.
"""

from __future__ import annotations

from typing import Any


class LabError(Exception):
    """Base class for all expected lab failures."""

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details = details

    def to_payload(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"error": type(self).__name__, "message": self.message}
        for key, value in self.details.items():
            payload[key] = _plain(value)
        return payload


def _plain(value: Any) -> Any:
    if isinstance(value, (str, int, bool, type(None))):
        return value
    if isinstance(value, complex):
        return [repr(value.real), repr(value.imag)]
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    try:
        return repr(float(value))
    except (TypeError, ValueError):
        return str(value)


# chebapprox


class FitError(LabError):
    """A fit could not be formed: non-finite samples or too few usable points."""


class DomainError(LabError, ValueError):
    """Argument outside the domain an operation is defined on."""


class ExtrapolationError(DomainError):
    def __init__(self, x: float, lo: float, hi: float) -> None:
        super().__init__(f"point {x!r} is outside the padded interval of [{lo!r}, {hi!r}]", x=x, lo=lo, hi=hi)
        self.x = x
        self.lo = lo
        self.hi = hi


class AnalyticDomainError(DomainError):
    def __init__(self, z: complex, parameter: float, certified: float) -> None:
        super().__init__(
            f"point {z!r} lies on ellipse {parameter:.6g}, beyond the certified {certified:.6g}",
            z=z,
            parameter=parameter,
            certified=certified,
        )
        self.z = z
        self.parameter = parameter
        self.certified = certified


class CompositionDomainError(LabError):
    def __init__(self, link: int, node: float, value: float) -> None:
        super().__init__(
            f"composition link {link} received {value!r} (from node {node!r}) outside its domain",
            link=link,
            node=node,
            value=value,
        )
        self.link = link
        self.node = node
        self.value = value


# pairs


class InvalidPairError(LabError, ValueError):
    pass


class NormalizationError(LabError):
    pass


class PairValidationError(LabError):
    """A pair produced by an operation fails the pair axioms."""


# circle maps and combinatorics


class RepresentationError(LabError):
    pass


class CombinatoricsError(LabError, ValueError):
    pass


class RationalTargetError(CombinatoricsError):
    pass


class ToleranceNotReached(LabError):
    def __init__(self, message: str, best_estimate: float, accuracy: float) -> None:
        super().__init__(message, best_estimate=best_estimate, accuracy=accuracy)
        self.best_estimate = best_estimate
        self.accuracy = accuracy


class TuningError(LabError):
    pass


# renormalization


class NotRenormalizable(LabError):
    pass


class UnboundedTypeError(LabError):
    pass


# configuration


class ConfigError(LabError, ValueError):
    def __init__(self, message: str, line: int | None = None) -> None:
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message, line=line)
        self.line = line
