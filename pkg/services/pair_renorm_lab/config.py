"""Experiment configuration: a validated pydantic model parsed from TOML."""

from __future__ import annotations

import re
import tomllib
from pathlib import Path
from typing import Any, Literal, Mapping, NoReturn, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator, model_validator

from .analysis import MetricSettings
from .combinatorics import ContinuedFraction
from .errors import CombinatoricsError, ConfigError
from .numerics import PROFILES
from .pairs import PairSettings
from .renorm import RenormSettings

Subcommand = Literal[
    "tune",
    "extract-pair",
    "renorm-orbit",
    "universality",
    "shift-demo",
    "scaling",
    "stable-set",
    "validate-pair",
]

PAIR_SUBCOMMANDS = frozenset({"renorm-orbit", "validate-pair"})

_TOML_LINE = re.compile(r"line (\d+)")


def _to_kebab(string: str) -> str:
    """Config files spell keys in kebab-case (``c-prime``, ``n-max``)."""

    return string.replace("_", "-")


class ConfigModel(BaseModel):
    model_config = ConfigDict(
        alias_generator=_to_kebab,
        populate_by_name=True,
        extra="forbid",
        frozen=True,
    )


class ExperimentConfig(ConfigModel):
    """Everything one run needs; flags override file keys."""

    subcommand: Subcommand = Field(default="universality")
    precision: Literal["double", "extended"] = Field(default="double")
    n_max: int = Field(default=20, ge=1, le=100, description="Largest admissible height")
    c: float = Field(default=0.0, gt=-0.9, lt=0.9, description="Family parameter of the first lift")
    c_prime: float = Field(default=0.5, gt=-0.9, lt=0.9, description="Family parameter of the second lift")
    cf: str = Field(default="(1)", min_length=1, description="Continued-fraction target or symbol word")
    preperiod: str = Field(default="2", min_length=1, description="Pre-period of the stable-set target")
    steps: int = Field(default=8, ge=0)
    tol: float = Field(default=1e-10, gt=0, description="Tuning tolerance on the rotation number")
    rotation_tol: float = Field(default=1e-12, gt=0)
    degree: int = Field(default=64, ge=8, le=512)
    kappa: float = Field(default=0.05, gt=0, lt=0.5)
    grid: int = Field(default=257, ge=33)
    ellipse: float = Field(default=1.15, gt=1)
    noise_floor: float = Field(default=1e-6, gt=0)
    decay_floor: float = Field(default=1.05, ge=1)
    omega_noise: float = Field(default=0.0, ge=0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    out: str = Field(default="out", min_length=1)
    pair: Optional[str] = Field(default=None, description="Pair document read by renorm-orbit and validate-pair")
    rigid: Optional[float] = Field(default=None, gt=0, lt=1, description="Extract from an exact rotation instead")

    @field_validator("cf", "preperiod")
    @classmethod
    def _check_word(cls, value: str, info: ValidationInfo) -> str:
        try:
            word = ContinuedFraction.parse(value)
        except CombinatoricsError as exc:
            raise ValueError(exc.message) from None
        bound = info.data.get("n_max", 20)
        if not word.is_bounded(bound):
            raise ValueError(f"word {value!r} leaves the alphabet 1..{bound}")
        return value

    @field_validator("steps")
    @classmethod
    def _check_steps(cls, value: int, info: ValidationInfo) -> int:
        precision = info.data.get("precision", "double")
        cap = PROFILES[precision].orbit_cap
        if value > cap:
            raise ValueError(f"steps={value} exceeds the orbit cap {cap} for precision '{precision}'")
        return value

    @model_validator(mode="after")
    def _check_pair_file(self) -> ExperimentConfig:
        if self.subcommand in PAIR_SUBCOMMANDS and not self.pair:
            raise ValueError(f"subcommand '{self.subcommand}' needs a pair file")
        return self

    @property
    def target(self) -> ContinuedFraction:
        """The tuning target; a bare comma list such as ``"1"`` or ``"1,2"`` is the period."""

        word = ContinuedFraction.parse(self.cf)
        return ContinuedFraction(period=word.preperiod) if word.is_rational else word

    @property
    def out_dir(self) -> Path:
        """Artifact directory; an ``out`` ending in ``.csv`` names the orbit table inside its parent."""

        path = Path(self.out)
        return path.parent if path.suffix == ".csv" else path

    @property
    def table_name(self) -> str:
        path = Path(self.out)
        return path.name if path.suffix == ".csv" else "orbit.csv"

    def pair_settings(self) -> PairSettings:
        return PairSettings(degree=self.degree, kappa=self.kappa, n_max=self.n_max)

    def renorm_settings(self) -> RenormSettings:
        return RenormSettings(
            noise_floor=self.noise_floor,
            decay_floor=self.decay_floor,
            pair=self.pair_settings(),
        )

    def metric_settings(self) -> MetricSettings:
        return MetricSettings(grid=self.grid, ellipse=self.ellipse)

    def report_payload(self) -> dict[str, Any]:
        """Config fields that determine the results (output location excluded)."""

        return self.model_dump(exclude={"out"}, by_alias=True)


def _line_of(text: str, key: str) -> Optional[int]:
    names = {key, _to_kebab(key), key.replace("-", "_")}
    pattern = re.compile(r"^\s*(?:" + "|".join(re.escape(name) for name in names) + r")\s*=")
    for number, line in enumerate(text.splitlines(), start=1):
        if pattern.match(line):
            return number
    return None


def _raise_from_validation(exc: ValidationError, text: str = "") -> NoReturn:
    first = exc.errors()[0]
    location = first.get("loc") or ()
    key = str(location[0]) if location else ""
    line = _line_of(text, key) if key and text else None
    message = first.get("msg", "invalid value")
    raise ConfigError(f"{key}: {message}" if key else message, line) from exc


def parse_config(text: str, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Validate TOML ``text``; failures become :class:`ConfigError` with a line number.

    Non-``None`` ``overrides`` (keyed by field name) replace file values
    before validation.
    """

    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        match = _TOML_LINE.search(str(exc))
        raise ConfigError(f"invalid TOML: {exc}", int(match.group(1)) if match else None) from exc
    data = {str(key).replace("-", "_"): value for key, value in data.items()}
    data.update({key: value for key, value in (overrides or {}).items() if value is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        _raise_from_validation(exc, text)


def load_config(path: Path, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, overrides)


def with_overrides(config: ExperimentConfig, **overrides: Any) -> ExperimentConfig:
    """Copy of ``config`` with every non-``None`` override applied and revalidated."""

    changes = {key: value for key, value in overrides.items() if value is not None}
    if not changes:
        return config
    try:
        return ExperimentConfig.model_validate({**config.model_dump(), **changes})
    except ValidationError as exc:
        _raise_from_validation(exc)
