"""
Job configuration and ensemble documents.

An ensemble document mirrors the command-line flags:

```json
{"lambda": {"2": 0.5, "3": 0.5}, "rho": {"6": 1.0}, "n": 1200}
```

and may be written as JSON, TOML or YAML; the format is chosen by file suffix.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

from serde import coerce, field, serde
from serde.json import from_json

from .core import EnsembleError, ValidationError, logger
from .ensemble import DegreeDistribution, Ensemble, parse_degree_spec

__all__ = ["EnsembleSpec", "JobConfig", "load_ensemble"]


@serde(type_check=coerce)
@dataclass
class EnsembleSpec:
    """
    Ensemble as stored in a configuration file. Degrees are string keys.
    """

    lambda_: dict[str, float] = field(rename="lambda")
    rho: dict[str, float]
    n: Optional[int] = None
    normalize: bool = False

    def to_ensemble(self) -> Ensemble:
        return Ensemble(
            _distribution(self.lambda_, self.normalize),
            _distribution(self.rho, self.normalize),
            self.n,
        )


def _distribution(coeffs: dict[str, float], normalize: bool) -> DegreeDistribution:
    parsed: dict[int, float] = {}
    for key, value in coeffs.items():
        try:
            parsed[int(key)] = float(value)
        except ValueError:
            raise EnsembleError(f"malformed degree {key!r}", token=f"{key}:{value}")
    return DegreeDistribution.from_mapping(parsed, normalize=normalize)


def load_ensemble(path: Path) -> EnsembleSpec:
    """
    Read an ensemble document from `.json`, `.toml` or `.yaml`/`.yml`.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ValidationError(f"cannot read ensemble file {str(path)!r}: {e.strerror}")
    suffix = path.suffix.lower()
    logger.debug(f"loading ensemble from {path}")
    if suffix == ".json":
        return from_json(EnsembleSpec, text)
    if suffix == ".toml":
        from serde.toml import from_toml

        return from_toml(EnsembleSpec, text)
    if suffix in (".yaml", ".yml"):
        from serde.yaml import from_yaml

        return from_yaml(EnsembleSpec, text)
    raise ValidationError(f"unsupported ensemble file type {suffix!r}: {str(path)!r}")


@serde(type_check=coerce)
@dataclass
class JobConfig:
    """
    Options shared by every command: the ensemble source and the output target.

    The ensemble comes either from `lambda_text`/`rho_text` or from `ensemble_path`, never
    both. `n` overrides the block length of a file.
    """

    command: str
    lambda_text: Optional[str] = None
    rho_text: Optional[str] = None
    ensemble_path: Optional[str] = None
    n: Optional[int] = None
    normalize: bool = False
    output_format: Literal["json", "csv"] = "json"
    out: Optional[str] = None
    threads: int = 0

    def __post_init__(self) -> None:
        inline = self.lambda_text is not None or self.rho_text is not None
        if inline and self.ensemble_path is not None:
            raise ValidationError("give either --lambda/--rho or --ensemble, not both")
        if not inline and self.ensemble_path is None:
            raise ValidationError("an ensemble is required: --lambda and --rho, or --ensemble")
        if inline and (self.lambda_text is None or self.rho_text is None):
            raise ValidationError("--lambda and --rho must be given together")
        if self.n is not None and self.n <= 0:
            raise ValidationError(f"block length must be positive: {self.n!r}")
        if self.threads < 0:
            raise ValidationError(f"thread count must be non-negative: {self.threads!r}")
        if self.output_format not in ("json", "csv"):
            raise ValidationError(f"unknown output format {self.output_format!r}")

    def ensemble(self) -> Ensemble:
        if self.ensemble_path is not None:
            ens = load_ensemble(Path(self.ensemble_path)).to_ensemble()
            return ens if self.n is None else ens.with_n(self.n)
        assert self.lambda_text is not None and self.rho_text is not None
        return Ensemble(
            parse_degree_spec(self.lambda_text, normalize=self.normalize),
            parse_degree_spec(self.rho_text, normalize=self.normalize),
            self.n,
        )
