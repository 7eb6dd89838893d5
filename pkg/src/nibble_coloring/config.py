from typing import Any, Dict, Literal, Optional

from pydantic import Field, field_validator

from nibble_coloring.io.base import JsonFileIOBase

STRICT_ERROR_EXPONENT = 5.0
OVERRIDE_EXPONENT = 2.0
DEFAULT_D_TILDE = float(2**20)


class NibbleConfig(JsonFileIOBase):
    """Every knob of the coloring pipeline.

    Strict mode uses the exponents 16s and 5, η = κ/log d and treats (C1)-(C3) as hard preconditions. Override mode
    uses `eta`, `codegree_exponent` and `error_exponent` (defaulting to 2) and only logs those checks.

    Attributes:
        eps (float): Slack ε in (0, 1/3).
        strict (bool): Whether to run in strict mode.
        eta (float): Explicit activation probability. Ignored in strict mode.
        codegree_exponent (float): Exponent of the codegree bound d/log^e d.
        error_exponent (float): Exponent of the error terms ℓ/log^e ℓ and d/log^e d.
        d_tilde (float): Lower bound on d_i required by (C1).
        max_retries_per_round (int): Reruns of a round whose outcome has a bad event.
        max_rounds (int): Cap on the number of rounds. None uses the schedule length.
        require_slack (bool): Treat "vertex lost its list slack" as a bad event.
        finisher_max_iterations (int): Sweeps without progress before the finisher falls back to greedy.
        s (int): Codegree arity.
        log_base (str): Base of every logarithm. Only "e" is supported.
    """

    eps: float = Field(default=0.1, gt=0, lt=1 / 3)
    strict: bool = False
    eta: Optional[float] = Field(default=None, gt=0, lt=1)
    codegree_exponent: Optional[float] = Field(default=None, gt=0)
    error_exponent: Optional[float] = Field(default=None, gt=0)
    d_tilde: float = Field(default=DEFAULT_D_TILDE, ge=0)
    max_retries_per_round: int = Field(default=20, ge=1)
    max_rounds: Optional[int] = Field(default=None, ge=0)
    require_slack: bool = False
    finisher_max_iterations: int = Field(default=100, ge=1)
    s: int = Field(default=2, ge=2)
    log_base: Literal["e"] = "e"

    @field_validator("log_base", mode="before")
    @classmethod
    def _natural_log_only(cls, value: Any) -> Any:
        if value != "e":
            raise ValueError(f"log_base must be 'e' (natural logarithm), got {value!r}")
        return value

    def resolved_codegree_exponent(self) -> float:
        if self.strict:
            return 16.0 * self.s
        return OVERRIDE_EXPONENT if self.codegree_exponent is None else self.codegree_exponent

    def resolved_error_exponent(self) -> float:
        if self.strict:
            return STRICT_ERROR_EXPONENT
        return OVERRIDE_EXPONENT if self.error_exponent is None else self.error_exponent

    def slack_event_enabled(self) -> bool:
        return self.require_slack

    def with_overrides(self, **overrides: Any) -> "NibbleConfig":
        """Copy with every non-None override applied and re-validated."""
        data: Dict[str, Any] = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return NibbleConfig.model_validate(data)
