"""Surrogate reward functions over answer format and response length.

All functions are pure. Lengths enter as the normalized fraction
x = L / L_max of the maximum context length; the shaped length rewards peak
at a tunable turning fraction p and penalize overlong responses. The
combined format-length reward gates at zero whenever the format is wrong,
no matter how good the length is.
"""

from __future__ import annotations

from dataclasses import dataclass, field

VARIANTS = (
    "correctness",
    "format_only",
    "format_length_quadratic",
    "format_length_polyline",
    "linear_length",
)


@dataclass(frozen=True)
class LengthParams:
    """Turning-point fraction p in (0,1) and max context length in tokens."""

    p: float = 0.5
    l_max: int = 3072

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must be in (0,1), got {self.p}")
        if self.l_max < 1:
            raise ValueError(f"l_max must be >= 1, got {self.l_max}")


@dataclass(frozen=True)
class LengthObservation:
    """A raw token count plus its fraction of the context budget."""

    length: int
    fraction: float

    @classmethod
    def from_length(cls, length: int, params: LengthParams, clamp_overlong: bool = True):
        if length < 0:
            raise ValueError(f"length must be nonnegative, got {length}")
        x = length / params.l_max
        if x > 1.0:
            if not clamp_overlong:
                raise ValueError(
                    f"length {length} exceeds l_max {params.l_max} and clamping is disabled"
                )
            x = 1.0
        return cls(length=length, fraction=x)


@dataclass(frozen=True)
class RewardConfig:
    """Selects one reward variant and its length parameters."""

    variant: str
    length_params: LengthParams = field(default_factory=LengthParams)
    clamp_overlong: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(
                f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}"
            )


@dataclass(frozen=True)
class RewardScore:
    """A scored response: total value plus its additive components."""

    value: float
    format_ok: bool
    length_component: float
    format_component: float


def _check_x(x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0,1], got {x}")


def _check_p(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0,1), got {p}")


def format_reward(format_ok: bool) -> float:
    """Binary structural reward: 1 for a valid format, else 0."""
    return 1.0 if format_ok else 0.0


def length_reward_quadratic(x: float, p: float) -> float:
    """Smooth piecewise-quadratic length reward, maximal (=1) at x = p.

    Rises as 1-(1-x/p)^2 on [0,p], falls as 1-2((x-p)/(1-p))^2 on (p,1];
    continuous and differentiable at the turning point.
    """
    _check_x(x)
    _check_p(p)
    if x <= p:
        return 1.0 - (1.0 - x / p) ** 2
    return 1.0 - 2.0 * ((x - p) / (1.0 - p)) ** 2


def length_reward_polyline(x: float, p: float) -> float:
    """Piecewise-linear length reward: 2x up to p, then 3-4x.

    The two branches only join continuously at p = 0.5; at the joint the
    first branch wins, so the value at x = p is always 2p.
    """
    _check_x(x)
    _check_p(p)
    if x <= p:
        return 2.0 * x
    return 3.0 - 4.0 * x


def linear_length_reward(x: float) -> float:
    """Unshaped baseline: reward equals the length fraction itself."""
    _check_x(x)
    return x


def combined_format_length(format_ok: bool, r_l: float) -> RewardScore:
    """Gated combination: format errors cap the total at zero.

    With a valid format the total is 1 + r_l; otherwise min(0, r_l), so a
    badly formatted response can never profit from a good length.
    """
    r_f = format_reward(format_ok)
    if format_ok:
        value = r_f + r_l
    else:
        value = min(0.0, r_f + r_l)
    return RewardScore(
        value=value, format_ok=format_ok, length_component=r_l, format_component=r_f
    )


def _length_fraction(length: int | None, config: RewardConfig) -> float:
    if length is None:
        raise ValueError("record length is required for length-based variants")
    obs = LengthObservation.from_length(length, config.length_params, config.clamp_overlong)
    return obs.fraction


def score_response(
    record,
    config: RewardConfig,
    format_ok: bool,
    correct: bool | None = None,
) -> RewardScore:
    """Dispatch a single response through the configured reward variant.

    `record` needs `.id` and `.length` attributes (see grading.ResponseRecord);
    `format_ok` and `correct` are supplied by the caller since their
    computation (format validation, ground-truth matching) lives elsewhere.
    """
    variant = config.variant
    if variant == "correctness":
        if correct is None:
            raise ValueError(
                f"record {getattr(record, 'id', '?')!r}: correctness reward requires "
                "a ground truth to decide the correct flag"
            )
        v = 1.0 if correct else 0.0
        return RewardScore(value=v, format_ok=format_ok, length_component=0.0, format_component=0.0)

    if variant == "format_only":
        r_f = format_reward(format_ok)
        return RewardScore(value=r_f, format_ok=format_ok, length_component=0.0, format_component=r_f)

    if variant == "format_length_quadratic":
        x = _length_fraction(record.length, config)
        return combined_format_length(format_ok, length_reward_quadratic(x, config.length_params.p))

    if variant == "format_length_polyline":
        x = _length_fraction(record.length, config)
        return combined_format_length(format_ok, length_reward_polyline(x, config.length_params.p))

    # linear_length: x plus a correctness bonus when the flag is known
    x = _length_fraction(record.length, config)
    bonus = 1.0 if correct else 0.0
    return RewardScore(
        value=x + bonus, format_ok=format_ok, length_component=x, format_component=bonus
    )
