"""Compensation schedule s(t): a smoothstep ramp capped at kappa."""


def normalized_time(epoch: int, warmup_epochs: int, ramp_epochs: int) -> float:
    """(t - T_w) / T_r clamped to [0, 1]."""
    if ramp_epochs < 1:
        raise ValueError(f"ramp_epochs must be >= 1, got {ramp_epochs}")
    return min(max((epoch - warmup_epochs) / ramp_epochs, 0.0), 1.0)


def smoothstep_raw(t_hat: float) -> float:
    """2 * t^2 * (3 - 2t); reaches 1 at t = 0.5."""
    return 2.0 * t_hat * t_hat * (3.0 - 2.0 * t_hat)


def schedule_scale(epoch: int, warmup_epochs: int, ramp_epochs: int, kappa: float) -> float:
    raw = smoothstep_raw(normalized_time(epoch, warmup_epochs, ramp_epochs))
    return kappa * raw if raw < 1.0 else kappa


def scale_for_mode(
    mode: str, epoch: int, warmup_epochs: int, ramp_epochs: int, kappa: float
) -> float:
    if mode == "constant_scale":
        return kappa
    if mode == "progressive":
        return schedule_scale(epoch, warmup_epochs, ramp_epochs, kappa)
    raise ValueError(f"Unknown schedule mode: {mode}")
