"""Gaussian PAC-Bayes quantities reported per epoch.

Prior P = N(0, prior_std^2 I) and posterior Q = N(w + dw, posterior_std^2 I)
over k parameters. The penalty drops the bound's constants and is a trend
indicator only.
"""

from dataclasses import dataclass
import math

from model.mlp import ParameterSet


@dataclass(frozen=True)
class GaussianPacConfig:
    prior_std: float = 1.0
    posterior_std: float = 1.0
    perturbation_std: float = 0.0
    sample_count: int = 2
    param_dim: int = 1

    def __post_init__(self):
        issues = []
        if not self.prior_std > 0:
            issues.append(f"prior_std must be > 0, got {self.prior_std}")
        if not self.posterior_std > 0:
            issues.append(f"posterior_std must be > 0, got {self.posterior_std}")
        if self.perturbation_std < 0:
            issues.append(f"perturbation_std must be >= 0, got {self.perturbation_std}")
        if self.sample_count < 2:
            issues.append(f"sample_count must be >= 2, got {self.sample_count}")
        if self.param_dim < 1:
            issues.append(f"param_dim must be >= 1, got {self.param_dim}")
        if issues:
            raise ValueError("Invalid PAC-Bayes config: " + "; ".join(issues))


def _check_mean_sq_norm(mean_sq_norm: float):
    if mean_sq_norm < 0 or not math.isfinite(mean_sq_norm):
        raise ValueError(f"mean_sq_norm must be finite and >= 0, got {mean_sq_norm}")


def squared_norm(params: ParameterSet) -> float:
    """||w||^2 of a parameter snapshot."""
    return params.dot(params)


def gaussian_kl(mean_sq_norm: float, cfg: GaussianPacConfig) -> float:
    """KL(Q || P) in closed form."""
    _check_mean_sq_norm(mean_sq_norm)
    ratio = (cfg.posterior_std / cfg.prior_std) ** 2
    variance_term = cfg.param_dim * (ratio - 1.0 - math.log(ratio))
    kl = 0.5 * (mean_sq_norm / cfg.prior_std ** 2 + variance_term)
    # rounding can leave a tiny negative when the Gaussians coincide
    return max(kl, 0.0)


def pac_penalty(mean_sq_norm: float, cfg: GaussianPacConfig) -> float:
    """sqrt((||w + dw||^2 + k * beta^2) / n)."""
    _check_mean_sq_norm(mean_sq_norm)
    numerator = mean_sq_norm + cfg.param_dim * cfg.perturbation_std ** 2
    return math.sqrt(numerator / cfg.sample_count)
