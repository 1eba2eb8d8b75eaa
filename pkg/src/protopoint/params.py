"""Parameter records for bank distillation and point-prompt extraction.

Two published configurations exist for the grounding stage; the defaults here
use the ablation-validated set (tau_l=0.80, eta_cc=4, delta=10). The
alternative set (0.5, 5, 3) trades precision for recall and stays reachable
through CLI flags.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

KAPPA_LO = 0.65
KAPPA_HI = 0.82
KAPPA_SCALE = 0.90


@dataclass(frozen=True)
class IccdParams:
    """Bank construction and coherence-distillation parameters.

    tau_b gates bank-side foreground coverage (strict), tau_t gates the
    looser held-out target masks, xi is the similarity floor for a valid
    nearest-neighbour match, eta_min the minimum number of valid matches a
    vector needs before it can be scored, n_s the cap on scored source
    images, and k the cap on refined bank size.
    """

    tau_b: float = 0.7
    tau_t: float = 0.3
    xi: float = 0.0
    eta_min: int = 3
    n_s: int = 50
    k: int = 500
    kappa_lo: float = KAPPA_LO
    kappa_hi: float = KAPPA_HI
    scale: float = KAPPA_SCALE

    def __post_init__(self):
        if not (0.0 <= self.tau_t < self.tau_b < 1.0):
            raise ValueError(
                f"need 0 <= tau_t < tau_b < 1, got tau_t={self.tau_t} tau_b={self.tau_b}"
            )
        if self.xi < 0.0:
            raise ValueError(f"similarity floor xi must be >= 0, got {self.xi}")
        if self.eta_min < 1:
            raise ValueError(f"eta_min must be >= 1, got {self.eta_min}")
        if self.n_s < 1:
            raise ValueError(f"n_s must be >= 1, got {self.n_s}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.kappa_lo <= self.kappa_hi:
            raise ValueError("kappa_lo must not exceed kappa_hi")
        if not 0.0 < self.scale <= 1.0:
            raise ValueError(f"scale must be in (0, 1], got {self.scale}")

    def with_overrides(self, **kwargs) -> "IccdParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class TsgParams:
    """Similarity-landscape grounding parameters.

    tau_l delineates the loose candidate mask, eta_cc is the minimum
    connected-component size in patches, delta the inter-peak distance in
    patch units, tau_v the per-prompt validation floor, and b_max an
    optional cap on emitted prompts (None keeps all).
    """

    tau_l: float = 0.80
    eta_cc: int = 4
    delta: int = 10
    tau_v: float = 0.80
    b_max: int | None = None

    def __post_init__(self):
        if not 0.0 < self.tau_l < 1.0:
            raise ValueError(f"tau_l must be in (0, 1), got {self.tau_l}")
        if not 0.0 < self.tau_v < 1.0:
            raise ValueError(f"tau_v must be in (0, 1), got {self.tau_v}")
        if self.eta_cc < 1:
            raise ValueError(f"eta_cc must be >= 1, got {self.eta_cc}")
        if self.delta < 1:
            raise ValueError(f"delta must be >= 1, got {self.delta}")
        if self.b_max is not None and self.b_max < 1:
            raise ValueError(f"b_max must be >= 1 when given, got {self.b_max}")

    def with_overrides(self, **kwargs) -> "TsgParams":
        return replace(self, **kwargs)
