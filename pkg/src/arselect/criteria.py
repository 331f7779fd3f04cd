"""Order-selection criteria and the selected order.

``S_p`` consumes the degrees-of-freedom corrected ``sigma2_tilde_k`` and ``C_p``
consumes ``sigma2_tilde`` at the maximal order; every other criterion uses the
plain residual mean square ``sigma2_hat_k``. ``AIC`` penalises with ``n`` while
``S_n`` uses ``N = n - K_n``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError, DegenerateFitError
from .fit import FitSequence, tilde_factor

_PLAIN = ("aic", "fpe", "sn", "sp", "cp", "bic", "hq")
_ALPHA = ("aic_alpha", "fpe_alpha", "sn_alpha")
_LOG_BASED = ("aic", "aic_alpha", "bic", "hq")

HQ_C = 1.01


@dataclass(frozen=True)
class CriterionId:
    name: str
    alpha: Optional[float] = None
    c: Optional[float] = None

    def __post_init__(self):
        if self.name not in _PLAIN + _ALPHA:
            raise ConfigError(f"unknown criterion {self.name!r}")
        if self.name in _ALPHA:
            if self.alpha is None or not self.alpha > 1:
                raise ConfigError(f"{self.name} needs alpha > 1")
        elif self.alpha is not None:
            raise ConfigError(f"{self.name} takes no alpha")
        if self.name == "hq" and self.c is None:
            object.__setattr__(self, "c", HQ_C)
        if self.name == "hq" and not self.c > 1:
            raise ConfigError("hq needs c > 1")

    @property
    def label(self) -> str:
        if self.alpha is not None:
            return f"{self.name}:{self.alpha:g}"
        if self.name == "hq" and self.c != HQ_C:
            return f"hq:{self.c:g}"
        return self.name

    @classmethod
    def parse(cls, text: str) -> "CriterionId":
        name, _, arg = text.strip().lower().partition(":")
        try:
            value = float(arg) if arg else None
        except ValueError:
            raise ConfigError(f"bad criterion parameter in {text!r}") from None
        if name == "hq":
            return cls("hq", c=value)
        return cls(name, alpha=value)

    def __str__(self):
        return self.label


AIC = CriterionId("aic")
FPE = CriterionId("fpe")
SN = CriterionId("sn")
SP = CriterionId("sp")
CP = CriterionId("cp")
BIC = CriterionId("bic")
HQ = CriterionId("hq")
CORE_CRITERIA = (AIC, FPE, SN, SP, CP)


def parse_criteria(text: str) -> list[CriterionId]:
    """Comma list such as ``"aic,fpe,aic_alpha:3.0"``."""
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise ConfigError("empty criteria list")
    return [CriterionId.parse(t) for t in items]


@dataclass(frozen=True)
class CriterionScores:
    criterion: CriterionId
    scores: NDArray[np.float64]
    k_hat: int

    def rows(self):
        for k, v in enumerate(self.scores, start=1):
            yield [self.criterion.label, k, repr(float(v)), int(k == self.k_hat)]


def write_scores(results, fh) -> None:
    """CSV with columns ``criterion, k, score, selected``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["criterion", "k", "score", "selected"])
    for res in results:
        w.writerows(res.rows())


def score_array(criterion: CriterionId, sigma2_hat, n: int, K: int) -> NDArray[np.float64]:
    """Scores for ``k = 1..K`` along the last axis of ``sigma2_hat``."""
    s = np.asarray(sigma2_hat, dtype=float)
    N = n - K
    k = np.arange(1, K + 1, dtype=float)
    name = criterion.name
    if name in _LOG_BASED and np.any(s <= 0):
        raise DegenerateFitError(f"{criterion.label} needs positive residual variances")
    if name == "sn":
        return (N + 2 * k) * s
    if name == "sn_alpha":
        return (N + criterion.alpha * k) * s
    if name == "aic":
        return np.log(s) + 2.0 * k / n
    if name == "aic_alpha":
        return np.log(s) + criterion.alpha * k / n
    if name == "fpe":
        return (n + k) / (n - k) * s
    if name == "fpe_alpha":
        return (1.0 + criterion.alpha * k / n) * s
    if name == "bic":
        return np.log(s) + k * np.log(n) / n
    if name == "hq":
        return np.log(s) + 2.0 * criterion.c * k * np.log(np.log(n)) / n
    tilde = s * tilde_factor(N, K)
    if name == "sp":
        if N - K - 1 <= 0:
            raise DegenerateFitError("S_p needs N - K_n - 1 > 0")
        return (1.0 + k / (N - k - 1)) * tilde
    if name == "cp":
        return N * s - (N - 2 * k) * tilde[..., -1:]
    raise AssertionError(name)


def select_from_scores(scores) -> NDArray[np.intp]:
    """Smallest minimising order (1-based) along the last axis."""
    return np.argmin(scores, axis=-1) + 1


def score(criterion: CriterionId, fits: FitSequence) -> CriterionScores:
    s = score_array(criterion, fits.sigma2_hat, fits.n, fits.K_n)
    return CriterionScores(criterion, s, int(select_from_scores(s)))


def select(criterion: CriterionId, fits: FitSequence) -> int:
    return score(criterion, fits).k_hat
