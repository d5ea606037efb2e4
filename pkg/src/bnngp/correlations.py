"""Closed-form quadratic-correlation analytics for single-bottleneck ReLU nets.

Squares of distinct outputs of a single-bottleneck network are correlated
even though the outputs themselves are not.  The correlation depends on the
2x2 covariance C of the bottleneck preactivations only through its diagonal
and the bottleneck angle beta (cos beta = c_ab / sqrt(c_aa c_bb)), decays
with the post-bottleneck depth D through the scale ratio r_D, and undergoes
a phase transition at v_w = 1: the infinite-depth limit vanishes for
v_w <= 1 and stays angle-dependent for v_w > 1, which is what makes the
input Gram matrix recoverable from infinitely deep networks in that phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    DomainError,
    InvalidInputError,
    NotInImageError,
    NotInvertibleError,
)
from .params import NORMALIZED_RELU, Hyperparams

__all__ = [
    "BottleneckGeometry",
    "CorrelationReport",
    "r_depth",
    "r_infinity",
    "depth_scale",
    "bottleneck_angle_from_input_angle",
    "quad_cov_between",
    "quad_corr_between",
    "quad_corr_between_inf",
    "quad_corr_single_inf",
    "quad_corr_matrix",
    "quad_corr_matrix_inf",
    "depth_series",
    "recover_gram_between",
    "recover_gram_single",
    "correlation_report",
]


@dataclass(frozen=True)
class BottleneckGeometry:
    """2x2 covariance of the bottleneck preactivations for an input pair.

    ``C`` includes the bottleneck noise v_n when built with
    ``include_noise=True`` (which keeps it invertible).  ``alpha`` optionally
    records the input angle when the inputs lie on a known sphere.
    """

    C: np.ndarray
    alpha: float | None = None

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        if C.shape != (2, 2) or not np.all(np.isfinite(C)):
            raise InvalidInputError("C must be a finite 2x2 matrix")
        if abs(C[0, 1] - C[1, 0]) > 1e-12 * max(1.0, abs(C[0, 1])):
            raise InvalidInputError("C must be symmetric")
        if C[0, 0] <= 0 or C[1, 1] <= 0 or np.linalg.det(C) <= 0:
            raise InvalidInputError("C must be positive definite")
        object.__setattr__(self, "C", C)

    @property
    def beta(self) -> float:
        """Bottleneck angle: acos of the (clamped) preactivation correlation."""
        rho = self.C[0, 1] / math.sqrt(self.C[0, 0] * self.C[1, 1])
        return math.acos(min(1.0, max(-1.0, rho)))

    def angle(self, a: int, b: int) -> float:
        return 0.0 if a == b else self.beta

    @classmethod
    def from_inputs(cls, x1, x2, h: Hyperparams, pre_depth: int,
                    include_noise: bool = True, phi=NORMALIZED_RELU,
                    alpha: float | None = None) -> "BottleneckGeometry":
        """Propagate an input pair through ``pre_depth`` wide hidden layers."""
        X = np.vstack([np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)])
        C = kernels.nngp_kernel(X, pre_depth, h, phi)
        if include_noise:
            C = C + h.v_n * np.eye(2)
        return cls(C=C, alpha=alpha)

    @classmethod
    def from_input_angle(cls, alpha: float, h: Hyperparams,
                         include_noise: bool = False) -> "BottleneckGeometry":
        """Unit-norm inputs at angle alpha feeding the bottleneck directly."""
        x1 = np.array([1.0, 0.0])
        x2 = np.array([math.cos(alpha), math.sin(alpha)])
        return cls.from_inputs(x1, x2, h, pre_depth=0,
                               include_noise=include_noise, alpha=float(alpha))


def r_depth(h: Hyperparams, D: int) -> float:
    """Bias-to-weight scale ratio r_D governing depth decay.

    r_D = v_n + D v_b when v_w = 1 (within 1e-12), otherwise
    v_n / v_w^D + v_b/(1 - v_w) (1/v_w^D - 1); computed through
    exp(-D log v_w) so extreme depths saturate to the correct limit
    (overflow to +inf in the symmetric phase is the limit itself).
    """
    if D < 1:
        raise InvalidInputError("D must be >= 1")
    if abs(h.v_w - 1.0) <= 1e-12:
        return h.v_n + D * h.v_b
    with np.errstate(over="ignore"):
        inv_wD = float(np.exp(-D * np.log(h.v_w)))
        return h.v_n * inv_wD + h.v_b / (1.0 - h.v_w) * (inv_wD - 1.0)


def r_infinity(h: Hyperparams) -> float:
    """Infinite-depth limit of r_D: v_b / (v_w - 1) for v_w > 1, else +inf."""
    if h.v_w > 1.0:
        return h.v_b / (h.v_w - 1.0)
    return math.inf


def depth_scale(h: Hyperparams) -> float:
    """Characteristic depth of quadratic-correlation decay.

    1/ln(1/v_w^2) for v_w < 1, 1/ln(v_w) for v_w > 1; diverges at the
    phase boundary v_w = 1.
    """
    if h.v_w == 1.0:
        return math.inf
    if h.v_w < 1.0:
        return 1.0 / math.log(1.0 / h.v_w**2)
    return 1.0 / math.log(h.v_w)


def bottleneck_angle_from_input_angle(alpha: float, h: Hyperparams) -> float:
    """Bottleneck angle for unit-norm inputs with no pre-bottleneck layers:
    cos(beta) = (v_b + v_w cos(alpha)) / (v_b + v_w).
    """
    if alpha < -1e-12 or alpha > math.pi + 1e-12:
        raise DomainError("alpha must lie in [0, pi]")
    alpha = min(math.pi, max(0.0, alpha))
    ratio = (h.v_b + h.v_w * math.cos(alpha)) / (h.v_b + h.v_w)
    return math.acos(min(1.0, max(-1.0, ratio)))


def _j2_factor(beta: float) -> float:
    return (2.0 / math.pi) * kernels.j2(beta) - 1.0


def quad_cov_between(geom: BottleneckGeometry, h: Hyperparams, D: int, H: int,
                     a: int = 0, b: int = 1) -> float:
    """Cov[F_1(x_a)^2, F_2(x_b)^2] = v_w^{2D} c_aa c_bb / H ((2/pi) J2 - 1)."""
    _check_dh(D, H)
    c_aa, c_bb = geom.C[a, a], geom.C[b, b]
    return (h.v_w ** (2 * D) * c_aa * c_bb / H) * _j2_factor(geom.angle(a, b))


def _corr_denominator(h, H, r, c_aa, c_bb) -> float:
    with np.errstate(over="ignore"):
        return math.sqrt(
            (15.0 + 2.0 * H * (r / c_aa + 1.0) ** 2)
            * (15.0 + 2.0 * H * (r / c_bb + 1.0) ** 2)
        )


def quad_corr_between(geom: BottleneckGeometry, h: Hyperparams, D: int,
                      H: int, a: int = 0, b: int = 1) -> float:
    """Corr[F_1(x_a)^2, F_2(x_b)^2] at post-bottleneck depth D, width H."""
    _check_dh(D, H)
    r = r_depth(h, D)
    denom = _corr_denominator(h, H, r, geom.C[a, a], geom.C[b, b])
    if math.isinf(denom):
        return 0.0
    return _j2_factor(geom.angle(a, b)) / denom


def quad_corr_between_inf(geom: BottleneckGeometry, h: Hyperparams, H: int,
                          a: int = 0, b: int = 1) -> float:
    """Infinite-depth between-output quadratic correlation.

    Identically 0 for v_w <= 1 (symmetric phase); for v_w > 1 replaces r_D
    by its limit v_b / (v_w - 1).
    """
    _check_dh(1, H)
    if h.v_w <= 1.0:
        return 0.0
    r = r_infinity(h)
    return _j2_factor(geom.angle(a, b)) / _corr_denominator(
        h, H, r, geom.C[a, a], geom.C[b, b]
    )


def quad_corr_single_inf(geom: BottleneckGeometry, h: Hyperparams, H: int,
                         a: int = 0, b: int = 1) -> float:
    """Infinite-depth quadratic correlation of one output at two inputs.

    Identically 1 for v_w <= 1; for v_w > 1 it is 3 q_x_inf plus a bias
    term built from A_c = v_b/((v_w - 1) c) + 1 for the two diagonal
    entries of C.
    """
    _check_dh(1, H)
    if h.v_w <= 1.0:
        return 1.0
    r = r_infinity(h)
    A_a = r / geom.C[a, a] + 1.0
    A_b = r / geom.C[b, b] + 1.0
    bias = (A_a * A_b) / math.sqrt(
        (15.0 / (2.0 * H) + A_a**2) * (15.0 / (2.0 * H) + A_b**2)
    )
    return 3.0 * quad_corr_between_inf(geom, h, H, a, b) + bias


def quad_corr_matrix(geom: BottleneckGeometry, h: Hyperparams, D: int,
                     H: int) -> np.ndarray:
    """2x2 matrix of finite-depth between-output quadratic correlations."""
    return np.array([
        [quad_corr_between(geom, h, D, H, a, b) for b in (0, 1)] for a in (0, 1)
    ])


def quad_corr_matrix_inf(geom: BottleneckGeometry, h: Hyperparams,
                         H: int) -> np.ndarray:
    """2x2 matrix of infinite-depth between-output quadratic correlations."""
    return np.array([
        [quad_corr_between_inf(geom, h, H, a, b) for b in (0, 1)] for a in (0, 1)
    ])


def depth_series(geom: BottleneckGeometry, h: Hyperparams, H: int,
                 D_max: int) -> np.ndarray:
    """quad_corr_between over D = 1..D_max (off-diagonal entry)."""
    if D_max < 2:
        raise InvalidInputError("D_max must be >= 2")
    return np.array([
        quad_corr_between(geom, h, D, H) for D in range(1, D_max + 1)
    ])


def _check_dh(D, H):
    if D < 1:
        raise InvalidInputError("post-bottleneck depth D must be >= 1")
    if H < 1:
        raise InvalidInputError("bottleneck width H must be >= 1")


# ---------------------------------------------------------------------------
# Gram-matrix recovery from infinite-depth correlations (v_w > 1 phase)
# ---------------------------------------------------------------------------


def _require_broken_phase(h: Hyperparams):
    if h.v_w <= 1.0:
        raise NotInvertibleError(
            "infinite-depth correlations carry no input information for v_w <= 1"
        )
    if h.v_b <= 0.0:
        raise NotInvertibleError(
            "v_b = 0 makes the diagonal correlation independent of C; the "
            "Gram matrix cannot be recovered"
        )


def _diag_from_qxx(q_aa: float, h: Hyperparams, H: int) -> float:
    """Solve 5 / (15 + 2H (r_inf/c + 1)^2) = q_aa for c."""
    if not (0.0 < q_aa < 5.0 / (15.0 + 2.0 * H)):
        raise NotInImageError(
            f"diagonal entry {q_aa:g} outside (0, 5/(15+2H)) for H={H}"
        )
    s = math.sqrt((5.0 / q_aa - 15.0) / (2.0 * H))
    return r_infinity(h) / (s - 1.0)


def recover_gram_between(Qx_inf, h: Hyperparams, H: int, pre_depth: int,
                         noise_in_cov: bool = True) -> np.ndarray:
    """Invert the map Gram matrix -> infinite-depth quadratic correlations.

    Steps: solve the diagonal entries of C from the diagonal of Q (monotone,
    closed form), solve the bottleneck angle from the off-diagonal by
    inverting J2, then run the ReLU kernel recursion backwards ``pre_depth``
    times and strip the first-layer affine map.  ``noise_in_cov`` removes
    the v_n I that geometry construction added to C.
    """
    _require_broken_phase(h)
    Q = np.asarray(Qx_inf, dtype=float)
    if Q.shape != (2, 2):
        raise InvalidInputError("Qx_inf must be 2x2")
    c_aa = _diag_from_qxx(Q[0, 0], h, H)
    c_bb = _diag_from_qxx(Q[1, 1], h, H)
    r = r_infinity(h)
    denom = _corr_denominator(h, H, r, c_aa, c_bb)
    target = 0.5 * math.pi * (Q[0, 1] * denom + 1.0)
    if target < -1e-12 or target > 3.0 * math.pi + 1e-12:
        raise NotInImageError("off-diagonal entry outside the image of J2")
    beta = kernels.j2_inverse(target)
    c_ab = math.cos(beta) * math.sqrt(c_aa * c_bb)
    C = np.array([[c_aa, c_ab], [c_ab, c_bb]])
    if noise_in_cov:
        C = C - h.v_n * np.eye(2)
        if np.any(np.diag(C) <= 0):
            raise NotInImageError("recovered variances not above the noise floor")
    K = C
    for _ in range(pre_depth):
        K = kernels.relu_kernel_backstep(K, h)
    return (K - h.v_b) / h.v_w


def recover_gram_single(Q_inf, diag_G, h: Hyperparams, H: int, pre_depth: int,
                        noise_in_cov: bool = True) -> np.ndarray:
    """Invert Gram -> (single-output Q at infinite depth, diag of Gram).

    The known input norms are pushed forward to diag(C); the between-output
    correlation is then isolated from the single-output one and recovery is
    delegated to :func:`recover_gram_between`, whose diagonal is finally
    replaced by the given ``diag_G``.
    """
    _require_broken_phase(h)
    Q = np.asarray(Q_inf, dtype=float)
    diag_G = np.asarray(diag_G, dtype=float)
    if Q.shape != (2, 2) or diag_G.shape != (2,):
        raise InvalidInputError("Q_inf must be 2x2 and diag_G length 2")
    # forward-propagate the diagonal: ReLU step is affine there
    c = h.v_b + h.v_w * diag_G
    for _ in range(pre_depth):
        c = h.v_b + h.v_w * c
    if noise_in_cov:
        c = c + h.v_n
    r = r_infinity(h)
    A = r / c + 1.0
    qx_diag = 5.0 / (15.0 + 2.0 * H * A**2)
    bias = (A[0] * A[1]) / math.sqrt(
        (15.0 / (2.0 * H) + A[0] ** 2) * (15.0 / (2.0 * H) + A[1] ** 2)
    )
    qx_off = (Q[0, 1] - bias) / 3.0
    Qx = np.array([[qx_diag[0], qx_off], [qx_off, qx_diag[1]]])
    G = recover_gram_between(Qx, h, H, pre_depth, noise_in_cov=noise_in_cov)
    G[0, 0], G[1, 1] = diag_G[0], diag_G[1]
    return G


@dataclass(frozen=True)
class CorrelationReport:
    """Analytic quadratic-correlation quantities for one geometry.

    ``b_D``/``w_D`` are the affine coefficients of the conditional output
    variance (w_D overflows to inf at extreme depth; r_D stays meaningful).
    """

    H: int
    D: int
    b_D: float
    w_D: float
    r_D: float
    q_cross: np.ndarray
    q_cross_inf: np.ndarray
    q_single_inf: np.ndarray
    depth_scale: float


def correlation_report(geom: BottleneckGeometry, h: Hyperparams, D: int,
                       H: int) -> CorrelationReport:
    """Assemble the full analytic report at depth D and width H."""
    _check_dh(D, H)
    if abs(h.v_w - 1.0) <= 1e-12:
        b_D = h.v_n + h.v_b * D
    else:
        with np.errstate(over="ignore"):
            b_D = h.v_n + h.v_b * (h.v_w**D - 1.0) / (h.v_w - 1.0)
    with np.errstate(over="ignore"):
        w_D = h.v_w**D
    q_single = np.array([
        [quad_corr_single_inf(geom, h, H, a, b) for b in (0, 1)] for a in (0, 1)
    ])
    return CorrelationReport(
        H=H, D=D, b_D=float(b_D), w_D=float(w_D), r_D=r_depth(h, D),
        q_cross=quad_corr_matrix(geom, h, D, H),
        q_cross_inf=quad_corr_matrix_inf(geom, h, H),
        q_single_inf=q_single,
        depth_scale=depth_scale(h),
    )
