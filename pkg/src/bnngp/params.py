"""Hyperparameters, nonlinearities, and layer architectures.

A network is described by its variance hyperparameters (v_b, v_w, v_n), a
scalar nonlinearity applied to every hidden neuron (including bottleneck
neurons), and an ordered list of hidden layers, each either infinitely wide
or a finite-width bottleneck.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import ArchitectureError, InvalidInputError

__all__ = [
    "Hyperparams",
    "Nonlinearity",
    "NORMALIZED_RELU",
    "SINUSOIDAL",
    "custom_nonlinearity",
    "WIDE",
    "Architecture",
]


@dataclass(frozen=True)
class Hyperparams:
    """Variance triple governing the prior and the observation noise.

    ``v_b`` is the bias variance, ``v_w`` the weight variance hyperparameter
    (the actual weight variance is ``v_w / H`` for fan-in ``H``), and ``v_n``
    the variance of additive Gaussian observation noise.
    """

    v_b: float
    v_w: float
    v_n: float = 0.0

    def __post_init__(self):
        for name in ("v_b", "v_w", "v_n"):
            x = getattr(self, name)
            if not (isinstance(x, (int, float)) and math.isfinite(x)):
                raise InvalidInputError(f"{name} must be a finite number, got {x!r}")
        if self.v_b < 0:
            raise InvalidInputError(f"v_b must be >= 0, got {self.v_b}")
        if self.v_w <= 0:
            raise InvalidInputError(f"v_w must be > 0, got {self.v_w}")
        if self.v_n < 0:
            raise InvalidInputError(f"v_n must be >= 0, got {self.v_n}")

    def log_array(self) -> np.ndarray:
        """(log v_b, log v_w, log v_n); requires all three strictly positive."""
        if self.v_b <= 0 or self.v_n <= 0:
            raise InvalidInputError(
                "log parameterization needs strictly positive v_b, v_w, v_n"
            )
        return np.log([self.v_b, self.v_w, self.v_n])

    @classmethod
    def from_log_array(cls, logp) -> "Hyperparams":
        v = np.exp(np.asarray(logp, dtype=float))
        return cls(v_b=float(v[0]), v_w=float(v[1]), v_n=float(v[2]))


_SQRT2 = math.sqrt(2.0)

_ENVELOPE_GRID = np.concatenate(
    [-np.geomspace(1e-6, 1e6, 61), [0.0], np.geomspace(1e-6, 1e6, 61)]
)


@dataclass(frozen=True)
class Nonlinearity:
    """Scalar activation with its linear-envelope constants |phi(x)| < C + M|x|.

    ``grad`` is the almost-everywhere derivative, needed for reparameterized
    likelihood gradients; it may be omitted for sampling-only use.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    envelope: tuple[float, float]
    grad: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x):
        return self.fn(x)


NORMALIZED_RELU = Nonlinearity(
    name="normalized_relu",
    fn=lambda x: _SQRT2 * np.maximum(0.0, x),
    envelope=(1.0, _SQRT2),
    grad=lambda x: _SQRT2 * (x > 0),
)

SINUSOIDAL = Nonlinearity(
    name="sinusoidal",
    fn=lambda x: np.cos(x) + np.sin(x),
    envelope=(_SQRT2 + 1e-9, 0.0),
    grad=lambda x: np.cos(x) - np.sin(x),
)


def custom_nonlinearity(fn, C, M, name="custom", grad=None) -> Nonlinearity:
    """Wrap a user activation, spot-checking |phi(x)| < C + M|x| on a wide grid."""
    if C < 0 or M < 0:
        raise InvalidInputError("envelope constants C, M must be nonnegative")
    vals = np.asarray(fn(_ENVELOPE_GRID), dtype=float)
    bound = C + M * np.abs(_ENVELOPE_GRID)
    if not np.all(np.abs(vals) < bound):
        worst = _ENVELOPE_GRID[np.argmax(np.abs(vals) - bound)]
        raise InvalidInputError(
            f"activation violates the linear envelope |phi| < C + M|x| at x={worst:g}"
        )
    return Nonlinearity(name=name, fn=fn, envelope=(float(C), float(M)), grad=grad)


# Marker for an infinitely wide hidden layer in an Architecture layer list.
WIDE = "wide"

LayerSpec = Union[str, int]


@dataclass(frozen=True)
class Architecture:
    """Hidden-layer structure of a (bottleneck) network.

    ``layers`` lists the hidden layers in order; each entry is either
    :data:`WIDE` (a layer sent to infinite width) or a positive int (a
    bottleneck held at that width).  ``bottleneck_noise`` adds N(0, v_n)
    to bottleneck preactivations; output noise is controlled separately
    by each operation.

    Depth conventions used throughout the package:

    * ``pre_depth``  -- number of wide hidden layers before the first
      bottleneck (the depth of the first network component).
    * ``post_depth`` -- number of weight layers after the last bottleneck,
      i.e. trailing wide-layer count + 1.  This is the depth variable of
      the quadratic-correlation analytics.
    """

    input_dim: int
    output_dim: int
    layers: tuple[LayerSpec, ...]
    nonlinearity: Nonlinearity
    bottleneck_noise: bool = False

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ArchitectureError("input_dim and output_dim must be >= 1")
        object.__setattr__(self, "layers", tuple(self.layers))
        for layer in self.layers:
            if layer == WIDE:
                continue
            if isinstance(layer, int) and not isinstance(layer, bool) and layer >= 1:
                continue
            raise ArchitectureError(
                f"each layer must be WIDE or a positive int width, got {layer!r}"
            )

    # -- derived structure ---------------------------------------------------

    @property
    def n_hidden(self) -> int:
        return len(self.layers)

    @property
    def bottleneck_widths(self) -> tuple[int, ...]:
        return tuple(w for w in self.layers if w != WIDE)

    @property
    def pre_depth(self) -> int:
        """Wide hidden layers before the first bottleneck (all, if none)."""
        for i, layer in enumerate(self.layers):
            if layer != WIDE:
                return i
        return len(self.layers)

    @property
    def post_depth(self) -> int:
        """Weight layers after the last bottleneck: trailing wide count + 1."""
        if not self.bottleneck_widths:
            raise ArchitectureError("post_depth is defined only with a bottleneck")
        trailing = 0
        for layer in reversed(self.layers):
            if layer != WIDE:
                break
            trailing += 1
        return trailing + 1

    def segments(self) -> list[tuple[int, int | None]]:
        """Split into GP components: (wide depth, following bottleneck width).

        The final segment has width ``None`` (it feeds the network outputs).
        A no-bottleneck architecture yields a single segment.
        """
        out: list[tuple[int, int | None]] = []
        depth = 0
        for layer in self.layers:
            if layer == WIDE:
                depth += 1
            else:
                out.append((depth, int(layer)))
                depth = 0
        out.append((depth, None))
        return out

    # -- constructors ----------------------------------------------------------

    @classmethod
    def no_bottleneck(cls, input_dim, output_dim, depth, nonlinearity) -> "Architecture":
        return cls(input_dim, output_dim, (WIDE,) * depth, nonlinearity)

    @classmethod
    def single_bottleneck(
        cls, input_dim, output_dim, pre_depth, width, post_hidden, nonlinearity,
        bottleneck_noise=False,
    ) -> "Architecture":
        """Wide x pre_depth, one bottleneck, wide x post_hidden.

        Note ``post_hidden`` counts hidden layers; the analytic post-bottleneck
        depth is ``post_hidden + 1``.
        """
        layers = (WIDE,) * pre_depth + (int(width),) + (WIDE,) * post_hidden
        return cls(input_dim, output_dim, layers, nonlinearity, bottleneck_noise)

    @classmethod
    def equally_spaced_bottlenecks(
        cls, input_dim, output_dim, total_hidden, n_bottlenecks, width,
        nonlinearity, bottleneck_noise=False,
    ) -> "Architecture":
        """``total_hidden`` hidden layers with ``n_bottlenecks`` of them
        restricted to bottlenecks at equally spaced positions.

        For total_hidden=11 the positions are {6}, {4, 8} and {3, 6, 9}.
        """
        if n_bottlenecks < 0 or n_bottlenecks > total_hidden:
            raise ArchitectureError("n_bottlenecks must be in [0, total_hidden]")
        positions = {
            round(j * (total_hidden + 1) / (n_bottlenecks + 1))
            for j in range(1, n_bottlenecks + 1)
        }
        if len(positions) != n_bottlenecks:
            raise ArchitectureError(
                f"cannot space {n_bottlenecks} bottlenecks over {total_hidden} layers"
            )
        layers = tuple(
            int(width) if (i + 1) in positions else WIDE for i in range(total_hidden)
        )
        return cls(input_dim, output_dim, layers, nonlinearity, bottleneck_noise)
