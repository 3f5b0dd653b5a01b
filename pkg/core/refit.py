"""
Refitting on condensed architectures.

After a layer-sparse fit the active layers S define a smaller architecture
whose weights are re-estimated by plain least squares. This removes the
shrinkage the layer penalty put on the surviving weights.
"""

import logging
from dataclasses import dataclass

from .condense import (
    ActiveSet,
    CondenseMode,
    clamp_small_negatives,
    condense,
    condense_as_stated,
    condense_sound,
    merged_kind,
)
from .errors import ParameterError, ShapeError, SoundnessError, ValidationError
from .network import IDENTITY, RELU
from .regularizers import RegWeights
from .training import initialize, lsq_loss, sgd_fit

logger = logging.getLogger(__name__)


def default_activations(depth):
    """Identity outermost, ReLU on every other layer."""
    return (IDENTITY,) + (RELU,) * (depth - 1)


@dataclass(frozen=True)
class CondensedSpace:
    """
    Architecture of a condensed network.

    Attributes:
        active: active layer indices of the original network
        shapes: (rows, cols) per condensed layer, outermost first
        activations: one activation per condensed layer
    """

    active: tuple
    shapes: tuple
    activations: tuple

    def __post_init__(self):
        shapes = tuple((int(r), int(c)) for r, c in self.shapes)
        if not shapes:
            raise ValidationError("a condensed space needs at least one layer")
        if shapes[0][0] != 1:
            raise ValidationError(f"first condensed layer must have one row, got {shapes[0]}")
        for upper, lower in zip(shapes, shapes[1:]):
            if upper[1] != lower[0]:
                raise ValidationError(f"condensed shapes {upper} and {lower} do not chain")
        if len(self.activations) != len(shapes):
            raise ValidationError(f"{len(self.activations)} activations for {len(shapes)} condensed layers")
        object.__setattr__(self, "shapes", shapes)
        object.__setattr__(self, "activations", tuple(self.activations))

    @property
    def widths(self):
        return tuple(r for r, _ in self.shapes) + (self.shapes[-1][1],)

    @property
    def depth(self):
        return len(self.shapes)

    @property
    def input_dim(self):
        return self.shapes[-1][1]

    @classmethod
    def of_network(cls, net, active=None):
        """Space spanned by an existing (already condensed) network."""
        indices = tuple(active.indices) if active is not None else tuple(range(1, net.depth + 1))
        return cls(indices, tuple(w.shape for w in net.weights), net.activations)


def condensed_space(active, widths, activations=None):
    """
    Shapes p_{j_{i-1}+1} x p_{j_i+1} for active indices j_1 < ... < j_s (j_0 = 0).

    Each surviving activation is the composition of the activations of the
    layers merged into it; with no activations given the network is taken to
    be Identity outermost and ReLU elsewhere.
    """
    widths = tuple(int(p) for p in widths)
    depth = len(widths) - 1
    if not isinstance(active, ActiveSet):
        active = ActiveSet(tuple(active), depth)
    if active.depth != depth:
        raise ParameterError(f"active set is for depth {active.depth}, widths {widths} give depth {depth}")
    activations = tuple(activations) if activations is not None else default_activations(depth)
    if len(activations) != depth:
        raise ParameterError(f"{len(activations)} activations for depth {depth}")

    shapes, kinds = [], []
    previous = 0
    for b in active.indices:
        shapes.append((widths[previous], widths[b]))
        kind = activations[previous]
        for k in range(previous + 1, b):
            kind = merged_kind(kind, activations[k])
        kinds.append(kind)
        previous = b
    return CondensedSpace(active.indices, tuple(shapes), tuple(kinds))


def refit(space, data, cfg, warm=None):
    """
    Unregularized least-squares fit on the condensed architecture.

    Starts from warm when given, otherwise from cfg.init.

    Raises:
        ShapeError: warm network or data do not match the space
    """
    if data.input_dim != space.input_dim:
        raise ShapeError(f"data of dimension {data.input_dim} for a space with input dimension {space.input_dim}")
    if warm is not None:
        if warm.widths != space.widths:
            raise ShapeError(f"warm start has widths {warm.widths}, condensed space has {space.widths}")
        if warm.activations != space.activations:
            raise ShapeError(
                f"warm start activations {[str(a) for a in warm.activations]} differ from "
                f"{[str(a) for a in space.activations]}"
            )
        start = warm
    else:
        start = initialize(space.widths, space.activations, cfg.init, cfg.seed)
    fitted, report = sgd_fit(start, data, cfg, RegWeights.zeros(space.depth))
    logger.debug("refit on widths %s: objective %.6g after %d epochs", space.widths, report.final_objective, report.epochs_run)
    return fitted


def warm_start(fitted, report):
    """
    Starting weights for the refit on the space of report.condensed.

    The exact condensation is used whenever its shapes and activations are
    those of the space, which holds for equal hidden widths with the outermost
    layer active. Otherwise the merged products are taken without the width
    factor.
    """
    if report.mode is CondenseMode.SOUND:
        return report.condensed
    space = CondensedSpace.of_network(report.condensed, report.active)
    tol = report.active.tolerance
    try:
        exact = condense_sound(fitted, tol)
    except SoundnessError:
        exact = None
    if exact is not None and exact.widths == space.widths and exact.activations == space.activations:
        return exact
    logger.debug("no exact warm start on widths %s, using unscaled products", space.widths)
    return condense_as_stated(clamp_small_negatives(fitted, tol), report.active, scaled=False)


def sls_then_refit(
    data,
    widths,
    cfg,
    rl,
    tol,
    mode=CondenseMode.AS_STATED,
    refit_config=None,
    fitted=None,
    activations=None,
):
    """
    Layer-regularized fit, condensation and warm refit.

    Args:
        data: training DataSet
        widths: (p_1, ..., p_{l+1}) of the full architecture
        cfg: TrainConfig of the layer-regularized fit
        rl: layer tuning, a scalar or one value per layer 1..l-1
        tol: tolerance for clamping and active-layer detection
        mode: condensation rule
        refit_config: TrainConfig for the refit stage, cfg when None
        fitted: an already layer-regularized network; skips the first fit
        activations: per-layer activations, Identity outermost and ReLU elsewhere when None

    Returns:
        (sls_net, condensed_net, refit_net, CondensationReport)
    """
    widths = tuple(widths)
    depth = len(widths) - 1
    if fitted is None:
        activations = tuple(activations) if activations is not None else default_activations(depth)
        start = initialize(widths, activations, cfg.init, cfg.seed)
        fitted, _ = sgd_fit(start, data, cfg, RegWeights.layer_only(depth, rl))
    elif fitted.widths != widths:
        raise ShapeError(f"fitted network has widths {fitted.widths}, expected {widths}")

    report = condense(fitted, mode, tol, probes=data.inputs)
    condensed = report.condensed
    space = CondensedSpace.of_network(condensed, report.active)
    refit_cfg = refit_config if refit_config is not None else cfg
    warm = warm_start(fitted, report)
    refitted = refit(space, data, refit_cfg, warm=warm)
    logger.info(
        "refit: loss %.6g (fitted) -> %.6g (warm start) -> %.6g (refit) on %d layers",
        lsq_loss(fitted, data), lsq_loss(warm, data), lsq_loss(refitted, data), refitted.depth,
    )
    return fitted, condensed, refitted, report
