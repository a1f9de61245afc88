"""Reference counterfactual models with analytically known soundness.

These give the metric suite calibration anchors: an identity map (perfect
composition/reversibility, chance effectiveness), an ideal model that
abducts the true stored glyph style, a model that ignores the observation
entirely, an entangled variant that drags hue toward the digit-linked
confounder mean, and a blend that interpolates between true abduction and
seed-drawn style.
"""

from __future__ import annotations

from .core import (Capabilities, ContractError, CounterfactualModel, ModelError,
                   Observation, ParentAssignment)
from .rng import Stream, fold
from .synthdata import (COLOUR_DIGIT_SPACE, GlyphRecord, GlyphStyle, LabeledDataset,
                        OFFSET_RANGE, SCALE_RANGE, SLANT_RANGE, THICKNESS_RANGE,
                        colourise, confounder_mean, render_digit)


def style_from_seed(seed: int) -> GlyphStyle:
    s = Stream(seed, "zoo-style")
    return GlyphStyle(
        thickness=s.uniform(0, *THICKNESS_RANGE),
        slant=s.uniform(1, *SLANT_RANGE),
        scale=s.uniform(2, *SCALE_RANGE),
        offset=(s.uniform(3, *OFFSET_RANGE), s.uniform(4, *OFFSET_RANGE)),
    )


class IdentityModel(CounterfactualModel):
    """Returns the observation unchanged for every request."""

    capabilities = Capabilities(supports_partial=True, deterministic=True)
    name = "identity"

    def __init__(self, space, shape):
        self.space = space
        self.shape = tuple(shape)

    def _apply(self, x, pa, pa_star, function_seed):
        return x

    def _apply_partial(self, x, k, pa_k, pa_k_star, function_seed):
        return x


class _AbductingModel(CounterfactualModel):
    """Shared lookup machinery: content hash -> (parent values, exogenous record).

    Models register their own outputs, so repeated applications and cycles can
    abduct from anything they produced; unknown observations are a model
    error (these models only answer for their dataset's universe).
    """

    def __init__(self, dataset: LabeledDataset):
        if dataset.exogenous is None:
            raise ContractError("this model needs a dataset with exogenous records")
        self.space = dataset.space
        self.shape = tuple(dataset.shape)
        self._table: dict[bytes, tuple[tuple, GlyphRecord]] = {}
        for i in range(len(dataset)):
            key = dataset.pixels[i].tobytes()
            self._table[key] = (tuple(dataset.values[i]), dataset.exogenous[i])

    def _lookup(self, x: Observation):
        entry = self._table.get(x.content_key())
        if entry is None:
            raise ModelError("unknown observation: not a dataset member or prior output")
        return entry

    def _register(self, out: Observation, values: tuple, record: GlyphRecord):
        self._table[out.content_key()] = (values, record)


class GroundTruthModel(_AbductingModel):
    """The ideal f: abducts the true glyph style and re-renders at pa*."""

    capabilities = Capabilities(supports_partial=True, deterministic=True)
    name = "ground-truth"

    def _render(self, values: tuple, record: GlyphRecord) -> Observation:
        out = record.render(values)
        self._register(out, values, record)
        return out

    def _apply(self, x, pa, pa_star, function_seed):
        _, record = self._lookup(x)
        return self._render(tuple(pa_star.values), record)

    def _apply_partial(self, x, k, pa_k, pa_k_star, function_seed):
        values, record = self._lookup(x)
        new_values = values[:k] + (pa_k_star,) + values[k + 1:]
        return self._render(new_values, record)


class NoAbductionModel(CounterfactualModel):
    """Ignores the observation; renders a fresh seed-drawn glyph at pa*."""

    capabilities = Capabilities(supports_partial=False, deterministic=False)
    name = "no-abduction"

    def __init__(self, space, shape, seed: int = 0):
        if space != COLOUR_DIGIT_SPACE:
            raise ContractError("no-abduction model renders colour digits only")
        self.space = space
        self.shape = tuple(shape)
        self.seed = seed

    def _style(self, function_seed: int) -> GlyphStyle:
        return style_from_seed(fold(Stream(self.seed).key, function_seed))

    def _apply(self, x, pa, pa_star, function_seed):
        digit, hue = pa_star.values
        return colourise(render_digit(int(digit), self._style(function_seed)), hue)


class EntangledModel(_AbductingModel):
    """Ground truth with a digit->hue shortcut.

    Every render drags the requested hue toward the confounder mean of the
    digit being rendered: hue' = hue + lambda * (digit/10 + 0.05 - hue). The
    output's registered hue is the dragged value (the model is honest about
    what it rendered; the entanglement is the drag itself), which makes the
    digit/hue partials non-commutative for lambda in (0, 1) and reduces to
    ground truth at lambda = 0.
    """

    capabilities = Capabilities(supports_partial=True, deterministic=True)

    def __init__(self, dataset: LabeledDataset, lam: float):
        if not 0.0 <= lam <= 1.0:
            raise ContractError("lambda must be in [0, 1]")
        if dataset.space != COLOUR_DIGIT_SPACE:
            raise ContractError("entangled model renders colour digits only")
        super().__init__(dataset)
        self.lam = lam
        self.name = f"entangled:{lam:g}"

    def _render_dragged(self, digit: int, requested_hue: float,
                        record: GlyphRecord) -> Observation:
        hue = requested_hue + self.lam * (confounder_mean(digit) - requested_hue)
        out = colourise(render_digit(digit, record.style), hue)
        self._register(out, (digit, hue), record)
        return out

    def _apply(self, x, pa, pa_star, function_seed):
        _, record = self._lookup(x)
        return self._render_dragged(int(pa_star[0]), float(pa_star[1]), record)

    def _apply_partial(self, x, k, pa_k, pa_k_star, function_seed):
        values, record = self._lookup(x)
        if k == 0:
            return self._render_dragged(int(pa_k_star), float(values[1]), record)
        return self._render_dragged(int(values[0]), float(pa_k_star), record)


class AbductionBlendModel(_AbductingModel):
    """Blends the true abducted style with a seed-drawn one, componentwise.

    alpha = 1 recovers ground truth; alpha = 0 reproduces the no-abduction
    model draw for draw. Outputs register the style that actually rendered
    them, so repeated null interventions drift geometrically toward the
    seed style, mirroring the partial-abduction trade-off.
    """

    capabilities = Capabilities(supports_partial=True, deterministic=False)

    def __init__(self, dataset: LabeledDataset, alpha: float, seed: int = 0):
        if not 0.0 <= alpha <= 1.0:
            raise ContractError("alpha must be in [0, 1]")
        if dataset.space != COLOUR_DIGIT_SPACE:
            raise ContractError("blend model renders colour digits only")
        super().__init__(dataset)
        self.alpha = alpha
        self.seed = seed
        self.name = f"blend:{alpha:g}"

    def _blend(self, abducted: GlyphStyle, function_seed: int) -> GlyphStyle:
        drawn = style_from_seed(fold(Stream(self.seed).key, function_seed))
        a = self.alpha
        mix = lambda u, v: a * u + (1.0 - a) * v
        return GlyphStyle(
            thickness=mix(abducted.thickness, drawn.thickness),
            slant=mix(abducted.slant, drawn.slant),
            scale=mix(abducted.scale, drawn.scale),
            offset=(mix(abducted.offset[0], drawn.offset[0]),
                    mix(abducted.offset[1], drawn.offset[1])),
        )

    def _render_blended(self, values: tuple, record: GlyphRecord,
                        function_seed: int) -> Observation:
        style = self._blend(record.style, function_seed)
        out = colourise(render_digit(int(values[0]), style), float(values[1]))
        self._register(out, values, GlyphRecord(style, record.outlier))
        return out

    def _apply(self, x, pa, pa_star, function_seed):
        _, record = self._lookup(x)
        return self._render_blended(tuple(pa_star.values), record, function_seed)

    def _apply_partial(self, x, k, pa_k, pa_k_star, function_seed):
        values, record = self._lookup(x)
        new_values = values[:k] + (pa_k_star,) + values[k + 1:]
        return self._render_blended(new_values, record, function_seed)


def identity_model(space, shape) -> IdentityModel:
    return IdentityModel(space, shape)


def ground_truth_model(dataset: LabeledDataset) -> GroundTruthModel:
    return GroundTruthModel(dataset)


def no_abduction_model(space, shape, seed: int = 0) -> NoAbductionModel:
    return NoAbductionModel(space, shape, seed)


def entangled_model(dataset: LabeledDataset, lam: float) -> EntangledModel:
    return EntangledModel(dataset, lam)


def abduction_blend_model(dataset: LabeledDataset, alpha: float,
                          seed: int = 0) -> AbductionBlendModel:
    return AbductionBlendModel(dataset, alpha, seed)


def from_identifier(identifier: str, dataset: LabeledDataset,
                    seed: int = 0) -> CounterfactualModel:
    """Resolve a CLI model id: identity | ground-truth | no-abduction |
    entangled:<lambda> | blend:<alpha>."""
    if identifier == "identity":
        return identity_model(dataset.space, dataset.shape)
    if identifier == "ground-truth":
        return ground_truth_model(dataset)
    if identifier == "no-abduction":
        return no_abduction_model(dataset.space, dataset.shape, seed)
    if identifier.startswith("entangled:"):
        return entangled_model(dataset, float(identifier.split(":", 1)[1]))
    if identifier.startswith("blend:"):
        return abduction_blend_model(dataset, float(identifier.split(":", 1)[1]), seed)
    raise ContractError(f"unknown zoo model identifier {identifier!r}")
