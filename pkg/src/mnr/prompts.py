"""Prompt templates for the draft and refine stages.

A template has four parts: a system preamble, a dataset description, a body
with named placeholders, and the output contract demanding the final fenced
JSON block that the metrics extractor parses. Rendering is pure string
substitution, so the same inputs always produce identical text.

Placeholders: ``{factual_block}``, ``{counterfactual_block}``,
``{outcome_block}`` in both stages; refiner bodies additionally carry
``{draft_1}`` .. ``{draft_N}``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .cfsearch import CounterfactualPair
from .tabular import FeatureSchema, format_value

__all__ = [
    "TemplateError",
    "PromptTemplate",
    "RenderedPrompt",
    "default_draft_template",
    "default_refiner_template",
    "load_template_file",
    "render_draft",
    "render_refiner",
]

STAGE_DRAFT = "draft"
STAGE_REFINER = "refiner"

_PAIR_PLACEHOLDERS = ("factual_block", "counterfactual_block", "outcome_block")
_DRAFT_RE = re.compile(r"\{draft_(\d+)\}")


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    stage: str
    system_preamble: str
    dataset_description: str
    output_contract: str
    body: str

    def __post_init__(self):
        if self.stage not in (STAGE_DRAFT, STAGE_REFINER):
            raise TemplateError(f"unknown stage {self.stage!r}")
        for name in _PAIR_PLACEHOLDERS:
            count = self.body.count("{%s}" % name)
            if count != 1:
                raise TemplateError(
                    f"{self.stage} template must contain {{{name}}} exactly once, found {count}"
                )
        draft_slots = self.draft_slots()
        if self.stage == STAGE_DRAFT and draft_slots:
            raise TemplateError("draft templates must not contain draft placeholders")
        if self.stage == STAGE_REFINER:
            if not draft_slots:
                raise TemplateError("refiner template needs {draft_1}..{draft_N} placeholders")
            expected = list(range(1, len(draft_slots) + 1))
            if sorted(draft_slots) != expected or len(set(draft_slots)) != len(draft_slots):
                raise TemplateError(
                    f"refiner draft placeholders must be exactly draft_1..draft_N, got {draft_slots}"
                )

    def draft_slots(self) -> list[int]:
        return [int(m) for m in _DRAFT_RE.findall(self.body)]

    @property
    def n_drafts(self) -> int:
        return len(self.draft_slots())


@dataclass(frozen=True)
class RenderedPrompt:
    """A fully substituted prompt; ``system``/``user`` split maps onto the
    chat wire schema, ``text`` is the combined audit string."""

    system: str
    user: str
    stage: str
    pair_id: str

    @property
    def text(self) -> str:
        if self.system:
            return self.system + "\n\n" + self.user
        return self.user


def _feature_block(instance, schema: FeatureSchema) -> str:
    return "\n".join(
        f"{spec.name}: {format_value(value)}" for spec, value in zip(schema.features, instance.values)
    )


def _outcome_block(pair: CounterfactualPair, schema: FeatureSchema) -> str:
    return (
        f"factual outcome: {pair.y_fact} "
        f"({schema.label_index(pair.y_fact)})\n"
        f"counterfactual outcome: {pair.y_cf} "
        f"({schema.label_index(pair.y_cf)})"
    )


def _substitute(body: str, mapping: dict[str, str]) -> str:
    out = body
    for name, value in mapping.items():
        out = out.replace("{%s}" % name, value)
    leftover = re.search(r"\{(factual_block|counterfactual_block|outcome_block|draft_\d+)\}", out)
    if leftover:
        raise TemplateError(f"unresolved placeholder {leftover.group(0)} after rendering")
    return out


def _compose_user(template: PromptTemplate, filled_body: str) -> str:
    parts = [template.dataset_description, filled_body, template.output_contract]
    return "\n\n".join(p.strip() for p in parts if p.strip())


def render_draft(
    template: PromptTemplate, pair: CounterfactualPair, schema: FeatureSchema
) -> RenderedPrompt:
    if template.stage != STAGE_DRAFT:
        raise TemplateError(f"render_draft needs a draft template, got stage {template.stage!r}")
    filled = _substitute(
        template.body,
        {
            "factual_block": _feature_block(pair.factual, schema),
            "counterfactual_block": _feature_block(pair.counterfactual, schema),
            "outcome_block": _outcome_block(pair, schema),
        },
    )
    return RenderedPrompt(
        system=template.system_preamble.strip(),
        user=_compose_user(template, filled),
        stage=STAGE_DRAFT,
        pair_id=pair.pair_id,
    )


def render_refiner(
    template: PromptTemplate,
    pair: CounterfactualPair,
    schema: FeatureSchema,
    drafts: list[str],
) -> RenderedPrompt:
    if template.stage != STAGE_REFINER:
        raise TemplateError(f"render_refiner needs a refiner template, got stage {template.stage!r}")
    if len(drafts) != template.n_drafts:
        raise TemplateError(
            f"template declares {template.n_drafts} draft slots, got {len(drafts)} drafts"
        )
    mapping = {
        "factual_block": _feature_block(pair.factual, schema),
        "counterfactual_block": _feature_block(pair.counterfactual, schema),
        "outcome_block": _outcome_block(pair, schema),
    }
    for i, text in enumerate(drafts, start=1):
        mapping[f"draft_{i}"] = text
    filled = _substitute(template.body, mapping)
    return RenderedPrompt(
        system=template.system_preamble.strip(),
        user=_compose_user(template, filled),
        stage=STAGE_REFINER,
        pair_id=pair.pair_id,
    )


# --- defaults ---------------------------------------------------------------

_DEFAULT_SYSTEM = (
    "You are an assistant that explains the decisions of a tabular "
    "classification model to non-experts, accurately and without speculation "
    "beyond the data you are shown."
)

_DEFAULT_CONTRACT = """\
End your reply with exactly one fenced code block containing a single JSON
object, and nothing after it. The object must have exactly these keys:
  "factual": an object mapping every feature name to its factual value
  "counterfactual": an object mapping every feature name to its counterfactual value
  "factual_outcome": 0 or 1
  "counterfactual_outcome": 0 or 1
  "narrative": your final narrative as one string
Copy every feature value verbatim from the instances above. The block looks
like:
```json
{"factual": {"...": "..."}, "counterfactual": {"...": "..."}, "factual_outcome": 0, "counterfactual_outcome": 1, "narrative": "..."}
```"""

_DEFAULT_DRAFT_BODY = """\
Below is a factual record, and a counterfactual version of it that the model
classifies differently. Explain which feature changes caused the prediction
to flip and why they plausibly matter.

Factual instance:
{factual_block}

Counterfactual instance:
{counterfactual_block}

Outcomes:
{outcome_block}

Write a short, clear narrative for a non-technical reader."""


def default_draft_template(dataset_description: str = "") -> PromptTemplate:
    return PromptTemplate(
        stage=STAGE_DRAFT,
        system_preamble=_DEFAULT_SYSTEM,
        dataset_description=dataset_description,
        output_contract=_DEFAULT_CONTRACT,
        body=_DEFAULT_DRAFT_BODY,
    )


def _default_refiner_body(n_drafts: int) -> str:
    draft_sections = "\n\n".join(f"Draft {i}:\n{{draft_{i}}}" for i in range(1, n_drafts + 1))
    return f"""\
Below is a factual record, a counterfactual version of it that the model
classifies differently, and {n_drafts} independent draft explanations of the
change. Compare and contrast the drafts, discard anything they claim that
the instances do not support, and merge what remains into one coherent,
accurate narrative.

Factual instance:
{{factual_block}}

Counterfactual instance:
{{counterfactual_block}}

Outcomes:
{{outcome_block}}

{draft_sections}

Write the single best narrative for a non-technical reader."""


def default_refiner_template(n_drafts: int = 3, dataset_description: str = "") -> PromptTemplate:
    return PromptTemplate(
        stage=STAGE_REFINER,
        system_preamble=_DEFAULT_SYSTEM,
        dataset_description=dataset_description,
        output_contract=_DEFAULT_CONTRACT,
        body=_default_refiner_body(n_drafts),
    )


# --- template files ---------------------------------------------------------
#
# A template file is plain text split into sections by marker lines of the
# form "=== name ===" with names system, dataset, body, contract. Only body
# is required; missing sections fall back to the defaults above. Text before
# the first marker is ignored, so files can carry a comment header.

_SECTION_RE = re.compile(r"^===\s*(system|dataset|body|contract)\s*===\s*$")


def load_template_file(path, stage: str) -> PromptTemplate:
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for line in lines:
        m = _SECTION_RE.match(line)
        if m:
            current = m.group(1)
            if current in sections:
                raise TemplateError(f"{path}: duplicate section {current!r}")
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
    if "body" not in sections:
        raise TemplateError(f"{path}: template file has no '=== body ===' section")
    text = {name: "\n".join(body).strip() for name, body in sections.items()}
    return PromptTemplate(
        stage=stage,
        system_preamble=text.get("system", _DEFAULT_SYSTEM),
        dataset_description=text.get("dataset", ""),
        output_contract=text.get("contract", _DEFAULT_CONTRACT),
        body=text["body"],
    )
