"""The four-stage checklist pipeline: recommend, guide, extract, answer.

Each stage is a separate bounded model call. Guidance feeds extraction, and each
section's extract is shared by all of that section's items. Items never see
each other, so they can run in any order or in parallel.
"""

from __future__ import annotations

import enum
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Iterable, Mapping, Sequence

from checksupport import prompts
from checksupport.checklist import ChecklistItem, ChecklistSection, ChecklistTemplate
from checksupport.errors import (
    BackendError,
    ContextBudgetExceeded,
    EmptyCandidates,
    EmptyManuscript,
    UnrecognizedChecklistName,
    UsageError,
)
from checksupport.inference import (
    DEFAULT_MODEL,
    DEFAULT_SEED,
    Backend,
    GenerationRequest,
    Stage,
    StageConfig,
    default_stage_configs,
    generate,
)
from checksupport.text_ingest import NormalizedText, backoff_prefix, head_excerpt, windows

logger = logging.getLogger(__name__)

NOT_APPLICABLE = "Not applicable"


class ItemStatus(enum.Enum):
    ANSWERED = "Answered"
    NOT_REPORTED = "NotReported"


@dataclass(frozen=True)
class Recommendation:
    chosen: str
    raw_output: str
    excerpt_chars: int


@dataclass(frozen=True)
class GuidanceSet:
    general: str
    per_section: dict[int, str]


@dataclass(frozen=True)
class SectionExtract:
    section_index: int
    text: str
    attempts: int
    windows_tried: tuple[int, ...]
    sufficient: bool
    # end offset of the window the text came from; item context starts here
    source_end: int = 0


@dataclass(frozen=True)
class ItemResponse:
    item_id: str
    status: ItemStatus
    answer: str
    section_index: int
    raw_output: str

    def __post_init__(self):
        if self.status is ItemStatus.NOT_REPORTED and self.answer:
            raise ValueError("NotReported responses carry no answer")
        if self.status is ItemStatus.ANSWERED and not self.answer:
            raise ValueError("Answered responses need a non-empty answer")


@dataclass(frozen=True)
class Provenance:
    model: str
    backend: str
    seed: int | None
    stage_configs: dict
    prompt_versions: dict
    started_at: str
    finished_at: str
    elapsed_ms: int
    source_name: str | None = None


@dataclass(frozen=True)
class CompletedChecklist:
    template_name: str
    responses: tuple[ItemResponse, ...]
    provenance: Provenance


@dataclass
class PartialRun:
    """What a failed run had produced before it aborted."""

    guidance: GuidanceSet | None = None
    extracts: dict[int, SectionExtract] = field(default_factory=dict)
    responses: dict[str, ItemResponse] = field(default_factory=dict)


def _check_budget(text: str, limit: int, what: str) -> None:
    if len(text) > limit:
        raise ContextBudgetExceeded(f"{what} is {len(text)} chars, over the {limit}-char budget")


def _request(prompt: str, cfg: StageConfig, model: str, seed: int | None) -> GenerationRequest:
    return GenerationRequest(
        model=model, prompt=prompt, temperature=cfg.temperature, stop=cfg.stop, seed=seed
    )


# -- stage 1: recommendation ------------------------------------------------------


def build_recommendation_prompt(excerpt: str, candidates: Sequence[str], limit: int = 2000) -> str:
    if not candidates:
        raise EmptyCandidates("at least one candidate checklist is required")
    _check_budget(excerpt, limit, "recommendation excerpt")
    numbered = "\n".join(f"{i}. {name}" for i, name in enumerate(candidates, 1))
    return prompts.RECOMMEND.format(candidates=numbered, excerpt=excerpt)


_QUOTES = "\"'`*“”‘’"
_TERMINAL = ".,;:!?"


def _clean_name(text: str) -> str:
    prev = None
    while prev != text:
        prev = text
        text = text.strip().strip(_QUOTES).rstrip(_TERMINAL)
    return text.casefold()


def match_candidate(output: str, candidates: Sequence[str]) -> str:
    """Map raw model output onto exactly one candidate name."""
    cleaned = _clean_name(output)
    exact = [c for c in candidates if _clean_name(c) == cleaned]
    if len(exact) == 1:
        return exact[0]
    if not exact and cleaned:
        partial = [
            c for c in candidates if _clean_name(c) in cleaned or cleaned in _clean_name(c)
        ]
        if len(partial) == 1:
            return partial[0]
        exact = partial
    raise UnrecognizedChecklistName(
        f"model output {output.strip()[:80]!r} matches {len(exact)} of the candidates {list(candidates)!r}"
    )


def recommend(
    manuscript: NormalizedText,
    candidates: Sequence[str],
    backend: Backend,
    *,
    model: str = DEFAULT_MODEL,
    seed: int | None = DEFAULT_SEED,
    cfg: StageConfig | None = None,
) -> Recommendation:
    cfg = cfg or default_stage_configs()[Stage.RECOMMEND]
    if not candidates:
        raise EmptyCandidates("at least one candidate checklist is required")
    excerpt = head_excerpt(manuscript, cfg.context_limit_chars)
    prompt = build_recommendation_prompt(excerpt, candidates, cfg.context_limit_chars)
    raw = generate(backend, _request(prompt, cfg, model, seed)).text
    return Recommendation(match_candidate(raw, candidates), raw, len(excerpt))


# -- stage 2: guidance ----------------------------------------------------------------


def build_general_guidance_prompt(template: ChecklistTemplate) -> str:
    sections = "\n".join(f"- {s.title}" for s in template.sections)
    return prompts.GUIDANCE_GENERAL.format(checklist=template.name, sections=sections)


def build_section_guidance_prompt(section: ChecklistSection, overview: str, limit: int) -> str:
    items = "\n".join(f"{item.id}. {item.text}" for item in section.items)
    return prompts.GUIDANCE_SECTION.format(
        section=section.title, items=items, overview=backoff_prefix(overview.strip(), limit)
    )


def generate_guidance(
    template: ChecklistTemplate,
    backend: Backend,
    *,
    model: str = DEFAULT_MODEL,
    seed: int | None = DEFAULT_SEED,
    cfg: StageConfig | None = None,
) -> GuidanceSet:
    """Two passes: one overview over all sections, then one call per section."""
    cfg = cfg or default_stage_configs()[Stage.GUIDANCE]
    try:
        general = generate(backend, _request(build_general_guidance_prompt(template), cfg, model, seed)).text
    except BackendError as exc:
        exc.section_index = None
        raise
    per_section = {}
    for section in template.sections:
        prompt = build_section_guidance_prompt(section, general, cfg.context_limit_chars)
        try:
            per_section[section.index] = generate(backend, _request(prompt, cfg, model, seed)).text
        except BackendError as exc:
            exc.section_index = section.index
            raise
    return GuidanceSet(general=general, per_section=per_section)


# -- stage 3: section extraction ----------------------------------------------------


def build_extract_prompt(section_title: str, guidance: str, window_index: int, text: str, limit: int) -> str:
    _check_budget(text, limit, "extraction window")
    return prompts.EXTRACT.format(
        section=section_title, window=window_index, guidance=guidance.strip() or "none", text=text
    )


def extract_section(
    manuscript: NormalizedText,
    section: ChecklistSection,
    guidance: str,
    backend: Backend,
    cfg: StageConfig | None = None,
    *,
    model: str = DEFAULT_MODEL,
    seed: int | None = DEFAULT_SEED,
) -> SectionExtract:
    """Walk the manuscript windows until one yields a long-enough extract.

    Falls back to the longest output (earliest on ties) with ``sufficient=False``.
    """
    cfg = cfg or default_stage_configs()[Stage.EXTRACT]
    if cfg.stage is not Stage.EXTRACT:
        raise UsageError(f"extract_section needs the extract stage config, got {cfg.stage.value}")
    if manuscript.char_count == 0:
        raise EmptyManuscript("manuscript has no text")
    tried: list[int] = []
    best_text, best_end = None, 0
    for window in windows(manuscript, cfg.context_limit_chars, cfg.window_overlap):
        prompt = build_extract_prompt(section.title, guidance, window.index, window.content, cfg.context_limit_chars)
        try:
            text = generate(backend, _request(prompt, cfg, model, seed)).text.strip()
        except BackendError as exc:
            exc.section_index = section.index
            raise
        tried.append(window.index)
        if best_text is None or len(text) > len(best_text):
            best_text, best_end = text, window.end
        if len(text) >= cfg.min_extract_chars:
            break
        logger.debug("section %r window %d gave %d chars, moving on", section.title, window.index, len(text))
    return SectionExtract(
        section_index=section.index,
        text=best_text,
        attempts=len(tried),
        windows_tried=tuple(tried),
        sufficient=len(best_text) >= cfg.min_extract_chars,
        source_end=best_end,
    )


def context_tail(manuscript: NormalizedText, extract: SectionExtract, limit: int = 1000) -> str:
    """Manuscript text right after the window the extract was drawn from."""
    return backoff_prefix(manuscript.content[extract.source_end:].lstrip(), limit)


# -- stage 4: item answers -----------------------------------------------------------


def build_item_prompt(item: ChecklistItem, evidence: str, context: str, limit: int) -> str:
    _check_budget(context, limit, "item context")
    return prompts.ITEM.format(
        item_id=item.id,
        item_text=item.text,
        instructions=(item.instructions or "none").replace("\n", " "),
        evidence=evidence.strip() or prompts.NULL_SENTINEL,
        context=context,
    )


def parse_item_output(raw: str) -> tuple[ItemStatus, str]:
    answer = raw.strip()
    if not answer or answer.startswith(prompts.NULL_SENTINEL):
        return ItemStatus.NOT_REPORTED, ""
    return ItemStatus.ANSWERED, answer


def complete_item(
    item: ChecklistItem,
    extract: SectionExtract,
    context: str,
    backend: Backend,
    cfg: StageConfig | None = None,
    *,
    model: str = DEFAULT_MODEL,
    seed: int | None = DEFAULT_SEED,
) -> ItemResponse:
    cfg = cfg or default_stage_configs()[Stage.ITEM_ANSWER]
    if cfg.stage is not Stage.ITEM_ANSWER:
        raise UsageError(f"complete_item needs the item stage config, got {cfg.stage.value}")
    prompt = build_item_prompt(item, extract.text, context, cfg.context_limit_chars)
    try:
        raw = generate(backend, _request(prompt, cfg, model, seed)).text
    except BackendError as exc:
        exc.item_id = item.key
        exc.section_index = extract.section_index
        raise
    status, answer = parse_item_output(raw)
    return ItemResponse(item.key, status, answer, extract.section_index, raw)


# -- orchestration ---------------------------------------------------------------------


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def complete_checklist(
    manuscript: NormalizedText,
    template: ChecklistTemplate,
    backend: Backend,
    *,
    model: str = DEFAULT_MODEL,
    seed: int | None = DEFAULT_SEED,
    configs: Mapping[Stage, StageConfig] | None = None,
    clock: Callable[[], datetime] = _utc_now,
    item_order: Iterable[str] | None = None,
    max_workers: int = 1,
) -> CompletedChecklist:
    """Run guidance, extraction and item completion for one manuscript.

    Args:
        item_order: item keys in the order to execute them; the result is
            always assembled in template order.
        max_workers: concurrent item completions (bounded again by the backend).

    Raises:
        BackendError: the first failure aborts the run; ``exc.partial`` holds a
            :class:`PartialRun` with everything finished so far.
    """
    configs = dict(configs or default_stage_configs())
    if manuscript.char_count == 0:
        raise EmptyManuscript("manuscript has no text")
    started = clock()
    t0 = time.perf_counter()
    partial = PartialRun()
    kw = {"model": model, "seed": seed}
    item_cfg = configs[Stage.ITEM_ANSWER]

    try:
        guidance = generate_guidance(template, backend, cfg=configs[Stage.GUIDANCE], **kw)
        partial.guidance = guidance
        for section in template.sections:
            partial.extracts[section.index] = extract_section(
                manuscript, section, guidance.per_section[section.index], backend, configs[Stage.EXTRACT], **kw
            )

        by_key = {item.key: (item, section) for section in template.sections for item in section.items}
        order = list(item_order) if item_order is not None else list(by_key)
        if sorted(order) != sorted(by_key):
            raise UsageError("item_order must be a permutation of the template's item keys")

        def run(key: str) -> ItemResponse:
            item, section = by_key[key]
            extract = partial.extracts[section.index]
            tail = context_tail(manuscript, extract, item_cfg.context_limit_chars)
            response = complete_item(item, extract, tail, backend, item_cfg, **kw)
            partial.responses[key] = response
            return response

        if max_workers <= 1:
            for key in order:
                run(key)
        else:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                futures = [pool.submit(run, key) for key in order]
                for fut in futures:
                    fut.result()
    except BackendError as exc:
        exc.partial = partial
        raise

    elapsed = int((time.perf_counter() - t0) * 1000)
    source = manuscript.source.path.name if manuscript.source is not None else None
    provenance = Provenance(
        model=model,
        backend=backend.describe(),
        seed=seed,
        stage_configs={stage.value: cfg.to_dict() for stage, cfg in configs.items()},
        prompt_versions=dict(prompts.PROMPT_VERSIONS),
        started_at=_iso(started),
        finished_at=_iso(clock()),
        elapsed_ms=elapsed,
        source_name=source,
    )
    responses = tuple(partial.responses[item.key] for item in template.items)
    return CompletedChecklist(template.name, responses, provenance)
