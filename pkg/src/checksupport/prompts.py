"""Versioned prompt templates.

Wording changes here are breaking changes: they alter every scripted key and
golden report. Bump the matching entry in ``PROMPT_VERSIONS`` and update
``docs/prompts.md`` together with the text.

Manuscript-derived text is always fenced between ``<<<`` and ``>>>`` lines so
the per-stage character budget can be audited on the finished prompt.
"""

OPEN_FENCE = "<<<"
CLOSE_FENCE = ">>>"
NULL_SENTINEL = "NOT REPORTED"

RECOMMEND = """\
Task: select the reporting checklist that best fits the manuscript below.
Candidate checklists:
{candidates}

Manuscript excerpt:
<<<
{excerpt}
>>>

Reply with exactly one checklist name copied from the candidate list. Output the name only, with no other words."""

GUIDANCE_GENERAL = """\
Task: describe what information each section of the reporting checklist "{checklist}" asks for.
Sections:
{sections}

For each section, summarise the kinds of information a manuscript must report to satisfy it."""

GUIDANCE_SECTION = """\
Task: give detailed extraction advice for the checklist section "{section}".
Items in this section:
{items}

Overview of all sections:
{overview}

Describe the typical manuscript locations where this information appears (for example Abstract, Methods, Results) and list indicative phrases or concepts that signal it."""

EXTRACT = """\
Task: extract manuscript passages for the checklist section "{section}" (window {window}).
Extraction guidance:
{guidance}

Manuscript text:
<<<
{text}
>>>

Copy the sentences from the manuscript text above that are relevant to this section. Use only the manuscript text. If nothing is relevant, reply with NOT REPORTED."""

ITEM = """\
Task: answer checklist item {item_id} using only the evidence provided.
Checklist item: {item_text}
Item instructions: {instructions}

Section evidence:
{evidence}

Additional manuscript context:
<<<
{context}
>>>

Answer in one or two sentences, quoting or closely paraphrasing the evidence. Do not add information that is not in the evidence. If the evidence does not contain the required information, reply with exactly: NOT REPORTED"""

PROMPT_VERSIONS = {
    "recommend": "recommend/v1",
    "guidance_general": "guidance-general/v1",
    "guidance_section": "guidance-section/v1",
    "extract": "extract/v1",
    "item": "item/v1",
}

TEMPLATES = {
    "recommend": RECOMMEND,
    "guidance_general": GUIDANCE_GENERAL,
    "guidance_section": GUIDANCE_SECTION,
    "extract": EXTRACT,
    "item": ITEM,
}


def fenced_blocks(prompt: str) -> list[str]:
    """Return the contents of every ``<<<``/``>>>`` block in a prompt."""
    blocks, current = [], None
    for line in prompt.split("\n"):
        if current is None and line == OPEN_FENCE:
            current = []
        elif current is not None and line == CLOSE_FENCE:
            blocks.append("\n".join(current))
            current = None
        elif current is not None:
            current.append(line)
    return blocks
