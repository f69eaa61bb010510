"""Prompt template loading, placeholder substitution, and tag extraction.

Templates ship as UTF-8 resource files with ``{name}`` placeholders
(placeholder names may contain spaces) and can be overridden by pointing a
:class:`TemplateSet` at another directory. The shipped set is normative.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

__all__ = [
    "TEMPLATE_NAMES",
    "TemplateSet",
    "PromptError",
    "MissingPlaceholder",
    "TagMissing",
    "TagUnclosed",
    "render_prompt",
    "extract_tagged",
]

TEMPLATE_NAMES = (
    "summarize_chunk",
    "merge_summaries",
    "generate_query",
    "generate_query_retry",
    "predict",
)

_PLACEHOLDER_RE = re.compile(r"\{([^{}]+)\}")


class PromptError(Exception):
    pass


class MissingPlaceholder(PromptError):
    def __init__(self, name: str, template: str) -> None:
        self.name = name
        super().__init__(f"template {template!r} needs a value for {{{name}}}")


class TagMissing(PromptError):
    def __init__(self, tag: str) -> None:
        self.tag = tag
        super().__init__(f"no <{tag}> tag in response")


class TagUnclosed(PromptError):
    def __init__(self, tag: str) -> None:
        self.tag = tag
        super().__init__(f"<{tag}> tag is never closed")


@dataclass(frozen=True)
class TemplateSet:
    """The five prompt templates, loaded from a directory or the package."""

    directory: Path | None = None

    def text(self, name: str) -> str:
        if name not in TEMPLATE_NAMES:
            raise KeyError(name)
        if self.directory is not None:
            return (self.directory / f"{name}.txt").read_text(encoding="utf-8")
        return _packaged_text(name)

    def render(self, name: str, context: dict[str, str]) -> str:
        return _substitute(self.text(name), context, name)


@lru_cache(maxsize=None)
def _packaged_text(name: str) -> str:
    return (resources.files("lmldap") / "templates" / f"{name}.txt").read_text(encoding="utf-8")


def _substitute(template: str, context: dict[str, str], template_name: str) -> str:
    def replace(m: re.Match[str]) -> str:
        key = m.group(1)
        if key not in context:
            raise MissingPlaceholder(key, template_name)
        return context[key]

    return _PLACEHOLDER_RE.sub(replace, template)


def render_prompt(
    template: str, context: dict[str, str], templates: TemplateSet | None = None
) -> str:
    """Substitute *context* into the named template, byte-preserving."""
    return (templates or TemplateSet()).render(template, context)


_FENCE_OPEN_RE = re.compile(r"^```[\w-]*[ \t]*\n")
_FENCE_CLOSE_RE = re.compile(r"\n```[ \t]*$")


def extract_tagged(text: str, tag: str) -> str:
    """Content between the first ``<tag>`` and its closing ``</tag>``.

    Outer whitespace is trimmed and a code fence wrapping the payload
    inside the tags is stripped, since models often fence their output.
    """
    open_tag, close_tag = f"<{tag}>", f"</{tag}>"
    start = text.find(open_tag)
    if start < 0:
        raise TagMissing(tag)
    end = text.find(close_tag, start + len(open_tag))
    if end < 0:
        raise TagUnclosed(tag)
    inner = text[start + len(open_tag) : end].strip()
    inner = _FENCE_OPEN_RE.sub("", inner)
    inner = _FENCE_CLOSE_RE.sub("", inner)
    return inner.strip()
