from __future__ import annotations

from xml.sax.saxutils import quoteattr

import pytest

from snipclass.labels import LabelSet

ACCEPTANCE_LINES: list[str] = []


def row(post_id, post_type=1, tags=None, body="", **extra) -> str:
    attrs = {"Id": str(post_id), "PostTypeId": str(post_type), "Body": body}
    if tags is not None:
        attrs["Tags"] = "".join(f"<{t}>" for t in tags)
    attrs.update({k: str(v) for k, v in extra.items()})
    return "  <row " + " ".join(f"{k}={quoteattr(v)}" for k, v in attrs.items()) + " />\n"


def posts_xml(rows) -> bytes:
    return ('<?xml version="1.0" encoding="utf-8"?>\n<posts>\n' + "".join(rows) + "</posts>\n").encode()


def code_body(*blocks: str, prose: str = "<p>How do I fix this?</p>") -> str:
    from html import escape
    return prose + "".join(f"<pre><code>{escape(b, quote=False)}\n</code></pre>" for b in blocks)


@pytest.fixture
def small_labels() -> LabelSet:
    return LabelSet(("java", "c", "c++", "python"),
                    {"java": ("java",), "c": ("c",), "c++": ("c++",), "python": ("python", "python-3.x")})


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
