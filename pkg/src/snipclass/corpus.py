"""Mining labeled code snippets out of a Stack Exchange ``Posts.xml`` dump.

The dump is one ``<row>`` element per post.  Questions carry a ``Tags``
attribute (``<java><android>``, or ``|java|android|`` in newer dumps) and
an HTML ``Body``.  Only ``<pre><code>`` blocks of single-language
questions become snippets.
"""
from __future__ import annotations

import json
import logging
import random
import statistics
from dataclasses import dataclass, field
from enum import Enum
from html.parser import HTMLParser
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, TextIO
from xml.parsers import expat

from .labels import LabelSet

log = logging.getLogger(__name__)

CORPUS_FORMAT = "snipclass-corpus"
CORPUS_VERSION = 1
MIN_LINES = 2
_CHUNK = 1 << 16


class PostsParseError(Exception):
    """Malformed XML framing in a posts dump."""

    def __init__(self, message: str, byte_offset: int, line: int, column: int):
        super().__init__(f"{message} at byte {byte_offset} (line {line}, column {column})")
        self.byte_offset = byte_offset
        self.line = line
        self.column = column


class CorpusFormatError(ValueError):
    pass


class PostType(Enum):
    QUESTION = "question"
    ANSWER = "answer"
    OTHER = "other"


@dataclass(frozen=True)
class RawPost:
    post_id: int
    post_type: PostType
    tags: tuple[str, ...]
    body_html: str


@dataclass(frozen=True)
class Snippet:
    id: str
    language: str
    text: str
    line_count: int
    char_count: int

    @classmethod
    def from_text(cls, id: str, language: str, text: str) -> "Snippet":
        return cls(id, language, text, text.count("\n") + 1, len(text))


@dataclass(frozen=True)
class Corpus:
    snippets: tuple[Snippet, ...]
    label_set: LabelSet

    def __post_init__(self):
        object.__setattr__(self, "snippets", tuple(self.snippets))
        for s in self.snippets:
            if s.language not in self.label_set:
                raise ValueError(f"snippet {s.id} has label {s.language!r} outside the label set")

    def __len__(self) -> int:
        return len(self.snippets)

    def __iter__(self) -> Iterator[Snippet]:
        return iter(self.snippets)

    @property
    def per_language_counts(self) -> dict[str, int]:
        counts = dict.fromkeys(self.label_set.labels, 0)
        for s in self.snippets:
            counts[s.language] += 1
        return counts

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.snippets]

    @property
    def labels(self) -> list[str]:
        return [s.language for s in self.snippets]


# ---------------------------------------------------------------- parsing


class PostStream:
    """Iterate over the posts of a dump without holding the document in memory.

    ``skipped`` counts rows lacking ``Id``/``PostTypeId``/``Body`` or with a
    non-positive / non-integer id; it is final once iteration finishes.
    """

    def __init__(self, source: BinaryIO):
        self.source = source
        self.skipped = 0
        self.rows = 0

    def __iter__(self) -> Iterator[RawPost]:
        pending: list[RawPost] = []
        parser = expat.ParserCreate()

        def start(name, attrs):
            if name != "row":
                return
            self.rows += 1
            post = _decode_row(attrs)
            if post is None:
                self.skipped += 1
            else:
                pending.append(post)

        parser.StartElementHandler = start
        parser.buffer_text = True
        while True:
            chunk = self.source.read(_CHUNK)
            final = not chunk
            try:
                parser.Parse(chunk, final)
            except expat.ExpatError as exc:
                raise PostsParseError(
                    expat.ErrorString(exc.code), parser.ErrorByteIndex, exc.lineno, exc.offset
                ) from None
            yield from pending
            pending.clear()
            if final:
                break


def parse_posts_stream(source: BinaryIO) -> PostStream:
    return PostStream(source)


def parse_tags(raw: str) -> tuple[str, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    if raw.startswith("|"):
        parts = raw.strip("|").split("|")
    else:
        parts = raw.strip("<>").split("><")
    return tuple(p.lower() for p in parts if p)


def _decode_row(attrs: dict) -> RawPost | None:
    try:
        post_id = int(attrs["Id"])
        type_id = attrs["PostTypeId"]
        body = attrs["Body"]
    except (KeyError, ValueError):
        return None
    if post_id <= 0:
        return None
    post_type = {"1": PostType.QUESTION, "2": PostType.ANSWER}.get(type_id.strip(), PostType.OTHER)
    tags = parse_tags(attrs.get("Tags", "")) if post_type is PostType.QUESTION else ()
    return RawPost(post_id, post_type, tags, body)


class _CodeBlockParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.blocks: list[str] = []
        self._pre = 0
        self._code = 0
        self._buf: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag == "pre":
            self._pre += 1
        elif tag == "code" and self._pre:
            if self._code == 0:
                self._buf = []
            self._code += 1

    def handle_endtag(self, tag):
        if tag == "code" and self._code:
            self._code -= 1
            if self._code == 0:
                self.blocks.append("".join(self._buf))
        elif tag == "pre" and self._pre:
            self._pre -= 1

    def handle_data(self, data):
        if self._code:
            self._buf.append(data)


def code_blocks(body_html: str) -> list[str]:
    """Decoded contents of every ``<pre><code>`` block, trailing newlines removed."""
    p = _CodeBlockParser()
    p.feed(body_html)
    p.close()
    return [b.rstrip("\r\n") for b in p.blocks]


def filter_single_language(post: RawPost, label_set: LabelSet) -> str | None:
    matched = {label_set.label_for_tag(t) for t in post.tags} - {None}
    if len(matched) == 1:
        return matched.pop()
    return None


def extract_snippets(post: RawPost, label_set: LabelSet) -> list[Snippet]:
    if post.post_type is not PostType.QUESTION:
        return []
    label = filter_single_language(post, label_set)
    if label is None:
        return []
    return _snippets(post.post_id, label, code_blocks(post.body_html))


def _snippets(post_id: int, label: str, blocks: list[str]) -> list[Snippet]:
    out = []
    for i, block in enumerate(blocks):
        s = Snippet.from_text(f"{post_id}#{i}", label, block)
        if s.line_count >= MIN_LINES:
            out.append(s)
    return out


@dataclass
class IngestStats:
    rows: int = 0
    rows_skipped: int = 0
    questions: int = 0
    non_questions: int = 0
    unmatched: int = 0
    multi_language: int = 0
    code_blocks: int = 0
    short_blocks: int = 0
    snippets: int = 0


def iter_snippets(posts: Iterable[RawPost], label_set: LabelSet,
                  stats: IngestStats | None = None) -> Iterator[Snippet]:
    """`extract_snippets` over a post stream, tallying what was dropped and why."""
    stats = stats if stats is not None else IngestStats()
    for post in posts:
        if post.post_type is not PostType.QUESTION:
            stats.non_questions += 1
            continue
        stats.questions += 1
        matched = {label_set.label_for_tag(t) for t in post.tags} - {None}
        if not matched:
            stats.unmatched += 1
            continue
        if len(matched) > 1:
            stats.multi_language += 1
            continue
        blocks = code_blocks(post.body_html)
        snippets = _snippets(post.post_id, matched.pop(), blocks)
        stats.code_blocks += len(blocks)
        stats.short_blocks += len(blocks) - len(snippets)
        stats.snippets += len(snippets)
        yield from snippets
    if isinstance(posts, PostStream):
        stats.rows = posts.rows
        stats.rows_skipped = posts.skipped


# ---------------------------------------------------------------- sampling


def sample_corpus(snippets: Iterable[Snippet], label_set: LabelSet, cap: int, seed: int) -> Corpus:
    """Keep at most `cap` snippets per label by reservoir sampling.

    Each label gets its own generator seeded from ``(seed, label)``, so one
    label's sample does not depend on how other labels interleave in the
    stream.  Survivors keep their input order.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    reservoirs: dict[str, list[tuple[int, Snippet]]] = {}
    seen: dict[str, int] = {}
    rngs: dict[str, random.Random] = {}
    for pos, s in enumerate(snippets):
        if s.language not in label_set:
            raise ValueError(f"snippet {s.id} has label {s.language!r} outside the label set")
        lab = s.language
        if lab not in reservoirs:
            reservoirs[lab] = []
            seen[lab] = 0
            rngs[lab] = random.Random(f"{seed}:{lab}")
        i = seen[lab]
        seen[lab] = i + 1
        res = reservoirs[lab]
        if i < cap:
            res.append((pos, s))
        else:
            j = rngs[lab].randrange(i + 1)
            if j < cap:
                res[j] = (pos, s)
    if not reservoirs:
        log.warning("no snippets to sample; returning an empty corpus")
    kept = sorted((item for res in reservoirs.values() for item in res), key=lambda t: t[0])
    return Corpus(tuple(s for _, s in kept), label_set)


# ---------------------------------------------------------------- stats


@dataclass(frozen=True)
class LanguageLength:
    count: int
    mean_lines: float
    median_lines: float
    mean_chars: float
    median_chars: float


@dataclass(frozen=True)
class LengthStats:
    per_language: dict[str, LanguageLength] = field(default_factory=dict)


def length_stats(corpus: Corpus) -> LengthStats:
    if not len(corpus):
        raise ValueError("length statistics need a nonempty corpus")
    by_label: dict[str, list[Snippet]] = {}
    for s in corpus:
        by_label.setdefault(s.language, []).append(s)
    out = {}
    for lab in corpus.label_set.labels:
        group = by_label.get(lab)
        if not group:
            continue
        lines = [s.line_count for s in group]
        chars = [s.char_count for s in group]
        out[lab] = LanguageLength(
            count=len(group),
            mean_lines=statistics.fmean(lines),
            median_lines=float(statistics.median(lines)),
            mean_chars=statistics.fmean(chars),
            median_chars=float(statistics.median(chars)),
        )
    return LengthStats(out)


# ---------------------------------------------------------------- file format


_LINE_BREAKS = {"\x85": "\\u0085", "\u2028": "\\u2028", "\u2029": "\\u2029"}


def _dump_line(obj) -> str:
    # JSON leaves these unescaped, but str.splitlines() would break on them
    text = json.dumps(obj, ensure_ascii=False)
    for ch, esc in _LINE_BREAKS.items():
        text = text.replace(ch, esc)
    return text + "\n"


def write_corpus(corpus: Corpus, sink: TextIO | str | Path, meta: dict | None = None) -> None:
    """Write the line-oriented corpus file: a JSON header line, then one JSON record per snippet."""
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            return write_corpus(corpus, fh, meta)
    header = {"format": CORPUS_FORMAT, "version": CORPUS_VERSION,
              "label_set": corpus.label_set.to_dict()}
    if meta:
        header["meta"] = meta
    sink.write(_dump_line(header))
    for s in corpus:
        rec = {"id": s.id, "language": s.language, "text": s.text,
               "lines": s.line_count, "chars": s.char_count}
        sink.write(_dump_line(rec))


def read_corpus(source: TextIO | str | Path) -> Corpus:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            return read_corpus(fh)
    lines = iter(source)
    first = next(lines, None)
    if first is None:
        raise CorpusFormatError("line 1: missing corpus header")
    try:
        header = json.loads(first)
        if header.get("format") != CORPUS_FORMAT:
            raise CorpusFormatError(f"line 1: not a {CORPUS_FORMAT} file")
        if header.get("version") != CORPUS_VERSION:
            raise CorpusFormatError(f"line 1: unsupported corpus version {header.get('version')!r}")
        label_set = LabelSet.from_dict(header["label_set"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CorpusFormatError):
            raise
        raise CorpusFormatError(f"line 1: bad corpus header ({exc})") from None
    snippets = []
    for lineno, line in enumerate(lines, 2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            s = Snippet(rec["id"], rec["language"], rec["text"], rec["lines"], rec["chars"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CorpusFormatError(f"line {lineno}: malformed record ({exc})") from None
        if not (isinstance(s.id, str) and isinstance(s.text, str) and isinstance(s.language, str)
                and type(s.line_count) is int and type(s.char_count) is int):
            raise CorpusFormatError(f"line {lineno}: field of wrong type")
        if s != Snippet.from_text(s.id, s.language, s.text):
            raise CorpusFormatError(f"line {lineno}: lines/chars disagree with text")
        if s.language not in label_set:
            raise CorpusFormatError(f"line {lineno}: unknown label {s.language!r}")
        snippets.append(s)
    return Corpus(tuple(snippets), label_set)

