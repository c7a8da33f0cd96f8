"""Text preparation for policy documents: HTML stripping, segmentation, language guess."""
from __future__ import annotations

import re
from html.parser import HTMLParser

_BLOCK = {"p", "div", "br", "li", "ul", "ol", "h1", "h2", "h3", "h4", "h5", "h6", "tr", "td", "section", "article", "table"}
_SKIP = {"script", "style", "noscript", "head", "template"}

ENGLISH_STOPWORDS = frozenset(
    "the of and to a in is that for it as with be on by this are or we you your our not from at may will "
    "an have any which can us if such these other information".split()
)


class _Stripper(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts = []
        self.skip = 0

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP:
            self.skip += 1
        elif tag in _BLOCK:
            self.parts.append("\n")
        if tag == "a":
            href = dict(attrs).get("href")
            if href and href.startswith("http"):
                self.parts.append(f" {href} ")

    def handle_endtag(self, tag):
        if tag in _SKIP and self.skip:
            self.skip -= 1
        elif tag in _BLOCK:
            self.parts.append("\n")

    def handle_data(self, data):
        if not self.skip:
            self.parts.append(data)


def looks_like_html(text):
    return bool(re.search(r"<\s*(html|body|p|div|br|h[1-6]|span|a\s)[^>]*>", text[:4096], re.IGNORECASE))


def strip_html(text):
    p = _Stripper()
    p.feed(text)
    p.close()
    return "".join(p.parts)


def normalize_whitespace(text):
    return re.sub(r"\s+", " ", text).strip()


_SENT_END = re.compile(r"(?<=[.!?])\s+(?=[\"'(\[]?[A-Z0-9])")


def split_sentences(text):
    text = normalize_whitespace(text)
    if not text:
        return []
    return [s for s in _SENT_END.split(text) if s.strip()]


def looks_non_english(text, min_words=20, min_ratio=0.08):
    """Stopword heuristic. Short texts are never flagged."""
    words = re.findall(r"\w+", text.lower())
    if len(words) < min_words:
        # scripts without word spacing (CJK) yield few long tokens
        letters = [c for c in text if c.isalpha()]
        return len(letters) >= 40 and sum(c.isascii() for c in letters) / len(letters) < 0.5
    return sum(w in ENGLISH_STOPWORDS for w in words) / len(words) < min_ratio
