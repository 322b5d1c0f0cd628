"""Seeded rule tables for paraphrasing and a model-free scoring stand-in.

Edits are deliberately mechanical: swap a word for a listed synonym, add or
drop an intensifier, split a long sentence, or merge two short ones. Scores
are cheap text statistics mapped into [0, 1]. Everything is deterministic
given the caller's random state, so identical requests produce identical
output.
"""

from __future__ import annotations

import random

# Small bidirectional-ish table; keys are matched on lowercased tokens.
SYNONYMS: dict[str, tuple[str, ...]] = {
    "good": ("great", "fine", "solid"),
    "great": ("good", "superb"),
    "fine": ("good", "decent"),
    "bad": ("poor", "weak"),
    "poor": ("bad", "lacking"),
    "awful": ("terrible", "dreadful"),
    "terrible": ("awful", "dire"),
    "nice": ("pleasant", "lovely"),
    "pleasant": ("nice", "agreeable"),
    "tasty": ("delicious", "flavorful"),
    "delicious": ("tasty", "superb"),
    "bland": ("flat", "dull"),
    "dull": ("bland", "flat"),
    "fresh": ("crisp", "bright"),
    "stale": ("old", "tired"),
    "warm": ("cozy", "inviting"),
    "cold": ("chilly", "icy"),
    "slow": ("sluggish", "unhurried"),
    "fast": ("quick", "brisk"),
    "quick": ("fast", "speedy"),
    "small": ("tiny", "modest"),
    "big": ("large", "generous"),
    "large": ("big", "sizable"),
    "meal": ("dish", "plate"),
    "dish": ("meal", "plate"),
    "place": ("spot", "venue"),
    "spot": ("place", "corner"),
    "staff": ("crew", "team"),
    "service": ("staff", "waitstaff"),
    "friendly": ("welcoming", "kind"),
    "rude": ("curt", "brusque"),
    "clean": ("tidy", "spotless"),
    "dirty": ("grimy", "messy"),
    "price": ("cost", "tab"),
    "cheap": ("inexpensive", "affordable"),
    "expensive": ("pricey", "costly"),
}

INTENSIFIERS: tuple[str, ...] = ("very", "really", "quite", "rather", "truly")

_SEP = ". "


def _tokens(text: str) -> list[str]:
    return text.split()


def swap_synonym(text: str, rng: random.Random) -> str | None:
    """Replace one table word with a listed alternative, or None if no hit."""
    tokens = _tokens(text)
    hits = [i for i, tok in enumerate(tokens) if tok.lower().rstrip(".,!?") in SYNONYMS]
    if not hits:
        return None
    i = hits[rng.randrange(len(hits))]
    word = tokens[i]
    bare = word.lower().rstrip(".,!?")
    tail = word[len(bare):] if word.lower().startswith(bare) else ""
    repl = rng.choice(SYNONYMS[bare])
    if word[:1].isupper():
        repl = repl.capitalize()
    tokens[i] = repl + tail
    return " ".join(tokens)


def insert_intensifier(text: str, rng: random.Random) -> str:
    """Insert one intensifier at a random token boundary; always changes text."""
    tokens = _tokens(text)
    pos = rng.randrange(len(tokens) + 1)
    tokens.insert(pos, rng.choice(INTENSIFIERS))
    return " ".join(tokens)


def remove_intensifier(text: str, rng: random.Random) -> str | None:
    tokens = _tokens(text)
    hits = [i for i, tok in enumerate(tokens) if tok.lower() in INTENSIFIERS]
    if not hits:
        return None
    tokens.pop(hits[rng.randrange(len(hits))])
    return " ".join(tokens) if tokens else None


def split_sentence(text: str, rng: random.Random) -> str | None:
    """Break one sentence of four or more words into two at a middle boundary."""
    sentences = text.split(_SEP)
    eligible = [i for i, s in enumerate(sentences) if len(s.split()) >= 4]
    if not eligible:
        return None
    i = eligible[rng.randrange(len(eligible))]
    words = sentences[i].split()
    cut = rng.randrange(2, len(words) - 1)
    head = " ".join(words[:cut]).rstrip(",")
    tail = " ".join(words[cut:])
    sentences[i] = head + _SEP + tail[:1].upper() + tail[1:]
    return _SEP.join(sentences)


def merge_sentences(text: str, rng: random.Random) -> str | None:
    """Join two adjacent sentences with a comma; None when there is only one."""
    sentences = text.split(_SEP)
    if len(sentences) < 2:
        return None
    i = rng.randrange(len(sentences) - 1)
    second = sentences[i + 1]
    joined = sentences[i].rstrip(".") + ", " + second[:1].lower() + second[1:]
    return _SEP.join(sentences[:i] + [joined] + sentences[i + 2:])


_RULES = (swap_synonym, remove_intensifier, split_sentence, merge_sentences, insert_intensifier)


def paraphrase(text: str, rng: random.Random) -> str:
    """Apply one applicable rule chosen by ``rng``; the result always differs."""
    order = list(_RULES)
    rng.shuffle(order)
    for rule in order:
        out = rule(text, rng)
        if out is not None and out != text:
            return out
    # Unreachable with the current table (insertion always applies), kept so a
    # future rule-set edit cannot silently turn this into an identity map.
    return (text + " " + rng.choice(INTENSIFIERS)).strip()


def candidates(text: str, n: int, seed: int) -> list[str]:
    """n seeded paraphrases of ``text``; candidate i depends only on (seed, i)."""
    return [paraphrase(text, random.Random(f"{seed}:{i}")) for i in range(n)]


def proxy_score(attr_id: str, seq: str) -> float:
    """Deterministic stand-in score in [0, 1] for any attribute id.

    Diversity-flavored ids get the distinct-token ratio; everything else gets
    mean token length squashed by /10 and capped. This is a plumbing proxy,
    not a judgment of quality.
    """
    tokens = _tokens(seq)
    if not tokens:
        return 0.0
    if attr_id.startswith(("fluency", "distinct", "diversity")):
        return len(set(tokens)) / len(tokens)
    mean_len = sum(len(t) for t in tokens) / len(tokens)
    return min(mean_len / 10.0, 1.0)
