"""Reference stdio worker for the newline-delimited JSON editor protocol.

Packaged separately from any engine on purpose: the only runtime dependency
is the standard library, and the only coupling is the wire format. Editing
is rule-based paraphrasing (synonym table, intensifiers, sentence split and
merge); evaluation is a deterministic surface-statistic proxy. A model-backed
worker would replace `rules` and keep `server` unchanged.
"""

from .rules import INTENSIFIERS, SYNONYMS, candidates, paraphrase, proxy_score
from .server import PROTOCOL_VERSION, WorkerState, serve

__all__ = [
    "INTENSIFIERS",
    "PROTOCOL_VERSION",
    "SYNONYMS",
    "WorkerState",
    "candidates",
    "paraphrase",
    "proxy_score",
    "serve",
]

__version__ = "0.1.0"
