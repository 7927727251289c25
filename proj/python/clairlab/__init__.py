from ._clairlab import (
    Transcriber,
    format_prompt,
    generate_corpus,
    normalize,
    parse_prompt,
    wer,
    werr,
)

__all__ = [
    "Transcriber",
    "format_prompt",
    "generate_corpus",
    "normalize",
    "parse_prompt",
    "wer",
    "werr",
]
