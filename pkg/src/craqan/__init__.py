"""Coreference-QA dataset construction pipeline.

Submodules:
    corpus    - Markdown loading, sectioning, sampling, sentence segmentation
    gateway   - chat-completion backends (remote + scripted mock), JSON extraction
    personas  - prompt templates and model/temperature bindings
    rci       - the generate/review/improve loop
    store     - human-review queue with an append-only event log
    service   - HTTP API over the review store
    stats     - dataset characteristics, rejection tallies, yield
    cli       - command-line entry point
"""

__version__ = "0.1.0"
