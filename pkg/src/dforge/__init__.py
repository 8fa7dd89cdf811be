"""dforge: turn a PII-annotated social-media corpus into a synthetic,
privacy-preserving equivalent and measure how good the result is.

Subpackages map onto pipeline stages: corpus filtering, span annotation,
LLM-backed rewriting, surface-similarity metrics, privacy evaluation
(unlinkability + indistinguishability), and classifier evaluation. The
``dforge`` command line binds them into reproducible runs.
"""

__version__ = "0.1.0"
