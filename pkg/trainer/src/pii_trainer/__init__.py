"""pii_trainer: fine-tune encoder models on annotation-native JSONL for
(a) 19-way multilabel post classification and (b) per-token multilabel
span tagging, emitting prediction files in the evaluation toolkit's
schemas. Communication with the toolkit is file-based only.
"""

__version__ = "0.1.0"
