"""Fine-tuning for the two tasks, artifact persistence, and test-split
prediction emission.

A run produces, under the output directory: the wrapped model weights
(model.pt), the tokenizer and encoder config (rebuildable offline), the
label space, a per-epoch loss log, and predictions.jsonl for the held-out
split in the evaluation toolkit's schema.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from torch import nn
from transformers import AutoConfig, AutoModel, AutoTokenizer

from .data import CATEGORIES, Record, load_records, split_records
from .encoders import resolve_encoder
from .models import MultilabelClassifier, TokenTagger

logger = logging.getLogger(__name__)

TASKS = ("multilabel", "span")


@dataclass
class TrainSpec:
    task: str
    dataset: str
    output_dir: str
    encoder: str = "fresh:hidden=64,layers=2,heads=2"
    epochs: int = 50
    weight_decay: float = 0.01
    batch_size: int = 8
    split_fraction: float = 0.8
    split_seed: int = 0
    learning_rate: float = 5e-5
    threshold: float = 0.5
    max_length: int = 256

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must be in (0, 1)")

    @classmethod
    def from_file(cls, path: str | Path, task: str | None = None) -> "TrainSpec":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if task:
            raw["task"] = task
        return cls(**raw)


def _label_space(train: list[Record], dataset_categories: set[str]) -> list[str]:
    """Categories present in the train split, in taxonomy order. Categories
    that appear in the dataset but not the train split are dropped from the
    head with a warning."""
    present = {c for record in train for c in record.labels}
    missing = dataset_categories - present
    for category in sorted(missing):
        logger.warning("category %r has no training examples; dropped from head", category)
    return [c for c in CATEGORIES if c in present]


def _encode_batch(tokenizer, texts: list[str], max_length: int):
    return tokenizer(
        texts,
        return_tensors="pt",
        padding=True,
        truncation=True,
        max_length=max_length,
        return_offsets_mapping=True,
    )


def project_spans_to_tokens(
    record: Record, offsets, attention_mask
) -> list[set[str]]:
    """Per-token label sets: a token is positive for a category when its
    character range intersects a span of that category. Tokens outside the
    attention mask or with empty offsets (specials, padding) are skipped."""
    labels = []
    for (start, end), keep in zip(offsets.tolist(), attention_mask.tolist()):
        if not keep or start == end:
            continue
        token_labels = {
            s.category for s in record.spans if start < s.end and s.start < end
        }
        labels.append(token_labels)
    return labels


def _real_token_strings(tokenizer, input_ids, offsets, attention_mask) -> list[str]:
    tokens = []
    all_tokens = tokenizer.convert_ids_to_tokens(input_ids.tolist())
    for tok, (start, end), keep in zip(all_tokens, offsets.tolist(), attention_mask.tolist()):
        if keep and start != end:
            tokens.append(tok)
    return tokens


def _batches(n: int, batch_size: int, generator: torch.Generator):
    order = torch.randperm(n, generator=generator).tolist()
    for i in range(0, n, batch_size):
        yield order[i : i + batch_size]


def fit(spec: TrainSpec) -> Path:
    """Train per the spec and return the artifact directory."""
    records = load_records(spec.dataset)
    if not records:
        raise ValueError(f"dataset {spec.dataset} is empty")
    train, test = split_records(records, spec.split_fraction, spec.split_seed)
    dataset_categories = {c for r in records for c in r.labels}
    labels = _label_space(train, dataset_categories)
    if not labels:
        raise ValueError("no labeled categories in the training split")

    torch.manual_seed(spec.split_seed)
    tokenizer, encoder = resolve_encoder(spec.encoder, [r.text for r in train], spec.max_length)
    if spec.task == "multilabel":
        model = MultilabelClassifier(encoder, len(labels))
    else:
        model = TokenTagger(encoder, len(labels))

    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _train_loop(model, tokenizer, train, labels, spec, out)

    model.eval()
    tokenizer.save_pretrained(out / "tokenizer")
    encoder.config.save_pretrained(out / "encoder")
    torch.save(model.state_dict(), out / "model.pt")
    (out / "artifact.json").write_text(
        json.dumps({"spec": asdict(spec), "labels": labels}, indent=2) + "\n",
        encoding="utf-8",
    )

    rows = predict_records(model, tokenizer, test, labels, spec.task, spec.threshold, spec.max_length)
    write_predictions(rows, out / "predictions.jsonl")
    return out


def _train_loop(model, tokenizer, train, labels, spec, out: Path):
    label_index = {c: i for i, c in enumerate(labels)}
    loss_fn = nn.BCEWithLogitsLoss(reduction="mean")
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=spec.learning_rate, weight_decay=spec.weight_decay
    )
    generator = torch.Generator().manual_seed(spec.split_seed)
    model.train()
    with open(out / "training_log.jsonl", "w", encoding="utf-8") as log_fh:
        for epoch in range(1, spec.epochs + 1):
            total = 0.0
            steps = 0
            for batch_idx in _batches(len(train), spec.batch_size, generator):
                batch = [train[i] for i in batch_idx]
                encoded = _encode_batch(tokenizer, [r.text for r in batch], spec.max_length)
                logits = model(encoded["input_ids"], encoded["attention_mask"])
                if spec.task == "multilabel":
                    targets = torch.zeros(len(batch), len(labels))
                    for row, record in enumerate(batch):
                        for category in record.labels:
                            if category in label_index:
                                targets[row, label_index[category]] = 1.0
                    loss = loss_fn(logits, targets)
                else:
                    targets = torch.zeros_like(logits)
                    mask = torch.zeros(logits.shape[:2], dtype=torch.bool)
                    for row, record in enumerate(batch):
                        offsets = encoded["offset_mapping"][row]
                        attn = encoded["attention_mask"][row]
                        for pos, ((start, end), keep) in enumerate(
                            zip(offsets.tolist(), attn.tolist())
                        ):
                            if not keep or start == end:
                                continue
                            mask[row, pos] = True
                            for span in record.spans:
                                if start < span.end and span.start < end and span.category in label_index:
                                    targets[row, pos, label_index[span.category]] = 1.0
                    if not mask.any():
                        continue
                    loss = loss_fn(logits[mask], targets[mask])
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total += loss.item()
                steps += 1
            log_fh.write(json.dumps({"epoch": epoch, "loss": total / max(steps, 1)}) + "\n")


def predict_records(
    model, tokenizer, records: list[Record], labels: list[str],
    task: str, threshold: float, max_length: int,
) -> list[dict]:
    """Schema-conformant prediction rows for the given records. Gold columns
    come from the records' own spans, so evaluation files are self-contained."""
    model.eval()
    rows = []
    skipped = 0
    with torch.no_grad():
        for record in records:
            encoded = _encode_batch(tokenizer, [record.text], max_length)
            logits = model(encoded["input_ids"], encoded["attention_mask"])
            probabilities = torch.sigmoid(logits)[0]
            if task == "multilabel":
                predicted = [c for i, c in enumerate(labels) if probabilities[i] > threshold]
                rows.append(
                    {"id": record.id, "gold": sorted(record.labels), "pred": sorted(predicted)}
                )
            else:
                offsets = encoded["offset_mapping"][0]
                attn = encoded["attention_mask"][0]
                tokens = _real_token_strings(tokenizer, encoded["input_ids"][0], offsets, attn)
                if not tokens:
                    skipped += 1
                    continue
                gold = project_spans_to_tokens(record, offsets, attn)
                pred = []
                position = 0
                for (start, end), keep in zip(offsets.tolist(), attn.tolist()):
                    if not keep or start == end:
                        position += 1
                        continue
                    token_probs = probabilities[position]
                    pred.append({c for i, c in enumerate(labels) if token_probs[i] > threshold})
                    position += 1
                rows.append(
                    {
                        "id": record.id,
                        "tokens": tokens,
                        "gold": [sorted(s) for s in gold],
                        "pred": [sorted(s) for s in pred],
                    }
                )
    if skipped:
        logger.warning("skipped %d records whose text yields no tokens", skipped)
    return rows


def write_predictions(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def predict_file(
    artifact_dir: str | Path,
    dataset_path: str | Path,
    output_path: str | Path,
    threshold: float | None = None,
) -> int:
    """Run a saved model over a dataset file; returns the row count.
    Deterministic in eval mode: repeated invocations write identical files."""
    model, tokenizer, labels, spec = load_artifact(artifact_dir)
    records = load_records(dataset_path)
    rows = predict_records(
        model,
        tokenizer,
        records,
        labels,
        spec.task,
        spec.threshold if threshold is None else threshold,
        spec.max_length,
    )
    write_predictions(rows, output_path)
    return len(rows)


def load_artifact(artifact_dir: str | Path):
    """Rebuild (model, tokenizer, labels, spec) from a fit() output directory."""
    out = Path(artifact_dir)
    manifest = json.loads((out / "artifact.json").read_text(encoding="utf-8"))
    spec = TrainSpec(**manifest["spec"])
    labels = manifest["labels"]
    tokenizer = AutoTokenizer.from_pretrained(out / "tokenizer")
    config = AutoConfig.from_pretrained(out / "encoder")
    encoder = AutoModel.from_config(config)
    if spec.task == "multilabel":
        model = MultilabelClassifier(encoder, len(labels))
    else:
        model = TokenTagger(encoder, len(labels))
    state = torch.load(out / "model.pt", map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model, tokenizer, labels, spec
