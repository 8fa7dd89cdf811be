"""Sequential-instruction rewriting: prompt plans, per-post orchestration
with refusal retries, temperature calibration, and corpus-level runs.

Each generation attempt replays the full step chain: step 1 rewrites the
post content, step 2 (and any further steps) transforms the previous
step's output. A refusal or unparseable output at any step fails the
attempt; up to max_rounds attempts are made with fresh sampling before the
post is recorded as refused/errored. Traces keep every intermediate output
for audit.
"""

from __future__ import annotations

import functools
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .llm_client import ChatClient, TransportError
from .textmetrics import cosine_tf

DEFAULT_OUTPUT_MARKER = '"Changed Post":'

DEFAULT_REFUSAL_PATTERNS = (
    r"I cannot",
    r"I'm just an AI",
    r"not within my programming",
)

_DEFAULT_SYSTEM_PROMPT = (
    "You are a story recreator who takes the information from the original post, "
    "and then makes a different story with similar kinds of personal information. "
    "You want to minimize the chance of finding the link between the stories. "
    "Generate the post following this format:\n\"Changed Post\":"
)

_DEFAULT_STEP_PROMPTS = (
    "Change the original post following these rules:\n"
    "1. Replace all non-sensitive private information such as age, dob, religion, "
    "gender, marital status, race, ethnicity, employment, location, sexuality, and "
    "parenthood with other non-sensitive private information that retains the "
    "context. Replace the organization name with any other organization that serves "
    "the same purpose without generalization.\n"
    "2. Change specific codes, IDs, numbers, and names with different codes, IDs, "
    "numbers, and names, respectively.\n"
    "3. Generate a post that matches the same style and tone as the original post. "
    "If the original post contains spelling errors, strong language, or informal "
    "expressions, ensure that the synthetic post reflects the same characteristics.\n"
    "4. Use common internet abbreviations, slang, emoticons, and expressions where "
    "appropriate, keeping the overall feel and context of the original post intact.\n"
    "5. Don't give the title of the post.",
    "The first line of the original text tells about the subreddit name in which "
    "the original post was posted. Change the name of the subreddit to another "
    "subreddit of a similar kind.",
)


@dataclass(frozen=True)
class PromptPlan:
    """System prompt plus the ordered step prompts of the rewrite chain."""

    system_prompt: str = _DEFAULT_SYSTEM_PROMPT
    step_prompts: tuple[str, ...] = _DEFAULT_STEP_PROMPTS
    output_marker: str = DEFAULT_OUTPUT_MARKER
    marker_fallback: bool = False  # use whole trimmed response when the marker is absent

    def __post_init__(self):
        if not self.step_prompts:
            raise ValueError("a prompt plan needs at least one step prompt")
        if not self.output_marker:
            raise ValueError("output_marker must be non-empty")
        object.__setattr__(self, "step_prompts", tuple(self.step_prompts))

    @classmethod
    def from_file(cls, path: str | Path) -> "PromptPlan":
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            system_prompt=spec["system"],
            step_prompts=tuple(spec["steps"]),
            output_marker=spec.get("output_marker", DEFAULT_OUTPUT_MARKER),
            marker_fallback=bool(spec.get("marker_fallback", False)),
        )

    def to_file(self, path: str | Path) -> None:
        payload = {
            "system": self.system_prompt,
            "steps": list(self.step_prompts),
            "output_marker": self.output_marker,
            "marker_fallback": self.marker_fallback,
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def default_prompt_plan() -> PromptPlan:
    """The shipped two-step plan: content rewrite, then subreddit rename."""
    return PromptPlan()


@dataclass(frozen=True)
class GenerationConfig:
    """Sampling and retry knobs plus the endpoint/model identification that
    a trace snapshots."""

    endpoint: str = ""
    model_name: str = "mock"
    temperature: float = 1.0
    top_p: float = 0.9
    max_tokens: int = 1024
    max_rounds: int = 3
    refusal_patterns: tuple[str, ...] = DEFAULT_REFUSAL_PATTERNS

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        object.__setattr__(self, "refusal_patterns", tuple(self.refusal_patterns))
        for pattern in self.refusal_patterns:
            re.compile(pattern)  # invalid regexes must fail at config time

    def snapshot(self) -> dict:
        return {
            "endpoint": self.endpoint,
            "model_name": self.model_name,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "max_rounds": self.max_rounds,
            "refusal_patterns": list(self.refusal_patterns),
        }


# Sampling profiles of the three model families the toolkit ships presets for.
PRESET_CONFIGS = {
    "llama2": GenerationConfig(model_name="llama2-7b-chat", temperature=1.0, top_p=0.9, max_tokens=1024),
    "llama3": GenerationConfig(model_name="llama3-8b-instruct", temperature=0.9, top_p=0.9, max_tokens=1024),
    "zephyr": GenerationConfig(model_name="zephyr-7b-beta", temperature=1.0, top_p=0.95, max_tokens=1024),
}


@dataclass
class Attempt:
    """One full pass over the step chain, kept for lineage."""

    step_outputs: list[str] = field(default_factory=list)
    failure: str | None = None


@dataclass
class GenerationTrace:
    source_post_id: str
    input_text: str
    outcome: str  # success | refused | error
    final_text: str | None = None
    step_outputs: list[str] = field(default_factory=list)  # successful attempt's chain
    rounds_used: int = 0
    error_detail: str | None = None
    attempts: list[Attempt] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "source_post_id": self.source_post_id,
            "input_text": self.input_text,
            "outcome": self.outcome,
            "final_text": self.final_text,
            "step_outputs": list(self.step_outputs),
            "rounds_used": self.rounds_used,
            "error_detail": self.error_detail,
            "attempts": [
                {"step_outputs": list(a.step_outputs), "failure": a.failure}
                for a in self.attempts
            ],
            "config": self.config,
        }


@functools.lru_cache(maxsize=256)
def _compile_insensitive(pattern: str) -> re.Pattern:
    return re.compile(pattern, re.IGNORECASE)


def detect_refusal(text: str, patterns: Sequence[str]) -> bool:
    """True when any refusal pattern matches case-insensitively."""
    return any(_compile_insensitive(p).search(text) for p in patterns)


class MarkerNotFoundError(ValueError):
    pass


_QUOTE_PAIRS = {'"': '"', "'": "'", "“": "”", "‘": "’"}


def parse_changed_post(raw: str, marker: str, fallback: bool = False) -> str:
    """Extract the rewritten post from a raw model response.

    Takes the trimmed text after the last occurrence of the marker and
    strips one layer of surrounding quotes when the payload is fully
    quoted. Without the marker, raises unless fallback is enabled, in
    which case the whole trimmed response is returned.
    """
    index = raw.rfind(marker)
    if index < 0:
        if fallback:
            return raw.strip()
        raise MarkerNotFoundError(f"marker {marker!r} not found in response")
    payload = raw[index + len(marker):].strip()
    if len(payload) >= 2 and payload[0] in _QUOTE_PAIRS and payload[-1] == _QUOTE_PAIRS[payload[0]]:
        payload = payload[1:-1].strip()
    return payload


def run_sequential(
    input_text: str,
    plan: PromptPlan,
    config: GenerationConfig,
    client: ChatClient,
    post_id: str = "",
) -> GenerationTrace:
    """Run the step chain for one post, retrying refused or unparseable
    attempts up to max_rounds times.

    Step 1 sees the original text under the first prompt; every later step
    sees only the previous step's output under its own prompt. The trace
    records all attempts; outcome is "success" as soon as an attempt parses
    to a usable rewrite, otherwise "refused"/"error" from the last attempt.
    """
    if not input_text:
        raise ValueError("input_text must be non-empty")
    trace = GenerationTrace(
        source_post_id=post_id,
        input_text=input_text,
        outcome="error",
        config=config.snapshot(),
    )
    for round_no in range(1, config.max_rounds + 1):
        attempt = Attempt()
        trace.attempts.append(attempt)
        trace.rounds_used = round_no
        text = input_text
        for prompt in plan.step_prompts:
            message = f"{prompt}\n\n{text}"
            try:
                reply = client.complete(plan.system_prompt, [message], config)
            except TransportError as exc:
                attempt.failure = f"transport: {exc}"
                trace.outcome = "error"
                trace.error_detail = attempt.failure
                return trace
            attempt.step_outputs.append(reply)
            if detect_refusal(reply, config.refusal_patterns):
                attempt.failure = "refusal"
                break
            text = reply
        if attempt.failure is not None:
            continue
        try:
            final = parse_changed_post(
                attempt.step_outputs[-1], plan.output_marker, plan.marker_fallback
            )
        except MarkerNotFoundError:
            attempt.failure = "no_marker"
            continue
        if not final:
            attempt.failure = "empty_output"
            continue
        if final == input_text:
            # A verbatim copy is no rewrite; retry with fresh sampling.
            attempt.failure = "identical_to_input"
            continue
        trace.outcome = "success"
        trace.final_text = final
        trace.step_outputs = list(attempt.step_outputs)
        return trace

    last_failure = trace.attempts[-1].failure or "unknown"
    if last_failure == "refusal":
        trace.outcome = "refused"
    else:
        trace.outcome = "error"
        trace.error_detail = last_failure
    return trace


@dataclass
class GenerationReport:
    attempted: int = 0
    succeeded: int = 0
    refused_final: int = 0
    errored: int = 0
    rounds_histogram: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "attempted": self.attempted,
            "succeeded": self.succeeded,
            "refused_final": self.refused_final,
            "errored": self.errored,
            "rounds_histogram": {str(k): v for k, v in sorted(self.rounds_histogram.items())},
        }


def generate_corpus(
    posts: Sequence[tuple[str, str]],
    plan: PromptPlan,
    config: GenerationConfig,
    client: ChatClient,
    jobs: int = 1,
) -> tuple[list[GenerationTrace], GenerationReport]:
    """Rewrite a whole corpus of (post_id, text) pairs.

    Emits one trace per input in input order; refusals and errors are data,
    never dropped. jobs > 1 dispatches requests through a bounded thread
    pool (the client must be concurrency-safe to that bound).
    """

    def run_one(pair: tuple[str, str]) -> GenerationTrace:
        post_id, text = pair
        return run_sequential(text, plan, config, client, post_id=post_id)

    if jobs <= 1:
        traces = [run_one(pair) for pair in posts]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(run_one, posts))

    report = GenerationReport(attempted=len(traces))
    for trace in traces:
        if trace.outcome == "success":
            report.succeeded += 1
        elif trace.outcome == "refused":
            report.refused_final += 1
        else:
            report.errored += 1
        report.rounds_histogram[trace.rounds_used] = (
            report.rounds_histogram.get(trace.rounds_used, 0) + 1
        )
    return traces, report


def save_traces(traces: Iterable[GenerationTrace], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(json.dumps(trace.to_dict(), ensure_ascii=False) + "\n")


def load_traces(path: str | Path) -> list[GenerationTrace]:
    traces = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            traces.append(
                GenerationTrace(
                    source_post_id=rec["source_post_id"],
                    input_text=rec["input_text"],
                    outcome=rec["outcome"],
                    final_text=rec.get("final_text"),
                    step_outputs=list(rec.get("step_outputs", [])),
                    rounds_used=rec.get("rounds_used", 0),
                    error_detail=rec.get("error_detail"),
                    attempts=[
                        Attempt(step_outputs=list(a["step_outputs"]), failure=a.get("failure"))
                        for a in rec.get("attempts", [])
                    ],
                    config=rec.get("config", {}),
                )
            )
    return traces


DEFAULT_TEMPERATURE_GRID = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


@dataclass
class CalibrationReport:
    chosen: float
    mean_similarity: dict[float, float | None]  # None = no successful generation

    def to_dict(self) -> dict:
        return {
            "chosen": self.chosen,
            "mean_similarity": {f"{t:g}": m for t, m in sorted(self.mean_similarity.items())},
        }


class CalibrationError(RuntimeError):
    pass


def calibration_sweep(
    sample_posts: Sequence[tuple[str, str]],
    temp_grid: Sequence[float],
    plan: PromptPlan,
    config_base: GenerationConfig,
    client: ChatClient,
    similarity_fn: Callable[[str, str], float] = cosine_tf,
    jobs: int = 1,
) -> CalibrationReport:
    """Generate one synthetic per sample post at every temperature and
    report the mean original-vs-synthetic similarity.

    Temperatures run sequentially to keep endpoint load bounded; posts
    within a temperature may run in parallel. Temperatures where nothing
    succeeds are excluded. The chosen temperature minimizes the mean
    similarity; ties break toward the higher temperature.
    """
    if not sample_posts:
        raise ValueError("need at least one sample post")
    if not temp_grid:
        raise ValueError("temperature grid must be non-empty")
    means: dict[float, float | None] = {}
    for temp in temp_grid:
        config = replace(config_base, temperature=temp)
        traces, _ = generate_corpus(sample_posts, plan, config, client, jobs=jobs)
        scores = [
            similarity_fn(trace.input_text, trace.final_text)
            for trace in traces
            if trace.outcome == "success"
        ]
        means[temp] = sum(scores) / len(scores) if scores else None
    usable = [(mean, temp) for temp, mean in means.items() if mean is not None]
    if not usable:
        raise CalibrationError("every temperature was excluded (no successful generations)")
    # min() is stable, so listing higher temperatures first breaks ties upward.
    usable.sort(key=lambda pair: -pair[1])
    chosen = min(usable, key=lambda pair: pair[0])[1]
    return CalibrationReport(chosen=chosen, mean_similarity=means)


def calibrate_temperature(
    sample_posts: Sequence[tuple[str, str]],
    temp_grid: Sequence[float],
    plan: PromptPlan,
    config_base: GenerationConfig,
    client: ChatClient,
    similarity_fn: Callable[[str, str], float] = cosine_tf,
) -> float:
    """The temperature with the lowest mean original-vs-synthetic
    similarity over the sample (ties toward higher temperature)."""
    return calibration_sweep(
        sample_posts, temp_grid, plan, config_base, client, similarity_fn
    ).chosen
