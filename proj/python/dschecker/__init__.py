"""Python access to the dschecker core: datasets, prompts, verdicts, patches,
metrics, statistics and whole evaluations."""

import json

from ._dschecker import (
    DscheckerError,
    apply_patch,
    bootstrap,
    detection_metrics,
    exit_code,
    fix_rate,
    reverse_patch,
    shapiro_wilk,
)
from . import _dschecker

__all__ = [
    "DscheckerError",
    "apply_patch",
    "bootstrap",
    "detection_metrics",
    "dunn_test",
    "evaluate",
    "exit_code",
    "fix_rate",
    "load_dataset",
    "parse_verdict",
    "render_prompt",
    "reverse_patch",
    "shapiro_wilk",
]


def load_dataset(manifest):
    """Validated records of a manifest, as dicts."""
    text = _dschecker.load_dataset_jsonl(str(manifest))
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def render_prompt(variant, manifest, record_id, exemplars=""):
    """{"system": ..., "user": ...} for one record, using its recorded data."""
    return json.loads(_dschecker.render_prompt_json(variant, str(manifest), record_id, str(exemplars)))


def parse_verdict(text):
    return json.loads(_dschecker.parse_verdict_json(text))


def dunn_test(groups):
    return json.loads(_dschecker.dunn_test_json([list(map(float, g)) for g in groups]))


def evaluate(dataset, configs, seed=0, jobs=1, adjudications="", adjudication_mode=""):
    """Returns (report dict, report JSON text, text table)."""
    text, table = _dschecker.evaluate(str(dataset), str(configs), seed, jobs, str(adjudications), adjudication_mode)
    return json.loads(text), text, table
