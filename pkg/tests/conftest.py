from pathlib import Path

import pytest

from erld.matching import RuleSet
from erld.model import load_json, load_schema, read_corpus

DATA = Path(__file__).parent / "data"

# labels used in the worked example -> document ids in sample_corpus.jsonl
LABELS = {
    "d1": "PAN11", "d2": "VOT22", "d3": "DL33", "d4": "BAN44", "d5": "VOT55", "d6": "BAN66",
    "d7": "DL77", "d8": "PAN88", "d9": "BAN91", "d10": "VOT10", "d11": "DL12",
}


def ids(*labels: str) -> frozenset[str]:
    return frozenset(LABELS[x] for x in labels)


@pytest.fixture(scope="session")
def schema():
    return load_schema(DATA / "sample_schema.json")


@pytest.fixture(scope="session")
def rules(schema):
    return RuleSet.from_dict(load_json(DATA / "sample_rules.json"), schema)


@pytest.fixture(scope="session")
def corpus(schema):
    return read_corpus(DATA / "sample_corpus.jsonl", schema)


@pytest.fixture(scope="session")
def by_label(corpus):
    by_id = {d.id: d for d in corpus}
    return {label: by_id[doc_id] for label, doc_id in LABELS.items()}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
