import json
from io import StringIO
from pathlib import Path

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError
from pytest_django.fixtures import SettingsWrapper

from knnmt.datastore import load
from knnmt.decode import read_candidates, write_candidates
from knnmt.decode.candidates import CandidateRecord, HypothesisRecord, parse_logliks
from knnmt.toymodel import SentencePair, read_corpus


@pytest.fixture(autouse=True)
def data_dir(settings: SettingsWrapper, tmp_path: Path) -> Path:
    settings.DATA_DIR = tmp_path
    return tmp_path


def run(name: str, *args: str | Path) -> str:
    out = StringIO()
    call_command(name, *[str(a) for a in args], stdout=out, stderr=out)
    return out.getvalue()


def run_all(config: Path) -> None:
    for name in ("train", "build", "decode"):
        run(name, "--config", config)


def test_gen_corpus(tmp_path: Path) -> None:
    output = run("gen_corpus", "--seed", "4", "--n-train", "20", "--n-valid", "3", "--n-test", "2")

    corpus = tmp_path / "corpus"
    assert output.count("Wrote") == 4
    assert sorted(p.name for p in corpus.iterdir()) == [
        "test.ref_b.tsv",
        "test.tsv",
        "train.tsv",
        "valid.tsv",
    ]
    assert len(read_corpus(corpus / "train.tsv")) == 20
    assert len(read_corpus(corpus / "test.ref_b.tsv")) == 2


def test_gen_corpus_rejects_bad_sizes() -> None:
    with pytest.raises(CommandError) as e:
        run("gen_corpus", "--seed", "0", "--n-train", "0")
    assert e.value.returncode == 2


def test_full_run(tmp_path: Path, run_toml: Path) -> None:
    run_all(run_toml)
    output = run(
        "eval",
        tmp_path / "run" / "candidates.jsonl",
        "--refs",
        tmp_path / "corpus" / "test.tsv",
        "--out",
        tmp_path / "run" / "report.json",
    )

    candidates = read_candidates(tmp_path / "run" / "candidates.jsonl")
    report = json.loads((tmp_path / "run" / "report.json").read_text(encoding="utf-8"))
    assert "Wrote report" in output
    assert candidates.config["decode"]["k"] == 8
    assert candidates.ids() == list(range(6))
    assert all(len(record.hyps) == 4 for record in candidates.records)
    assert (report["n"], report["n_sentences"]) == (4, 6)
    assert report["bleu_at_n"] >= report["bleu_at_1"]
    assert 0 <= report["dp"] <= 100
    assert report["deq"] is None


def test_train_and_build_are_reproducible(tmp_path: Path, run_toml: Path) -> None:
    run_all(run_toml)
    out = tmp_path / "run"
    first = {name: (out / name).read_bytes() for name in ("model.json", "datastore.knnd")}

    run_all(run_toml)

    assert {name: (out / name).read_bytes() for name in first} == first


def test_datastore_has_one_entry_per_target_token(tmp_path: Path, run_toml: Path) -> None:
    run("train", "--config", run_toml)
    output = run("build", "--config", run_toml)

    pairs = read_corpus(tmp_path / "corpus" / "train.tsv")
    ds = load((tmp_path / "run" / "datastore.knnd").read_bytes())
    assert len(ds) == sum(len(target) + 1 for _, target in pairs)
    assert f"{len(ds)} entries" in output
    assert (tmp_path / "run" / "distance_stats.json").exists()


def test_build_with_index(tmp_path: Path, run_toml: Path) -> None:
    run("train", "--config", run_toml)
    output = run("build", "--config", run_toml, "--set", "datastore.n_clusters=4")
    run("decode", "--config", run_toml, "--set", "datastore.n_clusters=4")

    assert "Index with 4 clusters" in output
    assert (tmp_path / "run" / "datastore.knni").exists()
    assert len(read_candidates(tmp_path / "run" / "candidates.jsonl").records) == 6


def test_missing_artifact(run_toml: Path) -> None:
    with pytest.raises(CommandError, match="run `manage train` first") as e:
        run("build", "--config", run_toml)
    assert e.value.returncode == 3


@pytest.mark.parametrize(
    "overrides",
    [
        ["decode.k=0"],
        ["decode.unknown=1"],
        ["decode.perturb.kind=randomize", "decode.perturb.h=0.5"],
        ["decode"],
    ],
)
def test_bad_override(run_toml: Path, overrides: list[str]) -> None:
    args = [arg for override in overrides for arg in ("--set", override)]

    with pytest.raises(CommandError) as e:
        run("train", "--config", run_toml, *args)
    assert e.value.returncode == 2


def test_gen_corpus_is_reproducible(tmp_path: Path) -> None:
    sizes = ("--n-train", "20", "--n-valid", "3", "--n-test", "4")
    for name, seed in (("first", "4"), ("second", "4"), ("other", "5")):
        run("gen_corpus", "--seed", seed, *sizes, "--out", tmp_path / name)

    def contents(name: str) -> dict[str, bytes]:
        return {p.name: p.read_bytes() for p in sorted((tmp_path / name).iterdir())}

    assert contents("first") == contents("second")
    assert contents("first") != contents("other")


@pytest.mark.parametrize(
    "perturbation",
    [
        [],
        ["decode.perturb.kind=adaptive_noise", "decode.perturb.adaptive_h_m=1", "decode.perturb.adaptive_h_s=1"],
        ["decode.perturb.kind=randomize", "decode.perturb.h=3"],
    ],
)
def test_decode_is_reproducible(tmp_path: Path, run_toml: Path, perturbation: list[str]) -> None:
    corpus = tmp_path / "corpus"
    perturb = [arg for override in perturbation for arg in ("--set", override)]
    run("train", "--config", run_toml)
    run("build", "--config", run_toml)

    def decode(name: str, workers: str) -> tuple[bytes, ...]:
        out = tmp_path / name
        run(
            "decode",
            "--config",
            run_toml,
            *perturb,
            "--workers",
            workers,
            "--out",
            out / "candidates.jsonl",
        )
        for refs in ("test.tsv", "test.ref_b.tsv"):
            run(
                "decode",
                "--config",
                run_toml,
                *perturb,
                "--forced-refs",
                corpus / refs,
                "--out",
                out / f"logliks.{refs}.jsonl",
            )
        return tuple(p.read_bytes() for p in sorted(out.iterdir()))

    first = decode("first", "1")

    assert len(first) == 3
    assert decode("second", "1") == first
    assert decode("parallel", "3") == first


def test_eval_is_reproducible(tmp_path: Path, run_toml: Path) -> None:
    corpus = tmp_path / "corpus"
    run_all(run_toml)
    for refs in ("test.tsv", "test.ref_b.tsv"):
        run("decode", "--config", run_toml, "--forced-refs", corpus / refs)

    def evaluate(name: str) -> bytes:
        out = tmp_path / name
        run(
            "eval",
            tmp_path / "run" / "candidates.jsonl",
            "--refs",
            corpus / "test.tsv",
            "--logliks",
            tmp_path / "run" / "logliks.test.jsonl",
            tmp_path / "run" / "logliks.test.ref_b.jsonl",
            "--constant-rate",
            "-1",
            "--out",
            out,
        )
        return out.read_bytes()

    assert evaluate("first.json") == evaluate("second.json")


def write_reference_candidates(path: Path, pairs: list[SentencePair], copies: int) -> None:
    write_candidates(
        path,
        [
            CandidateRecord(
                id=i,
                source=list(source),
                hyps=[
                    HypothesisRecord(tokens=list(target), logprob=0.0, rank=rank)
                    for rank in range(1, copies + 1)
                ],
            )
            for i, (source, target) in enumerate(pairs)
        ],
        {},
    )


def test_eval_references_against_themselves(tmp_path: Path, corpus_dir: Path) -> None:
    pairs = read_corpus(corpus_dir / "test.tsv")
    candidates = tmp_path / "self.jsonl"
    write_reference_candidates(candidates, pairs, copies=2)

    report = json.loads(run("eval", candidates, "--refs", corpus_dir / "test.tsv"))

    assert report["bleu_at_1"] == pytest.approx(100.0)
    assert report["ref_bleu"] == pytest.approx(100.0)
    assert report["dp"] == pytest.approx(0.0, abs=1e-9)
    assert report["n"] == 2


def test_eval_rejects_misaligned_candidates(tmp_path: Path, corpus_dir: Path) -> None:
    pairs = read_corpus(corpus_dir / "test.tsv")
    candidates = tmp_path / "short.jsonl"
    write_reference_candidates(candidates, pairs[:-1], copies=1)

    with pytest.raises(CommandError, match=r"missing \[5\]") as e:
        run("eval", candidates, "--refs", corpus_dir / "test.tsv")
    assert e.value.returncode == 3


def test_eval_rejects_malformed_candidates(tmp_path: Path, corpus_dir: Path) -> None:
    candidates = tmp_path / "bad.jsonl"
    candidates.write_text('{"header": {}}\nnot json\n', encoding="utf-8")

    with pytest.raises(CommandError, match="at offset 2") as e:
        run("eval", candidates, "--refs", corpus_dir / "test.tsv")
    assert e.value.returncode == 3


def test_eval_with_every_option(tmp_path: Path, run_toml: Path) -> None:
    corpus = tmp_path / "corpus"
    run_all(run_toml)
    for refs in ("test.tsv", "test.ref_b.tsv"):
        run("decode", "--config", run_toml, "--forced-refs", corpus / refs)
    run(
        "decode",
        "--config",
        run_toml,
        "--set",
        "decode.perturb.kind=randomize",
        "--out",
        tmp_path / "randomized.jsonl",
    )

    output = run(
        "eval",
        tmp_path / "randomized.jsonl",
        "--refs",
        corpus / "test.tsv",
        "--other",
        tmp_path / "run" / "candidates.jsonl",
        "--base",
        tmp_path / "run" / "candidates.jsonl",
        "--logliks",
        tmp_path / "run" / "logliks.test.jsonl",
        tmp_path / "run" / "logliks.test.ref_b.jsonl",
        "--constant-rate",
        "-1",
    )

    logliks = parse_logliks((tmp_path / "run" / "logliks.test.jsonl").read_text(encoding="utf-8"))
    report = json.loads(output)
    assert len(logliks) == 6
    assert report["merged_bleu"] is not None
    assert report["madll"] >= 0
    assert report["madll_excluded"] == 0
    assert report["spll_mean"] == -1.0


SWEEP_TOML = """\
[base.corpus]
dir = "corpus"

[base.model]
seed = 0
embed_dim = 16

[base.datastore]
kmeans_seed = 0

[base.decode]
seed = 0
beam_size = 4
dbs_groups = 2
k = 8
max_len = 12

[base.output]
dir = "run"

[axes]
"decode.score.lambda" = [0.2, 0.8]
"""


@pytest.fixture
def sweep_toml(tmp_path: Path, corpus_dir: Path) -> Path:
    path = tmp_path / "sweep.toml"
    path.write_text(SWEEP_TOML, encoding="utf-8")
    return path


def test_sweep(tmp_path: Path, sweep_toml: Path) -> None:
    output = run(
        "sweep",
        "--spec",
        sweep_toml,
        "--plot",
        tmp_path / "sweep.svg",
        "--trend",
        "decode.score.lambda",
    )

    lines = output.splitlines()
    assert lines[0] == "decode.score.lambda,seed,dp,bleu_at_1,bleu_at_n,ref_bleu,deq"
    assert [line.split(",")[:2] for line in lines[1:3]] == [["0.2", "0"], ["0.8", "0"]]
    assert "Spearman rho between decode.score.lambda and DP" in output
    assert (tmp_path / "sweep.svg").read_text(encoding="utf-8").startswith("<?xml")


def test_sweep_is_reproducible(tmp_path: Path, sweep_toml: Path) -> None:
    def sweep(name: str) -> tuple[bytes, bytes]:
        table, figure = tmp_path / f"{name}.csv", tmp_path / f"{name}.svg"
        run("sweep", "--spec", sweep_toml, "--out", table, "--plot", figure)
        return table.read_bytes(), figure.read_bytes()

    assert sweep("first") == sweep("second")


def test_sweep_rejects_too_many_runs(settings: SettingsWrapper, sweep_toml: Path) -> None:
    settings.SWEEP_MAX_POINTS = 1

    with pytest.raises(CommandError, match="max_points") as e:
        run("sweep", "--spec", sweep_toml)
    assert e.value.returncode == 2
