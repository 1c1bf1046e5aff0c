"""End-to-end smoke tests for the python module."""

import math

import pytest

import fieldmatch as fm

TINY = {
    "n_solutions": "5",
    "n_companies": "50",
    "n_industries": "3",
    "vocab_seed_words": "300",
    "positives_per_solution": "3",
    "negatives_per_positive": "2",
    "d_e": "12",
    "token_layers": "1",
    "heads": "2",
    "ff": "16",
    "max_len": "48",
    "field_layers": "1",
    "d_s": "6",
    "autodis_buckets": "3",
    "pretrain_epochs": "1",
    "pretrain_batch": "8",
    "epochs": "1",
    "batch_size": "16",
    "seed": "5",
}


def test_corpus_generation_and_validation():
    schema, solutions, companies, positives = fm.generate_corpus(TINY)
    assert len(solutions) == 5
    assert len(companies) == 50
    assert len(positives) == 15
    for record in solutions:
        assert fm.validate_solution(record, schema).ok()
    for record in companies:
        assert fm.validate_company(record, schema).ok()


def test_examples_and_split():
    schema, solutions, companies, positives = fm.generate_corpus(TINY)
    examples = fm.build_examples(positives, companies, 2, 9)
    assert len(examples) == len(positives) * 3
    train, val, test = fm.split_dataset(examples, 0.7, 0.1, 0.2, 9)
    assert len(train) + len(val) + len(test) == len(examples)


def test_sequence_assembly_grammar():
    schema, solutions, companies, _ = fm.generate_corpus(TINY)
    vocab = fm.build_vocab(
        [t for s in solutions for t in s.desc.values()]
        + [t for c in companies for t in c.desc.values()],
        1,
    )
    seq = fm.assemble_description(solutions[0], companies[0], schema, vocab, 48)
    assert len(seq.token_ids) == 48
    assert seq.token_ids[0] == vocab.id("[CLS]")
    assert fm.sequence_violations_description(seq, schema) == []


def test_ranking_metrics_fixture():
    pool = [("c0", 0.9, 1), ("c1", 0.8, 0), ("c2", 0.7, 1), ("c3", 0.6, 0)]
    metrics = fm.ranking_metrics(pool)
    assert math.isclose(metrics["ap"], (1.0 + 2.0 / 3.0) / 2.0, rel_tol=1e-12)
    assert math.isclose(metrics["auc"], 0.75, rel_tol=1e-12)


def test_pipeline_round_trip(tmp_path):
    out = str(tmp_path / "run")
    fm.gen_data(TINY, out)
    fm.build_vocab_files(TINY, out, out)
    fm.pretrain(TINY, out, out)
    fm.train(TINY, out, out)
    report = fm.evaluate(TINY, out, out)
    assert 0.0 <= report["summary"]["MAP"] <= 1.0
    assert 0.0 <= report["summary"]["AUC"] <= 1.0
    assert len(report["config_fingerprint"]) == 16

    ranking = fm.rank(TINY, out, out, "S00000", top=5)
    assert len(ranking) == 5
    scores = [score for _, score in ranking]
    assert scores == sorted(scores, reverse=True)


def test_unknown_config_key_rejected():
    bad = dict(TINY)
    bad["mystery"] = "1"
    with pytest.raises(Exception):
        fm.config_fingerprint(bad)
