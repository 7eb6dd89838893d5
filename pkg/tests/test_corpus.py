import numpy as np
import pytest
from nibble_coloring.lab.concentration import MAX_EXCEPTIONAL_PROBABILITY, exceptional_stats
from nibble_coloring.lab.corpus import (
    CorpusReport,
    WitnessCorpus,
    build_corpus,
    hamming_ball,
    random_event_pair,
    random_structure,
    run_corpus,
)
from nibble_coloring.lab.space import verify_structure


def test_hamming_ball():
    assert sorted(hamming_ball([0, 0, 0], 1)) == [[0, 0, 0], [0, 0, 1], [0, 1, 0], [1, 0, 0]]
    assert len(hamming_ball([1, 0, 1, 0], 4)) == 16


def test_random_structure_is_valid():
    for seed in range(10):
        entry = random_structure(seed, m_max=6, n_max=8, exceptional=seed % 2 == 0)
        check = verify_structure(entry.space, entry.structure)
        assert check.ok, check.failures
        assert check.max_witness_load <= entry.structure.beta
        pr_exc, _ = exceptional_stats(entry.space, entry.structure)
        assert pr_exc <= MAX_EXCEPTIONAL_PROBABILITY + 1e-12


def test_random_event_pair():
    pair = random_event_pair(4, m_max=8)
    assert 2 <= pair.m <= 8
    assert all(len(y) == pair.m for y in pair.A + pair.B)


def test_build_corpus_is_deterministic():
    a = build_corpus(6, seed=3, m_max=5, n_max=6, event_pairs=2, event_m_max=6)
    b = build_corpus(6, seed=3, m_max=5, n_max=6, event_pairs=2, event_m_max=6)
    assert str(a) == str(b)
    assert len(a.structures) == 6 and len(a.event_pairs) == 2


def test_corpus_round_trip(tmp_path):
    corpus = build_corpus(4, seed=1, m_max=5, n_max=5, event_pairs=1, event_m_max=5)
    path = tmp_path / "corpus.json"
    corpus.to_file(path)

    loaded = WitnessCorpus.from_file(path)
    assert str(loaded) == path.read_text()
    assert loaded.structures[0].structure.indicators == corpus.structures[0].structure.indicators


def test_run_corpus():
    corpus = build_corpus(10, seed=7, m_max=6, n_max=10, exceptional_every=3, event_pairs=3, event_m_max=8)
    report = run_corpus(corpus, np.arange(0.5, 60.5, 0.5))

    assert report.ok, (report.violations, report.talagrand_failures)
    assert report.structures == 10
    assert report.event_pairs == 3
    assert report.checked + report.skipped == 10 * 120
    assert abs(report.max_direction_gap) <= 1e-6


def test_direction_gap_fails_the_report():
    report = CorpusReport(max_direction_gap=1e-3)
    assert not report.ok


@pytest.mark.slow
def test_run_corpus_full_scale():
    corpus = build_corpus(1000, seed=2024, m_max=14, n_max=20, exceptional_every=3, event_pairs=200, event_m_max=12)

    for entry in corpus.structures:
        if entry.structure.exceptional:
            pr_exc, _ = exceptional_stats(entry.space, entry.structure)
            assert 0 < pr_exc <= MAX_EXCEPTIONAL_PROBABILITY + 1e-12

    report = run_corpus(corpus, np.arange(0.5, 60.5, 0.5))

    assert report.ok, (report.violations[:5], report.talagrand_failures[:5], report.max_direction_gap)
    assert report.structures == 1000
    assert report.with_exceptional >= 100
    assert report.checked > 0
    assert report.event_pairs == 200
    assert report.cross_checked > 0
