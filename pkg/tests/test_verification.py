"""Tests for the block gradient-check suite."""

from __future__ import annotations

import pytest

from common.exceptions import UsageError
from hgct.verification import (
    BLOCK_NAMES,
    GRADCHECK_TOLERANCE,
    GradcheckResult,
    GradcheckSummary,
    check_block,
    resolve_blocks,
    run_gradcheck_suite,
)


class TestResolveBlocks:
    def test_all(self):
        assert resolve_blocks("all") == list(BLOCK_NAMES)

    def test_comma_list(self):
        assert resolve_blocks("gsa, cwff") == ["gsa", "cwff"]

    @pytest.mark.parametrize("selection", ["nope", "gsa,nope", ""])
    def test_unknown(self, selection):
        with pytest.raises(UsageError):
            resolve_blocks(selection)


class TestSummary:
    def test_worst_by_block_and_verdict(self):
        summary = GradcheckSummary(
            [
                GradcheckResult("gsa", 0, "input", 1e-8, 1),
                GradcheckResult("gsa", 1, "input", 3e-7, 2),
                GradcheckResult("cwff", 0, "input", 2e-4, 1),
            ]
        )
        assert summary.worst_by_block() == {"gsa": 3e-7, "cwff": 2e-4}
        assert summary.max_error == 2e-4
        assert not summary.passed
        assert summary.to_dict()["tolerance"] == GRADCHECK_TOLERANCE

    def test_empty_summary_passes(self):
        assert GradcheckSummary().passed


class TestCheckBlock:
    """One seed per block type; the full sweep is marked slow."""

    @pytest.mark.parametrize("block", BLOCK_NAMES)
    def test_single_seed_passes(self, block):
        results = check_block(block, seed=0)
        assert [r.target for r in results][0] == "input"
        assert len(results) == 2
        for result in results:
            assert result.passed, result.to_dict()

    def test_deterministic(self):
        first = check_block("gsa", seed=3)
        second = check_block("gsa", seed=3)
        assert [r.error for r in first] == [r.error for r in second]

    def test_unknown_block(self):
        with pytest.raises(UsageError):
            check_block("attention", seed=0)

    @pytest.mark.slow
    def test_full_suite(self):
        summary = run_gradcheck_suite(seeds=10)
        assert len(summary.results) == 2 * 10 * len(BLOCK_NAMES)
        assert summary.passed, summary.worst_by_block()
