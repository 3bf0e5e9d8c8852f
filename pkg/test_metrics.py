#!/usr/bin/env python3
"""
阶段计时与日志测试
"""

import pytest

from src.logger import current_context, get_logger, setup_logger
from src.metrics import StageMetricsCollector, get_collector, log_cost_summary, timed


@pytest.fixture
def collector():
    get_collector().reset()
    yield get_collector()
    get_collector().reset()


def test_timed_counts_calls_and_errors(collector):
    @timed("demo_stage")
    def work(fail=False):
        if fail:
            raise RuntimeError("boom")
        return 7

    assert work() == 7
    with pytest.raises(RuntimeError):
        work(fail=True)
    metric = collector.get_metric("demo_stage")
    assert metric.call_count == 2
    assert metric.error_count == 1
    assert metric.min_duration <= metric.max_duration


def test_timed_default_name(collector):
    @timed()
    def assemble_something():
        return None

    assemble_something()
    assert collector.get_metric("assemble_something").call_count == 1


def test_cost_ratio_and_summary():
    collector = StageMetricsCollector()
    assert collector.cost_ratio("fine_postprocess", "coarse_evolution") is None
    collector.record_call("coarse_evolution", 2.0)
    collector.record_call("fine_postprocess", 0.5)
    assert collector.cost_ratio("fine_postprocess", "coarse_evolution") == pytest.approx(0.25)
    summary = collector.get_summary()
    assert summary["total_calls"] == 2
    assert summary["slowest_stage"]["name"] == "coarse_evolution"
    assert collector.get_metric("missing").call_count == 0
    collector.reset()
    assert collector.get_summary()["slowest_stage"] is None


def test_log_file_has_no_colour_codes(tmp_path):
    log_file = tmp_path / "logs" / "run.log"
    try:
        logger = setup_logger(level="DEBUG", log_file=str(log_file))
        assert get_logger() is logger
        collector = StageMetricsCollector()
        collector.record_call("coarse_evolution", 1.0)
        collector.record_call("fine_postprocess", 0.1)
        log_cost_summary(logger, collector)
        logger.success("完成")
        text = log_file.read_text(encoding="utf-8")
        assert "\x1b[" not in text
        assert "✓ 完成" in text
        assert "0.100" in text
    finally:
        setup_logger()


def test_context_label_is_written_and_restored(tmp_path):
    log_file = tmp_path / "ctx.log"
    try:
        logger = setup_logger(log_file=str(log_file))
        with logger.context("H=1/6, h=1/20"):
            logger.info("粗网格演化")
            with logger.context("newton"):
                assert current_context() == "H=1/6, h=1/20 | newton"
                logger.debug("不输出")
            assert current_context() == "H=1/6, h=1/20"
        assert current_context() == ""
        logger.info("结束")
        lines = log_file.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        assert lines[0].endswith("| INFO     | [H=1/6, h=1/20] 粗网格演化")
        assert lines[1].endswith("| INFO     | 结束")
        assert "\x1b[" not in lines[0]
    finally:
        setup_logger()


def test_context_label_is_restored_after_error():
    logger = get_logger()
    with pytest.raises(RuntimeError):
        with logger.context("N=8"):
            raise RuntimeError("失败")
    assert current_context() == ""
