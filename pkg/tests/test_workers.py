import threading

import pytest

from src.config.logging import command_var, run_id_var
from src.middleware.run_context import roi_scope, track_command
from src.services.workers import parallel_map, pipelined


class TestPipelined:
    def test_items_arrive_in_order(self):
        seen = []
        pipelined(iter(range(100)), seen.append, queue_size=2)
        assert seen == list(range(100))

    def test_producer_waits_for_the_consumer(self):
        produced = []
        gate = threading.Event()

        def produce():
            for i in range(10):
                produced.append(i)
                yield i

        def consume(item):
            if item == 0:
                gate.wait(0.2)
                # queue holds 1 item, and the producer thread holds one more it is trying to put
                assert len(produced) <= 3

        pipelined(produce(), consume, queue_size=1)
        assert produced == list(range(10))

    def test_producer_failure_reaches_the_caller(self):
        def produce():
            yield 1
            raise RuntimeError("decoder broke")

        with pytest.raises(RuntimeError, match="decoder broke"):
            pipelined(produce(), lambda item: None)

    def test_consumer_failure_stops_the_producer(self):
        def consume(item):
            if item == 3:
                raise ValueError("bad batch")

        with pytest.raises(ValueError):
            pipelined(iter(range(10_000)), consume, queue_size=1)

    def test_queue_size_must_be_positive(self):
        with pytest.raises(ValueError):
            pipelined(iter([]), lambda item: None, queue_size=0)


class TestParallelMap:
    @pytest.mark.parametrize("workers", [1, 4])
    def test_keeps_input_order(self, workers):
        assert parallel_map(lambda x: x * x, range(50), workers) == [x * x for x in range(50)]


class TestRunContext:
    def test_binds_and_clears_context(self):
        with track_command("recover") as stats:
            assert run_id_var.get() == stats.run_id
            assert command_var.get() == "recover"
        assert run_id_var.get() is None
        assert stats.duration_seconds is not None

    def test_failures_are_reraised(self):
        with pytest.raises(KeyError):
            with track_command("demix"):
                raise KeyError("roi")
        assert command_var.get() is None

    def test_roi_scope(self):
        from src.config.logging import roi_var

        with roi_scope("0,0,4,4"):
            assert roi_var.get() == "0,0,4,4"
        assert roi_var.get() is None
