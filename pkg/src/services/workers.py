import queue
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from src.config.index import appConfig
from src.config.logging import get_logger

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_DONE = object()


class _Failure:
    def __init__(self, error: BaseException):
        self.error = error


def pipelined(produce: Iterable[T], consume: Callable[[T], None], queue_size: int = 4, name: str = "pipeline") -> None:
    """
    Run `produce` on a worker thread and feed its items to `consume` on the calling thread
    through a bounded queue. The producer blocks while the queue is full; items keep their order.
    A producer failure is re-raised here after the queue drains.
    """
    if queue_size < 1:
        raise ValueError(f"queue_size must be >= 1, got {queue_size}")
    channel: "queue.Queue[object]" = queue.Queue(maxsize=queue_size)
    stop = threading.Event()

    def offer(item) -> bool:
        while not stop.is_set():
            try:
                channel.put(item, timeout=0.1)
                return True
            except queue.Full:
                continue
        return False

    def run_producer():
        try:
            for item in produce:
                if not offer(item):
                    return
            offer(_DONE)
        except BaseException as e:
            logger.error("pipeline_producer_failed", pipeline=name, error=str(e), exc_info=True)
            offer(_Failure(e))

    producer = threading.Thread(target=run_producer, name=f"{name}-producer", daemon=True)
    producer.start()
    consumed = 0
    try:
        while True:
            item = channel.get()
            if item is _DONE:
                break
            if isinstance(item, _Failure):
                raise item.error
            consume(item)
            consumed += 1
    finally:
        stop.set()
        # unblock a producer waiting on a full queue
        while not channel.empty():
            try:
                channel.get_nowait()
            except queue.Empty:
                break
        producer.join()
    logger.debug("pipeline_drained", pipeline=name, items=consumed)


def parallel_map(function: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """Ordered thread-pool map. workers=0/None uses VIBRO_WORKERS; 1 runs inline."""
    workers = workers or appConfig["workers"]
    if workers <= 1:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(function, items))
