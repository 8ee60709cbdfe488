import functools
import os
import pickle
import tempfile
import threading
import time
from collections.abc import Hashable
from typing import Any, Callable, Optional, ParamSpec, Protocol, TypeVar, cast

from src.utils.logging_config import get_logger

logger = get_logger(__name__)

T = TypeVar("T")  # Return type of the decorated function
P = ParamSpec("P")  # Parameters of the decorated function


class SpectrumCache:
    """A thread-safe LRU cache for radial eigensystems"""

    def __init__(self, max_size: int = 32, cache_name: Optional[str] = None) -> None:
        """
        Initialize the cache

        Args:
            max_size: Maximum number of eigensystems to keep
            cache_name: Optional name enabling persistence between runs
        """
        self.max_size = max_size
        self.cache_name = cache_name
        self.cache: dict[Hashable, Any] = {}
        self.access_times: dict[Hashable, float] = {}
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()
        self._save_lock = threading.Lock()

        if cache_name:
            self._load_cache()

    def persist_to(self, cache_name: str) -> None:
        """Enable on-disk persistence after construction and merge stored entries"""
        self.cache_name = cache_name
        self._load_cache()

    def get(self, key: Hashable) -> Optional[Any]:  # noqa: ANN401
        with self._lock:
            if key not in self.cache:
                self.misses += 1
                return None
            self.hits += 1
            self.access_times[key] = time.monotonic()
            return self.cache[key]

    def set(self, key: Hashable, value: Any) -> None:  # noqa: ANN401
        with self._lock:
            if len(self.cache) >= self.max_size and key not in self.cache:
                self._evict_lru()

            self.cache[key] = value
            self.access_times[key] = time.monotonic()

        if self.cache_name:
            self._save_cache()

    def _evict_lru(self) -> None:
        """Evict the least recently used entry (lock held by caller)"""
        if not self.access_times:
            return

        oldest_key = min(self.access_times.items(), key=lambda x: x[1])[0]
        del self.cache[oldest_key]
        del self.access_times[oldest_key]
        logger.debug(f"Evicted eigensystem {oldest_key}")

    def clear(self) -> None:
        with self._lock:
            self.cache.clear()
            self.access_times.clear()
            self.hits = 0
            self.misses = 0
        if self.cache_name:
            self._save_cache()

    def get_stats(self) -> dict[str, Any]:
        return {
            "size": len(self.cache),
            "max_size": self.max_size,
            "hits": self.hits,
            "misses": self.misses,
            "utilization": len(self.cache) / self.max_size if self.max_size > 0 else 0,
            "persistent": self.cache_name is not None,
        }

    def _get_cache_path(self) -> str:
        cache_dir = os.path.join(os.path.expanduser("~"), ".cache", "degenwave")
        os.makedirs(cache_dir, exist_ok=True)
        return os.path.join(cache_dir, f"{self.cache_name}.pkl")

    def _load_cache(self) -> None:
        cache_path = self._get_cache_path()
        try:
            if os.path.exists(cache_path):
                with open(cache_path, "rb") as f:
                    data = pickle.load(f)
                self.cache = data.get("cache", {})
                # Access order is not meaningful across processes
                now = time.monotonic()
                self.access_times = {key: now for key in self.cache}
                logger.debug(
                    f"Loaded cache from {cache_path} with {len(self.cache)} entries"
                )
        except Exception as e:
            logger.error(f"Error loading cache from disk: {str(e)}")
            self.cache = {}
            self.access_times = {}

    def _save_cache(self) -> None:
        cache_path = self._get_cache_path()
        try:
            # one writer at a time; readers only ever see a complete file
            with self._save_lock:
                with self._lock:
                    snapshot = dict(self.cache)
                fd, tmp_path = tempfile.mkstemp(
                    dir=os.path.dirname(cache_path), prefix=f".{self.cache_name}.", suffix=".tmp"
                )
                try:
                    with os.fdopen(fd, "wb") as f:
                        pickle.dump({"cache": snapshot}, f)
                    os.replace(tmp_path, cache_path)
                except BaseException:
                    os.unlink(tmp_path)
                    raise
            logger.debug(f"Saved cache to {cache_path} with {len(snapshot)} entries")
        except Exception as e:
            logger.error(f"Error saving cache to disk: {str(e)}")


class CachedFunc(Protocol[P, T]):
    """Protocol for a cached function."""

    __call__: Callable[P, T]
    cache: SpectrumCache
    invalidate: Callable[[], None]


def cached(
    cache: SpectrumCache,
) -> Callable[[Callable[P, T]], CachedFunc[P, T]]:
    """
    Decorator caching results of a function with hashable arguments.

    Args:
        cache: The cache instance holding the results

    Returns:
        A decorator that stores results in the given cache
    """

    def decorator(func: Callable[P, T]) -> CachedFunc[P, T]:
        @functools.wraps(func)
        def wrapper(*args: P.args, **kwargs: P.kwargs) -> T:
            key = (func.__name__, args, tuple(sorted(kwargs.items())))

            cached_result = cache.get(key)
            if cached_result is not None:
                logger.debug(f"Cache hit for {func.__name__}{args}")
                return cast(T, cached_result)

            result = func(*args, **kwargs)
            cache.set(key, result)
            return result

        wrapper.cache = cache  # type: ignore
        wrapper.invalidate = cache.clear  # type: ignore

        return cast(CachedFunc[P, T], wrapper)

    return decorator
