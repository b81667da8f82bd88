"""
Cache configuration and management for the Ricci lab.

This module provides caching functionality using cachetools for:
1. ball volumes - LRU cache, one quadrature per (model, center, radius)
2. cost matrices - small LRU cache of squared-distance matrices between point sets
3. experiment reports - TTL cache for API runs keyed by the config hash
4. preset catalog - protected single-entry cache
"""

import json
import hashlib
from typing import Any, Dict, Optional

import numpy as np
from cachetools import TTLCache, LRUCache
from datetime import datetime

from app.lab.geometry import ManifoldModel, ball_volume, cost_matrix


# Cache instances
ball_volume_cache = LRUCache(maxsize=1024)
cost_matrix_cache = LRUCache(maxsize=16)  # matrices can be large
report_cache = TTLCache(maxsize=64, ttl=3600)  # 1 hour TTL
preset_catalog_cache = TTLCache(maxsize=1, ttl=24 * 3600)

# Special key for the protected cache entry
PRESET_CATALOG_KEY = "preset_catalog"


def generate_cache_key(data: Any) -> str:
    """
    Generate a consistent cache key from any data structure.

    Args:
        data: The data to generate a key for (dict, list, string, etc.)

    Returns:
        A SHA256 hash string to use as cache key
    """
    json_str = json.dumps(data, sort_keys=True, default=str)
    return hashlib.sha256(json_str.encode()).hexdigest()


def _array_digest(points: np.ndarray) -> str:
    points = np.ascontiguousarray(points, dtype=float)
    return hashlib.sha256(points.tobytes() + str(points.shape).encode()).hexdigest()


def cached_ball_volume(model: ManifoldModel, x0, R: float) -> float:
    """
    Ball volume through the LRU cache.

    Args:
        model: The manifold model
        x0: Ball center in chart coordinates
        R: Ball radius

    Returns:
        The Riemannian area of the closed ball
    """
    key = generate_cache_key({"model": model.spec(), "x0": np.asarray(x0, dtype=float).tolist(), "R": float(R)})
    value = ball_volume_cache.get(key)
    if value is None:
        value = ball_volume(model, x0, R)
        ball_volume_cache[key] = value
    return value


def cached_cost_matrix(model: ManifoldModel, X: np.ndarray, Y: np.ndarray, workers: int = 1) -> np.ndarray:
    """Squared-distance matrix through the LRU cache; callers must not modify the returned array."""
    key = generate_cache_key({"model": model.spec(), "X": _array_digest(X), "Y": _array_digest(Y)})
    costs = cost_matrix_cache.get(key)
    if costs is None:
        costs = cost_matrix(model, X, Y, workers=workers)
        cost_matrix_cache[key] = costs
    return costs


def get_report_from_cache(cache_key: str) -> Optional[Dict]:
    return report_cache.get(cache_key)


def set_report_cache(cache_key: str, data: Dict) -> None:
    report_cache[cache_key] = data


def get_preset_catalog_from_cache() -> Optional[Dict]:
    return preset_catalog_cache.get(PRESET_CATALOG_KEY)


def set_preset_catalog_cache(data: Dict) -> None:
    """
    Set the preset catalog in cache.
    This entry survives clears unless explicitly dropped.

    Args:
        data: The catalog as returned by preset_catalog()
    """
    preset_catalog_cache[PRESET_CATALOG_KEY] = data


def clear_ball_volume_cache() -> None:
    ball_volume_cache.clear()


def clear_cost_matrix_cache() -> None:
    cost_matrix_cache.clear()


def clear_report_cache() -> None:
    report_cache.clear()


def clear_preset_catalog_cache(preserve_catalog: bool = True) -> None:
    """
    Clear the preset catalog cache.

    Args:
        preserve_catalog: If True, keep the catalog entry
    """
    if preserve_catalog and PRESET_CATALOG_KEY in preset_catalog_cache:
        catalog = preset_catalog_cache[PRESET_CATALOG_KEY]
        preset_catalog_cache.clear()
        preset_catalog_cache[PRESET_CATALOG_KEY] = catalog
    else:
        preset_catalog_cache.clear()


def get_cache_stats() -> Dict[str, Any]:
    """
    Get statistics about all caches.

    Returns:
        Dictionary containing cache statistics
    """
    return {
        "ball_volume_cache": {
            "type": "LRUCache",
            "maxsize": ball_volume_cache.maxsize,
            "current_size": len(ball_volume_cache),
        },
        "cost_matrix_cache": {
            "type": "LRUCache",
            "maxsize": cost_matrix_cache.maxsize,
            "current_size": len(cost_matrix_cache),
        },
        "report_cache": {
            "type": "TTLCache",
            "maxsize": report_cache.maxsize,
            "current_size": len(report_cache),
            "ttl_seconds": report_cache.ttl,
            "keys": list(report_cache.keys())
        },
        "preset_catalog_cache": {
            "type": "TTLCache",
            "maxsize": preset_catalog_cache.maxsize,
            "current_size": len(preset_catalog_cache),
            "ttl_seconds": preset_catalog_cache.ttl,
        },
        "protected_keys": {
            "preset_catalog": PRESET_CATALOG_KEY
        },
        "timestamp": datetime.now().isoformat()
    }
