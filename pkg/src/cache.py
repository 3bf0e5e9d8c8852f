"""
参考解磁盘缓存

参考解（细网格 Galerkin 演化）计算代价较大，按参数键缓存到磁盘：
系数数组存为 npz，旁边的 JSON 元数据记录参数、数组形状和 SHA-256 校验和。
元数据不合法或校验失败的条目视为损坏，记录日志后重新计算。
"""

import hashlib
import json
import os
import zipfile
from datetime import datetime
from pathlib import Path
from threading import Lock
from typing import Any, Callable, Dict, Optional

import numpy as np
from jsonschema import ValidationError, validate

from .exceptions import CacheCorruptionError
from .logger import get_logger

CACHE_VERSION = 1

METADATA_SCHEMA = {
    "type": "object",
    "required": ["version", "key", "params", "arrays", "checksum", "created_at"],
    "properties": {
        "version": {"type": "integer", "const": CACHE_VERSION},
        "key": {"type": "string", "minLength": 1},
        "params": {"type": "object"},
        "arrays": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "type": "array",
                "items": {"type": "integer", "minimum": 0},
            },
        },
        "checksum": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "created_at": {"type": "string"},
    },
}


def cache_key(params: Dict[str, Any]) -> str:
    """参数字典（键排序后的 JSON）的 SHA-256 前缀"""
    text = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:24]


def arrays_checksum(arrays: Dict[str, np.ndarray]) -> str:
    """按名称顺序对数组名、形状与字节内容做 SHA-256"""
    digest = hashlib.sha256()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype=np.float64)
        digest.update(name.encode("utf-8"))
        digest.update(str(arr.shape).encode("utf-8"))
        digest.update(arr.tobytes())
    return digest.hexdigest()


class ReferenceCache:
    """参考解缓存"""

    def __init__(self, cache_dir: str):
        """
        初始化缓存

        Args:
            cache_dir: 缓存目录
        """
        self.cache_dir = Path(cache_dir)
        self.logger = get_logger()
        self._lock = Lock()
        self._hit_count = 0
        self._miss_count = 0
        self._corrupt_count = 0

    def _paths(self, key: str):
        return self.cache_dir / f"{key}.npz", self.cache_dir / f"{key}.json"

    def _load(self, key: str) -> Dict[str, np.ndarray]:
        data_path, meta_path = self._paths(key)
        try:
            with open(meta_path, "r", encoding="utf-8") as f:
                meta = json.load(f)
            validate(instance=meta, schema=METADATA_SCHEMA)
            with np.load(data_path, allow_pickle=False) as archive:
                arrays = {name: np.array(archive[name]) for name in archive.files}
        except (OSError, ValueError, EOFError, zipfile.BadZipFile, ValidationError) as e:
            raise CacheCorruptionError(f"缓存条目 {key} 无法读取: {e}") from e

        if meta["key"] != key or set(arrays) != set(meta["arrays"]):
            raise CacheCorruptionError(f"缓存条目 {key} 元数据与数据不一致")
        for name, shape in meta["arrays"].items():
            if list(arrays[name].shape) != shape:
                raise CacheCorruptionError(f"缓存条目 {key} 数组 {name} 形状不一致")
        if arrays_checksum(arrays) != meta["checksum"]:
            raise CacheCorruptionError(f"缓存条目 {key} 校验和不一致")
        return arrays

    def get(self, key: str) -> Optional[Dict[str, np.ndarray]]:
        """
        读取缓存

        Args:
            key: 缓存键

        Returns:
            数组字典；不存在或已损坏时返回 None（损坏条目会被删除）
        """
        data_path, meta_path = self._paths(key)
        with self._lock:
            if not (data_path.exists() and meta_path.exists()):
                self._miss_count += 1
                return None
            try:
                arrays = self._load(key)
            except CacheCorruptionError as e:
                self._miss_count += 1
                self._corrupt_count += 1
                self.logger.warning(f"{e}，将重新计算")
                self._remove(key)
                return None
            self._hit_count += 1
            return arrays

    def set(self, key: str, arrays: Dict[str, np.ndarray], params: Dict[str, Any]) -> None:
        """
        写入缓存（先写临时文件再替换）

        Args:
            key: 缓存键
            arrays: 数组字典
            params: 生成该条目的参数
        """
        arrays = {name: np.ascontiguousarray(a, dtype=np.float64) for name, a in arrays.items()}
        meta = {
            "version": CACHE_VERSION,
            "key": key,
            "params": params,
            "arrays": {name: list(a.shape) for name, a in arrays.items()},
            "checksum": arrays_checksum(arrays),
            "created_at": datetime.now().isoformat(),
        }
        data_path, meta_path = self._paths(key)
        with self._lock:
            try:
                self.cache_dir.mkdir(parents=True, exist_ok=True)
                tmp_data = data_path.with_name(data_path.name + ".tmp")
                tmp_meta = meta_path.with_name(meta_path.name + ".tmp")
                with open(tmp_data, "wb") as f:
                    np.savez(f, **arrays)
                with open(tmp_meta, "w", encoding="utf-8") as f:
                    json.dump(meta, f, indent=2, ensure_ascii=False)
                os.replace(tmp_data, data_path)
                os.replace(tmp_meta, meta_path)
                self.logger.debug(f"参考解已缓存: {data_path}")
            except OSError as e:
                self.logger.warning(f"写入缓存失败 {data_path}: {e}")

    def get_or_compute(self, params: Dict[str, Any],
                       compute: Callable[[], Dict[str, np.ndarray]]) -> Dict[str, np.ndarray]:
        """
        命中则读取，否则计算并写入

        Args:
            params: 参数字典（决定缓存键）
            compute: 计算函数

        Returns:
            数组字典
        """
        key = cache_key(params)
        arrays = self.get(key)
        if arrays is not None:
            self.logger.info(f"使用缓存的参考解 {key}")
            return arrays
        arrays = compute()
        self.set(key, arrays, params)
        return arrays

    def _remove(self, key: str) -> None:
        for path in self._paths(key):
            try:
                path.unlink()
            except FileNotFoundError:
                pass
            except OSError as e:
                self.logger.warning(f"删除缓存文件失败 {path}: {e}")

    def delete(self, key: str) -> None:
        with self._lock:
            self._remove(key)

    def clear(self) -> None:
        """清空缓存目录中的所有条目"""
        with self._lock:
            if self.cache_dir.exists():
                for meta_path in self.cache_dir.glob("*.json"):
                    self._remove(meta_path.stem)
            self._hit_count = 0
            self._miss_count = 0
            self._corrupt_count = 0

    def get_stats(self) -> Dict[str, Any]:
        """
        获取缓存统计

        Returns:
            统计信息字典
        """
        with self._lock:
            total_requests = self._hit_count + self._miss_count
            hit_rate = self._hit_count / total_requests * 100 if total_requests > 0 else 0
            return {
                'hit_count': self._hit_count,
                'miss_count': self._miss_count,
                'corrupt_count': self._corrupt_count,
                'total_requests': total_requests,
                'hit_rate': f"{hit_rate:.2f}%",
            }
