"""Workspace persistence behind a small storage interface.

MemoryStore backs tests and ephemeral runs; FileStore keeps one JSON file
per workspace under <root>/<user_id>/ for single-binary deployments.
Values are opaque bytes (canonical workspace documents), so snapshots are
naturally immutable.
"""

from __future__ import annotations

import json
import os
import re
import threading
from pathlib import Path
from typing import Dict, List, Optional


class WorkspaceStore:
    def get(self, user_id: str, workspace_id: str) -> Optional[bytes]:
        raise NotImplementedError

    def put(self, user_id: str, workspace_id: str, data: bytes) -> None:
        raise NotImplementedError

    def list_ids(self, user_id: str) -> List[str]:
        raise NotImplementedError

    def get_account(self, user_id: str) -> Optional[dict]:
        raise NotImplementedError

    def put_account(self, user_id: str, record: dict) -> None:
        raise NotImplementedError


class MemoryStore(WorkspaceStore):
    def __init__(self):
        self._data: Dict[str, Dict[str, bytes]] = {}
        self._accounts: Dict[str, dict] = {}
        self._lock = threading.Lock()

    def get(self, user_id, workspace_id):
        with self._lock:
            return self._data.get(user_id, {}).get(workspace_id)

    def put(self, user_id, workspace_id, data):
        with self._lock:
            self._data.setdefault(user_id, {})[workspace_id] = bytes(data)

    def list_ids(self, user_id):
        with self._lock:
            return sorted(self._data.get(user_id, {}))

    def get_account(self, user_id):
        with self._lock:
            record = self._accounts.get(user_id)
            return dict(record) if record else None

    def put_account(self, user_id, record):
        with self._lock:
            self._accounts[user_id] = dict(record)


_SAFE_ID = re.compile(r"[^A-Za-z0-9_-]")


def _safe(value: str) -> str:
    return _SAFE_ID.sub("_", value)[:80] or "_"


class FileStore(WorkspaceStore):
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _user_dir(self, user_id: str) -> Path:
        d = self.root / _safe(user_id)
        d.mkdir(parents=True, exist_ok=True)
        return d

    def _ws_path(self, user_id: str, workspace_id: str) -> Path:
        return self._user_dir(user_id) / (_safe(workspace_id) + ".workspace.json")

    def get(self, user_id, workspace_id):
        path = self._ws_path(user_id, workspace_id)
        with self._lock:
            if not path.exists():
                return None
            return path.read_bytes()

    def put(self, user_id, workspace_id, data):
        path = self._ws_path(user_id, workspace_id)
        tmp = path.with_suffix(".tmp")
        with self._lock:
            tmp.write_bytes(data)
            os.replace(tmp, path)

    def list_ids(self, user_id):
        with self._lock:
            d = self.root / _safe(user_id)
            if not d.exists():
                return []
            return sorted(p.name[:-len(".workspace.json")]
                          for p in d.glob("*.workspace.json"))

    def get_account(self, user_id):
        path = self._user_dir(user_id) / "account.json"
        with self._lock:
            if not path.exists():
                return None
            return json.loads(path.read_text(encoding="utf-8"))

    def put_account(self, user_id, record):
        path = self._user_dir(user_id) / "account.json"
        tmp = path.with_suffix(".tmp")
        with self._lock:
            tmp.write_text(json.dumps(record, sort_keys=True), encoding="utf-8")
            os.replace(tmp, path)
