import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Optional, Union

from lib.monitoring import RunManifest

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"


def manifest_path(out: Union[str, Path]) -> Path:
    out = Path(out)
    return out.with_name(out.name + MANIFEST_SUFFIX)


class ResultStore:
    """Writes command outputs atomically with a manifest alongside each."""

    def __init__(self, root: Optional[Union[str, Path]] = None):
        """Initialize the result store.

        Args:
            root: Directory relative output paths resolve against (cwd when omitted)
        """
        self.root = Path(root) if root is not None else None

    def _resolve(self, out: Union[str, Path]) -> Path:
        out = Path(out)
        if self.root is not None and not out.is_absolute():
            out = self.root / out
        return out

    def write_text(self, out: Union[str, Path], text: str, newline: str = "") -> Path:
        """Write text through a temporary file in the target directory, then rename.

        Args:
            out: Destination path
            text: Full file contents
            newline: Passed to ``open``; the default keeps line endings as given

        Returns:
            Path: The written path
        """
        path = self._resolve(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline=newline) as f:
                f.write(text)
            os.replace(tmp, path)
        except OSError as e:
            logger.error(f"Failed to write {path}: {e}")
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        logger.info(f"Wrote {path}")
        return path

    def write_manifest(self, out: Union[str, Path], manifest: RunManifest) -> Path:
        text = json.dumps(manifest.to_dict(), indent=2, sort_keys=False) + "\n"
        return self.write_text(manifest_path(self._resolve(out)), text)

    def store(self, out: Union[str, Path], text: str, manifest: RunManifest) -> Path:
        """Write a primary output and then its manifest."""
        path = self.write_text(out, text)
        self.write_manifest(path, manifest)
        return path
