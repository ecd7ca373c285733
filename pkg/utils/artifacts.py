import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

import pandas as pd

from settings import TOOLKIT_VERSION

PathLike = Union[str, Path]


class CsvArtifact:
    """CSV outputs with '#'-prefixed metadata lines ahead of the header.

    Metadata values are JSON encoded with sorted keys so reruns with the same
    parameters give byte-identical files apart from the wall-time line.
    """

    WALL_TIME_KEY = "wall_time_s"

    @staticmethod
    def _encode(value: Any) -> str:
        return json.dumps(value, sort_keys=True, default=str)

    @staticmethod
    def write(
        path: PathLike,
        frame: pd.DataFrame,
        metadata: Dict[str, Any],
        wall_time: Optional[float] = None,
    ) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"# toolkit_version: {CsvArtifact._encode(TOOLKIT_VERSION)}"]
        for key in sorted(metadata):
            lines.append(f"# {key}: {CsvArtifact._encode(metadata[key])}")
        if wall_time is not None:
            lines.append(f"# {CsvArtifact.WALL_TIME_KEY}: {wall_time:.3f}")
        with path.open("w", encoding="utf-8", newline="") as handle:
            handle.write("\n".join(lines) + "\n")
            frame.to_csv(handle, index=False, lineterminator="\n")
        return path

    @staticmethod
    def read(path: PathLike) -> pd.DataFrame:
        return pd.read_csv(path, comment="#")

    @staticmethod
    def read_metadata(path: PathLike) -> Dict[str, Any]:
        metadata: Dict[str, Any] = {}
        with Path(path).open(encoding="utf-8") as handle:
            for line in handle:
                if not line.startswith("#"):
                    break
                key, _, raw = line[1:].strip().partition(": ")
                metadata[key] = json.loads(raw)
        return metadata
