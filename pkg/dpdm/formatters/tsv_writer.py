"""Tab-separated report files with a header row."""

import math
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

from ..utils.errors import ReportError


def format_cell(value: Any) -> str:
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "NA" if math.isnan(value) else f"{value:.6g}"
    return str(value).replace("\t", " ")


class TsvWriter:
    """UTF-8 TSV; missing or undefined values are written as NA."""

    def render(self, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        lines = ["\t".join(header)]
        for row in rows:
            if len(row) != len(header):
                raise ReportError(f"row has {len(row)} cells, header has {len(header)}")
            lines.append("\t".join(format_cell(cell) for cell in row))
        return "\n".join(lines) + "\n"

    def write(self, path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = Path(path)
        text = self.render(header, rows)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            raise ReportError(f"cannot write report {path}: {e}")
        return path
