"""Parser for flat `key = value` run configuration files."""

from pathlib import Path
from typing import Dict, List, Sequence, Union

from ..utils.errors import ParseError


class ConfigParser:
    """UTF-8 `key = value` lines; `#` starts a comment, blank lines are ignored."""

    def parse_text(self, text: str, source: str = "<config>") -> Dict[str, str]:
        values: Dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ParseError(f"{source}:{lineno}: expected 'key = value', got '{raw.strip()}'")
            values[self.normalize_key(key)] = value.strip()
        return values

    def parse_file(self, path: Union[str, Path]) -> Dict[str, str]:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ParseError(f"cannot read config file {path}: {e}")
        return self.parse_text(text, source=str(path))

    def parse_overrides(self, args: Sequence[str]) -> Dict[str, str]:
        """`--key value` and `--key=value` pairs left over by click."""
        values: Dict[str, str] = {}
        items: List[str] = list(args)
        i = 0
        while i < len(items):
            token = items[i]
            if not token.startswith("--") or len(token) == 2:
                raise ParseError(f"unexpected argument '{token}', expected --key value")
            key, sep, value = token[2:].partition("=")
            if not sep:
                if i + 1 >= len(items):
                    raise ParseError(f"missing value for --{key}")
                value = items[i + 1]
                i += 1
            values[self.normalize_key(key)] = value
            i += 1
        return values

    @staticmethod
    def normalize_key(key: str) -> str:
        return key.strip().lower().replace("-", "_")

    @staticmethod
    def render(values: Dict[str, str]) -> str:
        return "".join(f"{key} = {values[key]}\n" for key in sorted(values))
