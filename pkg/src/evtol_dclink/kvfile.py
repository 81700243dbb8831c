"""Line-oriented ``key = value`` files with ``[block]`` sections.

Example::

    # optional header keys come first
    derating_factor = 0.75

    [cable]
    a_cu_cm2 = 0.10
    ampacity_A = 73.5

Comments start with ``#``. Keys before the first block form the header.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .errors import ConfigError


@dataclass
class Block:
    name: str
    values: dict[str, str] = field(default_factory=dict)
    lines: dict[str, int] = field(default_factory=dict)
    lineno: int = 0


@dataclass
class KVDocument:
    source: str
    header: Block
    blocks: list[Block]

    def blocks_named(self, name: str) -> list[Block]:
        return [b for b in self.blocks if b.name == name]


def parse_text(text: str, source: str = "<string>") -> KVDocument:
    header = Block(name="")
    blocks: list[Block] = []
    current = header
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"{source}:{lineno}: malformed block header {raw.strip()!r}")
            current = Block(name=line[1:-1].strip(), lineno=lineno)
            blocks.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in current.values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        current.values[key] = value
        current.lines[key] = lineno
    return KVDocument(source=source, header=header, blocks=blocks)


def parse_file(path: str | Path) -> KVDocument:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_text(text, source=str(path))


def convert(
    doc: KVDocument,
    block: Block,
    schema: Mapping[str, Callable[[str], object]],
    required: Iterable[str] | None = None,
) -> dict[str, object]:
    """Convert one block's raw strings via ``schema``.

    Unknown keys and missing required keys raise :class:`ConfigError` that
    names the file and line.
    """
    required = set(schema if required is None else required)
    out: dict[str, object] = {}
    for key, raw in block.values.items():
        where = f"{doc.source}:{block.lines[key]}"
        if key not in schema:
            raise ConfigError(f"{where}: unknown key {key!r} in [{block.name or 'header'}]")
        try:
            out[key] = schema[key](raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {key!r}: {raw!r} ({exc})") from exc
    missing = sorted(required - set(out))
    if missing:
        raise ConfigError(
            f"{doc.source}:{block.lineno}: [{block.name or 'header'}] missing keys {', '.join(missing)}"
        )
    return out


def format_value(value: object) -> str:
    if isinstance(value, float):
        # 12 significant digits hide unit-conversion noise such as 210.57039999999995
        return f"{value:.12g}"
    return str(value)


def dump(header: Mapping[str, object], blocks: Iterable[tuple[str, Mapping[str, object]]]) -> str:
    lines = [f"{k} = {format_value(v)}" for k, v in header.items()]
    for name, values in blocks:
        if lines:
            lines.append("")
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {format_value(v)}" for k, v in values.items())
    return "\n".join(lines) + "\n"
