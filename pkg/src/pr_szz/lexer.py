"""
Table-driven source lexing for cosmetic-change detection and method spans.

A profile lists a language's comment, string and import tokens and how it delimits
methods. Lines are scanned into code, string and comment pieces; comments drop out,
strings stay verbatim and whitespace between code tokens is collapsed, so two lines that
normalize alike differ only cosmetically.
"""

import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path, PurePosixPath
from typing import Dict, List, Optional, Sequence, Tuple, Union

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError, LineOutOfRange
from .vcs import RepositoryHandle

logger = logging.getLogger(__name__)

PROFILE_FILE = Path(__file__).parent / "profiles" / "languages.yaml"
WINDOW = 25


class MethodStyle(str, Enum):
    BRACES = "Braces"
    INDENTATION = "Indentation"


class LanguageProfile(BaseModel):
    name: str = Field(min_length=1)
    extensions: List[str] = Field(default_factory=list)
    line_comment: List[str] = Field(default_factory=list)
    block_comment: List[Tuple[str, str]] = Field(default_factory=list)
    string_delimiters: List[str] = Field(default_factory=lambda: ['"', "'"])
    import_keywords: List[str] = Field(default_factory=list)
    method_style: MethodStyle = MethodStyle.BRACES
    block_delimiters: Optional[Tuple[str, str]] = ("{", "}")

    @field_validator("extensions")
    @classmethod
    def normalize_extensions(cls, value: List[str]) -> List[str]:
        return [ext.lower() if ext.startswith(".") else f".{ext.lower()}" for ext in value]

    @field_validator("string_delimiters")
    @classmethod
    def longest_first(cls, value: List[str]) -> List[str]:
        return sorted(value, key=len, reverse=True)

    @model_validator(mode="after")
    def check_blocks(self) -> "LanguageProfile":
        if self.method_style == MethodStyle.BRACES and not self.block_delimiters:
            raise ValueError(f"profile {self.name} uses braces but defines no block delimiters")
        return self


def _parse_profiles(data: Dict[str, dict], source: str) -> Dict[str, LanguageProfile]:
    profiles = {}
    for name, body in (data or {}).items():
        try:
            profiles[name] = LanguageProfile(name=name, **(body or {}))
        except (ValidationError, TypeError) as e:
            raise ConfigError(f"Invalid language profile '{name}' in {source}: {e}") from e
    return profiles


def _read_yaml(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return yaml.safe_load(handle) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot read language profiles from {path}: {e}") from e


class ProfileRegistry:
    """Language profiles by name and by file extension."""

    def __init__(self, profiles: Dict[str, LanguageProfile]):
        self.by_name = dict(profiles)
        self.by_extension: Dict[str, LanguageProfile] = {}
        for profile in self.by_name.values():
            for ext in profile.extensions:
                self.by_extension[ext] = profile

    @classmethod
    def builtin(cls) -> "ProfileRegistry":
        return cls(_parse_profiles(_read_yaml(PROFILE_FILE), str(PROFILE_FILE)))

    @classmethod
    def load(cls, overrides: Union[None, str, Path, Dict[str, object]] = None) -> "ProfileRegistry":
        """Builtin profiles extended by a YAML file of profiles or an extension mapping.

        A mapping value is either the name of a known profile or a full profile body.
        """
        registry = cls.builtin()
        if overrides is None:
            return registry
        if isinstance(overrides, (str, Path)):
            registry.add_all(_parse_profiles(_read_yaml(Path(overrides)), str(overrides)))
            return registry
        for ext, value in overrides.items():
            ext = ext.lower() if ext.startswith(".") else f".{ext.lower()}"
            if isinstance(value, str):
                if value not in registry.by_name:
                    raise ConfigError(f"Unknown language profile '{value}' for {ext}")
                registry.by_extension[ext] = registry.by_name[value]
            else:
                body = dict(value)
                body.setdefault("extensions", [ext])
                name = body.pop("name", ext.lstrip("."))
                registry.add_all(_parse_profiles({name: body}, "configuration"))
        return registry

    def add_all(self, profiles: Dict[str, LanguageProfile]) -> None:
        for name, profile in profiles.items():
            self.by_name[name] = profile
            for ext in profile.extensions:
                self.by_extension[ext] = profile

    def for_path(self, path: str) -> Optional[LanguageProfile]:
        return self.by_extension.get(PurePosixPath(path).suffix.lower())


# Scanning

CODE, STRING, COMMENT = "code", "string", "comment"


def scan_line(
    text: str, profile: LanguageProfile, open_block: Optional[str] = None
) -> Tuple[List[Tuple[str, str]], Optional[str]]:
    """Split one line into (kind, text) pieces.

    ``open_block`` is the closing token of a block comment still open from a previous
    line; the returned closer is the one left open at the end of this line.
    """
    pieces: List[Tuple[str, str]] = []
    code_start = 0
    pos = 0

    def flush(until: int) -> None:
        if until > code_start:
            pieces.append((CODE, text[code_start:until]))

    if open_block is not None:
        end = text.find(open_block)
        if end < 0:
            return [(COMMENT, text)], open_block
        pos = end + len(open_block)
        pieces.append((COMMENT, text[:pos]))
        code_start = pos

    while pos < len(text):
        delimiter = next((d for d in profile.string_delimiters if text.startswith(d, pos)), None)
        if delimiter is not None:
            flush(pos)
            end = pos + len(delimiter)
            while end < len(text):
                if text[end] == "\\" and len(delimiter) == 1:
                    end += 2
                    continue
                if text.startswith(delimiter, end):
                    end += len(delimiter)
                    break
                end += 1
            end = min(end, len(text))
            pieces.append((STRING, text[pos:end]))
            pos = code_start = end
            continue
        if any(text.startswith(token, pos) for token in profile.line_comment):
            flush(pos)
            pieces.append((COMMENT, text[pos:]))
            return pieces, None
        block = next((b for b in profile.block_comment if text.startswith(b[0], pos)), None)
        if block is not None:
            flush(pos)
            end = text.find(block[1], pos + len(block[0]))
            if end < 0:
                pieces.append((COMMENT, text[pos:]))
                return pieces, block[1]
            end += len(block[1])
            pieces.append((COMMENT, text[pos:end]))
            pos = code_start = end
            continue
        pos += 1
    flush(len(text))
    return pieces, None


def _is_word(char: str) -> bool:
    return char.isalnum() or char == "_" or char == "$"


def normalize(text: str, profile: LanguageProfile) -> str:
    """Comment-free text with whitespace kept only where it separates two word characters."""
    return _normalize_pieces(scan_line(text, profile)[0])


def _normalize_pieces(pieces: Sequence[Tuple[str, str]]) -> str:
    out: List[str] = []
    pending_space = False
    for kind, chunk in pieces:
        if kind == COMMENT:
            pending_space = True
            continue
        if kind == STRING:
            out.append(chunk)
            pending_space = False
            continue
        for char in chunk:
            if char.isspace():
                pending_space = True
                continue
            if pending_space and out and _is_word(out[-1][-1]) and _is_word(char):
                out.append(" ")
            out.append(char)
            pending_space = False
    return "".join(out)


def code_text(text: str, profile: LanguageProfile) -> str:
    return "".join(chunk for kind, chunk in scan_line(text, profile)[0] if kind != COMMENT)


def _looks_like_comment_continuation(stripped: str, profile: LanguageProfile) -> bool:
    # body line of a block comment seen without its opening line
    if not any(open_token == "/*" for open_token, _ in profile.block_comment):
        return False
    if stripped.startswith("*/") or stripped.endswith("*/"):
        return True
    return stripped.startswith("*") and (len(stripped) == 1 or stripped[1] in " \t/") and ";" not in stripped


def is_import_line(text: str, profile: LanguageProfile) -> bool:
    code = code_text(text, profile).strip()
    for keyword in profile.import_keywords:
        if code.startswith(keyword):
            rest = code[len(keyword) :]
            if not rest or rest[0] in " \t<\"'(":
                if keyword == "using" and rest.lstrip().startswith("("):
                    return False
                return not code.endswith("{")
    return False


def is_comment_or_blank(text: str, profile: LanguageProfile) -> bool:
    stripped = text.strip()
    if not stripped:
        return True
    if _looks_like_comment_continuation(stripped, profile):
        return True
    return not code_text(text, profile).strip() and not any(
        kind == STRING for kind, _ in scan_line(text, profile)[0]
    )


def is_cosmetic_line(
    old_text: Optional[str], new_text: Optional[str], profile: Optional[LanguageProfile]
) -> bool:
    """True when the change of a line is whitespace-, comment- or import-only.

    Without a profile nothing is cosmetic.
    """
    if profile is None:
        return False
    sides = [side for side in (old_text, new_text) if side is not None]
    if not sides:
        return False
    if all(is_comment_or_blank(s, profile) or is_import_line(s, profile) for s in sides):
        return True
    if old_text is not None and new_text is not None:
        return normalize(old_text, profile) == normalize(new_text, profile)
    return False


def is_cosmetic_hunk(
    removed: Sequence[str], added: Sequence[str], profile: Optional[LanguageProfile]
) -> bool:
    """A reflow: the removed and added blocks normalize to the same text."""
    if profile is None or not removed:
        return False
    joined_old = "".join(normalize(line, profile) for line in removed)
    joined_new = "".join(normalize(line, profile) for line in added)
    return joined_old == joined_new


# Method spans


@dataclass(frozen=True)
class MethodSpan:
    start: int
    end: int
    header: str

    def contains(self, line: int) -> bool:
        return self.start <= line <= self.end

    @property
    def identity(self) -> str:
        return " ".join(self.header.split())


class FileScope(Enum):
    WHOLE_FILE = "WholeFile"


WHOLE_FILE = FileScope.WHOLE_FILE

CONTROL_WORDS = {
    "if", "else", "for", "foreach", "while", "do", "switch", "case", "catch", "try",
    "finally", "synchronized", "return", "throw", "new", "using", "lock", "with", "sizeof",
    "typeof", "when", "match", "select", "defer", "go", "class", "interface", "enum",
    "struct", "namespace", "record", "union",
}  # fmt: skip
HEADER = re.compile(
    r"""(?P<name>[A-Za-z_$][\w$]*)\s*
        \((?P<params>[^()]*(?:\([^()]*\)[^()]*)*)\)
        (?P<tail>(?:[^(){};=]|\([^()]*\))*)$""",
    re.VERBOSE,
)
ARROW = re.compile(r"\)\s*(?::[^=]*)?=>\s*$")
ASSIGNMENT = re.compile(r"(?<![=!<>])=(?![=>])")
TYPE_DECLARATION = re.compile(r"\b(?:class|interface|enum|struct|record|namespace)\b")


def _file_code(lines: Sequence[str], profile: LanguageProfile) -> List[str]:
    code = []
    open_block = None
    for text in lines:
        pieces, open_block = scan_line(text, profile, open_block)
        # strings keep their length but lose their braces
        code.append(
            "".join(
                chunk if kind == CODE else ('""' if kind == STRING else " ") for kind, chunk in pieces
            )
        )
    return code


def _is_method_header(header: str) -> bool:
    header = " ".join(header.split())
    if not header:
        return False
    words = re.findall(r"[A-Za-z_$][\w$]*", header)
    if not words or words[0] in CONTROL_WORDS:
        return False
    if TYPE_DECLARATION.search(header):
        return False
    if ARROW.search(header):
        return True
    match = HEADER.search(header)
    if match is None or match.group("name") in CONTROL_WORDS:
        return False
    prefix = header[: match.start("name")]
    if re.search(r"\bnew\b", prefix):
        return False
    if ASSIGNMENT.search(prefix) and "function" not in header:
        return False
    return True


def _header_before(code: Sequence[str], line_index: int, column: int) -> Tuple[str, int]:
    """Text between the previous statement boundary and the brace at (line, column)."""
    parts: List[str] = []
    depth = 0
    index, col = line_index, column
    start_line = line_index
    while index >= 0 and line_index - index <= 4:
        text = code[index][:col] if index == line_index else code[index]
        pos = len(text) - 1
        while pos >= 0:
            char = text[pos]
            if char == ")":
                depth += 1
            elif char == "(":
                depth -= 1
            elif char in ";{}" and depth <= 0:
                parts.append(text[pos + 1 :])
                if text[pos + 1 :].strip():
                    start_line = index
                return " ".join(reversed(parts)), start_line
            pos -= 1
        parts.append(text)
        if text.strip():
            start_line = index
        index -= 1
        col = None
    return " ".join(reversed(parts)), start_line


def _brace_spans(lines: Sequence[str], profile: LanguageProfile) -> List[MethodSpan]:
    opener, closer = profile.block_delimiters
    code = _file_code(lines, profile)
    stack: List[Tuple[int, int]] = []
    spans = []
    for index, text in enumerate(code):
        for column, char in enumerate(text):
            if char == opener:
                stack.append((index, column))
            elif char == closer and stack:
                open_index, open_column = stack.pop()
                header, start = _header_before(code, open_index, open_column)
                if _is_method_header(header):
                    spans.append(MethodSpan(start + 1, index + 1, " ".join(header.split())))
    return sorted(spans, key=lambda s: (s.start, -s.end))


DEF_LINE = re.compile(r"^(?P<indent>\s*)(?:async\s+)?def\s+[A-Za-z_]\w*")


def _indent(text: str) -> int:
    return len(text) - len(text.lstrip())


def _indentation_spans(lines: Sequence[str], profile: LanguageProfile) -> List[MethodSpan]:
    code = _file_code(lines, profile)
    spans = []
    for index, text in enumerate(code):
        match = DEF_LINE.match(text)
        if not match:
            continue
        level = _indent(text)
        depth = 0
        signature_end = index
        for sig_index in range(index, len(code)):
            depth += code[sig_index].count("(") - code[sig_index].count(")")
            signature_end = sig_index
            if depth <= 0 and code[sig_index].rstrip().endswith(":"):
                break
        end = signature_end
        for body_index in range(signature_end + 1, len(code)):
            body = code[body_index]
            if not body.strip():
                continue
            if _indent(body) <= level:
                break
            end = body_index
        header = " ".join(" ".join(code[index : signature_end + 1]).split())
        spans.append(MethodSpan(index + 1, end + 1, header))
    return spans


def method_spans(lines: Sequence[str], profile: LanguageProfile) -> List[MethodSpan]:
    if profile.method_style == MethodStyle.INDENTATION:
        return _indentation_spans(lines, profile)
    return _brace_spans(lines, profile)


def innermost_span(spans: Sequence[MethodSpan], line: int) -> Optional[MethodSpan]:
    containing = [span for span in spans if span.contains(line)]
    if not containing:
        return None
    return max(containing, key=lambda s: (s.start, -s.end))


def enclosing_method_span(
    repo: RepositoryHandle,
    commit: str,
    path: str,
    line: int,
    profile: Optional[LanguageProfile],
) -> Union[MethodSpan, FileScope]:
    lines = repo.file_lines(commit, path)
    if line < 1 or line > len(lines):
        raise LineOutOfRange(commit, path, line, len(lines))
    if profile is None:
        return WHOLE_FILE
    span = innermost_span(method_spans(lines, profile), line)
    return span if span is not None else WHOLE_FILE


def window_lines(line: int, length: int, radius: int = WINDOW) -> range:
    """Lines within ``radius`` of ``line``, clipped to the file."""
    return range(max(1, line - radius), min(length, line + radius) + 1)
