r"""Extraction and validation of \boxed{} answers.

`extract_boxed` finds every literal ``\boxed{`` and returns its
brace-balanced content with source offsets. `validate_math_expression`
lexes the content into a small math grammar and applies structural checks
(balanced delimiters, no dangling operators, well-formed \frac and
sub/superscripts). `format_check` combines the two: the last balanced box
must hold valid mathematical content.

The validator is deliberately lenient about vocabulary - unknown backslash
commands count as atomic operands - and strict about structure, which is
what separates the accepted answers (``1``, ``\frac{3}{2}``,
``x^2 + 12y =1``, ``(0,\infty)``) from the rejected ones (empty content,
``x +* 2``, ``(0,1``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

BOX_MARKER = r"\boxed{"

# Verdict reasons
OK = "ok"
EMPTY = "empty"
UNBALANCED = "unbalanced_delimiters"
ADJACENT_OPS = "adjacent_binary_operators"
TRAILING_OP = "trailing_operator"
LEX_ERROR = "lex_error"


@dataclass(frozen=True)
class BoxedExtraction:
    """One \boxed{} occurrence: content slice offsets into the source text."""

    content: str
    start: int
    end: int
    balanced: bool


@dataclass(frozen=True)
class ValidationVerdict:
    ok: bool
    reason: str


def extract_boxed(text: str) -> list[BoxedExtraction]:
    r"""Return every ``\boxed{...}`` occurrence in order of appearance.

    Nested braces inside the content are matched by depth counting (no
    escape handling). A box whose closing brace never appears is returned
    with balanced=False and content running to the end of the text.
    Offsets index the original string: text[start:end] == content.
    """
    out = []
    pos = 0
    while True:
        idx = text.find(BOX_MARKER, pos)
        if idx == -1:
            break
        start = idx + len(BOX_MARKER)
        depth = 1
        end = len(text)
        balanced = False
        for i in range(start, len(text)):
            ch = text[i]
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    end = i
                    balanced = True
                    break
        out.append(BoxedExtraction(content=text[start:end], start=start, end=end, balanced=balanced))
        pos = start
    return out


# --- tokenizer -------------------------------------------------------------

_BINARY_OPS = {"+", "-", "*", "/", "=", "<", ">"}
_BINARY_COMMANDS = {r"\le", r"\ge", r"\neq", r"\pm", r"\cdot", r"\times", r"\div",
                    r"\leq", r"\geq", r"\ne", r"\mp"}
_UNICODE_OPS = {"−": "-", "×": "*", "÷": "/", "≤": "<",
                "≥": ">", "≠": "=", "±": "+"}
_OPENERS = "([{"
_CLOSERS = ")]}"
_POSTFIX = {"!", "'"}
_EXTRA_ATOMS = {"∞"}  # bare infinity; other stray symbols stay lex errors

_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?|\.\d+")
_IDENT_RE = re.compile(r"[^\W\d_]+", re.UNICODE)
_COMMAND_RE = re.compile(r"\\[A-Za-z]+")

# token tags
_T_ATOM = "atom"
_T_OP = "op"
_T_MINUS = "minus"
_T_OPEN = "open"
_T_CLOSE = "close"
_T_COMMA = "comma"
_T_SCRIPT = "script"  # ^ or _
_T_FRAC = "frac"
_T_POSTFIX = "postfix"


def _lex(content: str):
    """Yield (tag, text) pairs; raise ValueError on unknown characters."""
    i = 0
    n = len(content)
    while i < n:
        ch = content[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _UNICODE_OPS:
            mapped = _UNICODE_OPS[ch]
            yield (_T_MINUS if mapped == "-" else _T_OP, ch)
            i += 1
            continue
        if ch == "-":
            yield (_T_MINUS, ch)
            i += 1
            continue
        if ch in _BINARY_OPS:
            yield (_T_OP, ch)
            i += 1
            continue
        if ch in _OPENERS:
            yield (_T_OPEN, ch)
            i += 1
            continue
        if ch in _CLOSERS:
            yield (_T_CLOSE, ch)
            i += 1
            continue
        if ch == ",":
            yield (_T_COMMA, ch)
            i += 1
            continue
        if ch in ("^", "_"):
            yield (_T_SCRIPT, ch)
            i += 1
            continue
        if ch in _POSTFIX:
            yield (_T_POSTFIX, ch)
            i += 1
            continue
        if ch in _EXTRA_ATOMS:
            yield (_T_ATOM, ch)
            i += 1
            continue
        if ch == "\\":
            m = _COMMAND_RE.match(content, i)
            if m:
                cmd = m.group(0)
                if cmd in (r"\frac", r"\dfrac", r"\tfrac"):
                    yield (_T_FRAC, cmd)
                elif cmd in _BINARY_COMMANDS:
                    yield (_T_OP, cmd)
                else:
                    # unknown commands (\alpha, \infty, \sqrt, ...) are operands
                    yield (_T_ATOM, cmd)
                i = m.end()
                continue
            if i + 1 < n:
                # escaped punctuation (\{ \} \, \; ...) acts as an operand
                yield (_T_ATOM, content[i : i + 2])
                i += 2
                continue
            raise ValueError("dangling backslash")
        m = _NUMBER_RE.match(content, i)
        if m:
            yield (_T_ATOM, m.group(0))
            i = m.end()
            continue
        m = _IDENT_RE.match(content, i)
        if m:
            yield (_T_ATOM, m.group(0))
            i = m.end()
            continue
        raise ValueError(f"unexpected character {ch!r}")


def validate_math_expression(content: str) -> ValidationVerdict:
    """Structural validity check for the inside of a box.

    Total over arbitrary input: failures come back as verdicts, never
    exceptions. A binary operator in operand position (leading, doubled,
    or after a comma) is reported as adjacent_binary_operators; a comma is
    treated the same way as an operator for adjacency purposes.
    """
    if content.strip() == "":
        return ValidationVerdict(ok=False, reason=EMPTY)
    try:
        tokens = list(_lex(content))
    except ValueError:
        return ValidationVerdict(ok=False, reason=LEX_ERROR)

    depth_stack: list[str] = []
    # frac groups still owed at each point; tracked alongside the delimiter stack
    frac_pending = 0  # brace groups the most recent \frac still needs to open
    frac_stack: list[int] = []  # remaining groups owed once the current group closes
    expecting_operand = True
    last_was_separator = False  # an operator or comma caused the expectation

    idx = 0
    n = len(tokens)
    while idx < n:
        tag, text = tokens[idx]

        if frac_pending and not (tag == _T_OPEN and text == "{"):
            return ValidationVerdict(ok=False, reason=LEX_ERROR)

        if tag == _T_FRAC:
            # juxtaposition like "2\frac{1}{2}" is fine, no operand check
            frac_pending = 2
            idx += 1
            continue

        if tag == _T_OPEN:
            depth_stack.append(text)
            if frac_pending:
                frac_stack.append(frac_pending - 1)
                frac_pending = 0
            else:
                frac_stack.append(-1)  # ordinary group
            expecting_operand = True
            last_was_separator = False
            idx += 1
            continue

        if tag == _T_CLOSE:
            if not depth_stack:
                return ValidationVerdict(ok=False, reason=UNBALANCED)
            if expecting_operand and last_was_separator:
                return ValidationVerdict(ok=False, reason=TRAILING_OP)
            depth_stack.pop()
            owed = frac_stack.pop()
            if owed > 0:
                frac_pending = owed
            expecting_operand = False
            last_was_separator = False
            idx += 1
            continue

        if tag == _T_ATOM:
            expecting_operand = False
            last_was_separator = False
            idx += 1
            continue

        if tag == _T_MINUS:
            # unary minus allowed in operand position (start, after operator,
            # comma, or opening delimiter)
            expecting_operand = True
            last_was_separator = True
            idx += 1
            continue

        if tag == _T_OP:
            if expecting_operand:
                return ValidationVerdict(ok=False, reason=ADJACENT_OPS)
            expecting_operand = True
            last_was_separator = True
            idx += 1
            continue

        if tag == _T_COMMA:
            if expecting_operand:
                return ValidationVerdict(ok=False, reason=ADJACENT_OPS)
            expecting_operand = True
            last_was_separator = True
            idx += 1
            continue

        if tag == _T_POSTFIX:
            if expecting_operand:
                return ValidationVerdict(ok=False, reason=LEX_ERROR)
            idx += 1
            continue

        if tag == _T_SCRIPT:
            # ^ and _ need a following atom or brace group
            if idx + 1 >= n:
                return ValidationVerdict(ok=False, reason=LEX_ERROR)
            nxt_tag, nxt_text = tokens[idx + 1]
            if nxt_tag == _T_ATOM:
                expecting_operand = False
                last_was_separator = False
                idx += 2
                continue
            if nxt_tag == _T_OPEN and nxt_text == "{":
                idx += 1  # let the group open normally
                continue
            return ValidationVerdict(ok=False, reason=LEX_ERROR)

        raise AssertionError(f"unhandled token tag {tag}")  # pragma: no cover

    if frac_pending:
        return ValidationVerdict(ok=False, reason=LEX_ERROR)
    if expecting_operand and last_was_separator:
        return ValidationVerdict(ok=False, reason=TRAILING_OP)
    if depth_stack:
        return ValidationVerdict(ok=False, reason=UNBALANCED)
    return ValidationVerdict(ok=True, reason=OK)


def format_check(text: str) -> bool:
    """True iff the last balanced box in the text holds valid math content."""
    balanced = [e for e in extract_boxed(text) if e.balanced]
    if not balanced:
        return False
    return validate_math_expression(balanced[-1].content).ok
