"""A small, version-pinned style checker for student submissions.

Counts violations of the most common layout recommendations: whitespace
around operators and after commas, blank-line discipline, line length,
trailing whitespace, tabs, comparisons to None, and statement stuffing.
Codes follow the usual community numbering so ignore lists transfer.

The checker is deliberately self-contained: the count feeds a mark
penalty, so the set of checks must not drift underneath a running
course. CHECKER_VERSION identifies the rule set; suites pin it and a
mismatch is reported as a warning rather than silently changing counts.
"""

from __future__ import annotations

import io
import tokenize
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

CHECKER_VERSION = "1.0"

MAX_LINE_LENGTH = 79
MAX_BLANK_LINES = 2

# operators that require surrounding whitespace (E225)
_SPACED_OPERATORS = {
    "=", "==", "!=", "<", ">", "<=", ">=", "<>",
    "+=", "-=", "*=", "/=", "//=", "%=", "**=", "@=",
    "&=", "|=", "^=", ">>=", "<<=", "->", ":=",
}


@dataclass(frozen=True)
class StyleIssue:
    line: int
    column: int
    code: str
    message: str


def check_style(path: Path, ignore: tuple[str, ...] = ()) -> list[StyleIssue]:
    source = path.read_text(errors="replace")
    issues = _physical_line_checks(source)
    issues += _token_checks(source)
    issues.sort(key=lambda i: (i.line, i.column, i.code))
    return [i for i in issues if i.code not in ignore]


def count_style_errors(path: Path, ignore: tuple[str, ...] = ()) -> int:
    return len(check_style(path, ignore))


def _physical_line_checks(source: str) -> list[StyleIssue]:
    issues = []
    lines = source.splitlines()
    blank_run = 0
    for number, line in enumerate(lines, start=1):
        if len(line) > MAX_LINE_LENGTH:
            issues.append(StyleIssue(
                number, MAX_LINE_LENGTH, "E501",
                f"line too long ({len(line)} > {MAX_LINE_LENGTH} characters)",
            ))
        if line and not line.strip():
            issues.append(StyleIssue(
                number, 0, "W293", "whitespace on blank line"))
        elif line != line.rstrip():
            issues.append(StyleIssue(
                number, len(line.rstrip()), "W291", "trailing whitespace"))
        indent = line[: len(line) - len(line.lstrip())]
        if "\t" in indent:
            issues.append(StyleIssue(
                number, 0, "W191", "indentation contains tabs"))
        if not line.strip():
            blank_run += 1
            if blank_run == MAX_BLANK_LINES + 1:
                issues.append(StyleIssue(
                    number, 0, "E303",
                    f"too many blank lines ({blank_run})"))
        else:
            blank_run = 0
    if source and not source.endswith("\n"):
        issues.append(StyleIssue(len(lines), 0, "W292", "no newline at end of file"))
    elif source.rstrip("\n") and source.endswith("\n\n"):
        issues.append(StyleIssue(len(lines), 0, "W391", "blank line at end of file"))
    return issues


def _token_checks(source: str) -> list[StyleIssue]:
    issues: list[StyleIssue] = []
    try:
        tokens = list(tokenize.generate_tokens(io.StringIO(source).readline))
    except (tokenize.TokenError, IndentationError, SyntaxError):
        return issues  # unparseable files are the syntax check's problem

    paren_depth = 0
    blank_before = 0
    previous_significant: tokenize.TokenInfo | None = None
    last_top_level_code_line = 0
    pending_decorator = False

    for index, token in enumerate(tokens):
        kind, text, start, end, line = token
        if kind == tokenize.OP:
            if text in "([{":
                paren_depth += 1
            elif text in ")]}":
                paren_depth -= 1
            elif text == ";":
                issues.append(StyleIssue(
                    start[0], start[1], "E702",
                    "multiple statements on one line (semicolon)"))
            elif text in (",",):
                nxt = _next_significant(tokens, index)
                if nxt is not None and nxt.start == end and nxt.string not in ")]}":
                    issues.append(StyleIssue(
                        start[0], start[1], "E231",
                        f"missing whitespace after '{text}'"))
            elif text in _SPACED_OPERATORS:
                if text == "=" and paren_depth > 0:
                    pass  # keyword argument or default: no spaces wanted
                else:
                    prev = previous_significant
                    nxt = _next_significant(tokens, index)
                    squeezed_left = (
                        prev is not None
                        and prev.end == start
                        and prev.string not in "([{,"
                    )
                    squeezed_right = nxt is not None and nxt.start == end
                    if squeezed_left or squeezed_right:
                        issues.append(StyleIssue(
                            start[0], start[1], "E225",
                            f"missing whitespace around operator '{text}'"))
            if text in ("==", "!=") and _compares_none(tokens, index):
                issues.append(StyleIssue(
                    start[0], start[1], "E711",
                    "comparison to None should be 'is' / 'is not'"))

        if kind == tokenize.NL and not line.strip():
            blank_before += 1
            continue
        if kind in (tokenize.NEWLINE, tokenize.COMMENT, tokenize.NL,
                    tokenize.INDENT, tokenize.DEDENT, tokenize.ENCODING,
                    tokenize.ENDMARKER):
            continue

        if start[1] == 0 and paren_depth == 0:
            if kind == tokenize.OP and text == "@":
                pending_decorator = True
            elif kind == tokenize.NAME and text in ("def", "class"):
                if (
                    last_top_level_code_line
                    and blank_before < 2
                    and not pending_decorator
                ):
                    issues.append(StyleIssue(
                        start[0], 0, "E302",
                        f"expected 2 blank lines before top-level definition, "
                        f"found {blank_before}"))
                pending_decorator = False
            else:
                pending_decorator = False
        blank_before = 0
        last_top_level_code_line = start[0]
        previous_significant = token

    return issues


def _next_significant(tokens, index):
    for token in tokens[index + 1:]:
        if token.type in (tokenize.NL, tokenize.NEWLINE, tokenize.COMMENT,
                          tokenize.INDENT, tokenize.DEDENT):
            continue
        return token
    return None


def _compares_none(tokens, index) -> bool:
    nxt = _next_significant(tokens, index)
    if nxt is not None and nxt.type == tokenize.NAME and nxt.string == "None":
        return True
    for token in reversed(tokens[:index]):
        if token.type in (tokenize.NL, tokenize.NEWLINE, tokenize.COMMENT,
                          tokenize.INDENT, tokenize.DEDENT):
            continue
        return token.type == tokenize.NAME and token.string == "None"
    return False


# -- float-equality scanning of suite files -----------------------------------


def exact_decimal_literal(text: str) -> bool:
    """True when a float literal's decimal text is represented exactly by
    the binary float it denotes (0.5 yes, 0.1 no)."""
    try:
        return Fraction(text) == Fraction(float(text))
    except (ValueError, ZeroDivisionError, OverflowError):
        return False


def float_equality_violations(path: Path) -> list[tuple[int, str]]:
    """Equality assertions in a test file that could be broken by float
    round-off: a comparand computed with division, or a float literal the
    binary format cannot represent exactly.

    Comparing against exact constants such as ``0.`` or ``1.`` is fine;
    requiring ``== 1./3.`` is not, and must use a tolerance instead.
    """
    import ast

    tree = ast.parse(path.read_text())
    violations = []

    def risky(expr: ast.expr) -> bool:
        for node in ast.walk(expr):
            if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Div):
                return True
            if isinstance(node, ast.Constant) and isinstance(node.value, float):
                text = ast.get_source_segment(source, node) or repr(node.value)
                if not exact_decimal_literal(text):
                    return True
        return False

    source = path.read_text()
    for node in ast.walk(tree):
        if not isinstance(node, ast.Compare):
            continue
        if not any(isinstance(op, (ast.Eq, ast.NotEq)) for op in node.ops):
            continue
        for comparand in [node.left, *node.comparators]:
            if risky(comparand):
                violations.append(
                    (node.lineno, ast.get_source_segment(source, node) or "?")
                )
                break
    return violations
