"""Text format for tree libraries: lexer, recovering parser, serializer.

Grammar (comments run from '#' to end of line, input is UTF-8):

    library    := { param_decl | tree_decl }
    param_decl := "param" IDENT [STRING] ";"
    tree_decl  := "tree" KEY [STRING] node
    node       := leaf | gate_node | ref_node
    leaf       := "leaf" STRING [times] ";"
    ref_node   := "ref" KEY [STRING] [times] ";"
    gate_node  := ("or" | "and" | "sand" | "partition" "(" constraint ")")
                  [STRING] [times] "{" node { node } "}"
    times      := "times" "(" int_expr ")"
    constraint := IDENT { "+" IDENT } "=" int_expr
    int_expr   := term { ("+" | "-") term }
    term       := INT | IDENT | "|" IDENT "|"

Keys and identifiers match [A-Za-z][A-Za-z0-9_]*; "|D|" style cardinality
names are lexed as single identifiers with the bars kept. The parser never
raises on malformed input: it records diagnostics and resynchronizes at the
next top-level "tree" or "param" keyword. A label may be written either on
the tree declaration or on the root node, not both; the serializer always
emits it on the declaration.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

from .model import (
    Gate,
    GateKind,
    IntExpr,
    NodeId,
    ONE,
    TreeLibrary,
    TreeNode,
)

__all__ = [
    "ParseDiagnostic",
    "ParseResult",
    "parse_document",
    "parse_library",
    "parse_files",
    "serialize_library",
]

_GATE_WORDS = {"or": GateKind.OR, "and": GateKind.AND, "sand": GateKind.SAND,
               "partition": GateKind.PARTITION}


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str
    message: str
    file: str = "<input>"
    line: int = 0
    col: int = 0

    def render(self) -> str:
        return f"{self.file}:{self.line}:{self.col}: {self.severity}: {self.message}"


@dataclass
class ParseResult:
    """Outcome of a parse: a library when clean, diagnostics always."""

    library: TreeLibrary | None
    diagnostics: list[ParseDiagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.library is not None


# === lexer ================================================================

_PUNCT = set(";{}()=+-")


@dataclass(frozen=True)
class _Token:
    kind: str  # NAME INT STRING PUNCT EOF
    value: str
    line: int
    col: int


def _lex(text: str, file: str, diags: list[ParseDiagnostic]) -> list[_Token]:
    tokens: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(k: int = 1) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if i < n and text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance()
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                advance()
            continue
        start_line, start_col = line, col
        if ch == '"':
            advance()
            buf: list[str] = []
            closed = False
            while i < n:
                c = text[i]
                if c == '"':
                    advance()
                    closed = True
                    break
                if c == "\n":
                    break
                if c == "\\":
                    advance()
                    if i >= n:
                        break
                    esc = text[i]
                    mapped = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}.get(esc)
                    if mapped is None:
                        diags.append(ParseDiagnostic(
                            "error", f"invalid escape sequence \\{esc}",
                            file, line, col))
                        mapped = esc
                    buf.append(mapped)
                    advance()
                else:
                    buf.append(c)
                    advance()
            if not closed:
                diags.append(ParseDiagnostic(
                    "error", "unterminated string literal",
                    file, start_line, start_col))
            tokens.append(_Token("STRING", "".join(buf), start_line, start_col))
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("INT", text[i:j], start_line, start_col))
            advance(j - i)
            continue
        if ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("NAME", text[i:j], start_line, start_col))
            advance(j - i)
            continue
        if ch == "|":
            j = i + 1
            if j < n and text[j].isalpha():
                k = j
                while k < n and (text[k].isalnum() or text[k] == "_"):
                    k += 1
                if k < n and text[k] == "|":
                    tokens.append(_Token("NAME", text[i:k + 1], start_line, start_col))
                    advance(k + 1 - i)
                    continue
            diags.append(ParseDiagnostic(
                "error", "malformed cardinality name, expected |IDENT|",
                file, start_line, start_col))
            advance()
            continue
        if ch in _PUNCT:
            tokens.append(_Token("PUNCT", ch, start_line, start_col))
            advance()
            continue
        diags.append(ParseDiagnostic(
            "error", f"unexpected character {ch!r}", file, start_line, start_col))
        advance()
    tokens.append(_Token("EOF", "", line, col))
    return tokens


# === parser ===============================================================


class _Abort(Exception):
    """Internal: unwind to the document loop and resynchronize."""


@dataclass
class _ParsedDoc:
    params: list[tuple[str, str, _Token]]
    trees: list[tuple[str, TreeNode, _Token]]


class _Parser:
    def __init__(self, tokens: list[_Token], file: str,
                 diags: list[ParseDiagnostic]) -> None:
        self.tokens = tokens
        self.pos = 0
        self.file = file
        self.diags = diags

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def error(self, message: str, tok: _Token | None = None) -> None:
        tok = tok or self.peek()
        self.diags.append(ParseDiagnostic(
            "error", message, self.file, tok.line, tok.col))

    def abort(self, message: str, tok: _Token | None = None) -> None:
        self.error(message, tok)
        raise _Abort()

    def expect_punct(self, ch: str, what: str) -> _Token:
        tok = self.peek()
        if tok.kind == "PUNCT" and tok.value == ch:
            return self.next()
        self.abort(f"expected {ch!r} {what}, found {tok.value!r}" if tok.kind != "EOF"
                   else f"expected {ch!r} {what}, found end of input", tok)
        raise AssertionError  # unreachable

    def expect_name(self, what: str) -> _Token:
        tok = self.peek()
        if tok.kind == "NAME":
            return self.next()
        self.abort(f"expected {what}, found {tok.value!r}" if tok.kind != "EOF"
                   else f"expected {what}, found end of input", tok)
        raise AssertionError

    def opt_string(self) -> str | None:
        if self.peek().kind == "STRING":
            return self.next().value
        return None

    # --- expressions ---

    def parse_term(self) -> int | str:
        tok = self.peek()
        if tok.kind == "INT":
            self.next()
            return int(tok.value)
        if tok.kind == "NAME":
            self.next()
            return tok.value
        self.abort("expected integer or parameter name in expression", tok)
        raise AssertionError

    def parse_int_expr(self) -> IntExpr:
        terms: list[tuple[int, int | str]] = [(1, self.parse_term())]
        while self.peek().kind == "PUNCT" and self.peek().value in "+-":
            sign = 1 if self.next().value == "+" else -1
            terms.append((sign, self.parse_term()))
        return IntExpr(tuple(terms))

    def parse_times(self) -> IntExpr:
        if self.peek().kind == "NAME" and self.peek().value == "times":
            self.next()
            self.expect_punct("(", "after 'times'")
            expr = self.parse_int_expr()
            self.expect_punct(")", "to close 'times'")
            return expr
        return ONE

    def parse_constraint(self) -> tuple[tuple[str, ...], IntExpr]:
        names = [self.expect_name("count variable in partition constraint").value]
        while self.peek().kind == "PUNCT" and self.peek().value == "+":
            self.next()
            names.append(self.expect_name("count variable after '+'").value)
        self.expect_punct("=", "in partition constraint")
        total = self.parse_int_expr()
        return tuple(names), total

    # --- nodes ---

    def parse_node(self, node_id: NodeId) -> TreeNode:
        tok = self.peek()
        if tok.kind != "NAME":
            self.abort("expected a node ('leaf', 'ref', 'or', 'and', 'sand' "
                       f"or 'partition'), found {tok.value!r}", tok)
        word = tok.value
        if word == "leaf":
            self.next()
            label_tok = self.peek()
            if label_tok.kind != "STRING":
                self.abort("leaf requires a quoted label", label_tok)
            label = self.next().value
            mult = self.parse_times()
            self.expect_punct(";", "after leaf")
            return TreeNode(id=node_id, label=label, multiplicity=mult)
        if word == "ref":
            self.next()
            target = self.expect_name("tree key after 'ref'").value
            label = self.opt_string() or ""
            mult = self.parse_times()
            self.expect_punct(";", "after ref")
            return TreeNode(id=node_id, label=label, reference=target,
                            multiplicity=mult)
        if word in _GATE_WORDS:
            self.next()
            kind = _GATE_WORDS[word]
            if kind is GateKind.PARTITION:
                self.expect_punct("(", "after 'partition'")
                vars_, total = self.parse_constraint()
                self.expect_punct(")", "to close partition constraint")
                gate = Gate(GateKind.PARTITION, vars_, total)
            else:
                gate = Gate(kind)
            label = self.opt_string() or ""
            mult = self.parse_times()
            open_tok = self.expect_punct("{", "to open gate body")
            children: list[TreeNode] = []
            while True:
                nxt = self.peek()
                if nxt.kind == "PUNCT" and nxt.value == "}":
                    self.next()
                    break
                if nxt.kind == "EOF":
                    self.abort("unclosed gate body", nxt)
                children.append(self.parse_node(node_id.child(len(children) + 1)))
            if not children:
                self.abort("gate requires at least one child", open_tok)
            return TreeNode(id=node_id, label=label, gate=gate,
                            children=tuple(children), multiplicity=mult)
        self.abort(f"unknown node keyword {word!r}", tok)
        raise AssertionError

    # --- documents ---

    def parse_document(self) -> _ParsedDoc:
        doc = _ParsedDoc(params=[], trees=[])
        while True:
            tok = self.peek()
            if tok.kind == "EOF":
                return doc
            try:
                if tok.kind == "NAME" and tok.value == "param":
                    self.next()
                    name_tok = self.expect_name("parameter name after 'param'")
                    doc_string = self.opt_string() or ""
                    self.expect_punct(";", "after parameter declaration")
                    doc.params.append((name_tok.value, doc_string, name_tok))
                elif tok.kind == "NAME" and tok.value == "tree":
                    self.next()
                    key_tok = self.expect_name("tree key after 'tree'")
                    decl_label = self.opt_string()
                    root = self.parse_node(NodeId(key_tok.value))
                    if decl_label is not None:
                        if root.label and not root.is_leaf:
                            self.error("root node label given twice", key_tok)
                        elif root.is_leaf:
                            self.error("leaf root carries its own label; "
                                       "drop the declaration label", key_tok)
                        else:
                            root = replace(root, label=decl_label)
                    doc.trees.append((key_tok.value, root, key_tok))
                else:
                    self.abort(f"expected 'param' or 'tree', found {tok.value!r}",
                               tok)
            except _Abort:
                self.resync()

    def resync(self) -> None:
        while True:
            tok = self.peek()
            if tok.kind == "EOF":
                return
            if tok.kind == "NAME" and tok.value in ("param", "tree"):
                return
            self.next()


def parse_document(name: str, text: str) -> tuple[_ParsedDoc, list[ParseDiagnostic]]:
    """Parse one document; never raises."""
    diags: list[ParseDiagnostic] = []
    tokens = _lex(text, name, diags)
    doc = _Parser(tokens, name, diags).parse_document()
    return doc, diags


def parse_library(documents: list[tuple[str, str]]) -> ParseResult:
    """Parse and merge documents; merge order is lexicographic by name."""
    diagnostics: list[ParseDiagnostic] = []
    trees: dict[str, TreeNode] = {}
    parameters: dict[str, str] = {}
    for name, text in sorted(documents, key=lambda item: item[0]):
        doc, diags = parse_document(name, text)
        diagnostics.extend(diags)
        for pname, pdoc, tok in doc.params:
            if pname in parameters:
                diagnostics.append(ParseDiagnostic(
                    "error", f"duplicate parameter declaration {pname!r}",
                    name, tok.line, tok.col))
            else:
                parameters[pname] = pdoc
        for key, root, tok in doc.trees:
            if key in trees:
                diagnostics.append(ParseDiagnostic(
                    "error", f"duplicate tree key {key!r}", name, tok.line, tok.col))
            else:
                trees[key] = root
    if any(d.severity == "error" for d in diagnostics):
        return ParseResult(None, diagnostics)
    return ParseResult(TreeLibrary(trees=trees, parameters=parameters), diagnostics)


def parse_files(paths: list[str]) -> ParseResult:
    """Read UTF-8 documents from disk and parse them as one library."""
    documents: list[tuple[str, str]] = []
    diagnostics: list[ParseDiagnostic] = []
    for path in paths:
        try:
            with open(path, encoding="utf-8") as handle:
                documents.append((os.path.basename(path), handle.read()))
        except OSError as exc:
            diagnostics.append(ParseDiagnostic("error", f"cannot read: {exc}", path))
    if diagnostics:
        return ParseResult(None, diagnostics)
    result = parse_library(documents)
    result.diagnostics = diagnostics + result.diagnostics
    return result


# === serializer ===========================================================


def _escape(text: str) -> str:
    out = text.replace("\\", "\\\\").replace('"', '\\"')
    return out.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")


def _render_times(mult: IntExpr) -> str:
    return "" if mult.is_one() else f" times({mult.render()})"


def _render_node(node: TreeNode, indent: int, hoist_label: bool) -> list[str]:
    pad = "  " * indent
    label = "" if hoist_label else node.label
    if node.reference is not None:
        text = f"{pad}ref {node.reference}"
        if label:
            text += f' "{_escape(label)}"'
        return [text + _render_times(node.multiplicity) + ";"]
    if node.gate is None:
        return [f'{pad}leaf "{_escape(node.label)}"'
                + _render_times(node.multiplicity) + ";"]
    gate = node.gate
    head = gate.kind.value
    if gate.kind is GateKind.PARTITION:
        vars_ = "+".join(gate.vars)
        total = gate.total.render() if gate.total is not None else "0"
        head += f"({vars_}={total})"
    text = pad + head
    if label:
        text += f' "{_escape(label)}"'
    text += _render_times(node.multiplicity) + " {"
    lines = [text]
    for child in node.children:
        lines.extend(_render_node(child, indent + 1, hoist_label=False))
    lines.append(pad + "}")
    return lines


def serialize_library(lib: TreeLibrary) -> str:
    """Render a library to canonical text; parsing it back is an identity."""
    lines: list[str] = []
    for name, doc in lib.parameters.items():
        if doc:
            lines.append(f'param {name} "{_escape(doc)}";')
        else:
            lines.append(f"param {name};")
    if lib.parameters:
        lines.append("")
    for key, root in lib.trees.items():
        decl = f"tree {key}"
        if root.is_leaf:
            body = _render_node(root, 0, hoist_label=False)
            lines.append(f"{decl} {body[0]}")
            lines.extend(body[1:])
        else:
            if root.label:
                decl += f' "{_escape(root.label)}"'
            body = _render_node(root, 0, hoist_label=True)
            lines.append(f"{decl} {body[0]}")
            lines.extend(body[1:])
        lines.append("")
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines) + "\n"
