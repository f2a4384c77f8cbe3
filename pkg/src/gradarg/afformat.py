"""Line-oriented text format for frameworks (the ``.af`` format).

One directive per line, ``#`` starts a comment, UTF-8, LF or CRLF accepted:

    option <id> [label="..."]
    arg <id> kind=<user|task> [owner=<user>] [base=<float>] [active=<bool>]
        [label="..."] [derived_active_from=<id,id,...>]
    att <src> <dst>
    sup <src> <dst>
    user <id>
    pref <user> <option> <+|-|0>

Declarations may appear in any order; references are resolved after the whole
document has been read. The parser reports every independent error in one pass
with 1-based line/column positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidAfError
from .model import (
    ID_PATTERN,
    Argument,
    ArgumentKind,
    Framework,
    Polarity,
    Relation,
    canonical_id,
    validate_structure,
)
from .preferences import PreferenceProfile, Sign

_DEFAULT_BASE = 0.5


@dataclass(frozen=True)
class SourceDocument:
    text: str
    origin: str = "<inline>"

    @staticmethod
    def from_file(path) -> "SourceDocument":
        with open(path, "r", encoding="utf-8") as handle:
            return SourceDocument(handle.read(), origin=str(path))


@dataclass(frozen=True)
class ParseError:
    line: int
    column: int
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.code}: {self.message}"


@dataclass
class _Token:
    text: str
    column: int


@dataclass
class _Decl:
    line: int
    column: int


@dataclass
class _OptionDecl(_Decl):
    id: str = ""
    label: str = ""
    base: float = _DEFAULT_BASE


@dataclass
class _ArgDecl(_Decl):
    id: str = ""
    kind: str = ""
    owner: str | None = None
    base: float = _DEFAULT_BASE
    active: bool = False
    label: str = ""
    derived: tuple[str, ...] = ()


@dataclass
class _RelDecl(_Decl):
    polarity: Polarity = Polarity.ATTACK
    source: str = ""
    target: str = ""


@dataclass
class _UserDecl(_Decl):
    id: str = ""


@dataclass
class _PrefDecl(_Decl):
    user: str = ""
    option: str = ""
    sign: Sign = Sign.INDIFFERENT


@dataclass
class _Collector:
    errors: list[ParseError] = field(default_factory=list)

    def add(self, line: int, column: int, code: str, message: str) -> None:
        self.errors.append(ParseError(line, column, code, message))


def _tokenize_line(line: str, line_no: int, errors: _Collector) -> list[_Token] | None:
    """Split a line into whitespace-separated fields honouring quotes."""
    tokens: list[_Token] = []
    i = 0
    n = len(line)
    while i < n:
        while i < n and line[i] in " \t":
            i += 1
        if i >= n:
            break
        if line[i] == "#":
            break
        start = i
        buf: list[str] = []
        in_quotes = False
        while i < n:
            ch = line[i]
            if in_quotes:
                if ch == "\\" and i + 1 < n and line[i + 1] in '"\\':
                    buf.append(line[i + 1])
                    i += 2
                    continue
                if ch == '"':
                    in_quotes = False
                    i += 1
                    continue
                buf.append(ch)
                i += 1
                continue
            if ch == '"':
                in_quotes = True
                i += 1
                continue
            if ch in " \t" or ch == "#":
                break
            buf.append(ch)
            i += 1
        if in_quotes:
            errors.add(line_no, start + 1, "SYNTAX", "unterminated quote")
            return None
        tokens.append(_Token("".join(buf), start + 1))
    return tokens


def _split_attrs(tokens: list[_Token], line_no: int, errors: _Collector) -> dict[str, _Token] | None:
    attrs: dict[str, _Token] = {}
    ok = True
    for tok in tokens:
        if "=" not in tok.text:
            errors.add(line_no, tok.column, "SYNTAX", f"expected key=value, got {tok.text!r}")
            ok = False
            continue
        key, value = tok.text.split("=", 1)
        if key in attrs:
            errors.add(line_no, tok.column, "SYNTAX", f"attribute {key!r} given twice")
            ok = False
            continue
        attrs[key] = _Token(value, tok.column)
    return attrs if ok else None


def _check_id(tok: _Token, line_no: int, errors: _Collector) -> str | None:
    ident = canonical_id(tok.text)
    if not ID_PATTERN.match(ident):
        errors.add(line_no, tok.column, "SYNTAX", f"invalid identifier {tok.text!r}")
        return None
    return ident


def _parse_bool(tok: _Token, line_no: int, errors: _Collector) -> bool | None:
    if tok.text in ("true", "false"):
        return tok.text == "true"
    errors.add(line_no, tok.column, "SYNTAX", f"expected true or false, got {tok.text!r}")
    return None


def _parse_base(tok: _Token, line_no: int, errors: _Collector) -> float | None:
    try:
        value = float(tok.text)
    except ValueError:
        errors.add(line_no, tok.column, "SYNTAX", f"not a number: {tok.text!r}")
        return None
    if not 0.0 <= value <= 1.0:
        errors.add(line_no, tok.column, "BAD_SCORE", f"base score {tok.text} outside [0, 1]")
        return None
    return value


def try_parse_framework(doc: SourceDocument) -> tuple[Framework | None, list[ParseError]]:
    """Parse a document; returns (framework, errors). Framework is None on error."""
    errors = _Collector()
    options: list[_OptionDecl] = []
    args: list[_ArgDecl] = []
    rels: list[_RelDecl] = []
    users: list[_UserDecl] = []
    prefs: list[_PrefDecl] = []

    for line_no, raw in enumerate(doc.text.splitlines(), start=1):
        line = raw.rstrip("\r")
        tokens = _tokenize_line(line, line_no, errors)
        if not tokens:
            continue
        head = tokens[0]
        rest = tokens[1:]

        if head.text == "option":
            if not rest:
                errors.add(line_no, head.column, "SYNTAX", "option needs an id")
                continue
            ident = _check_id(rest[0], line_no, errors)
            attrs = _split_attrs(rest[1:], line_no, errors)
            if ident is None or attrs is None:
                continue
            decl = _OptionDecl(line_no, rest[0].column, id=ident)
            for key, tok in attrs.items():
                if key == "label":
                    decl.label = tok.text
                elif key == "base":
                    base = _parse_base(tok, line_no, errors)
                    if base is not None:
                        decl.base = base
                else:
                    errors.add(line_no, tok.column, "SYNTAX", f"unknown option attribute {key!r}")
            options.append(decl)

        elif head.text == "arg":
            if not rest:
                errors.add(line_no, head.column, "SYNTAX", "arg needs an id")
                continue
            ident = _check_id(rest[0], line_no, errors)
            attrs = _split_attrs(rest[1:], line_no, errors)
            if ident is None or attrs is None:
                continue
            decl = _ArgDecl(line_no, rest[0].column, id=ident)
            bad = False
            for key, tok in attrs.items():
                if key == "kind":
                    if tok.text not in ("user", "task"):
                        errors.add(line_no, tok.column, "SYNTAX", "kind must be user or task")
                        bad = True
                    else:
                        decl.kind = tok.text
                elif key == "owner":
                    owner = _check_id(tok, line_no, errors)
                    if owner is None:
                        bad = True
                    else:
                        decl.owner = owner
                elif key == "base":
                    base = _parse_base(tok, line_no, errors)
                    if base is None:
                        bad = True
                    else:
                        decl.base = base
                elif key == "active":
                    flag = _parse_bool(tok, line_no, errors)
                    if flag is None:
                        bad = True
                    else:
                        decl.active = flag
                elif key == "label":
                    decl.label = tok.text
                elif key == "derived_active_from":
                    deps = []
                    for part in tok.text.split(","):
                        part = part.strip()
                        if not part:
                            continue
                        dep = canonical_id(part)
                        if not ID_PATTERN.match(dep):
                            errors.add(line_no, tok.column, "SYNTAX", f"invalid identifier {part!r}")
                            bad = True
                        else:
                            deps.append(dep)
                    decl.derived = tuple(deps)
                else:
                    errors.add(line_no, tok.column, "SYNTAX", f"unknown arg attribute {key!r}")
            if not decl.kind:
                errors.add(line_no, head.column, "SYNTAX", "arg needs kind=user or kind=task")
                bad = True
            if not bad:
                args.append(decl)

        elif head.text in ("att", "sup"):
            if len(rest) != 2:
                errors.add(line_no, head.column, "SYNTAX", f"{head.text} needs source and target")
                continue
            src = _check_id(rest[0], line_no, errors)
            dst = _check_id(rest[1], line_no, errors)
            if src is None or dst is None:
                continue
            polarity = Polarity.ATTACK if head.text == "att" else Polarity.SUPPORT
            if src == dst:
                errors.add(line_no, rest[0].column, "SELF_RELATION", "relation source equals target")
                continue
            rels.append(_RelDecl(line_no, rest[0].column, polarity, src, dst))

        elif head.text == "user":
            if len(rest) != 1:
                errors.add(line_no, head.column, "SYNTAX", "user needs exactly one id")
                continue
            ident = _check_id(rest[0], line_no, errors)
            if ident is not None:
                users.append(_UserDecl(line_no, rest[0].column, id=ident))

        elif head.text == "pref":
            if len(rest) != 3:
                errors.add(line_no, head.column, "SYNTAX", "pref needs user, option and sign")
                continue
            user = _check_id(rest[0], line_no, errors)
            option = _check_id(rest[1], line_no, errors)
            if user is None or option is None:
                continue
            try:
                sign = Sign.from_token(rest[2].text)
            except ValueError:
                errors.add(line_no, rest[2].column, "SYNTAX", "sign must be +, - or 0")
                continue
            prefs.append(_PrefDecl(line_no, rest[0].column, user, option, sign))

        else:
            errors.add(line_no, head.column, "SYNTAX", f"unknown directive {head.text!r}")

    # Resolution pass: names may be declared anywhere in the document.
    known: dict[str, _Decl] = {}
    for decl in options:
        if decl.id in known:
            errors.add(decl.line, decl.column, "DUPLICATE_ID", f"id {decl.id!r} already declared")
        else:
            known[decl.id] = decl
    for decl in args:
        if decl.id in known:
            errors.add(decl.line, decl.column, "DUPLICATE_ID", f"id {decl.id!r} already declared")
        else:
            known[decl.id] = decl

    user_ids: set[str] = set()
    for decl in users:
        if decl.id in user_ids:
            errors.add(decl.line, decl.column, "DUPLICATE_ID", f"user {decl.id!r} already declared")
        else:
            user_ids.add(decl.id)

    option_ids = {d.id for d in options}
    for decl in args:
        if decl.kind == "user":
            if decl.owner is None:
                errors.add(decl.line, decl.column, "MISSING_OWNER", f"user argument {decl.id} needs owner=<user>")
            elif decl.owner not in user_ids:
                errors.add(decl.line, decl.column, "UNKNOWN_REFERENCE", f"owner {decl.owner!r} is not a declared user")
        elif decl.owner is not None:
            errors.add(decl.line, decl.column, "SYNTAX", "owner is only allowed on user arguments")
        for dep in decl.derived:
            if dep not in known:
                errors.add(decl.line, decl.column, "UNKNOWN_REFERENCE", f"derived_active_from references undeclared {dep!r}")

    seen_pairs: set[tuple[str, str]] = set()
    for decl in rels:
        missing = False
        for endpoint in (decl.source, decl.target):
            if endpoint not in known:
                errors.add(decl.line, decl.column, "UNKNOWN_REFERENCE", f"relation references undeclared {endpoint!r}")
                missing = True
        if missing:
            continue
        pair = (decl.source, decl.target)
        if pair in seen_pairs:
            errors.add(decl.line, decl.column, "DUPLICATE_RELATION", f"second relation between {decl.source} and {decl.target}")
            continue
        seen_pairs.add(pair)

    pref_signs: dict[tuple[str, str], Sign] = {}
    for decl in prefs:
        if decl.user not in user_ids:
            errors.add(decl.line, decl.column, "UNKNOWN_REFERENCE", f"pref references undeclared user {decl.user!r}")
            continue
        if decl.option not in option_ids:
            errors.add(decl.line, decl.column, "UNKNOWN_REFERENCE", f"pref references non-option {decl.option!r}")
            continue
        key = (decl.user, decl.option)
        if key in pref_signs and pref_signs[key] is not decl.sign:
            errors.add(decl.line, decl.column, "CONFLICTING_SIGN", f"pref for ({decl.user}, {decl.option}) stated twice with different signs")
            continue
        pref_signs[key] = decl.sign

    if errors.errors:
        return None, sorted(errors.errors, key=lambda e: (e.line, e.column))

    arguments = [
        Argument(d.id, ArgumentKind.OPTION, label=d.label, base_score=d.base, active=True)
        for d in options
    ]
    arguments.extend(
        Argument(
            d.id,
            ArgumentKind.USER if d.kind == "user" else ArgumentKind.TASK,
            label=d.label,
            owner=d.owner,
            base_score=d.base,
            active=d.active,
            derived_active_from=d.derived,
        )
        for d in args
    )
    framework = Framework.of(
        arguments,
        [Relation(d.source, d.target, d.polarity) for d in rels],
        options=[d.id for d in options],
        users=user_ids,
        preferences=PreferenceProfile({k: v for k, v in pref_signs.items()}),
    )

    report = validate_structure(framework)
    if report.errors:
        line_of_relation = {(d.source, d.target): (d.line, d.column) for d in rels}
        line_of_argument = {d.id: (d.line, d.column) for d in list(args) + list(options)}
        for issue in report.errors:
            if issue.code == "OPTION_HAS_OUTGOING":
                src, _, dst = issue.subject.partition("->")
                line, col = line_of_relation.get((src, dst), (1, 1))
            else:
                line, col = line_of_argument.get(issue.subject, (1, 1))
            errors.add(line, col, issue.code, issue.message)
        return None, sorted(errors.errors, key=lambda e: (e.line, e.column))

    return framework, []


def parse_framework(doc: SourceDocument) -> Framework:
    """Parse a document or raise :class:`InvalidAfError` with all errors."""
    framework, errors = try_parse_framework(doc)
    if framework is None:
        summary = "; ".join(str(e) for e in errors[:5])
        if len(errors) > 5:
            summary += f" (+{len(errors) - 5} more)"
        raise InvalidAfError(f"{doc.origin}: {summary}", errors=errors)
    return framework


def _quote(label: str) -> str:
    return '"' + label.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _format_base(value: float) -> str:
    return format(value, ".17g")


def serialize_framework(framework: Framework) -> str:
    """Deterministic text form; parsing it reproduces the framework exactly.

    Options keep their declared order; everything else is sorted. Base scores
    are printed with 17 significant digits so round-trips are lossless.
    """
    lines: list[str] = []
    for oid in framework.options:
        arg = framework.arguments[oid]
        parts = [f"option {oid}"]
        if arg.base_score != _DEFAULT_BASE:
            parts.append(f"base={_format_base(arg.base_score)}")
        if arg.label:
            parts.append(f"label={_quote(arg.label)}")
        lines.append(" ".join(parts))

    for user in framework.users:
        lines.append(f"user {user}")

    for aid in sorted(framework.arguments):
        arg = framework.arguments[aid]
        if arg.kind is ArgumentKind.OPTION:
            continue
        parts = [f"arg {aid}", f"kind={arg.kind.value}"]
        if arg.owner is not None:
            parts.append(f"owner={arg.owner}")
        if arg.base_score != _DEFAULT_BASE:
            parts.append(f"base={_format_base(arg.base_score)}")
        if arg.active:
            parts.append("active=true")
        if arg.label:
            parts.append(f"label={_quote(arg.label)}")
        if arg.derived_active_from:
            parts.append("derived_active_from=" + ",".join(arg.derived_active_from))
        lines.append(" ".join(parts))

    for rel in framework.relations:
        keyword = "att" if rel.is_attack else "sup"
        lines.append(f"{keyword} {rel.source} {rel.target}")

    for user, option, sign in sorted(framework.preferences.items()):
        lines.append(f"pref {user} {option} {sign.value}")

    return "\n".join(lines) + "\n"
