"""CTLK formula AST, concrete-syntax parser and printer.

Concrete syntax (lowest precedence first):

    f ::= g "->" f | g
    g ::= h ("or" h)*
    h ::= u ("and" u)*
    u ::= "!" u | EX/EF/EG/AX/AF/AG u | "E" "[" f "U" f "]" | "A" "[" f "U" f "]"
        | K(Agent, f) | GK(Group, f) | CK(Group, f) | DK(Group, f)
        | "(" f ")" | atom
    atom ::= Agent "." var "==" (0|1|2 | Agent "." var)
           | "has" "(" Agent "," qubit ")"
           | qubit "==" "ket" "[" amp ("," amp)* "]"
           | qubit "==" "init" "(" qubit ")"
           | qubit "==" qubit
"""

from dataclasses import dataclass

from .errors import DmcSyntaxError
from .lexer import TokenStream, tokenize
from .netspec import _fmt_amp


@dataclass(frozen=True)
class Formula:
    pass


# --- atoms -----------------------------------------------------------------

@dataclass(frozen=True)
class VarEq(Formula):
    agent: str
    var: str
    value: int


@dataclass(frozen=True)
class VarEqVar(Formula):
    agent1: str
    var1: str
    agent2: str
    var2: str


@dataclass(frozen=True)
class Has(Formula):
    agent: str
    qubit: str


@dataclass(frozen=True)
class QubitIsKet(Formula):
    qubit: str
    amplitudes: tuple


@dataclass(frozen=True)
class QubitEqQubit(Formula):
    q1: str
    q2: str


@dataclass(frozen=True)
class QubitEqInit(Formula):
    q: str
    q_init: str


ATOM_TYPES = (VarEq, VarEqVar, Has, QubitIsKet, QubitEqQubit, QubitEqInit)


# --- connectives -----------------------------------------------------------

@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Unary(Formula):
    op: str  # EX, EF, EG, AX, AF, AG
    sub: Formula


@dataclass(frozen=True)
class Until(Formula):
    quantifier: str  # "E" or "A"
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Know(Formula):
    agent: str
    sub: Formula


@dataclass(frozen=True)
class GroupKnow(Formula):
    op: str  # GK, CK, DK
    group: str
    sub: Formula


UNARY_TEMPORAL = ("EX", "EF", "EG", "AX", "AF", "AG")
GROUP_OPS = ("GK", "CK", "DK")


def atoms_of(formula):
    """All atom nodes occurring in a formula, in syntactic order."""
    out = []

    def walk(f):
        if isinstance(f, ATOM_TYPES):
            out.append(f)
        elif isinstance(f, Not):
            walk(f.sub)
        elif isinstance(f, (And, Or, Implies, Until)):
            walk(f.left)
            walk(f.right)
        elif isinstance(f, Unary):
            walk(f.sub)
        elif isinstance(f, Know):
            walk(f.sub)
        elif isinstance(f, GroupKnow):
            walk(f.sub)
        else:
            raise TypeError(f"unknown formula node {f!r}")

    walk(formula)
    return out


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def parse_formula(text):
    ts = TokenStream(tokenize(text))
    f = parse_formula_stream(ts)
    ts.expect("EOF")
    return f


def parse_formula_stream(ts):
    return _implies(ts)


def _implies(ts):
    left = _or(ts)
    if ts.accept("->"):
        return Implies(left, _implies(ts))
    return left


def _or(ts):
    f = _and(ts)
    while ts.accept_keyword("or"):
        f = Or(f, _and(ts))
    return f


def _and(ts):
    f = _unary(ts)
    while ts.accept_keyword("and"):
        f = And(f, _unary(ts))
    return f


def _number(ts):
    neg = ts.accept("-") is not None
    tok = ts.expect("NUMBER")
    val = float(tok.text)
    return -val if neg else val


def _amplitude(ts):
    if ts.accept("("):
        re = _number(ts)
        ts.expect(",")
        im = _number(ts)
        ts.expect(")")
        return complex(re, im)
    return complex(_number(ts), 0.0)


def _unary(ts):
    if ts.accept("!"):
        return Not(_unary(ts))
    tok = ts.current
    if tok.kind == "IDENT":
        word = tok.text
        if word in UNARY_TEMPORAL:
            ts.advance()
            return Unary(word, _unary(ts))
        if word in ("E", "A") and ts.peek(1).kind == "[":
            ts.advance()
            ts.expect("[")
            left = parse_formula_stream(ts)
            ts.expect_keyword("U")
            right = parse_formula_stream(ts)
            ts.expect("]")
            return Until(word, left, right)
        if word == "K" and ts.peek(1).kind == "(":
            ts.advance()
            ts.expect("(")
            agent = ts.expect("IDENT").text
            ts.expect(",")
            sub = parse_formula_stream(ts)
            ts.expect(")")
            return Know(agent, sub)
        if word in GROUP_OPS and ts.peek(1).kind == "(":
            ts.advance()
            ts.expect("(")
            group = ts.expect("IDENT").text
            ts.expect(",")
            sub = parse_formula_stream(ts)
            ts.expect(")")
            return GroupKnow(word, group, sub)
        if word == "has" and ts.peek(1).kind == "(":
            ts.advance()
            ts.expect("(")
            agent = ts.expect("IDENT").text
            ts.expect(",")
            qubit = ts.expect("IDENT").text
            ts.expect(")")
            return Has(agent, qubit)
        return _eq_atom(ts)
    if ts.accept("("):
        f = parse_formula_stream(ts)
        ts.expect(")")
        return f
    raise DmcSyntaxError(
        f"unexpected token {tok.text!r} in formula", tok.line, tok.col,
        expected={"formula"},
    )


def _eq_atom(ts):
    first = ts.expect("IDENT")
    if ts.accept("."):
        var = ts.expect("IDENT").text
        ts.expect("==")
        if ts.current.kind == "NUMBER":
            value = int(ts.advance().text)
            return VarEq(first.text, var, value)
        agent2 = ts.expect("IDENT").text
        ts.expect(".")
        var2 = ts.expect("IDENT").text
        return VarEqVar(first.text, var, agent2, var2)
    ts.expect("==")
    tok = ts.current
    if tok.kind == "IDENT" and tok.text == "ket" and ts.peek(1).kind == "[":
        ts.advance()
        ts.expect("[")
        amps = [_amplitude(ts)]
        while ts.accept(","):
            amps.append(_amplitude(ts))
        ts.expect("]")
        return QubitIsKet(first.text, tuple(amps))
    if tok.kind == "IDENT" and tok.text == "init" and ts.peek(1).kind == "(":
        ts.advance()
        ts.expect("(")
        q = ts.expect("IDENT").text
        ts.expect(")")
        return QubitEqInit(first.text, q)
    other = ts.expect("IDENT").text
    return QubitEqQubit(first.text, other)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def render_formula(f):
    """Canonical text; binary connectives are always parenthesised so the
    output reparses unambiguously to an equal AST."""
    if isinstance(f, VarEq):
        return f"{f.agent}.{f.var} == {f.value}"
    if isinstance(f, VarEqVar):
        return f"{f.agent1}.{f.var1} == {f.agent2}.{f.var2}"
    if isinstance(f, Has):
        return f"has({f.agent}, {f.qubit})"
    if isinstance(f, QubitIsKet):
        return f"{f.qubit} == ket[{', '.join(_fmt_amp(a) for a in f.amplitudes)}]"
    if isinstance(f, QubitEqQubit):
        return f"{f.q1} == {f.q2}"
    if isinstance(f, QubitEqInit):
        return f"{f.q} == init({f.q_init})"
    if isinstance(f, Not):
        return f"!{_atomic(f.sub)}"
    if isinstance(f, And):
        return f"({render_formula(f.left)} and {render_formula(f.right)})"
    if isinstance(f, Or):
        return f"({render_formula(f.left)} or {render_formula(f.right)})"
    if isinstance(f, Implies):
        return f"({render_formula(f.left)} -> {render_formula(f.right)})"
    if isinstance(f, Unary):
        return f"{f.op} {_atomic(f.sub)}"
    if isinstance(f, Until):
        return f"{f.quantifier}[{render_formula(f.left)} U {render_formula(f.right)}]"
    if isinstance(f, Know):
        return f"K({f.agent}, {render_formula(f.sub)})"
    if isinstance(f, GroupKnow):
        return f"{f.op}({f.group}, {render_formula(f.sub)})"
    raise TypeError(f"unknown formula node {f!r}")


def _atomic(f):
    """Render an operand of ! or a temporal prefix, adding parens if needed."""
    s = render_formula(f)
    if isinstance(f, (VarEq, VarEqVar)) or (
        isinstance(f, (QubitEqQubit, QubitEqInit, QubitIsKet))
    ):
        # equality atoms contain '==' which binds looser visually; keep bare,
        # the grammar is still unambiguous since unary ops bind one operand
        return f"({s})"
    return s
