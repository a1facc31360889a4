"""Program format: lexer, parser, pretty-printer, and machine construction.

A program has the sections DOMAINS, SIGNATURE, PROJECTIONS, INIT, RULE and
OPTIONS, in that order; only SIGNATURE and RULE are required.  The parser
builds the machine's initial state, including the self tree encoding the
declared signature and rule.  Bounded per-element families (PARFOR) and set
comprehensions are expanded at parse time over declared finite domains, so
the engine only ever sees core rules.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from . import background as bg
from .engine import Machine
from .errors import ParseError
from .reflect import build_self_tree, decode_rule, drop, rule_of_self
from .rules import Assign, If, Let, Par, PartialAssign, Rule, rule_substitute
from .structures import (
    Atom,
    BackgroundConfig,
    BoolConnective,
    BoolVal,
    Constant,
    DroppedTerm,
    Equality,
    FALSE,
    FunctionApp,
    FunctionSymbol,
    Iota,
    Location,
    NatVal,
    NodeRef,
    NODES_DOMAIN,
    SELF_LOCATION,
    SELF_SYMBOL,
    SetVal,
    Signature,
    State,
    SymbolName,
    Term,
    TreeValue,
    TRUE,
    TupleVal,
    UNDEF,
    Value,
    Variable,
    value_sort_key,
)
from .treealg import Tree, XI

KEYWORDS = {
    "DOMAINS",
    "SIGNATURE",
    "PROJECTIONS",
    "INIT",
    "RULE",
    "OPTIONS",
    "IF",
    "THEN",
    "ELSE",
    "ENDIF",
    "PAR",
    "ENDPAR",
    "PARFOR",
    "ENDPARFOR",
    "LET",
    "IN",
    "IOTA",
    "NODES",
    "CARD",
    "DROP",
    "RAISE",
    "AND",
    "OR",
    "NOT",
    "MOD",
    "XI",
}

RESERVED_WORDS = {"true", "false", "undef"}

DEFAULT_MAX_STEPS = 1000
MAX_STEPS_ENV = "RSASM_MAX_STEPS"


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int


_SYMBOLS = {
    ":=": "ASSIGN",
    "<=": "PARTIAL",
    "(": "LPAREN",
    ")": "RPAREN",
    "{": "LBRACE",
    "}": "RBRACE",
    "<": "LANGLE",
    ">": "RANGLE",
    "[": "LBRACKET",
    "]": "RBRACKET",
    ",": "COMMA",
    "=": "EQ",
    "/": "SLASH",
    "|": "BAR",
    ".": "DOT",
    "+": "PLUS",
    "-": "MINUS",
}


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        two = source[i : i + 2]
        if two in (":=", "<="):
            tokens.append(Token(_SYMBOLS[two], two, line, col))
            i += 2
            col += 2
            continue
        if ch in _SYMBOLS:
            tokens.append(Token(_SYMBOLS[ch], ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            tokens.append(Token("INT", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] in "_$"):
                j += 1
            text = source[i:j]
            kind = "KEYWORD" if text in KEYWORDS else "IDENT"
            tokens.append(Token(kind, text, line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("EOF", "", line, col))
    return tokens


@dataclass
class ProgramSource:
    """The parsed sections of a program, before machine construction."""

    domains: dict[str, tuple[Value, ...]]
    signature: Signature
    projections: dict[str, str]
    init: dict[Location, Value]
    rule: Rule
    options: dict[str, int]
    name: str = "program"


class Parser:
    def __init__(self, tokens: list[Token], name: str = "program"):
        self.tokens = tokens
        self.pos = 0
        self.name = name
        self.domains: dict[str, tuple[Value, ...]] = {}
        self.signature_symbols: dict[str, int] = {}
        self.projections: dict[str, str] = {}
        self.bound: list[str] = []

    # -- token helpers --

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise ParseError(f"expected {want}, found {tok.text or 'end of input'}", tok.line, tok.column)
        return tok

    def at_keyword(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "KEYWORD" and tok.text == text

    def take_keyword(self, text: str) -> bool:
        if self.at_keyword(text):
            self.next()
            return True
        return False

    def fail(self, message: str):
        tok = self.peek()
        raise ParseError(message, tok.line, tok.column)

    def ident(self, what: str) -> str:
        tok = self.next()
        if tok.kind != "IDENT":
            raise ParseError(f"expected {what}, found {tok.text or 'end of input'}", tok.line, tok.column)
        return tok.text

    # -- sections --

    def parse_program(self) -> ProgramSource:
        if self.take_keyword("DOMAINS"):
            self.parse_domains()
        self.expect("KEYWORD", "SIGNATURE")
        self.parse_signature()
        if self.take_keyword("PROJECTIONS"):
            self.parse_projections()
        init: dict[Location, Value] = {}
        if self.take_keyword("INIT"):
            init = self.parse_init()
        self.expect("KEYWORD", "RULE")
        rule = self.parse_rule()
        options: dict[str, int] = {}
        if self.take_keyword("OPTIONS"):
            options = self.parse_options()
        self.expect("EOF")
        signature = Signature(
            (SELF_SYMBOL,)
            + tuple(FunctionSymbol(n, a) for n, a in self.signature_symbols.items())
        )
        return ProgramSource(
            self.domains, signature, self.projections, init, rule, options, self.name
        )

    def parse_domains(self) -> None:
        while self.peek().kind == "IDENT":
            name = self.ident("domain name")
            if name in self.domains:
                self.fail(f"domain {name!r} declared twice")
            if name in RESERVED_WORDS:
                self.fail(f"{name!r} is reserved")
            self.expect("EQ")
            self.expect("LBRACE")
            members: list[Value] = []
            if self.peek().kind != "RBRACE":
                while True:
                    members.append(Atom(self.ident("domain member")))
                    if not self._take("COMMA"):
                        break
            self.expect("RBRACE")
            if len(set(members)) != len(members):
                self.fail(f"domain {name!r} lists a member twice")
            self.domains[name] = tuple(sorted(members, key=value_sort_key))

    def _take(self, kind: str) -> bool:
        if self.peek().kind == kind:
            self.next()
            return True
        return False

    def parse_signature(self) -> None:
        while self.peek().kind == "IDENT":
            name = self.ident("function symbol")
            if name == "self":
                self.fail("'self' is implicit and cannot be declared")
            if name in self.signature_symbols:
                self.fail(f"symbol {name!r} declared twice")
            if name in bg.TERM_FUNCTIONS or name in RESERVED_WORDS:
                self.fail(f"{name!r} is a reserved background name")
            if name in self.domains:
                self.fail(f"{name!r} already names a domain")
            self.expect("SLASH")
            arity = int(self.expect("INT").text)
            self.signature_symbols[name] = arity

    def parse_projections(self) -> None:
        while self.peek().kind == "IDENT":
            name = self.ident("projection name")
            self.expect("EQ")
            base = self.ident("base relation")
            if name not in self.signature_symbols:
                self.fail(f"projection {name!r} must be declared in SIGNATURE")
            if base not in self.signature_symbols:
                self.fail(f"projection base {base!r} must be declared in SIGNATURE")
            if "index" not in self.signature_symbols or self.signature_symbols["index"] != 2:
                self.fail("projections need a binary 'index' symbol")
            if self.signature_symbols[name] != self.signature_symbols[base] + 1:
                self.fail(f"projection {name!r} must have arity of {base!r} plus one")
            if name in self.projections:
                self.fail(f"projection {name!r} declared twice")
            self.projections[name] = base

    def parse_value_literal(self) -> Value:
        tok = self.next()
        if tok.kind == "INT":
            return NatVal(int(tok.text))
        if tok.kind == "KEYWORD" and tok.text == "DROP":
            self.expect("LPAREN")
            name_tok = self.next()
            if name_tok.kind not in ("IDENT", "PLUS", "MINUS"):
                raise ParseError("expected a symbol name", name_tok.line, name_tok.column)
            self.expect("RPAREN")
            return SymbolName(name_tok.text)
        if tok.kind == "IDENT":
            if tok.text == "true":
                return TRUE
            if tok.text == "false":
                return FALSE
            if tok.text == "undef":
                return UNDEF
            if tok.text in self.signature_symbols or tok.text == "self":
                return SymbolName(tok.text)
            return Atom(tok.text)
        raise ParseError(f"expected a value literal, found {tok.text!r}", tok.line, tok.column)

    def parse_init(self) -> dict[Location, Value]:
        init: dict[Location, Value] = {}
        while self.peek().kind == "IDENT":
            name = self.ident("location symbol")
            if name == "self":
                self.fail("'self' is initialized from SIGNATURE and RULE")
            if name in self.projections:
                self.fail(f"derived function {name!r} cannot be initialized")
            arity = self.signature_symbols.get(name)
            if arity is None:
                self.fail(f"unknown symbol {name!r} in INIT")
            args: list[Value] = []
            if self._take("LPAREN"):
                if self.peek().kind != "RPAREN":
                    while True:
                        args.append(self.parse_value_literal())
                        if not self._take("COMMA"):
                            break
                self.expect("RPAREN")
            if len(args) != arity:
                self.fail(f"{name!r} has arity {arity}, got {len(args)} arguments")
            self.expect("EQ")
            value = self.parse_value_literal()
            loc = Location(name, tuple(args))
            if loc in init:
                self.fail(f"location {loc!r} initialized twice")
            init[loc] = value
        return init

    def parse_options(self) -> dict[str, int]:
        options: dict[str, int] = {}
        while self.peek().kind == "IDENT":
            key = self.ident("option name")
            if key not in ("max_steps", "seed"):
                self.fail(f"unknown option {key!r}")
            if key in options:
                self.fail(f"option {key!r} set twice")
            self.expect("EQ")
            options[key] = int(self.expect("INT").text)
        return options

    # -- rules --

    def _bind(self, var: str) -> None:
        if var in self.bound:
            self.fail(f"variable {var!r} shadows an enclosing binding")
        if var in self.signature_symbols or var in self.domains or var in bg.TERM_FUNCTIONS:
            self.fail(f"variable {var!r} collides with a declared name")
        if var in RESERVED_WORDS or var == "self":
            self.fail(f"variable {var!r} is reserved")
        self.bound.append(var)

    def _unbind(self, var: str) -> None:
        assert self.bound and self.bound[-1] == var
        self.bound.pop()

    def parse_rule(self) -> Rule:
        tok = self.peek()
        if tok.kind == "KEYWORD":
            if tok.text == "IF":
                self.next()
                cond = self.parse_term()
                self.expect("KEYWORD", "THEN")
                then = self.parse_rule()
                orelse: Rule = Par(())
                if self.take_keyword("ELSE"):
                    orelse = self.parse_rule()
                self.expect("KEYWORD", "ENDIF")
                return If(cond, then, orelse)
            if tok.text == "PAR":
                self.next()
                branches: list[Rule] = []
                while not self.at_keyword("ENDPAR"):
                    if self.peek().kind == "EOF":
                        self.fail("PAR without ENDPAR")
                    branches.append(self.parse_rule())
                self.next()
                return Par(tuple(branches))
            if tok.text == "PARFOR":
                self.next()
                var = self.ident("loop variable")
                self.expect("KEYWORD", "IN")
                domain = self.ident("domain name")
                members = self.domains.get(domain)
                if members is None:
                    self.fail(f"PARFOR needs a declared finite domain, not {domain!r}")
                self._bind(var)
                body = self.parse_rule()
                self._unbind(var)
                self.expect("KEYWORD", "ENDPARFOR")
                return Par(
                    tuple(rule_substitute(body, var, Constant(m)) for m in members)
                )
            if tok.text == "LET":
                self.next()
                var = self.ident("let variable")
                self.expect("EQ")
                bound = self.parse_term()
                self.expect("KEYWORD", "IN")
                self._bind(var)
                body = self.parse_rule()
                self._unbind(var)
                return Let(var, bound, body)
            self.fail(f"unexpected keyword {tok.text} in rule position")
        if tok.kind != "IDENT":
            self.fail("expected a rule")
        target = self.ident("update target")
        args: list[Term] = []
        if self._take("LPAREN"):
            if self.peek().kind != "RPAREN":
                while True:
                    args.append(self.parse_term())
                    if not self._take("COMMA"):
                        break
            self.expect("RPAREN")
        if target in self.signature_symbols:
            if len(args) != self.signature_symbols[target]:
                self.fail(
                    f"{target!r} has arity {self.signature_symbols[target]}, got {len(args)}"
                )
        elif target in self.bound and args:
            self.fail(f"tree-node target {target!r} takes no arguments")
        nxt = self.next()
        if nxt.kind == "ASSIGN":
            return Assign(target, tuple(args), self.parse_term())
        if nxt.kind == "PARTIAL":
            self.expect("LBRACKET")
            op_tok = self.next()
            if op_tok.kind in ("PLUS", "MINUS"):
                op = op_tok.text
            elif op_tok.kind == "IDENT":
                op = op_tok.text
            else:
                raise ParseError("expected an operator name", op_tok.line, op_tok.column)
            if not bg.is_registered_operator(op):
                raise ParseError(f"operator {op!r} is not registered", op_tok.line, op_tok.column)
            self.expect("RBRACKET")
            operands = [self.parse_term()]
            while self._take("COMMA"):
                operands.append(self.parse_term())
            return PartialAssign(target, tuple(args), op, tuple(operands))
        raise ParseError(f"expected ':=' or '<=[op]', found {nxt.text!r}", nxt.line, nxt.column)

    # -- terms --

    def parse_term(self) -> Term:
        return self.parse_or()

    def parse_or(self) -> Term:
        term = self.parse_and()
        parts = [term]
        while self.take_keyword("OR"):
            parts.append(self.parse_and())
        return parts[0] if len(parts) == 1 else BoolConnective("or", tuple(parts))

    def parse_and(self) -> Term:
        term = self.parse_not()
        parts = [term]
        while self.take_keyword("AND"):
            parts.append(self.parse_not())
        return parts[0] if len(parts) == 1 else BoolConnective("and", tuple(parts))

    def parse_not(self) -> Term:
        if self.take_keyword("NOT"):
            return BoolConnective("not", (self.parse_not(),))
        return self.parse_equality()

    def parse_equality(self) -> Term:
        left = self.parse_additive()
        if self._take("EQ"):
            return Equality(left, self.parse_additive())
        return left

    def parse_additive(self) -> Term:
        term = self.parse_mod()
        while self.peek().kind in ("PLUS", "MINUS"):
            op = self.next().text
            term = FunctionApp(op, (term, self.parse_mod()))
        return term

    def parse_mod(self) -> Term:
        term = self.parse_primary()
        while self.take_keyword("MOD"):
            term = FunctionApp("mod", (term, self.parse_primary()))
        return term

    def parse_domain_tag(self) -> str:
        if self.take_keyword("NODES"):
            return NODES_DOMAIN
        name = self.ident("domain name")
        if name not in self.domains:
            self.fail(f"search domain {name!r} is not declared; unbounded search is rejected")
        return name

    def parse_primary(self) -> Term:
        tok = self.peek()
        if tok.kind == "INT":
            self.next()
            return Constant(NatVal(int(tok.text)))
        if tok.kind == "LPAREN":
            self.next()
            term = self.parse_term()
            self.expect("RPAREN")
            return term
        if tok.kind == "LBRACE":
            return self.parse_comprehension()
        if tok.kind == "KEYWORD":
            if tok.text == "IOTA":
                self.next()
                var = self.ident("iota variable")
                self.expect("KEYWORD", "IN")
                domain = self.parse_domain_tag()
                self.expect("DOT")
                self._bind(var)
                cond = self.parse_term()
                self._unbind(var)
                return Iota(var, domain, cond)
            if tok.text == "CARD":
                self.next()
                self.expect("LPAREN")
                arg = self.parse_term()
                self.expect("RPAREN")
                return FunctionApp("card_of", (arg,))
            if tok.text == "DROP":
                self.next()
                self.expect("LPAREN")
                term = self.parse_droppable()
                self.expect("RPAREN")
                return term
            if tok.text == "RAISE":
                self.next()
                self.expect("LPAREN")
                arg = self.parse_term()
                self.expect("RPAREN")
                return FunctionApp("raise_eval", (arg,))
            if tok.text == "XI":
                self.next()
                return FunctionApp("hole", ())
            self.fail(f"unexpected keyword {tok.text} in a term")
        if tok.kind != "IDENT":
            self.fail(f"unexpected {tok.text or 'end of input'} in a term")
        name = self.next().text
        if name == "true":
            return Constant(TRUE)
        if name == "false":
            return Constant(FALSE)
        if name == "undef":
            return Constant(UNDEF)
        if self.peek().kind == "LANGLE":
            return self.parse_tree_node(name)
        if self.peek().kind == "LPAREN":
            self.next()
            args: list[Term] = []
            if self.peek().kind != "RPAREN":
                while True:
                    args.append(self.parse_term())
                    if not self._take("COMMA"):
                        break
            self.expect("RPAREN")
            arity = self.signature_symbols.get(name)
            if arity is not None and arity != len(args):
                self.fail(f"{name!r} has arity {arity}, got {len(args)} arguments")
            fn = bg.TERM_FUNCTIONS.get(name)
            if fn is not None and fn.arity is not None and fn.arity != len(args):
                self.fail(f"{name!r} takes {fn.arity} arguments, got {len(args)}")
            return FunctionApp(name, tuple(args))
        return self.resolve_ident(name)

    def resolve_ident(self, name: str) -> Term:
        if name in self.bound:
            return Variable(name)
        arity = self.signature_symbols.get(name)
        if arity == 0:
            return FunctionApp(name, ())
        if arity is not None:
            self.fail(f"symbol {name!r} has arity {arity} and needs arguments")
        fn = bg.TERM_FUNCTIONS.get(name)
        if fn is not None and fn.arity == 0:
            return FunctionApp(name, ())
        if name in self.domains:
            return Constant(SetVal(frozenset(self.domains[name])))
        return Constant(Atom(name))

    def parse_droppable(self) -> Term:
        tok = self.peek()
        if tok.kind in ("PLUS", "MINUS"):
            self.next()
            return Constant(SymbolName(tok.text))
        if tok.kind == "IDENT" and self.peek(1).kind == "RPAREN":
            name = self.next().text
            if name in RESERVED_WORDS:
                return Constant(drop(Constant({"true": TRUE, "false": FALSE, "undef": UNDEF}[name])))
            return Constant(SymbolName(name))
        inner = self.parse_term()
        return Constant(drop(inner))

    def parse_comprehension(self) -> Term:
        self.expect("LBRACE")
        var = self.ident("comprehension variable")
        self.expect("KEYWORD", "IN")
        domain = self.ident("domain name")
        members = self.domains.get(domain)
        if members is None:
            self.fail(f"comprehension needs a declared finite domain, not {domain!r}")
        self.expect("BAR")
        self._bind(var)
        cond = self.parse_term()
        self._unbind(var)
        self.expect("RBRACE")
        from .structures import term_substitute

        acc: Term = FunctionApp("emptyset", ())
        for m in members:
            acc = FunctionApp(
                "setadd", (acc, Constant(m), term_substitute(cond, var, Constant(m)))
            )
        return acc

    # -- tree literals --

    def parse_tree_node(self, label: str) -> Term:
        self.expect("LANGLE")
        children: list[Term] = []
        if self.peek().kind != "RANGLE":
            while True:
                children.append(self.parse_tree_item())
                if not self._take("COMMA"):
                    break
        self.expect("RANGLE")
        return FunctionApp("label_hedge", (Constant(Atom(label)),) + tuple(children))

    def parse_tree_item(self) -> Term:
        if self.take_keyword("XI"):
            return FunctionApp("hole", ())
        label = self.ident("tree label")
        if self.peek().kind == "LANGLE":
            return self.parse_tree_node(label)
        if self._take("LPAREN"):
            content = self.parse_leaf_content()
            self.expect("RPAREN")
            return FunctionApp("leaf", (Constant(Atom(label)), content))
        return FunctionApp("label_hedge", (Constant(Atom(label)),))

    def parse_leaf_content(self) -> Term:
        tok = self.peek()
        if tok.kind in ("PLUS", "MINUS"):
            self.next()
            return Constant(SymbolName(tok.text))
        if tok.kind == "IDENT" and self.peek(1).kind == "RPAREN":
            name = self.next().text
            if name == "true":
                return Constant(TRUE)
            if name == "false":
                return Constant(FALSE)
            if name == "undef":
                return Constant(UNDEF)
            if name in self.bound:
                return Variable(name)
            if name in self.signature_symbols or name in bg.TERM_FUNCTIONS or name == "self":
                return Constant(SymbolName(name))
            return Constant(Atom(name))
        return self.parse_term()


# -- machine construction ------------------------------------------------------------


def _collect_atoms_term(term: Term, out: set[Atom]) -> None:
    if isinstance(term, Constant):
        _collect_atoms_value(term.value, out)
    elif isinstance(term, FunctionApp):
        for a in term.args:
            _collect_atoms_term(a, out)
    elif isinstance(term, Equality):
        _collect_atoms_term(term.left, out)
        _collect_atoms_term(term.right, out)
    elif isinstance(term, BoolConnective):
        for a in term.operands:
            _collect_atoms_term(a, out)
    elif isinstance(term, Iota):
        _collect_atoms_term(term.condition, out)


def _collect_atoms_value(value: Value, out: set[Atom]) -> None:
    if isinstance(value, Atom):
        out.add(value)
    elif isinstance(value, TupleVal):
        for v in value.items:
            _collect_atoms_value(v, out)
    elif isinstance(value, SetVal):
        for v in value.members:
            _collect_atoms_value(v, out)
    elif isinstance(value, DroppedTerm):
        _collect_atoms_term(value.term, out)
    elif isinstance(value, TreeValue):
        for _, _, node in value.tree.preorder():
            if node.value is not None:
                _collect_atoms_value(node.value, out)


def _collect_atoms_rule(rule: Rule, out: set[Atom]) -> None:
    if isinstance(rule, Assign):
        for a in rule.args:
            _collect_atoms_term(a, out)
        _collect_atoms_term(rule.rhs, out)
    elif isinstance(rule, If):
        _collect_atoms_term(rule.cond, out)
        _collect_atoms_rule(rule.then, out)
        _collect_atoms_rule(rule.orelse, out)
    elif isinstance(rule, Par):
        for b in rule.branches:
            _collect_atoms_rule(b, out)
    elif isinstance(rule, Let):
        _collect_atoms_term(rule.bound, out)
        _collect_atoms_rule(rule.body, out)
    elif isinstance(rule, PartialAssign):
        for a in rule.args + rule.operands:
            _collect_atoms_term(a, out)


def build_machine(program: ProgramSource, max_steps: int | None = None) -> Machine:
    atoms: set[Atom] = set()
    for members in program.domains.values():
        for m in members:
            _collect_atoms_value(m, atoms)
    for loc, value in program.init.items():
        for v in loc.args + (value,):
            _collect_atoms_value(v, atoms)
    _collect_atoms_rule(program.rule, atoms)

    background = BackgroundConfig(
        domains=tuple(sorted(program.domains.items())),
        projections=tuple(sorted(program.projections.items())),
    )
    self_tree = build_self_tree(program.signature, program.rule)
    interp = dict(program.init)
    interp[SELF_LOCATION] = TreeValue(self_tree)
    state = State(program.signature, frozenset(atoms), interp, background)

    if max_steps is None:
        max_steps = program.options.get("max_steps")
    if max_steps is None:
        env = os.environ.get(MAX_STEPS_ENV)
        max_steps = int(env) if env else DEFAULT_MAX_STEPS
    return Machine(state, max_steps=max_steps, name=program.name)


def parse_program(source: str, name: str = "program") -> ProgramSource:
    return Parser(tokenize(source), name).parse_program()


def parse(source: str, name: str = "program", max_steps: int | None = None) -> Machine:
    """Parse program text into a machine ready to run."""
    return build_machine(parse_program(source, name), max_steps)


def parse_file(path: str, max_steps: int | None = None) -> Machine:
    with open(path, "r", encoding="utf-8") as fh:
        source = fh.read()
    name = os.path.splitext(os.path.basename(path))[0]
    return parse(source, name, max_steps)


def load_program(name: str) -> str:
    """Source text of a bundled example program."""
    from importlib import resources

    return (
        resources.files("rsasm").joinpath("programs").joinpath(f"{name}.rsasm").read_text("utf-8")
    )


# -- pretty printing -------------------------------------------------------------------


_PREC_OR = 1
_PREC_AND = 2
_PREC_NOT = 3
_PREC_EQ = 4
_PREC_ADD = 5
_PREC_MOD = 6
_PREC_PRIMARY = 7


class SourcePrinter:
    """Render machines, rules, and terms back to program text."""

    def __init__(self, signature: Signature | None = None, domains=()):
        self.signature = signature
        self.domains = dict(domains)

    def value_literal(self, value: Value) -> str:
        if isinstance(value, NatVal):
            return str(value.n)
        if isinstance(value, BoolVal):
            return "true" if value.flag else "false"
        if value is UNDEF:
            return "undef"
        if isinstance(value, Atom):
            return value.name
        if isinstance(value, SymbolName):
            if value.name in ("+", "-"):
                return f"DROP({value.name})"
            return f"DROP({value.name})"
        if isinstance(value, DroppedTerm):
            return f"DROP({self.term(value.term)})"
        if isinstance(value, TreeValue):
            return self.tree_literal(value.tree)
        if isinstance(value, SetVal):
            for name, members in self.domains.items():
                if frozenset(members) == value.members:
                    return name
            text = "emptyset()"
            for m in sorted(value.members, key=value_sort_key):
                text = f"setadd({text}, {self.value_literal(m)}, true)"
            return text
        if isinstance(value, TupleVal):
            inner = ", ".join(self.value_literal(v) for v in value.items)
            return f"concat({inner})" if len(value.items) == 2 else f"({inner})"
        if isinstance(value, NodeRef):
            return repr(value)
        return repr(value)

    def tree_literal(self, t: Tree) -> str:
        if t.label == XI:
            return "XI"
        if t.children:
            return f"{t.label}<{', '.join(self.tree_literal(c) for c in t.children)}>"
        if t.value is not None:
            return f"{t.label}({self.leaf_content(t.value)})"
        return f"{t.label}<>"

    def leaf_content(self, value: Value) -> str:
        if isinstance(value, DroppedTerm):
            return f"DROP({self.term(value.term)})"
        return self.value_literal(value)

    def term(self, term: Term, prec: int = 0) -> str:
        text, level = self._term(term)
        if level < prec:
            return f"({text})"
        return text

    def _term(self, term: Term) -> tuple[str, int]:
        if isinstance(term, Constant):
            return self.value_literal(term.value), _PREC_PRIMARY
        if isinstance(term, Variable):
            return term.name, _PREC_PRIMARY
        if isinstance(term, Equality):
            left = self.term(term.left, _PREC_ADD)
            right = self.term(term.right, _PREC_ADD)
            return f"{left} = {right}", _PREC_EQ
        if isinstance(term, BoolConnective):
            if term.op == "not":
                return f"NOT {self.term(term.operands[0], _PREC_NOT)}", _PREC_NOT
            joiner = " AND " if term.op == "and" else " OR "
            level = _PREC_AND if term.op == "and" else _PREC_OR
            inner = joiner.join(self.term(a, level + 1) for a in term.operands)
            return inner, level
        if isinstance(term, Iota):
            domain = "NODES" if term.domain == NODES_DOMAIN else term.domain
            return (
                f"IOTA {term.var} IN {domain} . {self.term(term.condition)}",
                _PREC_PRIMARY,
            )
        if isinstance(term, FunctionApp):
            return self._application(term)
        raise ParseError(f"cannot print term {term!r}")

    def _application(self, term: FunctionApp) -> tuple[str, int]:
        name = term.symbol
        if name in ("+", "-") and len(term.args) == 2:
            left = self.term(term.args[0], _PREC_ADD)
            right = self.term(term.args[1], _PREC_ADD + 1)
            return f"{left} {name} {right}", _PREC_ADD
        if name == "mod" and len(term.args) == 2:
            left = self.term(term.args[0], _PREC_MOD)
            right = self.term(term.args[1], _PREC_MOD + 1)
            return f"{left} MOD {right}", _PREC_MOD
        if name == "card_of" and len(term.args) == 1:
            return f"CARD({self.term(term.args[0])})", _PREC_PRIMARY
        if name == "raise_eval" and len(term.args) == 1:
            return f"RAISE({self.term(term.args[0])})", _PREC_PRIMARY
        if name == "hole" and not term.args:
            return "XI", _PREC_PRIMARY
        if name == "leaf" and len(term.args) == 2:
            label = term.args[0]
            if isinstance(label, Constant) and isinstance(label.value, Atom):
                content = term.args[1]
                if isinstance(content, Constant):
                    inner = self.leaf_content(content.value)
                elif isinstance(content, Variable):
                    inner = content.name
                else:
                    inner = self.term(content)
                return f"{label.value.name}({inner})", _PREC_PRIMARY
        if name == "label_hedge" and term.args:
            label = term.args[0]
            if isinstance(label, Constant) and isinstance(label.value, Atom):
                parts = []
                for child in term.args[1:]:
                    text, _ = self._term(child)
                    parts.append(text)
                return f"{label.value.name}<{', '.join(parts)}>", _PREC_PRIMARY
        if not term.args:
            if name in bg.TERM_FUNCTIONS:
                return f"{name}()", _PREC_PRIMARY
            return name, _PREC_PRIMARY
        inner = ", ".join(self.term(a) for a in term.args)
        return f"{name}({inner})", _PREC_PRIMARY

    def rule(self, rule: Rule, indent: int = 0) -> str:
        pad = "  " * indent
        if isinstance(rule, Assign):
            if rule.args:
                args = ", ".join(self.term(a) for a in rule.args)
                return f"{pad}{rule.target}({args}) := {self.term(rule.rhs)}"
            return f"{pad}{rule.target} := {self.term(rule.rhs)}"
        if isinstance(rule, PartialAssign):
            operands = ", ".join(self.term(a) for a in rule.operands)
            if rule.args:
                args = ", ".join(self.term(a) for a in rule.args)
                return f"{pad}{rule.target}({args}) <=[{rule.op}] {operands}"
            return f"{pad}{rule.target} <=[{rule.op}] {operands}"
        if isinstance(rule, If):
            lines = [f"{pad}IF {self.term(rule.cond)} THEN", self.rule(rule.then, indent + 1)]
            if rule.orelse != Par(()):
                lines.append(f"{pad}ELSE")
                lines.append(self.rule(rule.orelse, indent + 1))
            lines.append(f"{pad}ENDIF")
            return "\n".join(lines)
        if isinstance(rule, Par):
            lines = [f"{pad}PAR"]
            for b in rule.branches:
                lines.append(self.rule(b, indent + 1))
            lines.append(f"{pad}ENDPAR")
            return "\n".join(lines)
        if isinstance(rule, Let):
            return (
                f"{pad}LET {rule.var} = {self.term(rule.bound)} IN\n"
                + self.rule(rule.body, indent + 1)
            )
        raise ParseError(f"cannot print rule {rule!r}")


def machine_to_source(machine: Machine) -> str:
    """Render a machine back to program text (sections in canonical order)."""
    state = machine.initial_state
    printer = SourcePrinter(state.signature, state.background.domains)
    lines: list[str] = []
    if state.background.domains:
        lines.append("DOMAINS")
        for name, members in state.background.domains:
            inner = ", ".join(printer.value_literal(m) for m in members)
            lines.append(f"  {name} = {{{inner}}}")
        lines.append("")
    lines.append("SIGNATURE")
    for sym in state.signature.symbols:
        if sym.name == "self":
            continue
        lines.append(f"  {sym.name}/{sym.arity}")
    lines.append("")
    if state.background.projections:
        lines.append("PROJECTIONS")
        for name, base in state.background.projections:
            lines.append(f"  {name} = {base}")
        lines.append("")
    init_locs = [loc for loc in state.defined_locations() if loc != SELF_LOCATION]
    if init_locs:
        lines.append("INIT")
        for loc in init_locs:
            value = printer.value_literal(state.interp[loc])
            if loc.args:
                args = ", ".join(printer.value_literal(a) for a in loc.args)
                lines.append(f"  {loc.symbol}({args}) = {value}")
            else:
                lines.append(f"  {loc.symbol} = {value}")
        lines.append("")
    lines.append("RULE")
    rule = decode_rule(rule_of_self(state.self_tree))
    lines.append(printer.rule(rule, 1))
    lines.append("")
    lines.append("OPTIONS")
    lines.append(f"  max_steps = {machine.max_steps}")
    lines.append("")
    return "\n".join(lines)
