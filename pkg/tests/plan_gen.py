"""Random plan-AST generator for round-trip tests.

Generates structurally valid programs (identifier-shaped names, finite
reals, single-line comments) without caring about bindings or tool names —
the parse/format round-trip is purely syntactic.
"""

from __future__ import annotations

import random
import string

from opal.plan import (
    Comment,
    Emit,
    FieldAccess,
    ForEach,
    Let,
    ListExpr,
    Literal,
    PlanProgram,
    RecordExpr,
    ToolCall,
    VarRef,
)
from opal.plan.parser import RESERVED

_STRING_POOL = (
    string.ascii_letters + string.digits + " '\"\\/.,:;!?#()[]{}=+-*&%$@^~|<>\t\n"
    + "éüñßλЖ中文🎬"
)


def gen_ident(rng: random.Random) -> str:
    while True:
        first = rng.choice(string.ascii_letters + "_")
        rest = "".join(
            rng.choice(string.ascii_letters + string.digits + "_")
            for _ in range(rng.randint(0, 9))
        )
        name = first + rest
        if name not in RESERVED:
            return name


def gen_string(rng: random.Random) -> str:
    return "".join(rng.choice(_STRING_POOL) for _ in range(rng.randint(0, 14)))


def gen_literal(rng: random.Random) -> Literal:
    roll = rng.random()
    if roll < 0.4:
        return Literal(gen_string(rng))
    if roll < 0.7:
        return Literal(rng.randint(-(10**9), 10**9) * rng.choice((1, 1, 10**9)))
    mantissa = rng.uniform(-1e6, 1e6)
    scale = rng.choice((1.0, 1e-12, 1e12, 1e300, 1e-300))
    return Literal(mantissa * scale)


def gen_expr(rng: random.Random, depth: int):
    options = ["literal", "var"]
    if depth > 0:
        options += ["list", "record", "call", "field"]
    kind = rng.choice(options)
    if kind == "literal":
        return gen_literal(rng)
    if kind == "var":
        return VarRef(gen_ident(rng))
    if kind == "list":
        return ListExpr(tuple(gen_expr(rng, depth - 1) for _ in range(rng.randint(0, 4))))
    if kind == "record":
        fields = []
        for _ in range(rng.randint(0, 4)):
            key = gen_ident(rng) if rng.random() < 0.7 else gen_string(rng)
            fields.append((key, gen_expr(rng, depth - 1)))
        return RecordExpr(tuple(fields))
    if kind == "call":
        return gen_call(rng, depth)
    base = gen_expr(rng, depth - 1)
    return FieldAccess(base, gen_ident(rng))


def gen_call(rng: random.Random, depth: int) -> ToolCall:
    names: set[str] = set()
    args = []
    for _ in range(rng.randint(0, 3)):
        name = gen_ident(rng)
        if name in names:
            continue
        names.add(name)
        args.append((name, gen_expr(rng, depth - 1)))
    return ToolCall(gen_ident(rng), tuple(args))


def gen_comment(rng: random.Random) -> Comment:
    text = gen_string(rng).replace("\n", " ")
    return Comment(text)


def gen_statement(rng: random.Random, depth: int):
    roll = rng.random()
    if roll < 0.2:
        return gen_comment(rng)
    if roll < 0.55 or depth <= 0:
        return Let(gen_ident(rng), gen_expr(rng, 3))
    if roll < 0.8:
        body = tuple(gen_statement(rng, depth - 1) for _ in range(rng.randint(0, 4)))
        return ForEach(gen_ident(rng), gen_expr(rng, 2), body)
    return Emit(gen_call(rng, 2))


def gen_program(rng: random.Random, max_statements: int = 8) -> PlanProgram:
    return PlanProgram(
        tuple(gen_statement(rng, 2) for _ in range(rng.randint(0, max_statements)))
    )
