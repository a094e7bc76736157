"""Evaluation of expressions and decision-table cell tests.

Pure functions over immutable ASTs; environments map variable names to
values (UNDEFINED is a legal binding, but any operation reading it raises).
"""

from __future__ import annotations

import math
from typing import Mapping

from ..errors import (DivisionByZeroError, FeelTypeError, IndexOutOfRangeError,
                      UndefinedValueError)
from . import ast
from .values import (SECONDS_PER_DAY, UNDEFINED, FeelRange, Temporal, check_defined,
                     compare, equals, kind_of)

_NUMERIC_OPS = {"+", "-", "*", "/", "**"}
_ORDER_OPS = {"<", "<=", ">", ">="}


def evaluate(expr: ast.FeelExpr, env: Mapping[str, object]):
    """Value of `expr` under `env`.

    List filters return sublists preserving order; indexing is 1-based.
    Raises FeelTypeError, UndefinedValueError, DivisionByZeroError or
    IndexOutOfRangeError.
    """
    if isinstance(expr, ast.Lit):
        return expr.value
    if isinstance(expr, ast.Var):
        if expr.name not in env:
            raise UndefinedValueError(f"variable {expr.name!r} is not bound")
        return check_defined(env[expr.name])
    if isinstance(expr, ast.Neg):
        v = evaluate(expr.operand, env)
        if kind_of(v) != "number":
            raise FeelTypeError(f"cannot negate a {kind_of(v)}")
        return -v
    if isinstance(expr, ast.Not):
        v = evaluate(expr.operand, env)
        if kind_of(v) != "boolean":
            raise FeelTypeError(f"'not' needs a boolean, got {kind_of(v)}")
        return not v
    if isinstance(expr, ast.BinOp):
        return _binop(expr, env)
    if isinstance(expr, ast.Call):
        return _call(expr, env)
    if isinstance(expr, ast.ListLit):
        return [evaluate(item, env) for item in expr.items]
    if isinstance(expr, ast.Index):
        seq = evaluate(expr.seq, env)
        if kind_of(seq) != "list":
            raise FeelTypeError(f"cannot index a {kind_of(seq)}")
        idx = evaluate(expr.index, env)
        if kind_of(idx) != "number" or isinstance(idx, float):
            raise FeelTypeError("list index must be an integer")
        if not 1 <= idx <= len(seq):
            raise IndexOutOfRangeError(f"index {idx} outside 1..{len(seq)}")
        return seq[idx - 1]
    if isinstance(expr, ast.Filter):
        seq = evaluate(expr.seq, env)
        if kind_of(seq) != "list":
            raise FeelTypeError(f"cannot filter a {kind_of(seq)}")
        kept = []
        for element in seq:
            scoped = dict(env)
            scoped["item"] = element
            verdict = evaluate(expr.predicate, scoped)
            if kind_of(verdict) != "boolean":
                raise FeelTypeError("filter predicate must be boolean")
            if verdict:
                kept.append(element)
        return kept
    if isinstance(expr, ast.ContextLit):
        return {k: evaluate(v, env) for k, v in expr.entries}
    if isinstance(expr, ast.Path):
        base = evaluate(expr.base, env)
        if kind_of(base) != "context":
            raise FeelTypeError(f"cannot access '.{expr.key}' on a {kind_of(base)}")
        if expr.key not in base:
            raise FeelTypeError(f"context has no entry {expr.key!r}")
        return base[expr.key]
    if isinstance(expr, ast.RangeLit):
        lo = evaluate(expr.lo, env)
        hi = evaluate(expr.hi, env)
        compare(lo, hi)  # endpoints must be mutually ordered
        return FeelRange(lo, hi, expr.lo_incl, expr.hi_incl)
    if isinstance(expr, ast.InTest):
        return _membership(evaluate(expr.item, env), evaluate(expr.container, env))
    if isinstance(expr, ast.InstanceOf):
        v = evaluate(expr.operand, env)
        kind = kind_of(v)
        check_defined(v)
        return kind == expr.type_name
    raise FeelTypeError(f"cannot evaluate node {type(expr).__name__}")


def _binop(expr: ast.BinOp, env):
    op = expr.op
    if op in ("and", "or"):
        left = evaluate(expr.left, env)
        if kind_of(left) != "boolean":
            raise FeelTypeError(f"{op!r} needs boolean operands, got {kind_of(left)}")
        if op == "and" and not left:
            return False
        if op == "or" and left:
            return True
        right = evaluate(expr.right, env)
        if kind_of(right) != "boolean":
            raise FeelTypeError(f"{op!r} needs boolean operands, got {kind_of(right)}")
        return right

    left = evaluate(expr.left, env)
    right = evaluate(expr.right, env)
    if op == "=":
        return equals(left, right)
    if op == "!=":
        return not equals(left, right)
    if op in _ORDER_OPS:
        c = compare(left, right)
        return {"<": c < 0, "<=": c <= 0, ">": c > 0, ">=": c >= 0}[op]

    # arithmetic
    lk, rk = kind_of(left), kind_of(right)
    if op == "+" and lk == rk == "string":
        return left + right
    if op == "+" and lk == rk == "time":
        return Temporal("time", (left.scalar + right.scalar) % SECONDS_PER_DAY)
    if lk != "number" or rk != "number":
        raise FeelTypeError(f"cannot apply {op!r} to {lk} and {rk}")
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        if right == 0:
            raise DivisionByZeroError("division by zero")
        return left / right
    if op == "**":
        try:
            result = left ** right
        except ZeroDivisionError as exc:
            raise DivisionByZeroError("zero raised to a negative power") from exc
        except OverflowError as exc:
            raise FeelTypeError("power overflows") from exc
        if isinstance(result, complex):  # negative base, fractional exponent
            raise FeelTypeError("power of a negative base with a fractional exponent")
        return result
    raise FeelTypeError(f"unknown operator {op!r}")


def _call(expr: ast.Call, env):
    args = [evaluate(a, env) for a in expr.args]

    def one_number():
        if len(args) != 1 or kind_of(args[0]) != "number":
            raise FeelTypeError(f"{expr.name}(...) takes one number")
        return args[0]

    if expr.name == "abs":
        return abs(one_number())
    if expr.name == "floor":
        return math.floor(one_number())
    if expr.name == "ceiling":
        return math.ceil(one_number())
    if expr.name == "sqrt":
        v = one_number()
        if v < 0:
            raise FeelTypeError("sqrt of a negative number")
        return math.sqrt(v)
    if expr.name == "length":
        if len(args) != 1 or kind_of(args[0]) not in ("string", "list"):
            raise FeelTypeError("length(...) takes one string or list")
        return len(args[0])
    if expr.name == "overlaps before":
        if len(args) != 2 or not all(isinstance(a, FeelRange) for a in args):
            raise FeelTypeError("overlaps before(...) takes two ranges")
        return _overlaps_before(args[0], args[1])
    raise FeelTypeError(f"unknown function {expr.name!r}")


def _overlaps_before(a: FeelRange, b: FeelRange) -> bool:
    # a starts before b, they overlap, and a ends inside b
    starts_before = compare(a.lo, b.lo) < 0 or (
        compare(a.lo, b.lo) == 0 and a.lo_incl and not b.lo_incl)
    overlap = compare(a.hi, b.lo) > 0 or (
        compare(a.hi, b.lo) == 0 and a.hi_incl and b.lo_incl)
    ends_inside = compare(a.hi, b.hi) < 0 or (
        compare(a.hi, b.hi) == 0 and (not a.hi_incl or b.hi_incl))
    return starts_before and overlap and ends_inside


def _membership(item, container) -> bool:
    if isinstance(container, FeelRange):
        return container.contains(item)
    if kind_of(container) == "list":
        return any(equals(item, element) for element in container)
    raise FeelTypeError(f"'in' needs a list or range, got {kind_of(container)}")


def match_unary(test: ast.UnaryTest, value) -> bool:
    """Does `value` satisfy a decision-table input entry?

    The value must be a scalar (not a list or context); a dash matches
    everything, equality and ranges honor value kinds and inclusivity.
    """
    if kind_of(value) in ("list", "context"):
        raise FeelTypeError(f"cell tests apply to scalars, got a {kind_of(value)}")
    if isinstance(test, ast.Dash):
        return True
    check_defined(value)
    if isinstance(test, ast.EqualsConst):
        return equals(value, test.value)
    if isinstance(test, ast.Comparison):
        bound = evaluate(test.operand, {})
        c = compare(value, bound)
        return {"<": c < 0, "<=": c <= 0, ">": c > 0, ">=": c >= 0}[test.op]
    if isinstance(test, ast.RangeTest):
        return test.range.contains(value)
    if isinstance(test, ast.Negation):
        return not match_unary(test.inner, value)
    if isinstance(test, ast.Disjunction):
        return any(match_unary(t, value) for t in test.alternatives)
    raise FeelTypeError(f"unknown test {type(test).__name__}")
