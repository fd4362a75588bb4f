"""Extraction of reusable units: top-level functions and class methods."""

from __future__ import annotations

import ast

_FUNCTION_NODES = (ast.FunctionDef, ast.AsyncFunctionDef)


def param_names(args: ast.arguments) -> list[str]:
    params = [a.arg for a in args.posonlyargs + args.args]
    if args.vararg:
        params.append(args.vararg.arg)
    params.extend(a.arg for a in args.kwonlyargs)
    if args.kwarg:
        params.append(args.kwarg.arg)
    return params


def iter_unit_nodes(tree: ast.Module):
    """Yield (qualname, kind, node) for every extractable unit, in order."""
    for node in tree.body:
        if isinstance(node, _FUNCTION_NODES):
            yield node.name, "function", node
        elif isinstance(node, ast.ClassDef):
            for item in node.body:
                if isinstance(item, _FUNCTION_NODES):
                    yield f"{node.name}.{item.name}", "method", item


def extract_units(source: str) -> dict:
    """Units payload: extractable units plus top-level class names."""
    tree = ast.parse(source)
    units = []
    for qualname, kind, node in iter_unit_nodes(tree):
        units.append(
            {
                "qualname": qualname,
                "kind": kind,
                "params": param_names(node.args),
                "span": [node.lineno, node.end_lineno],
            }
        )
    classes = [
        {"name": node.name, "span": [node.lineno, node.end_lineno]}
        for node in tree.body
        if isinstance(node, ast.ClassDef)
    ]
    return {"units": units, "classes": classes}
