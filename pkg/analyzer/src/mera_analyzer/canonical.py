"""Canonical normalized dumps of extractable units.

Normalization strips docstrings and renames every local identifier
(parameters and locally bound names, including nested-function locals) to a
positional placeholder in first-encounter order. Global references, call
targets that are not local, attribute names, and the unit's own name are
preserved, so two units that differ only in local naming or documentation
produce byte-identical dumps, while any functional edit changes the dump.
"""

from __future__ import annotations

import ast

from .units import iter_unit_nodes, param_names

_FUNCTION_NODES = (ast.FunctionDef, ast.AsyncFunctionDef)
_SCOPED_NODES = (*_FUNCTION_NODES, ast.Lambda)


def _strip_docstrings(node: ast.AST) -> None:
    for inner in ast.walk(node):
        if isinstance(inner, (*_FUNCTION_NODES, ast.ClassDef)):
            body = inner.body
            if (
                body
                and isinstance(body[0], ast.Expr)
                and isinstance(body[0].value, ast.Constant)
                and isinstance(body[0].value.value, str)
            ):
                del body[0]
            if not body:
                body.append(ast.Pass())


def _local_names(unit: ast.AST) -> set[str]:
    """Every name bound inside the unit, parameters included."""
    names: set[str] = set()
    globals_declared: set[str] = set()
    for node in ast.walk(unit):
        if isinstance(node, ast.Global):
            globals_declared.update(node.names)
        elif isinstance(node, _SCOPED_NODES):
            names.update(param_names(node.args))
            if isinstance(node, _FUNCTION_NODES) and node is not unit:
                names.add(node.name)
        elif isinstance(node, ast.ClassDef) and node is not unit:
            names.add(node.name)
        elif isinstance(node, (ast.Assign, ast.AugAssign, ast.AnnAssign)):
            targets = node.targets if isinstance(node, ast.Assign) else [node.target]
            for target in targets:
                names.update(_target_names(target))
        elif isinstance(node, (ast.For, ast.AsyncFor)):
            names.update(_target_names(node.target))
        elif isinstance(node, (ast.With, ast.AsyncWith)):
            for item in node.items:
                if item.optional_vars is not None:
                    names.update(_target_names(item.optional_vars))
        elif isinstance(node, ast.ExceptHandler) and node.name:
            names.add(node.name)
        elif isinstance(node, ast.comprehension):
            names.update(_target_names(node.target))
        elif isinstance(node, ast.NamedExpr) and isinstance(node.target, ast.Name):
            names.add(node.target.id)
    return names - globals_declared


def _target_names(target: ast.AST) -> set[str]:
    found: set[str] = set()
    for node in ast.walk(target):
        if isinstance(node, ast.Name):
            found.add(node.id)
    return found


class _Renamer(ast.NodeTransformer):
    def __init__(self, locals_: set[str]) -> None:
        self.locals = locals_
        self.mapping: dict[str, str] = {}

    def _placeholder(self, name: str) -> str:
        if name not in self.mapping:
            self.mapping[name] = f"_v{len(self.mapping)}"
        return self.mapping[name]

    def visit_Name(self, node: ast.Name) -> ast.Name:
        if node.id in self.locals:
            node.id = self._placeholder(node.id)
        return node

    def visit_arg(self, node: ast.arg) -> ast.arg:
        if node.arg in self.locals:
            node.arg = self._placeholder(node.arg)
        if node.annotation is not None:
            node.annotation = self.visit(node.annotation)
        return node

    def visit_FunctionDef(self, node: ast.FunctionDef):
        return self._rename_def(node)

    def visit_AsyncFunctionDef(self, node: ast.AsyncFunctionDef):
        return self._rename_def(node)

    def visit_Nonlocal(self, node: ast.Nonlocal) -> ast.Nonlocal:
        node.names = [
            self._placeholder(n) if n in self.locals else n for n in node.names
        ]
        return node

    def _rename_def(self, node):
        if node.name in self.locals:
            node.name = self._placeholder(node.name)
        self.generic_visit(node)
        return node


def normalize_unit(unit: ast.AST) -> str:
    """Normalized source rendition of one unit."""
    _strip_docstrings(unit)
    locals_ = _local_names(unit)
    renamer = _Renamer(locals_)
    renamer.visit(unit)
    ast.fix_missing_locations(unit)
    return ast.unparse(unit)


def canonical_dumps(source: str) -> dict:
    """Canonical dump payload: one normalized dump string per unit."""
    tree = ast.parse(source)
    units = []
    for qualname, kind, node in iter_unit_nodes(tree):
        units.append(
            {
                "qualname": qualname,
                "kind": kind,
                "params": param_names(node.args),
                "dump": normalize_unit(node),
            }
        )
    return {"units": units}
