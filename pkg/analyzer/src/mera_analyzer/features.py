"""AST feature extraction: counts, flags, and approximate complexity."""

from __future__ import annotations

import ast

COMMON_LIBRARIES = ("collections", "itertools", "math", "numpy", "random")

# Node kinds counted toward approximate cyclomatic complexity: one point per
# branch, loop, boolean operator, exception handler, or conditional
# expression, plus one base point per unit.
_BRANCH_NODES = (
    ast.If,
    ast.IfExp,
    ast.For,
    ast.AsyncFor,
    ast.While,
    ast.ExceptHandler,
    ast.BoolOp,
)

_LOOP_NODES = (ast.For, ast.AsyncFor, ast.While)
_FUNCTION_NODES = (ast.FunctionDef, ast.AsyncFunctionDef)


def _import_roots(tree: ast.AST) -> set[str]:
    roots: set[str] = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                roots.add(alias.name.split(".")[0])
        elif isinstance(node, ast.ImportFrom) and node.module and node.level == 0:
            roots.add(node.module.split(".")[0])
    return roots


def _max_loop_depth(tree: ast.AST) -> int:
    best = 0

    def descend(node: ast.AST, depth: int) -> None:
        nonlocal best
        for child in ast.iter_child_nodes(node):
            child_depth = depth + 1 if isinstance(child, _LOOP_NODES) else depth
            best = max(best, child_depth)
            descend(child, child_depth)

    descend(tree, 0)
    return best


def _has_recursion(tree: ast.AST) -> bool:
    for node in ast.walk(tree):
        if isinstance(node, _FUNCTION_NODES):
            for inner in ast.walk(node):
                if (
                    isinstance(inner, ast.Call)
                    and isinstance(inner.func, ast.Name)
                    and inner.func.id == node.name
                ):
                    return True
    return False


def _uses_classes(tree: ast.AST, class_names: set[str]) -> bool:
    for node in ast.walk(tree):
        if isinstance(node, ast.Attribute):
            if isinstance(node.value, ast.Name) and node.value.id == "self":
                return True
        if isinstance(node, ast.Call):
            if isinstance(node.func, ast.Name) and node.func.id in class_names:
                return True
    return False


def _dict_assigned_names(tree: ast.AST) -> set[str]:
    names: set[str] = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Assign) and isinstance(node.value, ast.Dict):
            for target in node.targets:
                if isinstance(target, ast.Name):
                    names.add(target.id)
        elif (
            isinstance(node, ast.AnnAssign)
            and isinstance(node.value, ast.Dict)
            and isinstance(node.target, ast.Name)
        ):
            names.add(node.target.id)
    return names


def _looks_like_state_machine(tree: ast.AST) -> bool:
    """A mapping of states to handlers driving a dispatch loop.

    Heuristic: some name is assigned a dict literal and a loop body
    subscripts (or ``.get``s) that name.
    """
    dispatch = _dict_assigned_names(tree)
    if not dispatch:
        return False
    for node in ast.walk(tree):
        if not isinstance(node, _LOOP_NODES):
            continue
        for inner in ast.walk(node):
            if (
                isinstance(inner, ast.Subscript)
                and isinstance(inner.value, ast.Name)
                and inner.value.id in dispatch
            ):
                return True
            if (
                isinstance(inner, ast.Call)
                and isinstance(inner.func, ast.Attribute)
                and inner.func.attr == "get"
                and isinstance(inner.func.value, ast.Name)
                and inner.func.value.id in dispatch
            ):
                return True
    return False


def _unit_nodes(tree: ast.Module) -> list[ast.AST]:
    """Top-level functions plus methods of top-level classes."""
    units: list[ast.AST] = []
    for node in tree.body:
        if isinstance(node, _FUNCTION_NODES):
            units.append(node)
        elif isinstance(node, ast.ClassDef):
            for item in node.body:
                if isinstance(item, _FUNCTION_NODES):
                    units.append(item)
    return units


def _approx_cyclomatic(tree: ast.Module) -> int:
    total = 0
    for unit in _unit_nodes(tree):
        branches = sum(1 for n in ast.walk(unit) if isinstance(n, _BRANCH_NODES))
        total += 1 + branches
    return total


def _return_arities(tree: ast.AST) -> dict[int, int]:
    profile: dict[int, int] = {}
    for node in ast.walk(tree):
        if isinstance(node, ast.Return):
            if node.value is None:
                arity = 0
            elif isinstance(node.value, ast.Tuple):
                arity = len(node.value.elts)
            else:
                arity = 1
            profile[arity] = profile.get(arity, 0) + 1
    return profile


def extract_features(source: str) -> dict:
    """Structural feature payload for one source text."""
    tree = ast.parse(source)
    class_names = {n.name for n in ast.walk(tree) if isinstance(n, ast.ClassDef)}
    imports = _import_roots(tree)
    return {
        "function_count": sum(
            1 for n in ast.walk(tree) if isinstance(n, _FUNCTION_NODES)
        ),
        "class_count": len([n for n in ast.walk(tree) if isinstance(n, ast.ClassDef)]),
        "max_loop_depth": _max_loop_depth(tree),
        "recursion_flag": _has_recursion(tree),
        "class_usage_flag": _uses_classes(tree, class_names),
        "state_machine_flag": _looks_like_state_machine(tree),
        "approx_cyclomatic": _approx_cyclomatic(tree),
        "common_library_flags": {
            name: name in imports for name in COMMON_LIBRARIES
        },
        "import_names": sorted(imports),
        "return_arity_profile": {
            str(k): v for k, v in sorted(_return_arities(tree).items())
        },
    }
