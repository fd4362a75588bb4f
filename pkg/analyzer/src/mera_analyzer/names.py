"""Undefined-name detection via flow-insensitive scope resolution.

Scopes follow the language rules that matter for single-file candidates:
module, function (including lambdas and comprehensions), and class scopes,
with class scopes skipped when resolving from nested functions. Binding is
flow-insensitive: a name bound anywhere in a scope counts as bound for the
whole scope, which avoids false positives on conditional assignment.
"""

from __future__ import annotations

import ast
import builtins

_BUILTIN_NAMES = frozenset(dir(builtins)) | {
    "__file__",
    "__name__",
    "__doc__",
    "__builtins__",
    "__spec__",
    "__loader__",
    "__package__",
    "__debug__",
    "__annotations__",
    "__cached__",
    "__path__",
    "__class__",
}

_FUNCTION_NODES = (ast.FunctionDef, ast.AsyncFunctionDef)
_COMPREHENSION_NODES = (ast.ListComp, ast.SetComp, ast.DictComp, ast.GeneratorExp)


class _Scope:
    __slots__ = ("kind", "bound", "global_names", "nonlocal_names", "parent")

    def __init__(self, kind: str, parent: "_Scope | None") -> None:
        self.kind = kind  # "module" | "function" | "class"
        self.bound: set[str] = set()
        self.global_names: set[str] = set()
        self.nonlocal_names: set[str] = set()
        self.parent = parent

    def resolve(self, name: str) -> bool:
        scope: _Scope | None = self
        first = True
        while scope is not None:
            # Class bodies are invisible to the scopes nested inside them.
            if scope.kind == "class" and not first:
                scope = scope.parent
                continue
            if name in scope.bound:
                return True
            first = False
            scope = scope.parent
        return name in _BUILTIN_NAMES


def _module_scope(scope: _Scope) -> _Scope:
    while scope.parent is not None:
        scope = scope.parent
    return scope


def _bind_target(target: ast.AST, scope: _Scope) -> None:
    """Register every name a binding construct introduces."""
    if isinstance(target, ast.Name):
        _bind_name(target.id, scope)
    elif isinstance(target, (ast.Tuple, ast.List)):
        for element in target.elts:
            _bind_target(element, scope)
    elif isinstance(target, ast.Starred):
        _bind_target(target.value, scope)
    # Attribute / Subscript targets bind nothing new.


def _bind_name(name: str, scope: _Scope) -> None:
    if name in scope.global_names:
        _module_scope(scope).bound.add(name)
    scope.bound.add(name)


def _collect_bindings(body: list[ast.stmt], scope: _Scope) -> None:
    """Hoist every binding in a scope body, without entering nested scopes."""
    for stmt in body:
        for node in _shallow_walk(stmt):
            if isinstance(node, (ast.Global, ast.Nonlocal)):
                target = (
                    scope.global_names
                    if isinstance(node, ast.Global)
                    else scope.nonlocal_names
                )
                target.update(node.names)
                # Either declaration makes local use legal.
                scope.bound.update(node.names)
                if isinstance(node, ast.Global):
                    _module_scope(scope).bound.update(node.names)
            elif isinstance(node, ast.Assign):
                for t in node.targets:
                    _bind_target(t, scope)
            elif isinstance(node, ast.AnnAssign):
                _bind_target(node.target, scope)
            elif isinstance(node, ast.AugAssign):
                _bind_target(node.target, scope)
            elif isinstance(node, (ast.For, ast.AsyncFor)):
                _bind_target(node.target, scope)
            elif isinstance(node, (ast.With, ast.AsyncWith)):
                for item in node.items:
                    if item.optional_vars is not None:
                        _bind_target(item.optional_vars, scope)
            elif isinstance(node, ast.ExceptHandler):
                if node.name:
                    _bind_name(node.name, scope)
            elif isinstance(node, ast.Import):
                for alias in node.names:
                    _bind_name(alias.asname or alias.name.split(".")[0], scope)
            elif isinstance(node, ast.ImportFrom):
                for alias in node.names:
                    if alias.name == "*":
                        continue
                    _bind_name(alias.asname or alias.name, scope)
            elif isinstance(node, (*_FUNCTION_NODES, ast.ClassDef)):
                _bind_name(node.name, scope)
            elif isinstance(node, ast.NamedExpr) and isinstance(node.target, ast.Name):
                _bind_name(node.target.id, scope)
            elif isinstance(node, ast.MatchAs) and node.name:
                _bind_name(node.name, scope)
            elif isinstance(node, ast.MatchStar) and node.name:
                _bind_name(node.name, scope)
            elif isinstance(node, ast.MatchMapping) and node.rest:
                _bind_name(node.rest, scope)


def _shallow_walk(node: ast.AST):
    """Walk a statement without crossing into nested scope bodies."""
    yield node
    if isinstance(node, (*_FUNCTION_NODES, ast.ClassDef, ast.Lambda)):
        return  # the def itself binds; its body is a new scope
    for child in ast.iter_child_nodes(node):
        if isinstance(child, _COMPREHENSION_NODES):
            # Comprehension targets live in their own scope; walrus targets
            # inside leak to the enclosing function scope.
            for inner in ast.walk(child):
                if isinstance(inner, ast.NamedExpr):
                    yield inner
            continue
        yield from _shallow_walk(child)


class _Checker:
    def __init__(self) -> None:
        self.undefined: list[tuple[str, int]] = []
        self._reported: set[tuple[str, int]] = set()

    def check_module(self, tree: ast.Module) -> None:
        scope = _Scope("module", None)
        _collect_bindings(tree.body, scope)
        for stmt in tree.body:
            self._visit(stmt, scope)

    def _report(self, name: str, line: int) -> None:
        key = (name, line)
        if key not in self._reported:
            self._reported.add(key)
            self.undefined.append(key)

    def _visit(self, node: ast.AST, scope: _Scope) -> None:
        if isinstance(node, ast.Name):
            if isinstance(node.ctx, ast.Load) and not scope.resolve(node.id):
                self._report(node.id, node.lineno)
            return
        if isinstance(node, _FUNCTION_NODES):
            self._visit_function(node, scope)
            return
        if isinstance(node, ast.Lambda):
            self._visit_lambda(node, scope)
            return
        if isinstance(node, ast.ClassDef):
            self._visit_class(node, scope)
            return
        if isinstance(node, _COMPREHENSION_NODES):
            self._visit_comprehension(node, scope)
            return
        for child in ast.iter_child_nodes(node):
            self._visit(child, scope)

    def _visit_function(self, node, scope: _Scope) -> None:
        for decorator in node.decorator_list:
            self._visit(decorator, scope)
        defaults = list(node.args.defaults) + [
            d for d in node.args.kw_defaults if d is not None
        ]
        for default in defaults:
            self._visit(default, scope)
        for annotation in self._annotations(node):
            self._visit(annotation, scope)

        inner = _Scope("function", scope)
        for param in self._params(node.args):
            inner.bound.add(param)
        _collect_bindings(node.body, inner)
        for stmt in node.body:
            self._visit(stmt, inner)

    def _visit_lambda(self, node: ast.Lambda, scope: _Scope) -> None:
        for default in list(node.args.defaults) + [
            d for d in node.args.kw_defaults if d is not None
        ]:
            self._visit(default, scope)
        inner = _Scope("function", scope)
        for param in self._params(node.args):
            inner.bound.add(param)
        self._visit(node.body, inner)

    def _visit_class(self, node: ast.ClassDef, scope: _Scope) -> None:
        for decorator in node.decorator_list:
            self._visit(decorator, scope)
        for base in node.bases:
            self._visit(base, scope)
        for keyword in node.keywords:
            self._visit(keyword.value, scope)
        inner = _Scope("class", scope)
        _collect_bindings(node.body, inner)
        for stmt in node.body:
            self._visit(stmt, inner)

    def _visit_comprehension(self, node, scope: _Scope) -> None:
        inner = _Scope("function", scope)
        first = True
        for gen in node.generators:
            # The first iterable evaluates in the enclosing scope.
            self._visit(gen.iter, scope if first else inner)
            first = False
            _bind_target(gen.target, inner)
            for cond in gen.ifs:
                self._visit(cond, inner)
        if isinstance(node, ast.DictComp):
            self._visit(node.key, inner)
            self._visit(node.value, inner)
        else:
            self._visit(node.elt, inner)

    @staticmethod
    def _params(args: ast.arguments) -> list[str]:
        params = [a.arg for a in args.posonlyargs + args.args + args.kwonlyargs]
        if args.vararg:
            params.append(args.vararg.arg)
        if args.kwarg:
            params.append(args.kwarg.arg)
        return params

    @staticmethod
    def _annotations(node) -> list[ast.expr]:
        annotations = []
        args = node.args
        for a in args.posonlyargs + args.args + args.kwonlyargs:
            if a.annotation is not None:
                annotations.append(a.annotation)
        for special in (args.vararg, args.kwarg):
            if special is not None and special.annotation is not None:
                annotations.append(special.annotation)
        if node.returns is not None:
            annotations.append(node.returns)
        return annotations


def find_undefined_names(source: str) -> list[dict]:
    """Names used but never bound or imported, with their first-use lines."""
    tree = ast.parse(source)
    checker = _Checker()
    checker.check_module(tree)
    ordered = sorted(checker.undefined, key=lambda item: (item[1], item[0]))
    return [{"name": name, "line": line} for name, line in ordered]
