"""Finite groups, cyclic graph products, and syllable normal forms.

Element convention: every finite group is a dense index set 0..order-1 with
the identity at index 0.  Multiplication tables are stored as numpy int32
arrays and never mutated after construction.

The infinite groups in this package are cyclic graph products: n finite
factors A_0..A_{n-1} arranged around an n-gon so that factor l is attached
to edge l, edge l joins vertices l and l+1 (mod n), and exactly the
cyclically adjacent factor pairs commute.  Elements are handled through
normal forms over syllables (factor index, nonidentity element index).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, SizeLimitError

__all__ = [
    "FiniteGroup",
    "make_cyclic_group",
    "direct_product",
    "subgroup_generated",
    "GraphProductSpec",
    "NormalForm",
    "IDENTITY",
    "normal_form",
    "multiply",
    "inverse",
    "support",
    "syllable_word",
    "enumerate_ball",
    "GroupHom",
    "tautological_quotient",
    "vertex_group",
    "vertex_element_word",
    "vertex_pair",
    "group_spec_from_json",
    "finite_group_from_json",
    "group_hom_from_json",
    "DEFAULT_ELEMENT_CAP",
    "TABLE_ORDER_CAP",
]

DEFAULT_ELEMENT_CAP = 10**6
TABLE_ORDER_CAP = 4096
_FULL_ASSOC_MAX = 256


class FiniteGroup:
    """A finite group given by its full multiplication table.

    ``mult[a, b]`` is the index of the product a*b.  The inverse table is
    derived during construction.  ``validate=False`` skips the group axioms
    and is reserved for constructions that guarantee them (direct products
    of already validated groups).
    """

    def __init__(self, mult, name: str = "", validate: bool = True):
        table = np.asarray(mult, dtype=np.int32)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise InvalidInputError("multiplication table must be square")
        order = int(table.shape[0])
        if order == 0:
            raise InvalidInputError("empty multiplication table")
        if order > TABLE_ORDER_CAP:
            raise SizeLimitError(
                f"group order {order} exceeds table cap {TABLE_ORDER_CAP}"
            )
        if table.min() < 0 or table.max() >= order:
            raise InvalidInputError("table entries out of range")
        self.order = order
        self.name = name or f"G{order}"
        table.setflags(write=False)
        self._mult = table
        if validate:
            self._check_axioms()
        self._inv = self._build_inverses()

    def _check_axioms(self) -> None:
        m = self._mult
        order = self.order
        if not np.array_equal(m[0], np.arange(order)):
            raise InvalidInputError("row 0 must fix every element (identity)")
        if not np.array_equal(m[:, 0], np.arange(order)):
            raise InvalidInputError("column 0 must fix every element (identity)")
        # Latin square: each row/column hits every index once.
        for axis in (0, 1):
            sorted_lines = np.sort(m, axis=axis)
            if not np.array_equal(
                sorted_lines, np.broadcast_to(np.arange(order), m.shape) if axis == 1
                else np.broadcast_to(np.arange(order)[:, None], m.shape)
            ):
                raise InvalidInputError("table rows/columns are not permutations")
        if order <= _FULL_ASSOC_MAX:
            for a in range(order):
                if not np.array_equal(m[m[a]], m[a][m]):
                    raise InvalidInputError(f"associativity fails at element {a}")
        else:
            rng = np.random.default_rng(0)
            trips = rng.integers(0, order, size=(20000, 3))
            lhs = m[m[trips[:, 0], trips[:, 1]], trips[:, 2]]
            rhs = m[trips[:, 0], m[trips[:, 1], trips[:, 2]]]
            if not np.array_equal(lhs, rhs):
                raise InvalidInputError("associativity fails (sampled check)")

    def _build_inverses(self) -> np.ndarray:
        inv = np.full(self.order, -1, dtype=np.int32)
        rows, cols = np.nonzero(self._mult == 0)
        inv[rows] = cols
        for a in range(self.order):
            b = int(inv[a])
            if b < 0 or self._mult[b, a] != 0:
                raise InvalidInputError(f"element {a} has no two-sided inverse")
        inv.setflags(write=False)
        return inv

    def mul(self, a: int, b: int) -> int:
        return int(self._mult[a, b])

    def inv(self, a: int) -> int:
        return int(self._inv[a])

    def elements(self) -> range:
        return range(self.order)

    def element_order(self, a: int) -> int:
        k, x = 1, a
        while x != 0:
            x = self.mul(x, a)
            k += 1
        return k

    @property
    def mult_table(self) -> np.ndarray:
        return self._mult

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"FiniteGroup({self.name}, order={self.order})"


def make_cyclic_group(t: int) -> FiniteGroup:
    """Cyclic group of order t; element k is the k-th power of the generator."""
    if t < 1:
        raise InvalidInputError(f"cyclic group order must be >= 1, got {t}")
    idx = np.arange(t)
    table = (idx[:, None] + idx[None, :]) % t
    return FiniteGroup(table, name=f"C{t}", validate=False)


def direct_product(a: FiniteGroup, b: FiniteGroup) -> FiniteGroup:
    """Direct product with index (x, y) -> x*|b| + y."""
    order = a.order * b.order
    if order > TABLE_ORDER_CAP:
        raise SizeLimitError(
            f"direct product order {order} exceeds table cap {TABLE_ORDER_CAP}"
        )
    # Table assembled blockwise from the factors; associativity is inherited.
    am, bm = a.mult_table, b.mult_table
    ax = np.repeat(np.arange(a.order), b.order)
    by = np.tile(np.arange(b.order), a.order)
    table = am[np.ix_(ax, ax)] * b.order + bm[np.ix_(by, by)]
    return FiniteGroup(table, name=f"{a.name}x{b.name}", validate=False)


def subgroup_generated(group: FiniteGroup, gens: Iterable[int]) -> tuple[int, ...]:
    """Sorted element list of the subgroup generated by ``gens``."""
    seen = {0}
    frontier = [0]
    gens = sorted(set(int(g) for g in gens))
    for g in gens:
        if not 0 <= g < group.order:
            raise InvalidInputError(f"generator {g} out of range")
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = group.mul(x, g)
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return tuple(sorted(seen))


# ---------------------------------------------------------------------------
# Cyclic graph products


@dataclass(frozen=True)
class GraphProductSpec:
    """Cyclic arrangement of finite factors; factor l lives on edge l.

    Factors at cyclically adjacent positions commute, no other pair does.
    At least five positions are required (smaller polygons do not carry the
    geometry the rest of the package is built for) and every factor must be
    nontrivial.
    """

    factors: tuple[FiniteGroup, ...]

    def __post_init__(self):
        if len(self.factors) < 5:
            raise InvalidInputError(
                f"need at least 5 factors, got {len(self.factors)}"
            )
        for l, f in enumerate(self.factors):
            if f.order < 2:
                raise InvalidInputError(f"factor {l} is trivial")

    @property
    def n(self) -> int:
        return len(self.factors)

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(f.order for f in self.factors)

    def commutes(self, l: int, m: int) -> bool:
        return (l - m) % self.n in (1, self.n - 1)


@dataclass(frozen=True, order=True)
class NormalForm:
    """Canonical word: tuple of (factor index, nonidentity element index)."""

    syllables: tuple[tuple[int, int], ...] = ()

    @property
    def is_identity(self) -> bool:
        return not self.syllables

    def __len__(self) -> int:
        return len(self.syllables)


IDENTITY = NormalForm()


def _canonicalize(syls: list[tuple[int, int]], spec: GraphProductSpec) -> NormalForm:
    # Phase 1: online pile reduction.  Each syllable slides left through
    # commuting ones and merges with (or cancels against) the first syllable
    # of the same factor it reaches.  The pile stays reduced throughout: a
    # deleted syllable cannot expose a new mergeable pair, because reaching
    # it required everything to its right to commute with its factor, while
    # blocking a pair requires the opposite.
    pile: list[tuple[int, int]] = []
    for l, a in syls:
        k = len(pile) - 1
        target = -1
        while k >= 0:
            m, _ = pile[k]
            if m == l:
                target = k
                break
            if not spec.commutes(l, m):
                break
            k -= 1
        if target >= 0:
            prod = spec.factors[l].mul(pile[target][1], a)
            if prod == 0:
                del pile[target]
            else:
                pile[target] = (l, prod)
        else:
            pile.append((l, a))

    # Phase 2: among the shuffles of the reduced word, emit the
    # lexicographically least: repeatedly take the smallest factor index
    # that can be moved to the front.
    out: list[tuple[int, int]] = []
    rest = pile
    while rest:
        front: dict[int, bool] = {}
        blocked: set[int] = set()
        for l, _ in rest:
            if l in front or l in blocked:
                continue
            ok = True
            for m, _ in rest:
                if m == l:
                    break
                if not spec.commutes(l, m):
                    ok = False
                    break
            if ok:
                front[l] = True
            else:
                blocked.add(l)
        pick = min(front)
        group = spec.factors[pick]
        prod = 0
        kept: list[tuple[int, int]] = []
        collecting = True
        for m, a in rest:
            if collecting and m == pick:
                prod = group.mul(prod, a)
            else:
                if collecting and not spec.commutes(pick, m):
                    collecting = False
                kept.append((m, a))
        rest = kept
        if prod != 0:
            out.append((pick, prod))
    return NormalForm(tuple(out))


def normal_form(word: Sequence[tuple[int, int]], spec: GraphProductSpec) -> NormalForm:
    """Reduce a syllable word to its canonical form.

    Trivial syllables are dropped; indices and element numbers outside the
    spec's ranges are rejected.
    """
    syls: list[tuple[int, int]] = []
    for l, a in word:
        l, a = int(l), int(a)
        if not 0 <= l < spec.n:
            raise InvalidInputError(f"factor index {l} out of range")
        if not 0 <= a < spec.factors[l].order:
            raise InvalidInputError(f"element {a} out of range for factor {l}")
        if a != 0:
            syls.append((l, a))
    return _canonicalize(syls, spec)


def multiply(u: NormalForm, v: NormalForm, spec: GraphProductSpec) -> NormalForm:
    return _canonicalize(list(u.syllables + v.syllables), spec)


def inverse(u: NormalForm, spec: GraphProductSpec) -> NormalForm:
    syls = [(l, spec.factors[l].inv(a)) for l, a in reversed(u.syllables)]
    return _canonicalize(syls, spec)


def support(u: NormalForm) -> frozenset[int]:
    return frozenset(l for l, _ in u.syllables)


def syllable_word(l: int, a: int, spec: GraphProductSpec) -> NormalForm:
    return normal_form([(l, a)], spec)


def enumerate_ball(
    spec: GraphProductSpec, radius: int, cap: int = DEFAULT_ELEMENT_CAP
) -> list[NormalForm]:
    """All elements of syllable length <= radius, shortest first.

    Within a length class the order is lexicographic on the syllable tuples,
    so the output is deterministic.  Exceeding ``cap`` raises rather than
    truncates.
    """
    if radius < 0:
        raise InvalidInputError("radius must be >= 0")
    gens = [
        (l, a) for l in range(spec.n) for a in range(1, spec.factors[l].order)
    ]
    seen = {IDENTITY}
    out = [IDENTITY]
    layer = [IDENTITY]
    for depth in range(1, radius + 1):
        found = set()
        for x in layer:
            for l, a in gens:
                y = _canonicalize(list(x.syllables) + [(l, a)], spec)
                if len(y) == depth and y not in seen:
                    found.add(y)
        layer = sorted(found)
        seen.update(found)
        out.extend(layer)
        if len(out) > cap:
            raise SizeLimitError(
                f"ball of radius {depth} exceeds element cap {cap}"
            )
    return out


# ---------------------------------------------------------------------------
# Vertex groups of the polygon

def vertex_group(spec: GraphProductSpec, i: int) -> FiniteGroup:
    """The vertex group at vertex i: A_{i-1} x A_i, predecessor factor first."""
    n = spec.n
    return direct_product(spec.factors[(i - 1) % n], spec.factors[i % n])


def vertex_pair(spec: GraphProductSpec, i: int, gidx: int) -> tuple[int, int]:
    """Split a vertex-group index into its (predecessor, successor) parts."""
    t = spec.factors[i % spec.n].order
    return divmod(gidx, t)


def vertex_element_word(spec: GraphProductSpec, i: int, gidx: int) -> NormalForm:
    """The vertex-group element as a group element (commuting two-syllable word)."""
    n = spec.n
    u, v = vertex_pair(spec, i, gidx)
    return normal_form([((i - 1) % n, u), (i % n, v)], spec)


# ---------------------------------------------------------------------------
# Homomorphisms to finite groups


@dataclass(frozen=True)
class GroupHom:
    """Homomorphism from a cyclic graph product to a finite group.

    Determined by the images of each factor's elements.  Construction checks
    that every factor map is a homomorphism sending the identity to the
    identity and that adjacent factor images commute, which is exactly what
    the defining relations require.
    """

    spec: GraphProductSpec
    target: FiniteGroup
    factor_images: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.factor_images) != self.spec.n:
            raise InvalidInputError("need one image tuple per factor")
        tg = self.target
        for l, (fac, images) in enumerate(zip(self.spec.factors, self.factor_images)):
            if len(images) != fac.order:
                raise InvalidInputError(f"factor {l}: wrong image count")
            if images[0] != 0:
                raise InvalidInputError(f"factor {l}: identity not preserved")
            for x in images:
                if not 0 <= x < tg.order:
                    raise InvalidInputError(f"factor {l}: image out of range")
            for a in range(fac.order):
                for b in range(fac.order):
                    if tg.mul(images[a], images[b]) != images[fac.mul(a, b)]:
                        raise InvalidInputError(
                            f"factor {l}: images do not respect the table"
                        )
        n = self.spec.n
        for l in range(n):
            m = (l + 1) % n
            for a in self.factor_images[l]:
                for b in self.factor_images[m]:
                    if tg.mul(a, b) != tg.mul(b, a):
                        raise InvalidInputError(
                            f"adjacent factors {l},{m}: images do not commute"
                        )

    def image_of_syllable(self, l: int, a: int) -> int:
        return self.factor_images[l][a]

    def image_of(self, u: NormalForm) -> int:
        x = 0
        for l, a in u.syllables:
            x = self.target.mul(x, self.factor_images[l][a])
        return x

    def image_of_vertex_element(self, i: int, gidx: int) -> int:
        n = self.spec.n
        u, v = vertex_pair(self.spec, i, gidx)
        return self.target.mul(
            self.factor_images[(i - 1) % n][u], self.factor_images[i % n][v]
        )

    def image_subgroup(self) -> tuple[int, ...]:
        gens = [x for images in self.factor_images for x in images]
        return subgroup_generated(self.target, gens)

    def injective_on_vertex_groups(self) -> bool:
        for i in range(self.spec.n):
            size = self.spec.factors[(i - 1) % self.spec.n].order * \
                self.spec.factors[i].order
            images = {self.image_of_vertex_element(i, g) for g in range(size)}
            if len(images) != size:
                return False
        return True


def tautological_quotient(spec: GraphProductSpec) -> GroupHom:
    """Quotient onto the direct product of all factors, one slot each.

    Kills every commutator between non-adjacent factors while staying
    injective on each vertex group, which makes it the first candidate to
    try for the separation checks.
    """
    target = spec.factors[0]
    for f in spec.factors[1:]:
        target = direct_product(target, f)
    # Index of (a_0, ..., a_{n-1}) is big-endian mixed radix.
    weights = [1] * spec.n
    for l in range(spec.n - 2, -1, -1):
        weights[l] = weights[l + 1] * spec.factors[l + 1].order
    images = tuple(
        tuple(a * weights[l] for a in range(spec.factors[l].order))
        for l in range(spec.n)
    )
    return GroupHom(spec=spec, target=target, factor_images=images)


# ---------------------------------------------------------------------------
# JSON interfaces


def finite_group_from_json(data: dict) -> FiniteGroup:
    kind = data.get("type")
    if kind == "cyclic":
        return make_cyclic_group(int(data["order"]))
    if kind == "table":
        table = data.get("mult")
        if table is None:
            raise InvalidInputError("table group needs a 'mult' field")
        return FiniteGroup(table, name=str(data.get("name", "")))
    raise InvalidInputError(f"unknown finite group type {kind!r}")


def group_spec_from_json(data) -> GraphProductSpec:
    """Parse the cyclic graph product input format.

    Accepts ``{"type": "cyclic-graph-product", "orders": [...]}`` for cyclic
    factors or ``{"type": "cyclic-graph-product", "factors": [...]}`` with
    explicit factor descriptions.
    """
    if isinstance(data, str):
        data = json.loads(data)
    if not isinstance(data, dict):
        raise InvalidInputError("group description must be a JSON object")
    if data.get("type") != "cyclic-graph-product":
        raise InvalidInputError(f"unknown group type {data.get('type')!r}")
    if "orders" in data:
        orders = data["orders"]
        if not isinstance(orders, list) or not all(
            isinstance(t, int) and t >= 1 for t in orders
        ):
            raise InvalidInputError("'orders' must be a list of positive integers")
        factors = tuple(make_cyclic_group(t) for t in orders)
    elif "factors" in data:
        factors = tuple(finite_group_from_json(d) for d in data["factors"])
    else:
        raise InvalidInputError("need 'orders' or 'factors'")
    return GraphProductSpec(factors=factors)


def group_hom_from_json(data, spec: GraphProductSpec) -> GroupHom:
    """Parse a quotient description against the product it is meant for."""
    if isinstance(data, str):
        data = json.loads(data)
    if not isinstance(data, dict):
        raise InvalidInputError("quotient description must be a JSON object")
    if data.get("type") != "group-hom":
        raise InvalidInputError(f"unknown quotient type {data.get('type')!r}")
    if "target" not in data:
        raise InvalidInputError("quotient needs a 'target' group")
    target = finite_group_from_json(data["target"])
    images = data.get("factorImages")
    if not isinstance(images, list) or len(images) != spec.n:
        raise InvalidInputError("'factorImages' must list one tuple per factor")
    return GroupHom(
        spec=spec,
        target=target,
        factor_images=tuple(tuple(int(a) for a in im) for im in images),
    )
