"""Finite permutation-group actions, orbit-pair partitions, and the Reynolds
projection onto the commutant algebra.

Groups are carried by generators and are never enumerated for projection:
the orbit partition of ordered index pairs under (i, j) -> (g(i), g(j)) is
computed by connected-components closure over generator edges, which costs
O(M^2 * n_generators) regardless of group order. A wreath product of order
1e32 projects exactly as fast as a single transposition.

Two kinds bypass generators entirely with closed forms: the full symmetric
group (compound symmetry) and the Haar average over the orthogonal group
(scaled identity).
"""

from __future__ import annotations

import functools
import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.sparse.csgraph import connected_components

from .matrixcore import DimensionMismatchError, SymmetricMatrix

KIND_GENERATOR = "generator_based"
KIND_FULL_SYMMETRIC = "full_symmetric"
KIND_HAAR = "haar_orthogonal"
KIND_TRIVIAL = "trivial"

_KINDS = (KIND_GENERATOR, KIND_FULL_SYMMETRIC, KIND_HAAR, KIND_TRIVIAL)

# Effective-order cap: orders at or above this are "astronomically large"
# for every rank-prefilter purpose.
ORDER_CAP = 10**18


class GroupValidationError(ValueError):
    """A generator is not a permutation, or kind/generator fields disagree."""


Perm = tuple[int, ...]


def _as_perm(gen, m: int) -> Perm:
    arr = np.asarray(gen, dtype=int)
    if arr.shape != (m,) or not np.array_equal(np.sort(arr), np.arange(m)):
        raise GroupValidationError(f"generator {arr.tolist()} is not a permutation of 0..{m - 1}")
    return tuple(int(v) for v in arr)


@dataclass(frozen=True)
class GroupAction:
    """A finite group acting on indices {0..M-1}.

    ``generators`` are index arrays with g[i] = image of i, so the matrix
    action is A -> P A P^T with P[g[i], i] = 1. ``order_description`` is
    symbolic (orders like 5^11*11! are not representable as counts one would
    want to print); ``order_lower_bound`` is an exact integer when the order
    is known in closed form, a declared lower bound otherwise, and None when
    no finite bound applies (the Haar kind).
    """

    name: str
    dim: int
    generators: tuple[Perm, ...] = ()
    kind: str = KIND_GENERATOR
    order_description: str = ""
    order_lower_bound: int | None = 1

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise GroupValidationError(f"unknown group kind {self.kind!r}")
        if self.dim < 1:
            raise GroupValidationError("group dimension must be >= 1")
        gens = tuple(_as_perm(g, self.dim) for g in self.generators)
        if self.kind != KIND_GENERATOR and gens:
            raise GroupValidationError(f"kind {self.kind} carries no generators")
        object.__setattr__(self, "generators", gens)
        if not self.order_description:
            object.__setattr__(self, "order_description", "1" if self.kind == KIND_TRIVIAL else "?")

    def generator_arrays(self) -> list[np.ndarray]:
        return [np.array(g, dtype=int) for g in self.generators]


@dataclass(frozen=True)
class OrbitPartition:
    """Partition of ordered index pairs (i, j) into orbits of the conjugation
    action, plus the symmetric merge of each class with its transpose.

    ``n_classes`` is the ordered-pair class count, i.e. the dimension of the
    full commutant algebra. ``d_g`` counts classes after merging (i, j) with
    (j, i): the dimension of the commutant restricted to symmetric matrices,
    which is the quantity the estimation theory runs on. Both are retained
    because group catalogues quote either one depending on context.
    """

    dim: int
    class_of: np.ndarray        # (M, M) ordered-pair class ids
    n_classes: int
    sym_class_of: np.ndarray    # (M, M) ids after merging transposes
    d_g: int
    sym_anchor: np.ndarray      # flat index of each merged class's first entry

    def __post_init__(self) -> None:
        self.class_of.flags.writeable = False
        self.sym_class_of.flags.writeable = False
        self.sym_anchor.flags.writeable = False


def _renumber_first_occurrence(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Relabel components as 0..k-1 in order of first appearance (row-major)."""
    _, first_idx, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first_idx))
    return order[inverse], len(first_idx)


@functools.lru_cache(maxsize=128)
def orbit_partition(g: GroupAction) -> OrbitPartition:
    """Orbit classes of ordered pairs under the generated group.

    Generator-based and trivial kinds only; the closed-form kinds have no
    pair partition. Results are memoized per GroupAction.
    """
    if g.kind not in (KIND_GENERATOR, KIND_TRIVIAL):
        raise GroupValidationError(f"orbit_partition undefined for kind {g.kind}")
    m = g.dim
    n_pairs = m * m
    base = np.arange(n_pairs)
    gens = g.generator_arrays()
    if gens:
        srcs = []
        dsts = []
        for perm in gens:
            # pair (i, j) -> (g(i), g(j)) in flat row-major indexing
            mapped = (perm[:, None] * m + perm[None, :]).ravel()
            srcs.append(base)
            dsts.append(mapped)
        graph = scipy.sparse.csr_matrix(
            (np.ones(n_pairs * len(gens), dtype=np.int8),
             (np.concatenate(srcs), np.concatenate(dsts))),
            shape=(n_pairs, n_pairs),
        )
        _, raw = connected_components(graph, directed=False)
    else:
        raw = base
    labels, n_classes = _renumber_first_occurrence(raw)
    class_of = labels.reshape(m, m)

    # Merge each class with its transpose class to get the symmetric count.
    transpose_partner = np.empty(n_classes, dtype=int)
    transpose_partner[class_of] = class_of.T
    merge_graph = scipy.sparse.csr_matrix(
        (np.ones(n_classes, dtype=np.int8),
         (np.arange(n_classes), transpose_partner)),
        shape=(n_classes, n_classes),
    )
    _, raw_sym = connected_components(merge_graph, directed=False)
    sym_labels, d_g = _renumber_first_occurrence(raw_sym[labels])
    sym_class_of = sym_labels.reshape(m, m)
    _, sym_anchor = np.unique(sym_labels, return_index=True)
    return OrbitPartition(dim=m, class_of=class_of, n_classes=n_classes,
                          sym_class_of=sym_class_of, d_g=d_g,
                          sym_anchor=sym_anchor)


def _anchored_mean(values: np.ndarray, anchor: float) -> float:
    """Mean computed as anchor + mean(values - anchor): exact when every
    value equals the anchor, which makes projections exact fixed points of
    themselves (bitwise file-level idempotence)."""
    return anchor + float(np.mean(values - anchor))


def reynolds_project(g: GroupAction, a: SymmetricMatrix) -> SymmetricMatrix:
    """Orthogonal projection of ``a`` onto the commutant algebra of ``g``.

    Generator kinds replace each entry by the mean over its (symmetrically
    merged) orbit class, which equals (1/|G|) sum_g P A P^T without ever
    enumerating the group. The full symmetric group maps to compound
    symmetry, and the Haar-orthogonal average maps to (tr A / M) I.
    Trace is preserved, the PSD cone is preserved, and class means are
    anchored at one representative entry so that projecting twice is
    bitwise equal to projecting once.
    """
    if g.dim != a.dim:
        raise DimensionMismatchError(f"group dim {g.dim} != matrix dim {a.dim}")
    m = a.dim
    if g.kind == KIND_TRIVIAL:
        return a
    if g.kind == KIND_HAAR:
        diag = np.diag(a.values)
        return SymmetricMatrix(np.eye(m) * _anchored_mean(diag, diag[0]))
    if g.kind == KIND_FULL_SYMMETRIC:
        diag = np.diag(a.values)
        mean_diag = _anchored_mean(diag, diag[0])
        if m == 1:
            return SymmetricMatrix(np.array([[mean_diag]]))
        off = a.values[~np.eye(m, dtype=bool)]
        out = np.full((m, m), _anchored_mean(off, a.values[0, 1]))
        np.fill_diagonal(out, mean_diag)
        return SymmetricMatrix(out)
    part = orbit_partition(g)
    flat_class = part.sym_class_of.ravel()
    flat_vals = a.values.ravel()
    anchors = flat_vals[part.sym_anchor]
    dev = flat_vals - anchors[flat_class]
    counts = np.bincount(flat_class, minlength=part.d_g)
    means = anchors + np.bincount(flat_class, weights=dev, minlength=part.d_g) / counts
    return SymmetricMatrix(means[flat_class].reshape(m, m))


# ---------------------------------------------------------------------------
# Constructors: named groups and the product/power/wreath families.
#
# Grid layouts are row-major throughout: index(row, col) = row * width + col.
# ---------------------------------------------------------------------------

def trivial(m: int) -> GroupAction:
    return GroupAction(name=f"trivial-{m}", dim=m, kind=KIND_TRIVIAL,
                       order_description="1", order_lower_bound=1)


def full_symmetric(m: int) -> GroupAction:
    return GroupAction(name=f"s{m}", dim=m, kind=KIND_FULL_SYMMETRIC,
                       order_description=f"{m}!", order_lower_bound=math.factorial(m))


def haar_orthogonal(m: int) -> GroupAction:
    return GroupAction(name=f"haar-o{m}", dim=m, kind=KIND_HAAR,
                       order_description="inf", order_lower_bound=None)


def symmetric_generators(m: int) -> GroupAction:
    """S_m as a generator-based action (for enumeration-friendly tests)."""
    if m < 2:
        return trivial(m)
    cycle = tuple((np.arange(m) + 1) % m)
    swap = list(range(m))
    swap[0], swap[1] = 1, 0
    return GroupAction(name=f"s{m}-gen", dim=m, generators=(cycle, tuple(swap)),
                       order_description=f"{m}!", order_lower_bound=math.factorial(m))


def cyclic(m: int) -> GroupAction:
    """Flat cyclic shift i -> i+1 (mod m) on all m indices."""
    shift = tuple((np.arange(m) + 1) % m)
    return GroupAction(name=f"z{m}-flat", dim=m, generators=(shift,),
                       order_description=str(m), order_lower_bound=m)


def transposition(m: int, i: int = 0, j: int = 1) -> GroupAction:
    perm = list(range(m))
    perm[i], perm[j] = j, i
    return GroupAction(name=f"z2-swap{i}{j}-{m}", dim=m, generators=(tuple(perm),),
                       order_description="2", order_lower_bound=2)


def _grid_perm(height: int, width: int, fn) -> Perm:
    perm = np.empty(height * width, dtype=int)
    for r in range(height):
        for c in range(width):
            r2, c2 = fn(r, c)
            perm[r * width + c] = r2 * width + c2
    return tuple(int(v) for v in perm)


def grid_cyclic(height: int, width: int, axis: str) -> GroupAction:
    """Z_H or Z_W acting by uniform translation along one grid axis."""
    if axis == "row":
        gen = _grid_perm(height, width, lambda r, c: ((r + 1) % height, c))
        order = height
        name = f"z{height}-rows-{height}x{width}"
    elif axis == "col":
        gen = _grid_perm(height, width, lambda r, c: (r, (c + 1) % width))
        order = width
        name = f"z{width}-cols-{height}x{width}"
    else:
        raise GroupValidationError(f"axis must be 'row' or 'col', got {axis!r}")
    return GroupAction(name=name, dim=height * width, generators=(gen,),
                       order_description=str(order), order_lower_bound=order)


def grid_translation2d(height: int, width: int) -> GroupAction:
    """Z_H x Z_W joint translation on both grid axes."""
    return direct_product(grid_cyclic(height, width, "row"),
                          grid_cyclic(height, width, "col"),
                          name=f"z{height}xz{width}-{height}x{width}",
                          order=height * width)


def grid_dihedral(height: int, width: int, axis: str = "col") -> GroupAction:
    """Dihedral group on one axis: the axis cyclic shift plus its reflection."""
    if axis == "col":
        shift = _grid_perm(height, width, lambda r, c: (r, (c + 1) % width))
        flip = _grid_perm(height, width, lambda r, c: (r, width - 1 - c))
        order = 2 * width
        name = f"d{width}-cols-{height}x{width}"
    elif axis == "row":
        shift = _grid_perm(height, width, lambda r, c: ((r + 1) % height, c))
        flip = _grid_perm(height, width, lambda r, c: (height - 1 - r, c))
        order = 2 * height
        name = f"d{height}-rows-{height}x{width}"
    else:
        raise GroupValidationError(f"axis must be 'row' or 'col', got {axis!r}")
    return GroupAction(name=name, dim=height * width, generators=(shift, flip),
                       order_description=str(order), order_lower_bound=order)


def grid_klein(height: int, width: int) -> GroupAction:
    """Klein four-group: horizontal flip, vertical flip (and their product)."""
    hflip = _grid_perm(height, width, lambda r, c: (r, width - 1 - c))
    vflip = _grid_perm(height, width, lambda r, c: (height - 1 - r, c))
    return GroupAction(name=f"klein-{height}x{width}", dim=height * width,
                       generators=(hflip, vflip),
                       order_description="4", order_lower_bound=4)


def grid_rot4(n: int) -> GroupAction:
    """Z_4 generated by the 90-degree rotation of a square n x n patch."""
    rot = _grid_perm(n, n, lambda r, c: (c, n - 1 - r))
    return GroupAction(name=f"rot4-{n}x{n}", dim=n * n, generators=(rot,),
                       order_description="4", order_lower_bound=4)


def grid_d4(n: int) -> GroupAction:
    """Full dihedral symmetry of the square patch: rotation plus transpose."""
    rot = _grid_perm(n, n, lambda r, c: (c, n - 1 - r))
    mirror = _grid_perm(n, n, lambda r, c: (c, r))
    return GroupAction(name=f"d4-{n}x{n}", dim=n * n, generators=(rot, mirror),
                       order_description="8", order_lower_bound=8)


def direct_product(g1: GroupAction, g2: GroupAction, name: str | None = None,
                   order: int | None = None) -> GroupAction:
    """Product of two commuting actions on the same index set.

    Generators are the union of the factor generators. The recorded order is
    the product of factor orders, exact whenever the factors intersect
    trivially (true for all the axis-wise grid factors used here).
    """
    if g1.dim != g2.dim:
        raise DimensionMismatchError(f"direct product dims {g1.dim} != {g2.dim}")
    for g in (g1, g2):
        if g.kind not in (KIND_GENERATOR, KIND_TRIVIAL):
            raise GroupValidationError("direct products need generator-based factors")
    if order is None and g1.order_lower_bound and g2.order_lower_bound:
        order = g1.order_lower_bound * g2.order_lower_bound
    return GroupAction(
        name=name or f"{g1.name}*{g2.name}",
        dim=g1.dim,
        generators=g1.generators + g2.generators,
        order_description=f"{g1.order_description}*{g2.order_description}",
        order_lower_bound=order,
    )


def _block_slots(block_size: int, n_blocks: int, perm: np.ndarray | None) -> np.ndarray:
    """Index layout (n_blocks, block_size): contiguous blocks routed through
    an optional permutation of the m underlying indices."""
    m = block_size * n_blocks
    slots = np.arange(m) if perm is None else np.asarray(perm, dtype=int)
    if slots.shape != (m,) or not np.array_equal(np.sort(slots), np.arange(m)):
        raise GroupValidationError("block layout permutation must be a permutation of 0..m-1")
    return slots.reshape(n_blocks, block_size)


def cartesian_power_shifts(block_size: int, n_blocks: int,
                           perm: np.ndarray | None = None,
                           name: str | None = None) -> GroupAction:
    """Z_K^B: one independent cyclic-shift generator per block."""
    slots = _block_slots(block_size, n_blocks, perm)
    m = block_size * n_blocks
    gens = []
    for b in range(n_blocks):
        p = np.arange(m)
        p[slots[b]] = slots[b][(np.arange(block_size) + 1) % block_size]
        gens.append(tuple(int(v) for v in p))
    return GroupAction(
        name=name or f"z{block_size}-pow{n_blocks}",
        dim=m, generators=tuple(gens),
        order_description=f"{block_size}^{n_blocks}",
        order_lower_bound=block_size**n_blocks,
    )


def _block_swap_gens(slots: np.ndarray) -> list[Perm]:
    n_blocks, _ = slots.shape
    m = slots.size
    gens = []
    for b in range(n_blocks - 1):
        p = np.arange(m)
        p[slots[b]] = slots[b + 1]
        p[slots[b + 1]] = slots[b]
        gens.append(tuple(int(v) for v in p))
    return gens


def wreath_shifts(block_size: int, n_blocks: int,
                  perm: np.ndarray | None = None,
                  name: str | None = None) -> GroupAction:
    """Z_K wr S_B: independent per-block shifts lifted by free permutation of
    the blocks (B shift generators plus B-1 block-adjacent transpositions)."""
    slots = _block_slots(block_size, n_blocks, perm)
    base = cartesian_power_shifts(block_size, n_blocks, perm)
    gens = base.generators + tuple(_block_swap_gens(slots))
    return GroupAction(
        name=name or f"z{block_size}-wr-s{n_blocks}",
        dim=base.dim, generators=gens,
        order_description=f"{block_size}^{n_blocks}*{n_blocks}!",
        order_lower_bound=block_size**n_blocks * math.factorial(n_blocks),
    )


def wreath_rowshift_rowcycle(height: int, width: int) -> GroupAction:
    """Independent per-row column shifts lifted by the cyclic row rotation
    (Z_W wr Z_H on the row-major grid)."""
    base = cartesian_power_shifts(width, height)
    rowcycle = grid_cyclic(height, width, "row")
    return GroupAction(
        name=f"z{width}-wr-z{height}-{height}x{width}",
        dim=height * width,
        generators=base.generators + rowcycle.generators,
        order_description=f"{width}^{height}*{height}",
        order_lower_bound=width**height * height,
    )


def block_symmetric(block_size: int, n_blocks: int,
                    perm: np.ndarray | None = None,
                    name: str | None = None) -> GroupAction:
    """S_K^B: full exchangeability within each block, none across blocks.

    Generators are the within-block adjacent transpositions.
    """
    slots = _block_slots(block_size, n_blocks, perm)
    m = block_size * n_blocks
    gens = []
    for b in range(n_blocks):
        for s in range(block_size - 1):
            p = np.arange(m)
            p[slots[b, s]], p[slots[b, s + 1]] = slots[b, s + 1], slots[b, s]
            gens.append(tuple(int(v) for v in p))
    return GroupAction(
        name=name or f"block-s{block_size}x{n_blocks}",
        dim=m, generators=tuple(gens),
        order_description=f"({block_size}!)^{n_blocks}",
        order_lower_bound=math.factorial(block_size)**n_blocks,
    )


def tied_cyclic_blocks(block_size: int, n_blocks: int,
                       perm: np.ndarray | None = None,
                       name: str | None = None) -> GroupAction:
    """Z_K shifting every block simultaneously by the same offset (order K)."""
    slots = _block_slots(block_size, n_blocks, perm)
    m = block_size * n_blocks
    p = np.arange(m)
    rolled = np.roll(np.arange(block_size), -1)
    for b in range(n_blocks):
        p[slots[b]] = slots[b][rolled]
    return GroupAction(
        name=name or f"z{block_size}-tied{n_blocks}",
        dim=m, generators=(tuple(int(v) for v in p),),
        order_description=str(block_size), order_lower_bound=block_size,
    )


def pairwise_z2_power(m: int) -> GroupAction:
    """Z_2^(m/2): independent transpositions of consecutive index pairs."""
    if m % 2:
        raise GroupValidationError("pairwise Z2 power needs even dimension")
    gens = []
    for i in range(0, m, 2):
        p = np.arange(m)
        p[i], p[i + 1] = i + 1, i
        gens.append(tuple(int(v) for v in p))
    return GroupAction(name=f"z2-{m // 2}-cartesian", dim=m, generators=tuple(gens),
                       order_description=f"2^{m // 2}", order_lower_bound=2**(m // 2))


# ---------------------------------------------------------------------------
# Seeded decoy constructors.
# ---------------------------------------------------------------------------

def decoy_random_partition_blocks(m: int, block_size: int, seed: int) -> GroupAction:
    """Block-symmetric action over a seeded uniformly random partition of the
    m indices into blocks of ``block_size``."""
    if m % block_size:
        raise GroupValidationError(f"block size {block_size} does not divide {m}")
    perm = random_partition_perm(m, block_size, seed)
    return block_symmetric(block_size, m // block_size, perm=perm,
                           name=f"random-block-s{block_size}x{m // block_size}-seed{seed}")


def enumerate_group(generators: list[np.ndarray], dim: int,
                    cap: int = 10**6) -> list[np.ndarray] | None:
    """BFS closure of the generated group; None when the order exceeds cap."""
    if not generators:
        return [np.arange(dim)]
    seen = {tuple(range(dim))}
    frontier = [tuple(range(dim))]
    gens = [tuple(int(v) for v in g) for g in generators]
    while frontier:
        nxt = []
        for elem in frontier:
            for g in gens:
                comp = tuple(g[e] for e in elem)
                if comp not in seen:
                    seen.add(comp)
                    nxt.append(comp)
                    if len(seen) > cap:
                        return None
        frontier = nxt
    return [np.array(e, dtype=int) for e in sorted(seen)]


def decoy_random_subgroup_closure(m: int, n_generators: int, order_cap: int,
                                  seed: int) -> GroupAction:
    """Random elements of S_m retained as generators; the BFS closure probe
    only sizes the group and is capped, since projection needs orbits, not
    elements."""
    if order_cap < 1:
        raise GroupValidationError("order_cap must be >= 1")
    if n_generators == 0:
        return trivial(m)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((m, n_generators, seed))))
    gens = [rng.permutation(m) for _ in range(n_generators)]
    elements = enumerate_group(gens, m, cap=order_cap)
    if elements is None:
        desc = f">={order_cap}"
        bound = order_cap
    else:
        desc = str(len(elements))
        bound = len(elements)
    return GroupAction(name=f"random-s{m}-subgroup-seed{seed}", dim=m,
                       generators=tuple(tuple(int(v) for v in g) for g in gens),
                       order_description=desc, order_lower_bound=bound)


def permutation_matrix(perm: np.ndarray) -> np.ndarray:
    """P with P[perm[i], i] = 1, so P A P^T relabels indices by the permutation."""
    m = len(perm)
    p = np.zeros((m, m))
    p[np.asarray(perm, dtype=int), np.arange(m)] = 1.0
    return p


def brute_force_project(g: GroupAction, a: SymmetricMatrix,
                        cap: int = 10**6) -> SymmetricMatrix:
    """(1/|G|) sum over explicitly enumerated elements of P A P^T.

    Independent oracle for reynolds_project on small groups; raises when the
    order exceeds the cap.
    """
    elements = enumerate_group(g.generator_arrays(), g.dim, cap=cap)
    if elements is None:
        raise GroupValidationError(f"group {g.name} exceeds enumeration cap {cap}")
    acc = np.zeros((g.dim, g.dim))
    for perm in elements:
        p = permutation_matrix(perm)
        acc += p @ a.values @ p.T
    return SymmetricMatrix(acc / len(elements))


# ---------------------------------------------------------------------------
# Group specification files: key=value header, then one generator per line
# as a comma-separated index array.
# ---------------------------------------------------------------------------

def write_group_file(path, g: GroupAction) -> None:
    with open(path, "w") as fh:
        fh.write(f"name={g.name}\n")
        fh.write(f"dim={g.dim}\n")
        fh.write(f"kind={g.kind}\n")
        fh.write(f"order_description={g.order_description}\n")
        if g.order_lower_bound is not None:
            fh.write(f"order_lower_bound={g.order_lower_bound}\n")
        for gen in g.generators:
            fh.write(",".join(str(v) for v in gen) + "\n")


def read_group_file(path) -> GroupAction:
    fields: dict[str, str] = {}
    gens: list[Perm] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" in line and not line.split("=", 1)[0].lstrip("-").isdigit():
                key, val = line.split("=", 1)
                fields[key.strip()] = val.strip()
            else:
                gens.append(tuple(int(tok) for tok in line.split(",")))
    try:
        name = fields["name"]
        dim = int(fields["dim"])
        kind = fields["kind"]
    except KeyError as exc:
        raise ValueError(f"{path}: missing required group field {exc}") from exc
    bound = fields.get("order_lower_bound")
    return GroupAction(
        name=name, dim=dim, generators=tuple(gens), kind=kind,
        order_description=fields.get("order_description", ""),
        order_lower_bound=int(bound) if bound is not None else None,
    )


def read_library_dir(path) -> list[GroupAction]:
    """All group files in a directory, sorted by filename for a stable order."""
    actions = []
    for fname in sorted(os.listdir(path)):
        full = os.path.join(path, fname)
        if os.path.isfile(full):
            actions.append(read_group_file(full))
    return actions


def random_partition_perm(m: int, block_size: int, seed: int) -> np.ndarray:
    """Seeded uniformly random assignment of the m indices to block slots."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((m, block_size, seed))))
    return rng.permutation(m)


def _parse_kxb(token: str) -> tuple[int, int]:
    k, b = token.split("x")
    return int(k), int(b)


def parse_group_spec(text: str) -> GroupAction:
    """Build a named group from a compact constructor string.

    Grammar (sizes as KxB or HxW):
      trivial:M | full-symmetric:M | haar:M | cyclic:M | z2-pairs:M |
      grid-cyclic:HxW:row|col | grid-dihedral:HxW:row|col |
      grid-translation:HxW | klein:HxW | rot4:N | d4:N | wreath-rows:HxW |
      block:KxB[:seed] | tied-cyclic:KxB[:seed] | cartesian:KxB[:seed] |
      wreath:KxB[:seed] | random-block:KxB:seed |
      random-subgroup:M:n_generators:seed[:cap]
    A trailing seed on the block constructors routes the blocks through a
    seeded random partition of the indices.
    """
    parts = text.strip().split(":")
    head, args = parts[0], parts[1:]
    try:
        if head == "trivial":
            return trivial(int(args[0]))
        if head in ("full-symmetric", "s"):
            return full_symmetric(int(args[0]))
        if head == "haar":
            return haar_orthogonal(int(args[0]))
        if head == "cyclic":
            return cyclic(int(args[0]))
        if head == "z2-pairs":
            return pairwise_z2_power(int(args[0]))
        if head == "grid-cyclic":
            h, w = _parse_kxb(args[0])
            return grid_cyclic(h, w, args[1])
        if head == "grid-dihedral":
            h, w = _parse_kxb(args[0])
            return grid_dihedral(h, w, args[1] if len(args) > 1 else "col")
        if head == "grid-translation":
            h, w = _parse_kxb(args[0])
            return grid_translation2d(h, w)
        if head == "klein":
            h, w = _parse_kxb(args[0])
            return grid_klein(h, w)
        if head == "rot4":
            return grid_rot4(int(args[0]))
        if head == "d4":
            return grid_d4(int(args[0]))
        if head == "wreath-rows":
            h, w = _parse_kxb(args[0])
            return wreath_rowshift_rowcycle(h, w)
        if head in ("block", "tied-cyclic", "cartesian", "wreath"):
            k, b = _parse_kxb(args[0])
            perm = None
            suffix = ""
            if len(args) > 1:
                seed = int(args[1])
                perm = random_partition_perm(k * b, k, seed)
                suffix = f"-seed{seed}"
            maker = {"block": block_symmetric, "tied-cyclic": tied_cyclic_blocks,
                     "cartesian": cartesian_power_shifts, "wreath": wreath_shifts}[head]
            g = maker(k, b, perm=perm)
            return g if not suffix else GroupAction(
                name=g.name + suffix, dim=g.dim, generators=g.generators,
                kind=g.kind, order_description=g.order_description,
                order_lower_bound=g.order_lower_bound)
        if head == "random-block":
            k, b = _parse_kxb(args[0])
            return decoy_random_partition_blocks(k * b, k, int(args[1]))
        if head == "random-subgroup":
            m, n_gen, seed = int(args[0]), int(args[1]), int(args[2])
            cap = int(args[3]) if len(args) > 3 else 10**6
            return decoy_random_subgroup_closure(m, n_gen, cap, seed)
    except (IndexError, ValueError) as exc:
        raise GroupValidationError(f"bad group spec {text!r}: {exc}") from exc
    raise GroupValidationError(f"unknown group constructor {head!r}")
