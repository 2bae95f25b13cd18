"""
Static R-tree over PAA vectors built by Sort-Tile-Recursive bulk loading.
"""
import math
from dataclasses import dataclass

import numpy as np

from dtwindex.errors import InvariantError, UsageError
from dtwindex.paa import Mbr


@dataclass(frozen=True, eq=False)
class RTreeNode:
    """
    Leaves hold entry ids in children, internal nodes hold RTreeNode objects.
    size is the number of entries in the subtree.
    """
    box: Mbr
    children: tuple
    leaf: bool
    size: int


def _tile(order, centers, dim, capacity, groups):
    n = order.shape[0]
    ndim = centers.shape[1]
    if n <= capacity:
        groups.append(order)
        return
    order = order[np.argsort(centers[order, dim], kind='stable')]
    if dim == ndim - 1:
        for start in range(0, n, capacity):
            groups.append(order[start:start + capacity])
        return
    pages = math.ceil(n / capacity)
    slabs = math.ceil(pages ** (1.0 / (ndim - dim)))
    slab_size = capacity * math.ceil(pages / slabs)
    for start in range(0, n, slab_size):
        _tile(order[start:start + slab_size], centers, dim + 1, capacity, groups)


def str_pack(centers, capacity):
    """
    Partition rows of centers into groups of at most capacity rows: sort along the first axis, cut into slabs,
    recurse on the next axis inside every slab.
    :param centers: 2D array (k x d)
    :param capacity: max group size
    :return: list of index arrays in a deterministic order
    """
    centers = np.asarray(centers, dtype=np.float64)
    groups = []
    _tile(np.arange(centers.shape[0]), centers, 0, capacity, groups)
    return groups


def bulk_load(entry_ids, points, capacity):
    """
    :param entry_ids: sequence of int ids, one per row of points
    :param points: 2D array (k x n_paa) of PAA coordinates
    :param capacity: max number of children per node, >= 2
    :return: root RTreeNode
    """
    if capacity < 2:
        raise UsageError(f'node capacity must be at least 2, got {capacity}')
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0 or points.shape[0] != len(entry_ids):
        raise UsageError('bulk loading needs one PAA point per entry id and at least one entry')
    level = [RTreeNode(Mbr.of_points(points[g]), tuple(int(entry_ids[k]) for k in g), True, len(g))
             for g in str_pack(points, capacity)]
    while len(level) > 1:
        centers = np.array([node.box.center for node in level])
        level = [RTreeNode(Mbr.union([level[k].box for k in g]),
                           tuple(level[k] for k in g),
                           False,
                           sum(level[k].size for k in g))
                 for g in str_pack(centers, capacity)]
    return level[0]


def iter_preorder(root):
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        if not node.leaf:
            stack.extend(reversed(node.children))


def check_tree(root, points_by_id, capacity=None):
    """
    Verify that every node box is the tight bounding box of the PAA points below it
    :param points_by_id: mapping entry id -> coordinates
    :return: set of entry ids found in leaves
    """
    found = []

    def visit(node):
        if capacity is not None and len(node.children) > capacity:
            raise InvariantError(f'node with {len(node.children)} children exceeds capacity {capacity}')
        if node.leaf:
            pts = np.array([points_by_id[i] for i in node.children])
            found.extend(node.children)
        else:
            pts = np.concatenate([visit(child) for child in node.children])
        tight = Mbr.of_points(pts)
        if not (np.array_equal(tight.low, node.box.low) and np.array_equal(tight.high, node.box.high)):
            raise InvariantError('R-tree node box does not tightly bound its subtree')
        if node.size != pts.shape[0]:
            raise InvariantError('R-tree node size does not match its subtree')
        return pts

    visit(root)
    if len(found) != len(set(found)):
        raise InvariantError('an entry id appears in more than one leaf')
    return set(found)
