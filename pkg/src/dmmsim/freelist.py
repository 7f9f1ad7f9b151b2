"""Single free list: container, allocation mechanism, policy, cost model.

Every operation returns a CostDelta. The cost rule for scans is one time
unit and two memory accesses per node visited (one access for the node
link, one for the size field). Structure-specific insert/unlink costs:

    SLL    insert head or tail (tail anchor) 1/2, unlink 1/2
    DLL    insert 1/4, unlink 1/4
    BTREE  per-node descent visits + link/unlink 1/3

Block sizes are gross (headers included); header bytes per structure are
one machine word per link (SLL 8, DLL 16, BTREE 24 with 8-byte words).
"""

from __future__ import annotations

from collections import deque
from enum import Enum
from typing import Iterator, NamedTuple


class DataStructure(Enum):
    SLL = "SLL"
    DLL = "DLL"
    BTREE = "BTREE"


class Mechanism(Enum):
    FIRST = "FIRST"
    BEST = "BEST"
    EXACT = "EXACT"
    FARTHEST = "FARTHEST"


class Policy(Enum):
    FIFO = "FIFO"
    LIFO = "LIFO"


DEFAULT_WORD_IN_B = 8
HEADER_WORDS = {DataStructure.SLL: 1, DataStructure.DLL: 2, DataStructure.BTREE: 3}


def header_bytes(ds: DataStructure, word_in_b: int = DEFAULT_WORD_IN_B) -> int:
    return HEADER_WORDS[ds] * word_in_b


class CostDelta(NamedTuple):
    time_units: int
    mem_accesses: int

    def __add__(self, other: "CostDelta") -> "CostDelta":  # type: ignore[override]
        return CostDelta(self.time_units + other.time_units,
                         self.mem_accesses + other.mem_accesses)


ZERO_COST = CostDelta(0, 0)
_VISIT = CostDelta(1, 2)
_SLL_LINK = CostDelta(1, 2)
_DLL_LINK = CostDelta(1, 4)
_BTREE_LINK = CostDelta(1, 3)
_LINK_COST = {
    DataStructure.SLL: _SLL_LINK,
    DataStructure.DLL: _DLL_LINK,
    DataStructure.BTREE: _BTREE_LINK,
}


class Block:
    """A simulated memory block; size is gross bytes including the header."""

    __slots__ = ("creation_time", "position", "size_in_b", "header_in_b",
                 "owner_list_id", "owner_alloc", "touches", "live")

    def __init__(self, position: int, size_in_b: int, header_in_b: int = 0,
                 creation_time: int = 0):
        if size_in_b < header_in_b or header_in_b < 0 or position < 0:
            raise ValueError(f"bad block geometry pos={position} size={size_in_b} "
                             f"header={header_in_b}")
        self.creation_time = creation_time
        self.position = position
        self.size_in_b = size_in_b
        self.header_in_b = header_in_b
        self.owner_list_id = -1
        self.owner_alloc = -1
        self.touches = 0
        self.live = False

    def __repr__(self) -> str:
        return (f"Block(pos={self.position}, size={self.size_in_b}, "
                f"header={self.header_in_b}, t={self.creation_time})")


class _TreeNode:
    __slots__ = ("key", "block", "left", "right")

    def __init__(self, key, block):
        self.key = key
        self.block = block
        self.left: _TreeNode | None = None
        self.right: _TreeNode | None = None


class _SizeTree:
    """Unbalanced BST keyed by (size, policy tiebreak, position)."""

    __slots__ = ("root", "count")

    def __init__(self):
        self.root: _TreeNode | None = None
        self.count = 0

    def insert(self, key, block) -> int:
        new = _TreeNode(key, block)
        self.count += 1
        node = self.root
        if node is None:
            self.root = new
            return 0
        visits = 0
        while True:
            visits += 1
            if key < node.key:
                if node.left is None:
                    node.left = new
                    return visits
                node = node.left
            else:
                if node.right is None:
                    node.right = new
                    return visits
                node = node.right

    def _delete(self, node: _TreeNode, parent: _TreeNode | None) -> int:
        # Returns extra visits spent locating a two-child node's successor.
        visits = 0
        if node.left is not None and node.right is not None:
            sparent, succ = node, node.right
            visits += 1
            while succ.left is not None:
                sparent, succ = succ, succ.left
                visits += 1
            node.key, node.block = succ.key, succ.block
            node, parent = succ, sparent
        child = node.left if node.left is not None else node.right
        if parent is None:
            self.root = child
        elif parent.left is node:
            parent.left = child
        else:
            parent.right = child
        self.count -= 1
        return visits

    def extract_least_ge(self, min_size: int) -> tuple[Block | None, int]:
        """Remove and return the least-keyed block with size >= min_size."""
        visits = 0
        node, parent = self.root, None
        cand = cand_parent = None
        while node is not None:
            visits += 1
            if node.key[0] >= min_size:
                cand, cand_parent = node, parent
                parent, node = node, node.left
            else:
                parent, node = node, node.right
        if cand is None:
            return None, visits
        block = cand.block
        visits += self._delete(cand, cand_parent)
        return block, visits

    def extract_exact_size(self, size: int) -> tuple[Block | None, int]:
        visits = 0
        node, parent = self.root, None
        cand = cand_parent = None
        while node is not None:
            visits += 1
            if node.key[0] >= size:
                cand, cand_parent = node, parent
                parent, node = node, node.left
            else:
                parent, node = node, node.right
        if cand is None or cand.key[0] != size:
            return None, visits
        block = cand.block
        visits += self._delete(cand, cand_parent)
        return block, visits

    def extract_key(self, key) -> tuple[Block | None, int]:
        visits = 0
        node, parent = self.root, None
        while node is not None:
            visits += 1
            if key == node.key:
                block = node.block
                visits += self._delete(node, parent)
                return block, visits
            parent = node
            node = node.left if key < node.key else node.right
        return None, visits

    def walk(self) -> Iterator[Block]:
        stack: list[_TreeNode] = []
        node = self.root
        while stack or node is not None:
            while node is not None:
                stack.append(node)
                node = node.left
            node = stack.pop()
            yield node.block
            node = node.right


class FreeList:
    """One free list over a half-open size interval (lo, hi]."""

    __slots__ = ("list_id", "ds", "mechanism", "policy", "lo", "hi", "class_size",
                 "header_in_b", "open_ended", "_deque", "_tree", "free_bytes",
                 "farthest_fallbacks", "_link_cost")

    def __init__(self, list_id: int, ds: DataStructure, mechanism: Mechanism,
                 policy: Policy, lo: int, hi: int, class_size: int | None = None,
                 header_in_b: int | None = None, word_in_b: int = DEFAULT_WORD_IN_B,
                 open_ended: bool = False):
        if not 0 <= lo < hi:
            raise ValueError(f"bad range ({lo}, {hi}]")
        self.list_id = list_id
        self.ds = ds
        self.mechanism = mechanism
        self.policy = policy
        self.lo = lo
        self.hi = hi
        self.class_size = class_size
        self.header_in_b = header_bytes(ds, word_in_b) if header_in_b is None else header_in_b
        self.open_ended = open_ended  # top list of an allocator accepts oversize merges
        self._link_cost = _LINK_COST[ds]
        self._deque: deque[Block] | None = deque() if ds is not DataStructure.BTREE else None
        self._tree: _SizeTree | None = _SizeTree() if ds is DataStructure.BTREE else None
        self.free_bytes = 0
        self.farthest_fallbacks = 0

    def __len__(self) -> int:
        return self._tree.count if self._tree is not None else len(self._deque)

    def iter_blocks(self) -> Iterator[Block]:
        return self._tree.walk() if self._tree is not None else iter(self._deque)

    def _tie(self, block: Block) -> tuple:
        t = block.creation_time if self.policy is Policy.FIFO else -block.creation_time
        return (block.size_in_b, t, block.position)

    def insert(self, block: Block) -> CostDelta:
        """Store a free block; FIFO appends at the logical tail, LIFO at the head."""
        usable = block.size_in_b - self.header_in_b
        if usable <= self.lo or (usable > self.hi and not self.open_ended):
            raise ValueError(f"block size {block.size_in_b} out of range "
                             f"({self.lo}, {self.hi}] (+{self.header_in_b}B header)")
        block.owner_list_id = self.list_id
        self.free_bytes += block.size_in_b
        if self._tree is not None:
            visits = self._tree.insert(self._tie(block), block)
            return CostDelta(visits, 2 * visits) + _BTREE_LINK
        if self.policy is Policy.FIFO:
            self._deque.append(block)
        else:
            self._deque.appendleft(block)
        return _SLL_LINK if self.ds is DataStructure.SLL else _DLL_LINK

    def extract(self, need_in_b: int,
                hottest_pos: int | None = None) -> tuple[Block | None, CostDelta]:
        """Remove a block able to serve `need_in_b` per the list's mechanism.

        FIRST takes the first fitting block in traversal order, BEST the
        smallest fitting one (full scan on linked lists, ordered descent on
        trees), EXACT only a block of exactly the class gross size, and
        FARTHEST the fitting block farthest from `hottest_pos` (full scan).
        FARTHEST without a hottest position falls back to FIRST and records
        the fallback.
        """
        if need_in_b < 1:
            raise ValueError("need_in_b must be >= 1")
        mech = self.mechanism
        if mech is Mechanism.FARTHEST and hottest_pos is None:
            self.farthest_fallbacks += 1
            mech = Mechanism.FIRST
        if self._tree is not None:
            return self._extract_tree(mech, need_in_b, hottest_pos)
        return self._extract_linked(mech, need_in_b, hottest_pos)

    def _exact_target(self, need_in_b: int) -> int:
        base = self.class_size if self.class_size is not None else need_in_b
        return base + self.header_in_b

    def _extract_tree(self, mech: Mechanism, need: int,
                      hottest: int | None) -> tuple[Block | None, CostDelta]:
        tree = self._tree
        if mech is Mechanism.EXACT:
            block, visits = tree.extract_exact_size(self._exact_target(need))
        elif mech is Mechanism.FARTHEST:
            best = None
            dist = -1
            visits = 0
            for b in tree.walk():
                visits += 1
                if b.size_in_b >= need and abs(b.position - hottest) > dist:
                    best, dist = b, abs(b.position - hottest)
            if best is None:
                return None, CostDelta(visits, 2 * visits)
            _, more = tree.extract_key(self._tie(best))
            visits += more
            block = best
        else:  # FIRST and BEST both resolve to the least fitting key
            block, visits = tree.extract_least_ge(need)
        cost = CostDelta(visits, 2 * visits)
        if block is None:
            return None, cost
        self.free_bytes -= block.size_in_b
        return block, cost + _BTREE_LINK

    def _extract_linked(self, mech: Mechanism, need: int,
                        hottest: int | None) -> tuple[Block | None, CostDelta]:
        dq = self._deque
        idx = -1
        visits = 0
        if mech is Mechanism.FIRST:
            for i, b in enumerate(dq):
                visits += 1
                if b.size_in_b >= need:
                    idx = i
                    break
        elif mech is Mechanism.EXACT:
            target = self._exact_target(need)
            for i, b in enumerate(dq):
                visits += 1
                if b.size_in_b == target:
                    idx = i
                    break
        elif mech is Mechanism.BEST:
            best_size = None
            for i, b in enumerate(dq):
                visits += 1
                if b.size_in_b >= need and (best_size is None or b.size_in_b < best_size):
                    best_size, idx = b.size_in_b, i
        else:  # FARTHEST
            dist = -1
            for i, b in enumerate(dq):
                visits += 1
                if b.size_in_b >= need and abs(b.position - hottest) > dist:
                    dist, idx = abs(b.position - hottest), i
        cost = CostDelta(visits, 2 * visits)
        if idx < 0:
            return None, cost
        if idx == 0:
            block = dq.popleft()
        else:
            block = dq[idx]
            del dq[idx]
        self.free_bytes -= block.size_in_b
        return block, cost + self._link_cost

    def remove_block(self, block: Block) -> CostDelta:
        """Unlink a specific known block (coalescing path).

        SLL charges a locate scan (predecessor search); DLL unlinks the held
        node directly; BTREE descends to the node's key.
        """
        if self._tree is not None:
            got, visits = self._tree.extract_key(self._tie(block))
            if got is None:
                raise KeyError(f"block not in list: {block!r}")
            self.free_bytes -= block.size_in_b
            return CostDelta(visits, 2 * visits) + _BTREE_LINK
        dq = self._deque
        if self.ds is DataStructure.SLL:
            for i, b in enumerate(dq):
                if b is block:
                    del dq[i]
                    self.free_bytes -= block.size_in_b
                    return CostDelta(i + 1, 2 * (i + 1)) + _SLL_LINK
            raise KeyError(f"block not in list: {block!r}")
        try:
            dq.remove(block)
        except ValueError:
            raise KeyError(f"block not in list: {block!r}") from None
        self.free_bytes -= block.size_in_b
        return _DLL_LINK
