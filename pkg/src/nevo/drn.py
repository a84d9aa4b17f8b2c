"""Dynamic recurrent network: a graph of scalar tanh nodes that grows and shrinks.

Nodes are evaluated in a fixed total order: inputs, then hidden nodes, then
outputs, each segment in creation order.  New nodes are appended to the end of
their segment, so the relative order of two existing nodes never changes.  A
connection whose source evaluates strictly before its destination delivers the
source's value from the current pass; any other connection (backward,
same-segment-later or self) delivers the value buffered from the previous pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import tanh

from .errors import ConfigError, ContractError

INPUT = "input"
HIDDEN = "hidden"
OUTPUT = "output"

MUTATIONS = ("grow_connection", "prune_connection", "grow_node", "prune_node")

PERTURB_STD = 0.1  # variance 0.01


@dataclass(slots=True)
class Connection:
    src: int
    dst: int
    weight: float
    same_pass: bool


class DrnGraph:
    """Layered directed graph with same-pass and next-pass connections.

    Attributes:
        inputs, hidden, outputs: node ids per segment, in creation order.
        bias: bias of every non-input node.
        connections: all connections in creation order.  Parallel duplicates
            are allowed.
    """

    def __init__(self):
        self.inputs: list[int] = []
        self.hidden: list[int] = []
        self.outputs: list[int] = []
        self.bias: dict[int, float] = {}
        self.connections: list[Connection] = []
        self.next_id = 0
        self._plan = None
        self._state_ids: list[int] = []
        self._state: list[float] = []

    @classmethod
    def new(cls, n_in: int, n_out: int, rng) -> "DrnGraph":
        """Fresh graph with no hidden nodes and no connections."""
        if n_out < 1:
            raise ConfigError("a DRN needs at least one output node")
        if n_in < 0:
            raise ConfigError("negative input count")
        g = cls()
        for _ in range(n_in):
            g.inputs.append(g._new_id())
        for _ in range(n_out):
            nid = g._new_id()
            g.outputs.append(nid)
            g.bias[nid] = rng.normal()
        return g

    def _new_id(self) -> int:
        nid = self.next_id
        self.next_id += 1
        return nid

    def _touch(self):
        self._plan = None

    # ------------------------------------------------------------------
    # views

    def order(self) -> list[int]:
        return self.inputs + self.hidden + self.outputs

    def position(self) -> dict[int, int]:
        return {nid: i for i, nid in enumerate(self.order())}

    def role(self, nid: int) -> str:
        if nid in self.bias:
            return HIDDEN if nid in self.hidden else OUTPUT
        if nid in self.inputs:
            return INPUT
        raise KeyError(nid)

    def targets(self) -> list[int]:
        """Hidden and output nodes, i.e. every legal connection destination."""
        return self.hidden + self.outputs

    def _degrees(self):
        indeg: dict[int, int] = {}
        outdeg: dict[int, int] = {}
        for c in self.connections:
            indeg[c.dst] = indeg.get(c.dst, 0) + 1
            outdeg[c.src] = outdeg.get(c.src, 0) + 1
        return indeg, outdeg

    def receiving_nodes(self) -> list[int]:
        """All input nodes plus every node with at least one in-connection."""
        indeg, _ = self._degrees()
        return self.inputs + [n for n in self.targets() if n in indeg]

    def emitting_nodes(self) -> list[int]:
        """Multiset of sources, one entry per out-connection, in evaluation order."""
        pos = self.position()
        return sorted((c.src for c in self.connections), key=pos.__getitem__)

    def out_nodes(self, nid: int) -> list[int]:
        pos = self.position()
        return sorted({c.dst for c in self.connections if c.src == nid}, key=pos.__getitem__)

    def n_nodes(self) -> int:
        return len(self.inputs) + len(self.hidden) + len(self.outputs)

    # ------------------------------------------------------------------
    # primitive edits

    def add_connection(self, src: int, dst: int, weight: float) -> Connection:
        if dst in self.inputs:
            raise ContractError("connections may not enter an input node")
        pos = self.position()
        conn = Connection(src, dst, float(weight), pos[src] < pos[dst])
        self.connections.append(conn)
        self._touch()
        return conn

    def add_hidden(self, bias: float) -> int:
        nid = self._new_id()
        self.hidden.append(nid)
        self.bias[nid] = float(bias)
        self._touch()
        return nid

    def _remove_nodes(self, dead: set[int]):
        self.connections = [c for c in self.connections if c.src not in dead and c.dst not in dead]
        self.hidden = [h for h in self.hidden if h not in dead]
        self.inputs = [i for i in self.inputs if i not in dead]
        for nid in dead:
            self.bias.pop(nid, None)
        self._touch()

    def cascade(self) -> list[int]:
        """Delete hidden nodes lacking an in- or out-connection, to fixpoint."""
        removed: list[int] = []
        while True:
            indeg, outdeg = self._degrees()
            dead = [h for h in self.hidden if h not in indeg or h not in outdeg]
            if not dead:
                return removed
            removed.extend(dead)
            self._remove_nodes(set(dead))

    # ------------------------------------------------------------------
    # structural mutations; each returns False, consuming no draws, when
    # inapplicable

    def can_grow_connection(self) -> bool:
        return bool(self.inputs) or bool(self.connections)

    def can_prune_connection(self) -> bool:
        return bool(self.connections)

    def can_grow_node(self) -> bool:
        return len(self.receiving_nodes()) >= 2

    def can_prune_node(self) -> bool:
        return bool(self.hidden)

    def applicable(self, name: str) -> bool:
        return getattr(self, "can_" + name)()

    def sample_grow_connection(self, rng) -> tuple[int, int]:
        src = rng.choice(self.receiving_nodes())
        dst = rng.choice(self.targets())
        return src, dst

    def grow_connection(self, rng) -> bool:
        if not self.can_grow_connection():
            return False
        src, dst = self.sample_grow_connection(rng)
        self.add_connection(src, dst, rng.normal())
        return True

    def sample_prune_connection(self, rng) -> tuple[int, int]:
        src = rng.choice(self.emitting_nodes())
        dst = rng.choice(self.out_nodes(src))
        return src, dst

    def prune_connection(self, rng) -> bool:
        if not self.can_prune_connection():
            return False
        src, dst = self.sample_prune_connection(rng)
        for i, c in enumerate(self.connections):
            if c.src == src and c.dst == dst:
                del self.connections[i]
                break
        self._touch()
        self.cascade()
        return True

    def sample_grow_node(self, rng) -> tuple[int, int, int]:
        receiving = self.receiving_nodes()
        a = rng.choice(receiving)
        b = rng.choice([n for n in receiving if n != a])
        c = rng.choice(self.targets())
        return a, b, c

    def grow_node(self, rng) -> bool:
        if not self.can_grow_node():
            return False
        a, b, c = self.sample_grow_node(rng)
        h = self.add_hidden(rng.normal())
        self.add_connection(a, h, rng.normal())
        self.add_connection(b, h, rng.normal())
        self.add_connection(h, c, rng.normal())
        return True

    def prune_node(self, rng) -> bool:
        if not self.can_prune_node():
            return False
        self._remove_nodes({rng.choice(self.hidden)})
        self.cascade()
        return True

    def mutate(self, name: str, rng) -> bool:
        return getattr(self, name)(rng)

    # ------------------------------------------------------------------
    # input management for the convolutional front-end

    def add_input_node(self, rng) -> int:
        """New input node wired to one uniformly sampled hidden/output node."""
        nid = self._new_id()
        self.inputs.append(nid)
        self._touch()
        self.add_connection(nid, rng.choice(self.targets()), rng.normal())
        return nid

    def remove_input_node(self, nid: int):
        if nid not in self.inputs:
            raise ContractError(f"node {nid} is not an input node")
        self._remove_nodes({nid})
        self.cascade()

    # ------------------------------------------------------------------
    # weights

    def n_params(self) -> int:
        return len(self.connections) + len(self.bias)

    def perturb(self, rng, std: float = PERTURB_STD):
        """Add N(0, std**2) noise to every weight, then every bias in evaluation order."""
        n = self.n_params()
        if n == 0:
            return
        deltas = (rng.normal(n) * std).tolist()
        for c, d in zip(self.connections, deltas):
            c.weight += d
        for nid, d in zip(self.targets(), deltas[len(self.connections):]):
            self.bias[nid] += d
        self._touch()

    # ------------------------------------------------------------------
    # forward pass

    def _compile(self):
        order = self.order()
        pos = {nid: i for i, nid in enumerate(order)}
        incoming: dict[int, tuple[list, list]] = {nid: ([], []) for nid in self.targets()}
        for c in self.connections:
            same, nxt = incoming[c.dst]
            (same if c.same_pass else nxt).append((pos[c.src], c.weight))
        body = [(pos[nid], self.bias[nid], tuple(incoming[nid][0]), tuple(incoming[nid][1]))
                for nid in self.targets()]
        old = self.state_buffer
        self._plan = (order, len(self.inputs), body)
        self._state_ids = order
        self._state = [old.get(nid, 0.0) for nid in order]
        return self._plan

    @property
    def state_buffer(self) -> dict[int, float]:
        """Last emitted value of every node, keyed by node id."""
        return dict(zip(self._state_ids, self._state))

    def reset(self):
        """Zero the recurrent state buffer."""
        plan = self._plan or self._compile()
        self._state = [0.0] * len(plan[0])

    def forward(self, inputs) -> list[float]:
        plan = self._plan or self._compile()
        order, n_in, body = plan
        if len(inputs) != n_in:
            raise ContractError(f"expected {n_in} inputs, got {len(inputs)}")
        prev = self._state
        cur = [0.0] * len(order)
        cur[:n_in] = [float(x) for x in inputs]
        for p, b, same, nxt in body:
            s = b
            for q, w in same:
                s += w * cur[q]
            for q, w in nxt:
                s += w * prev[q]
            cur[p] = tanh(s)
        self._state = cur
        return cur[len(order) - len(self.outputs):]

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_plan"] = None
        state["_state_ids"] = []
        state["_state"] = []
        return state

    def __repr__(self):
        return (f"DrnGraph(inputs={len(self.inputs)}, hidden={len(self.hidden)}, "
                f"outputs={len(self.outputs)}, connections={len(self.connections)})")
