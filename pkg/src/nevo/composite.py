"""A DCN front-end feeding a DRN back-end.

Every DCN leaf owns exactly one DRN input node.  Growing a DCN branch grows a
matching DRN input wired to a random hidden/output node; pruning a branch
removes the DRN inputs of every leaf it deleted.  Optional ``n_extra`` DRN
inputs, created up front and never removed, carry side information such as a
one-hot action for discriminators.
"""

from __future__ import annotations

from . import dcn as dcn_mod
from . import drn as drn_mod
from .dcn import DcnTree
from .drn import DrnGraph
from .errors import ConfigError, ContractError

MUTATIONS = drn_mod.MUTATIONS + dcn_mod.MUTATIONS


class CompositeNet:
    def __init__(self, dcn: DcnTree, drn: DrnGraph, leaf_map: list[tuple[int, int]] | None = None,
                 n_extra: int = 0):
        self.dcn = dcn
        self.drn = drn
        self.leaf_map = list(leaf_map or [])
        self.n_extra = n_extra

    @classmethod
    def new(cls, c: int, h: int, w: int, n_out: int, rng, n_extra: int = 0) -> "CompositeNet":
        if n_out < 1:
            raise ConfigError("need at least one output")
        return cls(DcnTree((c, h, w)), DrnGraph.new(n_extra, n_out, rng), [], n_extra)

    @property
    def extra_inputs(self) -> list[int]:
        return self.drn.inputs[:self.n_extra]

    def applicable(self, name: str) -> bool:
        if name in drn_mod.MUTATIONS:
            return self.drn.applicable(name)
        if name == "grow_branch":
            return True
        if name == "prune_branch":
            return self.dcn.can_prune_branch()
        if name == "expand_node":
            return bool(self.dcn.expand_candidates())
        if name == "contract_node":
            return bool(self.dcn.contract_pool())
        raise KeyError(name)

    def mutate(self, name: str, rng) -> bool:
        if name in drn_mod.MUTATIONS:
            return self.drn.mutate(name, rng)
        if name == "grow_branch":
            created = self.dcn.grow_branch(rng)
            self.leaf_map.append((created[-1], self.drn.add_input_node(rng)))
            return True
        if name == "prune_branch":
            removed = self.dcn.prune_branch(rng)
            if removed is None:
                return False
            self._drop_leaves(removed)
            return True
        if name == "expand_node":
            return self.dcn.expand_node(rng) is not None
        if name == "contract_node":
            return self.dcn.contract_node(rng) is not None
        raise KeyError(name)

    def _drop_leaves(self, leaves):
        gone = set(leaves)
        for leaf, inp in self.leaf_map:
            if leaf in gone:
                self.drn.remove_input_node(inp)
        self.leaf_map = [(l, i) for l, i in self.leaf_map if l not in gone]

    def n_params(self) -> int:
        return self.dcn.n_params() + self.drn.n_params()

    def perturb(self, rng):
        self.dcn.perturb(rng)
        self.drn.perturb(rng)

    def reset(self):
        self.drn.reset()

    def drn_inputs(self, image, extra=()) -> list[float]:
        """DRN input vector: extras first, then one value per mapped leaf."""
        if len(extra) != self.n_extra:
            raise ContractError(f"expected {self.n_extra} extra inputs, got {len(extra)}")
        leaf_values = self.dcn.forward(image)
        return list(extra) + [leaf_values[leaf] for leaf, _ in self.leaf_map]

    def forward(self, image, extra=()) -> list[float]:
        return self.drn.forward(self.drn_inputs(image, extra))

    def __repr__(self):
        return f"CompositeNet({self.dcn!r}, {self.drn!r})"
