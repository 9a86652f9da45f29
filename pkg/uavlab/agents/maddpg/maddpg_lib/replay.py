"""Proportional prioritized experience replay backed by a sum tree."""
import dataclasses

import numpy as np


@dataclasses.dataclass
class Transition:
    """One joint transition, or a batch of them with a leading batch axis.

    Attributes
    ----------
    observations : np.ndarray
        Local observations of every agent, shape (N, obs).
    actions : np.ndarray
        Raw joint actions, shape (N, action).
    rewards : np.ndarray
        Per-agent rewards, shape (N,).
    next_observations : np.ndarray
        Local observations after the step.
    done : bool or np.ndarray
        Whether the step ended the episode.
    state : np.ndarray
        Global state before the step.
    next_state : np.ndarray
        Global state after the step.

    """

    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_observations: np.ndarray
    done: np.ndarray
    state: np.ndarray
    next_state: np.ndarray


FIELDS = tuple(field.name for field in dataclasses.fields(Transition))


class SumTree:
    """A complete binary tree whose internal nodes hold the sum of their children.

    Nodes are stored 1-indexed: the root is node 1, node n has children 2n and 2n + 1 and the
    leaves are nodes capacity to 2 * capacity - 1.

    Parameters
    ----------
    capacity : int
        The number of leaves, a power of two.

    """

    def __init__(self, capacity):
        """Create a tree whose leaves all hold zero."""
        if capacity < 1 or capacity & (capacity - 1):
            raise ValueError('capacity must be a power of two, got {}.'.format(capacity))
        self._capacity = capacity
        self._tree = np.zeros(2 * capacity)
        # The number of node reads and writes, for complexity checks.
        self.touches = 0

    @property
    def capacity(self):
        """Return the number of leaves."""
        return self._capacity

    @property
    def total(self):
        """Return the sum of all leaves."""
        return self._tree[1]

    @property
    def leaves(self):
        """Return a copy of the leaf values."""
        return self._tree[self._capacity:].copy()

    @property
    def nodes(self):
        """Return a copy of the node array (index 0 is unused)."""
        return self._tree.copy()

    def get(self, leaf):
        """Return the value of one leaf."""
        self._check_leaf(leaf)
        return self._tree[self._capacity + leaf]

    def update(self, leaf, value):
        """Set a leaf and refresh every node on its path to the root."""
        self._check_leaf(leaf)
        if value < 0:
            raise ValueError('Leaf values must be non-negative.')
        node = self._capacity + leaf
        self._tree[node] = value
        self.touches += 1
        node //= 2
        while node >= 1:
            self._tree[node] = self._tree[2 * node] + self._tree[2 * node + 1]
            self.touches += 1
            node //= 2

    def find(self, value):
        """Return the leaf whose cumulative range contains value.

        Descent never enters a subtree of zero mass, so leaves of zero value are never returned
        while the total is positive.
        """
        if self.total <= 0:
            raise ValueError('Cannot search a tree with zero total mass.')
        node = 1
        self.touches += 1
        while node < self._capacity:
            left = 2 * node
            left_mass = self._tree[left]
            right_mass = self._tree[left + 1]
            if left_mass > 0 and (value < left_mass or right_mass <= 0):
                node = left
            else:
                value -= left_mass
                node = left + 1
            self.touches += 1
        return node - self._capacity

    def find_many(self, values):
        """Run find for a batch of values, descending one level at a time."""
        if self.total <= 0:
            raise ValueError('Cannot search a tree with zero total mass.')
        values = np.array(values, dtype=np.float64).reshape(-1)
        nodes = np.ones(len(values), dtype=int)
        if not len(values):
            return nodes
        self.touches += len(values)
        while nodes[0] < self._capacity:
            left = 2 * nodes
            left_mass = self._tree[left]
            right_mass = self._tree[left + 1]
            go_left = (left_mass > 0) & ((values < left_mass) | (right_mass <= 0))
            values = np.where(go_left, values, values - left_mass)
            nodes = np.where(go_left, left, left + 1)
            self.touches += len(values)
        return nodes - self._capacity

    def get_many(self, leaves):
        """Return the values of several leaves."""
        leaves = np.asarray(leaves, dtype=int).reshape(-1)
        invalid = leaves[(leaves < 0) | (leaves >= self._capacity)]
        if len(invalid):
            self._check_leaf(invalid[0])
        return self._tree[self._capacity + leaves]

    def update_many(self, leaves, values):
        """Set several leaves, then refresh their ancestors level by level.

        A leaf listed more than once keeps its last value.
        """
        leaves = np.asarray(leaves, dtype=int).reshape(-1)
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if len(leaves) != len(values):
            raise ValueError('Got {} leaves for {} values.'.format(len(leaves), len(values)))
        invalid = leaves[(leaves < 0) | (leaves >= self._capacity)]
        if len(invalid):
            self._check_leaf(invalid[0])
        if np.any(values < 0):
            raise ValueError('Leaf values must be non-negative.')
        if not len(leaves):
            return
        _, last = np.unique(leaves[::-1], return_index=True)
        keep = len(leaves) - 1 - last
        nodes = self._capacity + leaves[keep]
        self._tree[nodes] = values[keep]
        self.touches += len(nodes)
        while nodes[0] > 1:
            nodes = np.unique(nodes // 2)
            self._tree[nodes] = self._tree[2 * nodes] + self._tree[2 * nodes + 1]
            self.touches += len(nodes)

    def rebuild(self):
        """Return the node array recomputed bottom-up from the leaves."""
        tree = self._tree.copy()
        for node in range(self._capacity - 1, 0, -1):
            tree[node] = tree[2 * node] + tree[2 * node + 1]
        return tree

    def _check_leaf(self, leaf):
        if not 0 <= leaf < self._capacity:
            raise IndexError('Leaf {} is out of range for capacity {}.'.format(
                leaf, self._capacity))


class PrioritizedReplay:
    """A ring buffer of joint transitions sampled in proportion to priority^alpha.

    Leaves store p^alpha directly, so alpha is fixed for the lifetime of the buffer.

    Parameters
    ----------
    capacity : int
        The number of transitions kept, a power of two.
    alpha : float
        The prioritization exponent. 0 gives uniform sampling.
    eps : float
        Added to |TD error| before exponentiation so no transition is starved.
    random : np.random.RandomState, optional
        The sampling stream.

    """

    def __init__(self, capacity, alpha=0.6, eps=1e-6, random=None):
        """Create an empty buffer."""
        if alpha < 0:
            raise ValueError('alpha must be non-negative.')
        if eps < 0:
            raise ValueError('eps must be non-negative.')
        self._tree = SumTree(capacity)
        self._alpha = alpha
        self._eps = eps
        self._random = random if random is not None else np.random.RandomState(0)
        self._storage = None
        self._cursor = 0
        self._size = 0
        self.max_priority = 1.0

    def __len__(self):
        """Return the number of stored transitions."""
        return self._size

    @property
    def capacity(self):
        """Return the buffer capacity."""
        return self._tree.capacity

    @property
    def alpha(self):
        """Return the prioritization exponent."""
        return self._alpha

    @property
    def tree(self):
        """Return the underlying sum tree."""
        return self._tree

    @property
    def random(self):
        """Return the sampling stream."""
        return self._random

    def push(self, transition):
        """Store a transition at the cursor with the largest priority seen so far."""
        if self._storage is None:
            self._storage = {name: np.zeros((self.capacity,) + np.shape(getattr(transition, name)),
                                            dtype=bool if name == 'done' else np.float64)
                             for name in FIELDS}
        for name in FIELDS:
            self._storage[name][self._cursor] = getattr(transition, name)
        self._tree.update(self._cursor, self.max_priority)
        self._cursor = (self._cursor + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size, beta):
        """Draw a stratified batch of transitions.

        Parameters
        ----------
        batch_size : int
            The number of transitions. The total priority mass is split into this many equal
            segments and one value is drawn uniformly from each.
        beta : float
            The importance-sampling exponent in [0, 1].

        Returns
        -------
        batch : Transition
            The sampled transitions stacked along a leading axis.
        indices : np.ndarray
            The buffer slots of the sampled transitions.
        weights : np.ndarray
            Importance-sampling weights (size * P(i))^-beta divided by their maximum.

        """
        if batch_size < 1:
            raise ValueError('batch_size must be positive.')
        if self._size < batch_size:
            raise ValueError('Cannot sample {} transitions from a buffer holding {}.'.format(
                batch_size, self._size))
        if not 0 <= beta <= 1:
            raise ValueError('beta must be in [0, 1].')
        total = self._tree.total
        segment = total / batch_size
        values = (np.arange(batch_size) + self._random.uniform(size=batch_size)) * segment
        indices = self._tree.find_many(values)
        probabilities = self._tree.get_many(indices) / total
        weights = (self._size * probabilities) ** (-beta)
        weights /= weights.max()
        batch = Transition(**{name: self._storage[name][indices].copy() for name in FIELDS})
        return batch, indices, weights

    def update_priorities(self, indices, td_errors):
        """Set the priority of sampled transitions to (|TD error| + eps)^alpha."""
        indices = np.asarray(indices, dtype=int).reshape(-1)
        td_errors = np.asarray(td_errors, dtype=float).reshape(-1)
        if len(indices) != len(td_errors):
            raise ValueError('Got {} indices for {} TD errors.'.format(
                len(indices), len(td_errors)))
        invalid = indices[(indices < 0) | (indices >= self._size)]
        if len(invalid):
            raise IndexError('Index {} does not hold a transition.'.format(invalid[0]))
        priorities = (np.abs(td_errors) + self._eps) ** self._alpha
        self._tree.update_many(indices, priorities)
        if len(priorities):
            self.max_priority = max(self.max_priority, float(priorities.max()))
