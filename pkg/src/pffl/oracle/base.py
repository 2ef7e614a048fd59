import threading

import numpy as np

from ..errors import BudgetExhausted, ShapeMismatch


class QueryLedger:
    """Thread-safe query counter with an optional budget.

    Calls reserve a slot before running and commit it afterwards, so the
    budget is never overrun by concurrent callers and ``count`` only ever
    reflects completed queries.
    """

    def __init__(self, budget=None):
        if budget is not None and budget < 1:
            raise ValueError("budget must be a positive integer")
        self.budget = budget
        self._count = 0
        self._pending = 0
        self._lock = threading.Lock()

    @property
    def count(self):
        with self._lock:
            return self._count

    def reserve(self):
        with self._lock:
            if self.budget is not None and self._count + self._pending >= self.budget:
                raise BudgetExhausted(f"query budget of {self.budget} exhausted")
            self._pending += 1

    def commit(self):
        with self._lock:
            self._pending -= 1
            self._count += 1

    def abort(self):
        with self._lock:
            self._pending -= 1

    @property
    def remaining(self):
        if self.budget is None:
            return None
        with self._lock:
            return self.budget - self._count - self._pending


class HardLabelOracle:
    """Top-1 label oracle.  Subclasses implement ``_predict``."""

    input_shape = None
    num_classes = None

    def __init__(self, budget=None):
        self.ledger = QueryLedger(budget)

    def classify(self, img):
        img = np.asarray(img)
        if self.input_shape is not None and tuple(img.shape) != tuple(self.input_shape):
            raise ShapeMismatch(f"oracle expects {tuple(self.input_shape)}, got {img.shape}")
        self.ledger.reserve()
        try:
            label = int(self._predict(img))
        except BaseException:
            self.ledger.abort()
            raise
        self.ledger.commit()
        return label

    def query_count(self):
        return self.ledger.count

    def peek(self, img):
        """Uncounted prediction, for verification only; not part of the threat model."""
        return int(self._predict(np.asarray(img)))

    def fork(self, budget=None):
        """Same classifier with a fresh ledger."""
        raise NotImplementedError

    def _predict(self, img):
        raise NotImplementedError
