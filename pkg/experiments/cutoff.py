"""
Adaptive Fock cutoff: a run is repeated on a geometric ladder of cutoffs until its reported scalars
stop moving.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

from cqed.exceptions import ConfigError, CutoffError


@dataclass(frozen=True)
class CutoffPolicy:
    initial: int = 12
    growth: float = 1.5
    threshold: float = 1e-4
    max_escalations: int = 5

    def __post_init__(self):
        if int(self.initial) != self.initial or self.initial < 8:
            raise ConfigError("The initial cutoff must be an integer >= 8, got %r" % self.initial,
                              cutoff=self.initial)
        if not self.growth > 1:
            raise ConfigError("The cutoff growth factor must be > 1, got %r" % self.growth,
                              cutoff_growth=self.growth)
        if not self.threshold > 0:
            raise ConfigError("The convergence threshold must be positive, got %r" %
                              self.threshold, cutoff_threshold=self.threshold)
        if int(self.max_escalations) != self.max_escalations or self.max_escalations < 1:
            raise ConfigError("max_escalations must be a positive integer, got %r" %
                              self.max_escalations, cutoff_max_escalations=self.max_escalations)

    def next_cutoff(self, fock_cutoff: int) -> int:
        return max(fock_cutoff + 1, int(math.ceil(fock_cutoff * self.growth)))


@dataclass
class CutoffRun:
    """ What a run closure returns: its full result and the scalars watched for convergence. """
    result: Any
    scalars: Dict[str, float]


@dataclass
class CutoffResult:
    result: Any
    # Smallest cutoff whose scalars were confirmed by the next rung of the ladder
    fock_cutoff: int
    # Cutoff the returned result was computed at
    final_cutoff: int
    ladder: List[int] = field(default_factory=list)
    scalars: List[Optional[Dict[str, float]]] = field(default_factory=list)
    deltas: List[float] = field(default_factory=list)

    def describe(self) -> Dict[str, str]:
        """ Ladder summary for the run manifest. """
        summary = {"converged_cutoff": str(self.fock_cutoff),
                   "ladder": " -> ".join(map(str, self.ladder))}
        for i, delta in enumerate(self.deltas):
            summary["delta_%d_%d" % (self.ladder[i], self.ladder[i + 1])] = "%.3e" % delta
        return summary


def relative_change(before: Dict[str, float], after: Dict[str, float], floor=1e-6) -> float:
    """
    Largest |a - b| / max(|a|, |b|, floor) over the watched scalars. Scalars that vanish up to the
    floor are thereby compared in absolute terms.
    """
    if before is None or after is None or set(before) != set(after):
        return math.inf
    change = 0.0
    for name, a in before.items():
        b = after[name]
        if not (math.isfinite(a) and math.isfinite(b)):
            return math.inf
        change = max(change, abs(a - b) / max(abs(a), abs(b), floor))
    return change


def adaptive_cutoff(run: Callable[[int], CutoffRun], policy: CutoffPolicy,
                    verbose=True) -> CutoffResult:
    """
    Calls run(N_F) for N_F = initial, growth * initial, ... until every scalar changes by less than
    policy.threshold between two successive cutoffs. A rung that raises CutoffError counts as
    unconverged.

    :return: the result of the larger cutoff of the converged pair
    """
    def attempt(fock_cutoff):
        try:
            return run(fock_cutoff)
        except CutoffError as e:
            if verbose:
                print("N_F=%d is too small: %s" % (fock_cutoff, e))
            return None

    ladder = [policy.initial]
    current = attempt(policy.initial)
    runs = [current]
    deltas = []
    for _ in range(policy.max_escalations):
        fock_cutoff = policy.next_cutoff(ladder[-1])
        if verbose:
            print("Checking cutoff convergence at N_F=%d" % fock_cutoff)
        following = attempt(fock_cutoff)
        delta = relative_change(current and current.scalars, following and following.scalars)
        ladder.append(fock_cutoff)
        runs.append(following)
        deltas.append(delta)
        if delta < policy.threshold:
            return CutoffResult(following.result, ladder[-2], fock_cutoff, ladder,
                                [r and r.scalars for r in runs], deltas)
        if verbose:
            print("Escalating cutoff: max relative change %.2e at N_F=%d" % (delta, fock_cutoff))
        current = following

    raise CutoffError("No convergence after %d escalations (ladder %s, last change %.2e)" %
                      (policy.max_escalations, ladder, deltas[-1]),
                      ladder=ladder, deltas=deltas)
