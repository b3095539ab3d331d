from time import perf_counter as timer
from collections import OrderedDict


class Profiler:
    """
    Wall-clock time per named stage. tick(name) charges the time elapsed since the previous tick
    (or since creation) to <name>; repeated stages accumulate.
    """
    def __init__(self, disabled=False):
        self.last_tick = timer()
        self.start = self.last_tick
        self.logs = OrderedDict()
        self.disabled = disabled

    def tick(self, name):
        if self.disabled:
            return

        if not name in self.logs:
            self.logs[name] = []
        self.logs[name].append(timer() - self.last_tick)

        self.reset_timer()

    def reset_timer(self):
        self.last_tick = timer()

    def totals(self):
        return OrderedDict((name, sum(deltas)) for name, deltas in self.logs.items())

    def elapsed(self):
        return timer() - self.start

    def summarize(self):
        print("\nWall-clock time per stage:")
        name_msgs = ["%s (%d):" % (name, len(deltas)) for name, deltas in self.logs.items()]
        if not name_msgs:
            return
        pad = max(map(len, name_msgs))
        for name_msg, total in zip(name_msgs, self.totals().values()):
            print("  %s  %8.2fs" % (name_msg.ljust(pad), total))
        print("", flush=True)
