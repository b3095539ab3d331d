from pathlib import Path
import numpy as np
import argparse

_type_priorities = [    # In decreasing order
    Path,
    str,
    int,
    float,
    bool,
]

def _priority(o):
    p = next((i for i, t in enumerate(_type_priorities) if type(o) is t), None)
    if p is not None:
        return p
    p = next((i for i, t in enumerate(_type_priorities) if isinstance(o, t)), None)
    if p is not None:
        return p
    return len(_type_priorities)

def format_params(params: dict, order=None, indent="    "):
    """
    Aligned "name: value" lines. Entries are sorted by their position in <order> when given,
    otherwise by value type (paths and strings first), then alphabetically.
    """
    if not params:
        return []
    if order is None:
        priorities = list(map(_priority, params.values()))
    else:
        priorities = [order.index(p) if p in order else len(order) for p in params.keys()]

    pad = max(map(len, params.keys())) + 3
    indices = np.lexsort((list(params.keys()), priorities))
    items = list(params.items())
    lines = []
    for i in indices:
        param, value = items[i]
        lines.append("{0}{1}:{2}{3}".format(indent, param, ' ' * (pad - len(param)), value))
    return lines

def print_args(args: argparse.Namespace, parser=None):
    order = None
    if parser is not None:
        order = [a.dest for g in parser._action_groups for a in g._group_actions]

    print("Arguments:")
    for line in format_params(vars(args), order):
        print(line)
    print("")
