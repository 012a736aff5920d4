from tqdm import auto as tqdm_lib


def tqdm(iterable=None, desc=None, total=None, initial=0, leave=True):
    return tqdm_lib.tqdm(iterable=iterable, desc=desc, total=total, initial=initial, leave=leave)


def maybe_tqdm(iterable=None, desc=None, total=None, initial=0, verbose=True):
    if verbose:
        return tqdm(iterable=iterable, desc=desc, total=total, initial=initial, leave=False)
    else:
        return iterable


def text_histogram(counts, edges, width=50) -> str:
    """Renders histogram bins as fixed-width text bars, one line per bin."""
    peak = max(max(counts), 1)
    lines = []
    for count, lo, hi in zip(counts, edges[:-1], edges[1:]):
        bar = "#" * int(round(width * count / peak))
        lines.append(f"[{lo:.2f}, {hi:.2f}) {count:>8d} {bar}")
    return "\n".join(lines)
