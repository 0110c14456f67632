"""Independent set-based model of vector recovery, used as a test oracle."""

from __future__ import annotations

MOD = 1 << 16


def signed(a: int, b: int) -> int:
    d = (a - b) % MOD
    return d - MOD if d >= MOD // 2 else d


def replay(seqs, window: int) -> list[bool]:
    anchor, seen, fresh = None, set(), True
    out = []
    for s in seqs:
        if fresh:
            anchor, seen, fresh = s, {s}, False
            out.append(True)
            continue
        d = signed(s, anchor)
        if 0 < d <= window:
            anchor = s
            seen = {x for x in seen | {s} if 0 <= signed(anchor, x) < window}
            out.append(True)
        elif -window < d <= 0:
            out.append(s not in seen)
            seen.add(s)
        else:
            out.append(False)
    return out
