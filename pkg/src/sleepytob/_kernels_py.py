"""Pure-Python kernels. Same signatures as the compiled ``_ckernels`` module."""


def prefix_support(paths, weights):
    """Weighted count of paths through each block id.

    ``paths`` is a sequence of block-id tuples (each a log), ``weights`` the
    number of supporters holding that exact log. Since block ids are unique,
    the count for block ``b`` is the support of the log ending at ``b``.
    """
    counts = {}
    for path, w in zip(paths, weights):
        for b in path:
            counts[b] = counts.get(b, 0) + w
    return counts


def last_asleep(awake):
    """For every (validator, tick), the latest tick <= t at which it slept.

    ``awake`` is a list of per-validator 0/1 rows. Ticks with no earlier
    sleep map to -1.
    """
    out = []
    for row in awake:
        last = -1
        res = [0] * len(row)
        for t, a in enumerate(row):
            if not a:
                last = t
            res[t] = last
        out.append(res)
    return out


def window_counts(last, corrupt_at, t_s, t_c, t_b, horizon):
    """Per-tick honest/adversarial counts for the sleepy-model inequality.

    For t in [0, horizon) returns ``h[t]`` = number of validators awake
    throughout [max(0, t - t_s), t] and not corrupted by t + t_c, and
    ``f[t]`` = number corrupted by t + t_b. ``last`` comes from
    :func:`last_asleep`; ticks beyond its width count as asleep.
    """
    n = len(corrupt_at)
    width = len(last[0]) if n else 0
    h = [0] * horizon
    f = [0] * horizon
    for t in range(horizon):
        lo = t - t_s
        if lo < 0:
            lo = 0
        tc = t + t_c
        tb = t + t_b
        hc = 0
        fc = 0
        for v in range(n):
            c = corrupt_at[v]
            if c <= tb:
                fc += 1
            if c > tc and t < width and last[v][t] < lo:
                hc += 1
        h[t] = hc
        f[t] = fc
    return h, f
