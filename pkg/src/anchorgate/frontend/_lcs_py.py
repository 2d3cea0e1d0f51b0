"""Pure-Python longest-common-subsequence length over integer sequences."""


def lcs_length(a: list[int], b: list[int]) -> int:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        left = 0
        for j, y in enumerate(b):
            if x == y:
                left = prev[j] + 1
            else:
                up = prev[j + 1]
                if up > left:
                    left = up
            cur.append(left)
        prev = cur
    return prev[-1]
