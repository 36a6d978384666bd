"""Integer geometry on a grid."""


def manhattan(x1, y1, x2, y2):
    dx = x1 - x2
    dy = y1 - y2
    if dx < 0:
        dx = -dx
    if dy < 0:
        dy = -dy
    return dx + dy


def rect_area(w, h):
    if w < 0 or h < 0:
        raise ValueError("negative size")
    return w * h


def perimeter(w, h):
    return 2 * (w + h)


def overlap(a_lo, a_hi, b_lo, b_hi):
    lo = max(a_lo, b_lo)
    hi = min(a_hi, b_hi)
    if hi > lo:
        return hi - lo
    return 0


def centroid_x(xs):
    total = 0
    for x in xs:
        total += x
    return total // len(xs)


def scale(x, num, den):
    if den == 0:
        raise ZeroDivisionError("den")
    return x * num // den


def quadrant(x, y):
    if x >= 0 and y >= 0:
        return 1
    if x < 0 and y >= 0:
        return 2
    if x < 0:
        return 3
    return 4


def bounding_width(xs):
    lo = xs[0]
    hi = xs[0]
    for x in xs:
        if x < lo:
            lo = x
        if x > hi:
            hi = x
    return hi - lo


def on_diagonal(x, y):
    return x == y or x == -y
