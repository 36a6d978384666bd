"""Integer helpers."""


def clamp(x, lo, hi):
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def mean(values):
    total = 0
    for v in values:
        total += v
    return total / len(values)


def digit_sum(n):
    total = 0
    while n > 0:
        total += n % 10
        n = n // 10
    return total


def parse_int(text):
    text = text.strip()
    sign = 1
    if text.startswith("-"):
        sign = -1
        text = text[1:]
    value = 0
    for ch in text:
        if ch < "0" or ch > "9":
            raise ValueError(text)
        value = value * 10 + (ord(ch) - 48)
    return sign * value


def percent(part, whole):
    if whole == 0:
        return 0.0
    return 100.0 * part / whole
