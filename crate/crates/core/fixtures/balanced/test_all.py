import sys

from calc import clamp, digit_sum, mean, parse_int
from textutil import count_words, pad_left


def test_clamp():
    low = clamp(-5, 0, 10)
    mid = clamp(5, 0, 10)
    assert low == 0
    assert mid == 5


def test_mean():
    m = mean([2, 4, 9])
    assert m == 5


def test_digit_sum():
    s = digit_sum(1234)
    assert s == 10


def test_parse_int():
    v = parse_int(" 42 ")
    assert v > 0


def test_count_words():
    n = count_words("a bb  ccc")
    assert n == 3


def test_pad_left():
    s = pad_left("ab", 4)
    assert len(s) == 4


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
            except Exception as e:
                failed += 1
                print("FAIL %s: %r" % (name, e))
    sys.exit(1 if failed else 0)
