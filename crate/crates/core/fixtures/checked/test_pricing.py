import sys

from pricing import apply_discount, bulk_discount, refund, shipping, subtotal, tax, total_price


def test_subtotal():
    some = subtotal([300, 450, 125])
    none = subtotal([])
    assert some == 875
    assert none == 0


def test_discount():
    small = apply_discount(1000, 20)
    capped = apply_discount(1000, 80)
    exact = apply_discount(1000, 50)
    assert small == 800
    assert capped == 500
    assert exact == 500


def test_tax():
    t = tax(1250)
    z = tax(0)
    assert t == 100
    assert z == 0


def test_shipping():
    light = shipping(1)
    mid = shipping(4)
    heavy = shipping(30)
    edge = shipping(10)
    assert light == 500
    assert mid == 1100
    assert heavy == 2500
    assert edge == 2500


def test_bulk():
    few = bulk_discount(5)
    some = bulk_discount(50)
    many = bulk_discount(500)
    ten = bulk_discount(10)
    hundred = bulk_discount(100)
    assert few == 0
    assert some == 5
    assert many == 15
    assert ten == 5
    assert hundred == 15


def test_refund():
    back = refund(4000, 2, 10)
    nothing = refund(4000, 0, 10)
    assert back == 3600
    assert nothing == 0


def test_integration_total():
    total = total_price([1000, 2000], 12, 3)
    assert total > 0


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
