"""Price arithmetic for a small shop, in cents."""

TAX_RATE = 8


def subtotal(prices):
    total = 0
    for p in prices:
        total += p
    return total


def apply_discount(amount, pct):
    if pct > 50:
        pct = 50
    return amount - amount * pct // 100


def tax(amount):
    return amount * TAX_RATE // 100


def shipping(weight):
    if weight <= 1:
        return 500
    if weight < 10:
        return 500 + (weight - 1) * 200
    return 2500


def bulk_discount(quantity):
    if quantity >= 100:
        return 15
    elif quantity >= 10:
        return 5
    return 0


def total_price(prices, quantity, weight):
    base = apply_discount(subtotal(prices), bulk_discount(quantity))
    return base + tax(base) + shipping(weight)


def refund(paid, returned_items, restocking_pct):
    fee = paid * restocking_pct // 100
    if returned_items == 0:
        return 0
    return paid - fee
