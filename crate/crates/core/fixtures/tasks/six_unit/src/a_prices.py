def mean(values):
    total = 0
    for v in values:
        total += v
    return total / len(values)


def clamp(value, low, high):
    if value < low:
        return low
    if value > high:
        return high
    return value


def fair_price(prices, floor, ceiling):
    return clamp(mean(prices), floor, ceiling)


print(fair_price([3.5, 4.0, 9.25], 1, 5))
