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


def daily_average(readings):
    safe = [clamp(r, -40, 50) for r in readings]
    return mean(safe)


print(daily_average([12, 15, 61, -3]))
