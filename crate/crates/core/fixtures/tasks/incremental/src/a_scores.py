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


def grade(scores):
    avg = mean(scores)
    return clamp(avg, 0, 100)


print(grade([88, 92, 107]))
