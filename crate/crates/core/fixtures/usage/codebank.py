def mean(xs):
    return sum(xs) / len(xs)


def clamp(x, lo, hi):
    return max(lo, min(x, hi))


def spread(xs):
    return max(xs) - mean(xs)


class Box:
    def __init__(self, v):
        self.v = v

    def get(self):
        return self.v


def unused(x):
    return x
