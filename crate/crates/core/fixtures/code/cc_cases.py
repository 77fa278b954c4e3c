import os


def straight(a, b):
    c = a + b
    return c * 2


def one_if(x):
    if x > 0:
        return 1
    return 0


def if_elif_else(x):
    if x < 0:
        s = -1
    elif x == 0:
        s = 0
    else:
        s = 1
    return s


def two_loops_if_and(xs, ys, lo, hi):
    total = 0
    for x in xs:
        total += x
    while ys:
        y = ys.pop()
        if y > lo and y < hi:
            total += y
    return total


def bool_chain(a, b, c, d):
    return a and b or c and d


def ternary(x):
    return "pos" if x > 0 else "neg" if x < 0 else "zero"


def comprehension(xs):
    return [x * y for x in xs if x for y in xs if y > x if y % 2]


def dict_set_gen(xs):
    d = {k: v for k, v in xs}
    s = {k for k in d if k}
    return sum(v for v in d.values()), s


def loop_break_continue(xs):
    found = None
    for x in xs:
        if x is None:
            continue
        if x > 10:
            found = x
            break
    else:
        found = -1
    return found


def while_else(n):
    i = 0
    while i < n:
        i += 1
        if i == 7:
            break
    else:
        i = -1
    return i


def try_handlers(path):
    try:
        f = open(path)
    except FileNotFoundError:
        return None
    except (PermissionError, IsADirectoryError):
        return ""
    else:
        data = f.read()
        f.close()
    finally:
        os.sync()
    return data


def nested_outer(xs):
    def inner(v):
        return v if v else 0

    out = []
    for x in xs:
        out.append(inner(x))
    return out


def with_lambda(xs):
    key = lambda p: p[1] or p[0]
    return sorted(xs, key=key)


def with_block(path):
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            yield line


def walrus(xs):
    while (n := len(xs)) > 3:
        xs = xs[1:]
    return n


def matcher(cmd):
    match cmd:
        case "go":
            return 1
        case ("turn", d) if d in ("l", "r"):
            return 2
        case {"x": x} | {"y": x}:
            return x
        case _:
            return 0


def matcher_no_default(v):
    match v:
        case 0:
            return "zero"
        case [a, b]:
            return a + b
    return None


def nested_loops(grid):
    count = 0
    for row in grid:
        for cell in row:
            if not cell:
                continue
            count += 1 if cell > 0 else 0
    return count


def early_returns(a, b):
    if a is None or b is None:
        return None
    if a == b:
        return 0
    return -1 if a < b else 1


async def async_stuff(src):
    acc = []
    async for item in src:
        if item:
            acc.append(item)
    async with src.lock() as _:
        pass
    return acc


def raises(x):
    if not isinstance(x, int):
        raise TypeError("int expected")
    assert x >= 0, "negative"
    return x


def defaults_with_decisions(x, flag=True and False):
    return x


def nested_try_in_loop(items):
    bad = 0
    for it in items:
        try:
            int(it)
        except ValueError:
            bad += 1
    return bad


class Account:
    rate = 0.01

    def deposit(self, amount):
        if amount <= 0:
            raise ValueError("amount")
        self.balance = getattr(self, "balance", 0) + amount

    def interest(self, years):
        return sum(self.balance * self.rate for _ in range(years) if self.balance > 0)

    @staticmethod
    def parse(s):
        return float(s) if s and s.strip() else 0.0
