def f(a):
    t = 0
    for i in a:
        t += i["price"] * i["count"]
    return t


def g(v):
    m = v[0]
    for x in v:
        if x > m:
            m = x
    return m


def r(a):
    p = [i["price"] for i in a]
    return {"total": f(a), "max": g(p)}


print(r([{"price": 3, "count": 2}, {"price": 5, "count": 1}]))
