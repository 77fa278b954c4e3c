def zeros(n, m):
    return [[0] * m for _ in range(n)]


def matmul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    assert len(a[0]) == k, "shape mismatch"
    c = zeros(n, m)
    for i in range(n):
        for j in range(m):
            s = 0
            for t in range(k):
                s += a[i][t] * b[t][j]
            c[i][j] = s
    return c


def power(a, e):
    n = len(a)
    result = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    while e > 0:
        if e & 1:
            result = matmul(result, a)
        a = matmul(a, a)
        e >>= 1
    return result


def trace(a):
    return sum(a[i][i] for i in range(len(a)))


async def fetch_all(items, get):
    results = []
    async for x in get(items):
        results.append(x)
    return results[::-1] if results else []
