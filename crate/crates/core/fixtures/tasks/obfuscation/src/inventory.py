def total_price(items):
    total = 0
    for item in items:
        total += item["price"] * item["count"]
    return total


def find_largest(values):
    largest = values[0]
    for value in values:
        if value > largest:
            largest = value
    return largest


def report(items):
    prices = [item["price"] for item in items]
    return {"total": total_price(items), "max": find_largest(prices)}


print(report([{"price": 3, "count": 2}, {"price": 5, "count": 1}]))
