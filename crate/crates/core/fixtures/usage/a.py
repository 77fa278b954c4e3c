from codebank import Box, clamp, mean

print(mean([1, 2]))
print(clamp(mean([3]), 0, 1))
b = Box(2)
print(b.get())
