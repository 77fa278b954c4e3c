import codebank

print(codebank.mean([4]))
print(codebank.spread([1, 5]))
