import json
import math
import sys

x = json.loads(sys.stdin.readline())["x"]
y = math.sin(x[0]) + 7.0 * math.sin(x[1]) ** 2 + 0.05 * x[2] ** 4 * math.sin(x[0])
print(json.dumps({"y": y}))
