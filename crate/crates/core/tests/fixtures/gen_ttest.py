"""Reference paired t-tests at 50 significant digits (mpmath)."""
import json
import random

import mpmath as mp

mp.mp.dps = 50
rng = random.Random(20240611)
cases = []
while len(cases) < 100:
    n = rng.randint(2, 40)
    shift = rng.uniform(-1.0, 1.0)
    a = [round(rng.gauss(0.0, 1.0), 12) for _ in range(n)]
    b = [round(x - shift * rng.random() + rng.gauss(0.0, 0.5), 12) for x in a]
    d = [mp.mpf(x) - mp.mpf(y) for x, y in zip(a, b)]
    if all(v == d[0] for v in d):
        continue
    mean = mp.fsum(d) / n
    var = mp.fsum((v - mean) ** 2 for v in d) / (n - 1)
    t = mean / mp.sqrt(var / n)
    df = n - 1
    p = mp.betainc(mp.mpf(df) / 2, mp.mpf(1) / 2, 0, df / (df + t * t), regularized=True)
    cases.append({"a": a, "b": b, "t": float(t), "p": float(p), "df": df})
with open("ttest_mpmath.json", "w") as f:
    json.dump(cases, f, indent=1)
