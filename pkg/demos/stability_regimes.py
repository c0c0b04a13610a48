"""Regime verdicts for a handful of coefficient pairs.

    python demos/stability_regimes.py
"""

from thinfilm.asymptotics import classify
from thinfilm.presets import parse_coefficient

PAIRS = [
    ("const:-1", "exp:1,1"),
    ("const:0", "const:1"),
    ("const:0.5", "const:1"),
    ("exp:1,1", "exp:1,1"),
    ("pow:-1,1", "exp:2,0.5"),
    ("const:0", "pow:1,0.5"),
]


def main():
    for g, a in PAIRS:
        v = classify(parse_coefficient(g), parse_coefficient(a))
        ratio = "-" if v.limsup_ratio is None else f"{v.limsup_ratio:.3f}"
        print(f"gamma={g:<10} alpha={a:<10} {v.regime:<15} int a^2={v.int_alpha2:<8.4g} "
              f"int g={v.int_gamma:<8.4g} limsup={ratio}")


if __name__ == "__main__":
    main()
