"""Exact lower entropy of the imprecise Beta example in rational arithmetic.

For x ~ Dirichlet(s t) with integer shapes a_i = s t_i,
E[-x_i ln x_i] = t_i (psi(s + 1) - psi(a_i + 1)) = t_i (H_s - H_{a_i}),
with H_m the m-th harmonic number, so the value is a rational number.
"""

from fractions import Fraction


def harmonic(m: int) -> Fraction:
    return sum((Fraction(1, j) for j in range(1, m + 1)), Fraction(0))


def expected_entropy(s: int, shapes: list[int]) -> Fraction:
    return sum((Fraction(a, s) * (harmonic(s) - harmonic(a)) for a in shapes), Fraction(0))


if __name__ == "__main__":
    # T = {t1 >= 0.3, t2 >= 0.6}, s = 10: the two vertices have shapes (3, 7) and (4, 6)
    for shapes in ([3, 7], [4, 6]):
        v = expected_entropy(10, shapes)
        print(f"t = ({shapes[0] / 10}, {shapes[1] / 10}): {v} = {float(v):.10f}")
