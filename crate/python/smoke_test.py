"""Quick check that the compiled tauwalk_py module imports and agrees with hand values."""
from fractions import Fraction
from math import comb

import tauwalk_py as tw


def main():
    lam = tw.Partition([3, 1])
    assert lam.parts == [3, 1] and lam.weight == 4 and len(lam) == 2
    assert lam.conjugate().parts == [2, 1, 1]

    # standard Young tableaux of shape (2,1): 2
    assert tw.path_count([2, 1], 3) == 2
    # s_(2,1)(t_inf) = d/|λ|! = 2/6
    assert tw.schur_tinfty([2, 1]) == Fraction(1, 3)

    z = tw.normalization_z0(3)
    dist = tw.exact_distribution(3)
    assert isinstance(z, Fraction) and z > 0
    assert dist is not None

    # single-row binomial determinant is a plain binomial coefficient
    assert tw.binomial_determinant([5], [2]) == comb(5, 2)
    assert tw.binomial_determinant([4, 2], [2, 1]) == tw.nonintersecting_path_count([4, 2], [2, 1])

    pot = tw.Potential.constant_rate(0.5)
    assert abs(pot.energy(2) - (-2 * __import__("math").log(0.5))) < 1e-12
    assert tw.Potential.from_json(pot.to_json()).to_json() == pot.to_json()

    shape = tw.predict_limit_shape(1.0, 100)
    assert isinstance(shape, dict)

    try:
        tw.Partition([1, 2])
    except ValueError:
        pass
    else:
        raise AssertionError("non-decreasing parts accepted")

    print("tauwalk_py smoke test: ok")


if __name__ == "__main__":
    main()
