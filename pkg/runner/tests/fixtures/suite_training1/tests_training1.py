from gradepipe_runner.suiteapi import s, docstring_test


# reference implementations: visible to the tests, never shown to students
def correct_pyramid_volume(A, h):
    return (1. / 3.) * A * h


def correct_geometric_mean(a, b):
    return (a * b) ** 0.5


def test_distance():

    # the distance between a number and itself is zero
    assert s.distance(3.0, 3.0) == 0.

    # distance works in both directions
    assert s.distance(1.0, 3.0) == 2.
    assert s.distance(3.0, 1.0) == 2.

    # tolerance for floating point answers
    eps = 1e-14

    # distances need not be whole numbers
    assert abs(s.distance(0.5, 2.0) - 1.5) < eps

    # is the function documented well
    docstring_test(s.distance)


def test_geometric_mean():

    # a 2 x 2 rectangle is already a square
    assert s.geometric_mean(2.0, 2.0) == 2.

    # tolerance for floating point answers
    eps = 1e-14

    # a 2 x 8 rectangle has the area of a 4 x 4 square
    assert abs(s.geometric_mean(2.0, 8.0) - 4.0) < eps

    # another example
    a = 3.
    b = 7.
    assert abs(s.geometric_mean(a, b) -
               correct_geometric_mean(a, b)) < eps

    # is the function documented well
    docstring_test(s.geometric_mean)


def test_pyramid_volume():

    # if height h is zero, expect volume zero
    assert s.pyramid_volume(1.0, 0.0) == 0.

    # if base A is zero, expect volume zero
    assert s.pyramid_volume(0.0, 1.0) == 0.

    # if base has area A=1, and the height is h=3,
    # we expect a volume of 1:
    assert s.pyramid_volume(1.0, 3.0) == 1.

    # if base has area A=3, and the height is h=1,
    # we expect a volume of 1:
    assert s.pyramid_volume(3.0, 1.0) == 1.

    #acceptable tolerance for floating point answers
    eps = 1e-14

    # if base has area A=1, and the height is h=1,
    # we expect a volume of 1/3.:
    assert abs(s.pyramid_volume(1., 1.) - 1./3.) < eps

    # another example
    h = 2.
    A = 4.
    assert abs(s.pyramid_volume(A, h) -
               correct_pyramid_volume(A, h)) < eps

    # does this also work if arguments are integers?
    eps = 1e-14
    assert abs(s.pyramid_volume(1, 1) - 1./3.) < eps

    # is the function documented well
    docstring_test(s.pyramid_volume)
