import warnings

import numpy as np
import pytest

from integral_menger.energy import EnergySpec
from integral_menger.errors import InvalidInputError, ParseError
from integral_menger.manifold import graph_alpha_patch
from integral_menger.seminorms import (
    GridFunction,
    NearDegenerateExponentWarning,
    alpha_membership_threshold,
    besov_exponent,
    besov_second_difference,
    gagliardo_seminorm,
    load_grid_function,
    save_grid_function,
    sobolev_exponent,
)


def _sine(x):
    return np.sin(3 * x[:, 0]) + (x[:, 1] ** 2 if x.shape[1] > 1 else 0)


@pytest.mark.parametrize("m,h", [(1, 0.02), (2, 0.1)])
def test_constants_and_affine_maps(m, h):
    const = GridFunction.sample(lambda x: np.full(len(x), 2.5), m, 1.0, h)
    assert gagliardo_seminorm(const, 0.5, 3) == 0.0
    assert besov_second_difference(const, 1.5, 3) == 0.0
    lin = GridFunction.sample(lambda x: x @ np.arange(1.0, m + 1) - 4, m, 1.0, h)
    assert besov_second_difference(lin, 1.5, 3) == pytest.approx(0.0, abs=1e-20)


@pytest.mark.parametrize("m,h", [(1, 0.02), (2, 0.1)])
def test_sign_symmetry_and_homogeneity(m, h):
    g = GridFunction.sample(_sine, m, 1.0, h)
    for fn, e in ((gagliardo_seminorm, 0.4), (besov_second_difference, 1.4)):
        base = fn(g, e, 3)
        assert fn(-g, e, 3) == pytest.approx(base, rel=1e-13)
        assert fn(2.5 * g, e, 3) == pytest.approx(2.5**3 * base, rel=1e-12)


def test_translation_by_constant():
    g = GridFunction.sample(_sine, 1, 1.0, 0.01)
    shifted = GridFunction(g.grid, g.values + 7.0)
    assert gagliardo_seminorm(shifted, 0.3, 4) == pytest.approx(gagliardo_seminorm(g, 0.3, 4), rel=1e-10)
    assert besov_second_difference(shifted, 1.3, 4) == pytest.approx(
        besov_second_difference(g, 1.3, 4), rel=1e-9)


def test_gagliardo_linear_closed_form():
    # |x - y|^2 / |x - y|^2 integrated over [-1, 1]^2 is 4
    g = GridFunction.sample(lambda x: x[:, 0], 1, 1.0, 0.005)
    assert gagliardo_seminorm(g, 0.5, 2) == pytest.approx(4.0, rel=5e-3)


def test_besov_parabola_closed_form():
    # second difference of x^2 over the pair (c - w, c + w) is 2 w^2; the pair integral is 1/6
    g = GridFunction.sample(lambda x: x[:, 0] ** 2, 1, 1.0, 0.005)
    assert besov_second_difference(g, 1.5, 4) == pytest.approx(1 / 6, rel=1e-2)


def test_vector_valued_and_gradient_kind():
    g = GridFunction.sample(lambda x: np.stack([x[:, 0], 2 * x[:, 0]], axis=1), 1, 1.0, 0.01,
                            kind="gradient")
    one = GridFunction.sample(lambda x: x[:, 0], 1, 1.0, 0.01)
    # |(1, 2) t|^p = 5^(p/2) |t|^p
    assert gagliardo_seminorm(g, 0.5, 2) == pytest.approx(5 * gagliardo_seminorm(one, 0.5, 2), rel=1e-12)
    assert g.d == 2 and g.kind == "gradient"


def test_grid_function_validation():
    with pytest.raises(InvalidInputError):
        GridFunction.sample(lambda x: np.full(len(x), np.nan), 1, 1.0, 0.1)
    with pytest.raises(InvalidInputError):
        GridFunction.sample(lambda x: x[:, 0], 1, 1.0, 0.1, kind="hessian")
    g = GridFunction.sample(lambda x: x[:, 0], 1, 1.0, 0.1)
    for fn, bad in ((gagliardo_seminorm, 1.0), (gagliardo_seminorm, 0.0), (besov_second_difference, 2.0)):
        with pytest.raises(InvalidInputError):
            fn(g, bad, 3)
    with pytest.raises(InvalidInputError):
        gagliardo_seminorm(g, 0.5, 0.5)


# --- exponents ----------------------------------------------------------------------


def test_exponent_examples():
    assert sobolev_exponent(EnergySpec(1, 3, 3, 4)) == pytest.approx(0.5)
    assert besov_exponent(EnergySpec(1, 3, 3, 4)) == pytest.approx(1.5)
    assert sobolev_exponent(EnergySpec(2, 4, 4, 12)) == pytest.approx(0.5)
    assert besov_exponent(EnergySpec(2, 4, 4, 12)) == pytest.approx(1.5)


def test_near_degenerate_exponent_warns():
    with pytest.warns(NearDegenerateExponentWarning):
        sobolev_exponent(EnergySpec(1, 3, 3, 2.001))
    with pytest.warns(NearDegenerateExponentWarning):
        sobolev_exponent(EnergySpec(1, 3, 2, 5000))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sobolev_exponent(EnergySpec(1, 3, 3, 8))


def test_exponent_requires_p_above_threshold():
    class Raw:
        m, k, p = 2, 3, 4.0

    with pytest.raises(InvalidInputError):
        sobolev_exponent(Raw())


def test_alpha_threshold_values():
    assert alpha_membership_threshold(1, 0.75, 8) == pytest.approx(1.625)
    assert alpha_membership_threshold(2, 0.5, 16) == pytest.approx(1.375)
    # s -> 0 and p -> infinity push the threshold to 1
    assert alpha_membership_threshold(1, 1e-9, 1e9) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(InvalidInputError):
        alpha_membership_threshold(1, 1.0, 8)
    with pytest.raises(InvalidInputError):
        alpha_membership_threshold(2, 0.5, 2)


def test_derivative_seminorm_grows_below_threshold():
    # s = 3/4, p = 8, threshold 1.625: Df of |x|^1.3 is not in W^{s,p}, so refinement keeps adding mass
    vals = []
    for h in (0.02, 0.01, 0.005):
        g = GridFunction.from_patch(graph_alpha_patch(1.3, 1.0, 1, 2, h), kind="gradient")
        vals.append(gagliardo_seminorm(g, 0.75, 8))
    assert vals[1] / vals[0] >= 1.2 and vals[2] / vals[1] >= 1.2
    above = []
    for h in (0.02, 0.01):
        g = GridFunction.from_patch(graph_alpha_patch(1.9, 1.0, 1, 2, h), kind="gradient")
        above.append(gagliardo_seminorm(g, 0.75, 8))
    assert above[1] / above[0] < 1.2


# --- files --------------------------------------------------------------------------


def test_file_round_trip(tmp_path):
    g = GridFunction.sample(_sine, 2, 1.0, 0.25)
    save_grid_function(g, tmp_path / "g.csv", delta=1.0)
    back = load_grid_function(tmp_path / "g.csv")
    np.testing.assert_array_equal(back.values, g.values)
    np.testing.assert_array_equal(back.grid.coords, g.grid.coords)
    assert back.h == g.h and back.kind == "function"
    assert gagliardo_seminorm(back, 0.5, 3) == gagliardo_seminorm(g, 0.5, 3)


def test_file_errors(tmp_path):
    g = GridFunction.sample(_sine, 1, 1.0, 0.25)
    path = tmp_path / "g.csv"
    save_grid_function(g, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:3] + ["0.5"] + lines[3:]) + "\n")
    with pytest.raises(ParseError) as err:
        load_grid_function(path)
    assert err.value.lineno == 4
    path.with_suffix(".json").unlink()
    with pytest.raises(InvalidInputError):
        load_grid_function(path)
