import json
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from projdyn.config import DEFAULT
from projdyn.errors import AllZero, Degenerate, DegenerateImage, DimMismatch, NonFinite
from projdyn.projective import (EndomorphismMap, HomogeneousPolynomial, ProjectivePoint, apply_array,
                                binary_form, chordal_distance, evaluate_map, fs_distance, jacobian_binary,
                                load_map, map_from_dict, map_to_dict, normalize, normalize_array, point,
                                power_map, preset, quadratic_family, sylvester_resultant)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
cplx = st.builds(complex, finite, finite)
vec2 = st.lists(cplx, min_size=2, max_size=2).filter(lambda v: max(abs(c) for c in v) > 1e-3)
vec3 = st.lists(cplx, min_size=3, max_size=3).filter(lambda v: max(abs(c) for c in v) > 1e-3)
scalar = st.builds(complex, st.floats(0.1, 10), st.floats(-10, 10)).filter(lambda c: abs(c) > 0.1)


class TestNormalize:
    def test_pivot_is_largest_coordinate(self):
        assert np.array_equal(point(2, 1).coords, [1, 0.5])

    def test_tie_prefers_lowest_index(self):
        assert np.array_equal(point(1j, 1).coords, [1, -1j])

    def test_point_at_infinity(self):
        p = point(3, 0)
        assert np.array_equal(p.coords, [1, 0])
        assert math.isinf(p.affine.real)

    def test_all_zero_rejected(self):
        with pytest.raises(AllZero):
            point(0, 0)

    @pytest.mark.parametrize("bad", [(math.nan, 1), (1, math.inf)])
    def test_nonfinite_rejected(self, bad):
        with pytest.raises(NonFinite):
            point(*bad)
        with pytest.raises(AllZero):
            point(*bad)

    def test_point_is_immutable_and_hashable(self):
        p = point(2, 1)
        with pytest.raises(ValueError):
            p.coords[0] = 3
        assert {p, point(4, 2)} == {p}
        assert repr(p) == "[1 : 0.5]"

    @given(vec3)
    def test_idempotent(self, v):
        once = normalize_array(np.array([v]))
        assert np.array_equal(normalize_array(once), once)

    @given(vec2, scalar)
    def test_scale_invariant(self, v, t):
        a = normalize(v).coords
        b = normalize([t * c for c in v]).coords
        assert fs_distance(a, b) < 1e-12
        m = sorted(abs(c) for c in v)
        if m[-1] - m[-2] > 1e-9 * m[-1]:
            # away from modulus ties the chart is stable
            assert np.allclose(a, b, atol=1e-12)

    @given(vec3)
    def test_coordinates_in_unit_disc(self, v):
        c = normalize(v).coords
        assert np.max(np.abs(c)) == 1.0
        assert np.all(np.abs(c) <= 1.0)


class TestChordalDistance:
    def test_zero_and_infinity_are_antipodal(self):
        assert fs_distance(point(0, 1), point(1, 0)) == pytest.approx(1.0)

    def test_unit_circle_points(self):
        # [1:1] and [-1:1] are orthogonal lines in C^2
        assert fs_distance(point(1, 1), point(-1, 1)) == pytest.approx(1.0)
        assert fs_distance(point(1, 1), point(1j, 1)) == pytest.approx(math.sqrt(0.5))

    def test_dimension_mismatch(self):
        with pytest.raises(DimMismatch):
            fs_distance(point(1, 1), point(1, 1, 1))

    @given(vec2, vec2, vec2)
    @settings(max_examples=200)
    def test_triangle_inequality(self, a, b, c):
        ab, bc, ac = fs_distance(a, b), fs_distance(b, c), fs_distance(a, c)
        assert ac <= ab + bc + 1e-12

    @given(vec3, scalar, scalar)
    def test_projective_invariance(self, v, s, t):
        w = [v[1], v[2], v[0]]
        d1 = chordal_distance(np.array(v), np.array(w))
        d2 = chordal_distance(s * np.array(v), t * np.array(w))
        assert d1 == pytest.approx(d2, abs=1e-12)

    @given(vec2)
    def test_symmetric_and_zero_on_diagonal(self, v):
        w = [v[0] + 1, v[1]]
        assume(any(w))
        assert fs_distance(v, v) == pytest.approx(0.0, abs=1e-7)
        assert fs_distance(v, w) == pytest.approx(fs_distance(w, v), abs=1e-15)

    def test_zero_vector_rejected(self):
        with pytest.raises(AllZero):
            fs_distance((0, 0), (1, 1))

    def test_accurate_for_nearby_points(self):
        # the wedge formula keeps relative accuracy where 1 - |<z,w>|^2 would cancel
        eps = 1e-12
        assert fs_distance(point(1, 0), point(1, eps)) == pytest.approx(eps, rel=1e-9)


class TestHomogeneousPolynomial:
    def test_evaluation_matches_direct_formula(self, rng):
        h = HomogeneousPolynomial(3, 2, {(2, 0, 0): 1, (0, 1, 1): -2j, (1, 0, 1): 0.5})
        Z = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
        direct = Z[:, 0] ** 2 - 2j * Z[:, 1] * Z[:, 2] + 0.5 * Z[:, 0] * Z[:, 2]
        assert np.allclose(h(Z), direct)
        assert h(Z[0]) == pytest.approx(direct[0])

    def test_rejects_inhomogeneous_terms(self):
        with pytest.raises(ValueError):
            HomogeneousPolynomial(2, 2, {(1, 0): 1})

    def test_binary_coefficients(self):
        h = binary_form([3, 0, 1j])
        assert np.array_equal(h.binary_coefficients(), [3, 0, 1j])
        assert h.terms == {(0, 2): 3, (2, 0): 1j}

    def test_json_round_trip(self):
        h = HomogeneousPolynomial(2, 3, {(3, 0): 1 + 2j, (1, 2): -1})
        back = HomogeneousPolynomial.from_json(2, 3, json.loads(json.dumps(h.to_json())))
        assert back.terms == h.terms


def _sympy_resultant(a, b):
    z = sp.symbols("z")
    pa = sum(sp.nsimplify(c) * z ** j for j, c in enumerate(a))
    pb = sum(sp.nsimplify(c) * z ** j for j, c in enumerate(b))
    return complex(sp.resultant(sp.Poly(pa, z), sp.Poly(pb, z)))


class TestResultant:
    @pytest.mark.parametrize("a, b", [
        ([-1, 0, 1], [1, 1, 1]),
        ([2, -3, 1], [1, 0, 2]),
        ([1, 2, 3, 4], [4, 0, -1, 2]),
        ([1j, 0, 2, -1], [0, 1, 0, 1 + 1j]),
    ])
    def test_matches_sympy_on_full_degree_forms(self, a, b):
        # with nonzero leading coefficients the binary and univariate resultants agree up to sign
        assert abs(sylvester_resultant(a, b)) == pytest.approx(abs(_sympy_resultant(a, b)), rel=1e-10)

    def test_monomials(self):
        assert abs(sylvester_resultant([0, 0, 1], [1, 0, 0])) == pytest.approx(1.0)
        assert abs(sylvester_resultant([0, 1, 0], [1, 0, 0])) == pytest.approx(0.0)

    def test_common_root_gives_zero(self):
        # (z - w)(z + w) and (z - w)(z - 2w) share [1:1]
        a = np.polynomial.polynomial.polyfromroots([1, -1])
        b = np.polynomial.polynomial.polyfromroots([1, 2])
        assert abs(sylvester_resultant(a, b)) < 1e-12

    def test_frozen_values(self):
        # oracle: sympy resultant of z^2 + z + 1 and 2 z^2 - z + 3
        assert abs(sylvester_resultant([1, 1, 1], [3, -1, 2])) == pytest.approx(13.0, rel=1e-12)


class TestEndomorphismMap:
    def test_power_map_certificate(self, power2):
        c = power2.certificate
        assert c.method == "resultant" and not c.heuristic
        assert c.witness == pytest.approx(1.0)

    def test_common_zero_rejected(self):
        comps = (HomogeneousPolynomial.monomial((1, 1)), HomogeneousPolynomial.monomial((0, 2)))
        with pytest.raises(Degenerate, match="nondegeneracy"):
            EndomorphismMap(comps)

    def test_degree_one_rejected(self):
        comps = (HomogeneousPolynomial.monomial((1, 0)), HomogeneousPolynomial.monomial((0, 1)))
        with pytest.raises(ValueError):
            EndomorphismMap(comps)

    def test_component_count_checked(self):
        with pytest.raises(DimMismatch):
            EndomorphismMap((HomogeneousPolynomial.monomial((2, 0, 0)), HomogeneousPolynomial.monomial((0, 2, 0))))

    def test_p2_certificate_is_heuristic(self):
        f = power_map(2, dim=2)
        assert f.certificate.method == "sphere_sampling"
        assert f.certificate.heuristic
        assert f.certificate.witness > DEFAULT.sphere_threshold

    def test_p2_degenerate_rejected(self):
        # the common zero [0:1:0] lies between sphere samples; local descent finds it
        # (z^2, zw, t^2) vanishes on the line z = t = 0
        comps = tuple(HomogeneousPolynomial.monomial(e) for e in [(2, 0, 0), (1, 1, 0), (0, 0, 2)])
        with pytest.raises(Degenerate):
            EndomorphismMap(comps)

    def test_evaluate_map(self, basilica):
        img, log_scale = evaluate_map(basilica, point(2, 1))
        assert img.affine == pytest.approx(3.0)
        # canonical coordinates (1, 1/2) give F = (3/4, 1/4)
        assert log_scale == pytest.approx(math.log(0.75))

    def test_evaluate_rejects_wrong_dimension(self, power2):
        with pytest.raises(DimMismatch):
            evaluate_map(power2, point(1, 1, 1))

    def test_apply_array_detects_vanishing_lift(self):
        comps = (HomogeneousPolynomial.monomial((2, 0)), HomogeneousPolynomial(2, 2, {(0, 2): 1e-30, (2, 0): 0.0 + 1}))
        f = EndomorphismMap(comps, certificate=power_map(2).certificate)
        with pytest.raises(DegenerateImage):
            apply_array(f, np.array([[0, 1]], dtype=complex))

    def test_critical_points_of_basilica(self, basilica):
        pts, mult = basilica.critical_points
        affine = sorted(ProjectivePoint(p).affine.real for p in pts)
        assert affine[0] == pytest.approx(0.0)
        assert math.isinf(affine[1])
        values = sorted(ProjectivePoint(v).affine.real for v in basilica.critical_values)
        assert values[0] == pytest.approx(-1.0)

    def test_jacobian_of_power_map(self):
        # J(z^2, w^2) = 4 z w
        assert np.allclose(jacobian_binary([[0, 0, 1], [1, 0, 0]]), [0, 4, 0])


class TestPresetsAndIO:
    @pytest.mark.parametrize("spec, name", [("power(2)", "power(2)"), ("quadratic_family(-1, 0)", "quadratic_family(-1, 0)"),
                                            ("reciprocal_power(3)", "reciprocal_power(3)")])
    def test_preset_names(self, spec, name):
        assert preset(spec).name == name

    @pytest.mark.parametrize("spec", ["power(2.5)", "cubic(1)", "quadratic_family()"])
    def test_bad_presets(self, spec):
        with pytest.raises(ValueError):
            preset(spec)

    def test_power_map_on_p2(self):
        f = preset("power(3)", dim=2)
        assert (f.dim, f.degree) == (2, 3)
        assert len(f.exceptional) == 3

    def test_dict_round_trip(self, basilica):
        g = map_from_dict(json.loads(json.dumps(map_to_dict(basilica))))
        Z = np.array([[0.3 + 0.1j, 1], [1, 0.2]])
        assert np.allclose(g.lift(Z), basilica.lift(Z))

    def test_load_map_from_file(self, tmp_path, power2):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"dim": 1, "components": "power(2)"}))
        assert load_map(path).name == "power(2)"
        assert load_map("power(2)").degree == 2

    def test_quadratic_family_lift(self):
        f = quadratic_family(0.25, 0.5)
        img, _ = evaluate_map(f, point(1j, 1))
        assert img.affine == pytest.approx(-1 + 0.25 + 0.5j)
