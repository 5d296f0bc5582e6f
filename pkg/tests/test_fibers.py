import math

import numpy as np
import pytest

from projdyn.config import DEFAULT
from projdyn.errors import CapExceeded, NotSupported, SolverFailure
from projdyn.fibers import (aberth_roots, backward_orbit, companion_roots, default_lambda, exceptional_scan,
                            fiber_levels, is_exceptional, lambda_apply, local_degree, multiplicity_kappa,
                            preimages_batch, preimages_p1, read_cloud_binary, sample_backward,
                            solve_binary_forms, write_cloud_binary, write_cloud_csv)
from projdyn.measures import trig_moment
from projdyn.projective import (EndomorphismMap, apply_array, binary_form, chordal_distance, normalize_array,
                                point, power_map)


def random_map(rng, d):
    comps = [binary_form(rng.standard_normal(d + 1) + 1j * rng.standard_normal(d + 1)) for _ in range(2)]
    return EndomorphismMap(tuple(comps), name=f"random{d}")


def random_targets(rng, count):
    return normalize_array(rng.standard_normal((count, 2)) + 1j * rng.standard_normal((count, 2)))


def affine_set(pre):
    return sorted((complex(np.round(p.affine, 12)) for p, _ in pre.roots), key=lambda c: (c.real, c.imag))


class TestPreimages:
    def test_square_roots_of_one(self, power2):
        pre = preimages_p1(power2, point(1, 1))
        assert affine_set(pre) == [-1, 1]
        assert [m for _, m in pre.roots] == [1, 1]

    def test_critical_value_gives_double_root(self, power2):
        pre = preimages_p1(power2, point(0, 1))
        assert len(pre.roots) == 1
        p, m = pre.roots[0]
        assert p == point(0, 1) and m == 2

    def test_infinity(self, power2):
        pre = preimages_p1(power2, point(1, 0))
        assert pre.roots == [(point(1, 0), 2)]

    def test_basilica_zeros(self, basilica):
        assert affine_set(preimages_p1(basilica, point(0, 1))) == [-1, 1]

    def test_root_at_infinity_sorted_last(self):
        # (z w, w^2 + z^2): preimages of [0:1] are 0 and infinity
        f = EndomorphismMap((binary_form([0, 1, 0]), binary_form([1, 0, 1])))
        pre = preimages_p1(f, point(0, 1))
        assert pre.roots[0][0] == point(0, 1)
        assert pre.roots[-1][0] == point(1, 0)

    def test_canonical_order(self, power3):
        pre = preimages_p1(power3, point(-8, 1))
        keys = [(p.affine.real, p.affine.imag) for p, _ in pre.roots]
        assert keys == sorted(keys)

    def test_p2_not_supported(self):
        with pytest.raises(NotSupported):
            preimages_p1(power_map(2, dim=2), point(1, 1, 1))

    @pytest.mark.parametrize("d", [2, 3])
    def test_bezout_random_maps(self, d):
        rng = np.random.default_rng(100 + d)
        for _ in range(20):
            f = random_map(rng, d)
            roots, mult, res = preimages_batch(f, random_targets(rng, 20))
            assert np.all(mult.sum(axis=1) == d)
            assert np.nanmax(res) <= 1e-8

    def test_bad_residual_raises(self, power2):
        tol = DEFAULT.updated(residual=1e-30, newton_steps=0)
        with pytest.raises(SolverFailure):
            preimages_batch(power2, random_targets(np.random.default_rng(1), 5), tol)

    def test_near_critical_targets(self, basilica):
        # targets within 1e-9 of the critical value -1 still resolve
        t = normalize_array(np.array([[-1 + 1e-9, 1], [-1 - 1e-9j, 1]]))
        roots, mult, res = preimages_batch(basilica, t)
        assert np.all(mult.sum(axis=1) == 2)


class TestSolvers:
    def test_aberth_matches_companion(self, rng):
        A = rng.standard_normal((6, 11)) + 1j * rng.standard_normal((6, 11))
        a = np.sort_complex(aberth_roots(A).reshape(-1))
        c = np.sort_complex(companion_roots(A).reshape(-1))
        assert np.allclose(np.sort_complex(a), np.sort_complex(c), atol=1e-8)

    def test_solver_choice_is_consistent(self, rng):
        C = rng.standard_normal((4, 9)) + 1j * rng.standard_normal((4, 9))
        r1, m1 = solve_binary_forms(C, DEFAULT.updated(solver="companion"))
        r2, m2 = solve_binary_forms(C, DEFAULT.updated(solver="aberth"))
        assert np.array_equal(m1, m2)
        assert np.max(chordal_distance(r1, r2)) < 1e-10

    def test_double_root_clusters(self):
        # (z - w)^2 (z + 2w): the double root splits by ~sqrt(eps), well inside the cluster tolerance
        c = np.polynomial.polynomial.polyfromroots([1, 1, -2])
        roots, mult = solve_binary_forms(c[None])
        assert sorted(mult[0][mult[0] > 0]) == [1, 2]

    def test_exact_zero_coefficients_give_exact_multiple_roots(self):
        # z^3 w: triple root at 0 and a simple one at infinity, found by stripping, not clustering
        roots, mult = solve_binary_forms(np.array([[0, 0, 0, 1, 0]], dtype=complex))
        kept = mult[0] > 0
        assert sorted(mult[0][kept]) == [1, 3]


class TestBackwardOrbit:
    def test_eighth_roots_of_unity(self, power2):
        cloud = backward_orbit(power2, point(1, 1), 3)
        x = np.array([p.affine for p, _ in cloud.atoms()])
        assert len(cloud) == 8 and cloud.total_weight == 8
        assert np.allclose(np.sort_complex(x ** 8), np.ones(8))
        assert len(np.unique(np.round(np.angle(x), 9))) == 8

    def test_depth_zero(self, basilica):
        cloud = backward_orbit(basilica, point(0.3, 1), 0)
        assert list(cloud.atoms()) == [(point(0.3, 1), 1)]

    def test_invariant_point(self, power2):
        cloud = backward_orbit(power2, point(0, 1), 4)
        assert list(cloud.atoms()) == [(point(0, 1), 16)]

    def test_cap(self, power2):
        with pytest.raises(CapExceeded):
            backward_orbit(power2, point(1, 1), 21)

    @pytest.mark.parametrize("n", [1, 5, 10])
    def test_total_weight(self, basilica, n):
        assert backward_orbit(basilica, point(0.2, 1), n).total_weight == 2 ** n

    def test_functoriality(self, power2, rng):
        cubic = random_map(rng, 3)
        for f in (power2, cubic):
            a = point(0.7 + 0.2j, 1)
            direct = backward_orbit(f, a, 4)
            mid = backward_orbit(f, a, 2)
            pts, ws = [], []
            for b, w in mid.atoms():
                sub = backward_orbit(f, b, 2)
                pts.append(sub.points)
                ws.append(sub.weights * w)
            pts = np.concatenate(pts)
            ws = np.concatenate(ws)
            assert ws.sum() == direct.total_weight
            # every composed atom matches a direct atom of the same weight
            dist = chordal_distance(pts[:, None, :], direct.points[None, :, :])
            j = np.argmin(dist, axis=1)
            assert np.max(dist[np.arange(len(pts)), j]) < 1e-9
            assert np.array_equal(np.sort(ws), np.sort(direct.weights[j]))

    def test_thread_count_does_not_change_output(self, basilica, monkeypatch):
        import projdyn.fibers as fb
        monkeypatch.setattr(fb, "CHUNK", 64)
        one = backward_orbit(basilica, point(3, 1), 10, threads=1)
        many = backward_orbit(basilica, point(3, 1), 10, threads=4)
        assert one.points.tobytes() == many.points.tobytes()
        assert np.array_equal(one.weights, many.weights)

    def test_levels_match_backward_orbit(self, basilica):
        levels = list(fiber_levels(basilica, point(3, 1), 5))
        assert [n for n, _, _ in levels] == list(range(6))
        assert np.array_equal(levels[-1][1], backward_orbit(basilica, point(3, 1), 5).points)


class TestSampledMode:
    def test_samples_lie_in_exact_fiber(self, basilica):
        exact = backward_orbit(basilica, point(3, 1), 6)
        s = backward_orbit(basilica, point(3, 1), 6, mode="sampled", count=200, seed=4)
        assert s.total_weight == 200 and s.mode == "sampled"
        dist = np.min(chordal_distance(s.points[:, None, :], exact.points[None, :, :]), axis=1)
        assert np.max(dist) < 1e-9

    def test_seeded(self, basilica):
        a = sample_backward(basilica, point(3, 1), 5, 50, seed=11)
        b = sample_backward(basilica, point(3, 1), 5, 50, seed=11)
        c = sample_backward(basilica, point(3, 1), 5, 50, seed=12)
        assert a.tobytes() == b.tobytes()
        assert a.tobytes() != c.tobytes()

    def test_prefix_independent_of_count(self, basilica):
        # row i of the uniforms belongs to sample i, so the first samples do not depend on count
        a = sample_backward(basilica, point(3, 1), 5, 10, seed=3)
        b = sample_backward(basilica, point(3, 1), 5, 40, seed=3)
        assert np.array_equal(a, b[:10])

    def test_needs_seed(self, power2):
        with pytest.raises(ValueError):
            backward_orbit(power2, point(2, 1), 3, mode="sampled", count=10)

    def test_moments_match_exact_cloud(self, basilica):
        count = 4000
        exact = backward_orbit(basilica, point(3, 1), 10)

        def re_affine(Z):
            return np.real(Z[:, 0] * np.conj(Z[:, 1])) / np.abs(Z[:, 1]) ** 2

        e = np.sum(exact.weights * re_affine(exact.points)) / exact.total_weight
        s = backward_orbit(basilica, point(3, 1), 10, mode="sampled", count=count, seed=5)
        assert abs(np.mean(re_affine(s.points)) - e) <= 4 / math.sqrt(count)

    def test_keep_path_is_a_backward_chain(self, basilica):
        end, path = sample_backward(basilica, point(3, 1), 6, 3, seed=2, keep_path=True)
        assert path.shape == (7, 3, 2)
        for j in range(6):
            img, _ = apply_array(basilica, path[j + 1])
            assert np.max(chordal_distance(img, path[j])) < 1e-10


class TestLambda:
    def test_constant(self, basilica):
        assert lambda_apply(basilica, lambda Z: np.ones(len(Z)), point(0.5, 1), 7) == 128

    def test_real_parts_of_roots_of_unity(self, power2):
        val = lambda_apply(power2, lambda Z: np.real(Z[:, 0] / Z[:, 1]), point(1, 1), 3)
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_depth_zero_is_identity(self, power2):
        phi = trig_moment(1)
        assert lambda_apply(power2, phi, point(2, 1), 0) == pytest.approx(phi(point(2, 1)))


class TestMultiplicities:
    def test_zero_of_power_map(self, power2):
        rep = multiplicity_kappa(power2, point(0, 1), 3)
        assert rep.kappa_along_orbit == [2, 2, 2]
        assert rep.kappa_n == 8 and rep.kappa_minus_n == 8

    def test_one_of_power_map(self, power2):
        rep = multiplicity_kappa(power2, point(1, 1), 3)
        assert rep.kappa_n == 1 and rep.kappa_minus_n == 1

    def test_depth_zero(self, basilica):
        rep = multiplicity_kappa(basilica, point(0.1, 1), 0)
        assert rep.kappa_n == 1 and rep.kappa_along_orbit == []

    def test_chain_rule(self, basilica, rng):
        for x in [point(0, 1), point(1, 0), point(0.3, 1), point(-1, 1)]:
            for m, n in [(1, 2), (2, 1), (2, 2)]:
                fnx = x.coords[None]
                for _ in range(n):
                    fnx, _ = apply_array(basilica, fnx)
                lhs = multiplicity_kappa(basilica, x, m + n).kappa_n
                rhs = multiplicity_kappa(basilica, x, n).kappa_n * multiplicity_kappa(basilica, fnx[0], m).kappa_n
                assert lhs == rhs

    def test_bounds(self, basilica):
        rep = multiplicity_kappa(basilica, point(-1, 1), 4)
        assert 1 <= rep.kappa_minus_n <= 2 ** 4
        # 0 is critical and f^2(0) = 0, so -1 has a backward branch through 0 at every other step
        assert rep.kappa_minus_n == 4

    def test_local_degree_at_critical_point(self, basilica):
        assert local_degree(basilica, point(0, 1)) == 2
        assert local_degree(basilica, point(0.5, 1)) == 1


class TestExceptionalScan:
    def test_zero_flagged(self, power2):
        (res,) = exceptional_scan(power2, 1.5, 6, [point(0, 1)])
        assert res.flagged and res.rate == pytest.approx(2.0)

    def test_one_not_flagged(self, power2):
        (res,) = exceptional_scan(power2, 1.5, 6, [point(1, 1)])
        assert not res.flagged and res.rate == pytest.approx(1.0)

    def test_random_map_random_point(self, rng):
        f = random_map(rng, 2)
        (res,) = exceptional_scan(f, default_lambda(2), 6, [point(0.37 - 0.21j, 1)])
        assert not res.flagged and res.rate == 1.0

    def test_lambda_range(self, power2):
        with pytest.raises(ValueError):
            exceptional_scan(power2, 2.5, 6, [point(0, 1)])

    def test_whitelist(self, basilica):
        assert is_exceptional(basilica, point(1, 0))
        assert not is_exceptional(basilica, point(3, 1))


class TestExport:
    def test_csv(self, tmp_path, power2):
        cloud = backward_orbit(power2, point(1, 1), 3)
        path = tmp_path / "c.csv"
        write_cloud_csv(cloud, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "atom_re,atom_im,chart,weight"
        vals = [complex(float(r.split(",")[0]), float(r.split(",")[1])) for r in lines[1:]]
        assert np.allclose(np.abs(vals), 1.0)
        assert sum(int(r.split(",")[3]) for r in lines[1:]) == 8

    @pytest.mark.parametrize("mode", ["exact", "sampled"])
    def test_binary_round_trip(self, tmp_path, basilica, mode):
        kw = {"count": 30, "seed": 9} if mode == "sampled" else {}
        cloud = backward_orbit(basilica, point(3, 1), 5, mode=mode, **kw)
        path = tmp_path / "c.fibc"
        write_cloud_binary(cloud, path)
        assert path.read_bytes()[:5] == b"FIBC\x01"
        back = read_cloud_binary(path)
        assert back.base == cloud.base and back.depth == 5 and back.mode == mode
        assert back.points.tobytes() == cloud.points.tobytes()
        assert np.array_equal(back.weights, cloud.weights)
        assert back.seed == cloud.seed

    def test_binary_rejects_garbage(self, tmp_path):
        path = tmp_path / "x.fibc"
        path.write_bytes(b"NOPE" + bytes(40))
        with pytest.raises(ValueError):
            read_cloud_binary(path)
