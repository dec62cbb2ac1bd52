import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gclind import operators as op
from gclind.errors import DimensionError, InvalidDensityError

from helpers import expm_oracle, random_density, random_hermitian, random_operator


class TestTensorProduct:
    def test_identity_factors(self):
        assert np.array_equal(op.tensor_product(op.identity(2), op.identity(3)), op.identity(6))

    def test_sigma_z_with_identity(self):
        got = op.tensor_product(op.SIGMA_Z, op.identity(2))
        assert np.array_equal(got, np.diag([1, 1, -1, -1]).astype(complex))

    def test_acts_factorwise_on_product_vectors(self, rng):
        a = random_operator(rng, 2)
        b = random_operator(rng, 2)
        u = rng.normal(size=2) + 1j * rng.normal(size=2)
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        lhs = op.tensor_product(a, b) @ np.kron(u, v)
        rhs = np.kron(a @ u, b @ v)
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    @given(seed=st.integers(0, 2**32 - 1), dims=st.tuples(*[st.integers(1, 3)] * 3))
    @settings(max_examples=25, deadline=None)
    def test_associative_exactly_on_representable_entries(self, seed, dims):
        # Entrywise products of small integers incur no rounding, so
        # associativity holds exactly; generic floats get the ulp-level check.
        r = np.random.default_rng(seed)
        a, b, c = (
            (r.integers(-8, 9, size=(d, d)) + 1j * r.integers(-8, 9, size=(d, d))).astype(complex)
            for d in dims
        )
        left = op.tensor_product(op.tensor_product(a, b), c)
        right = op.tensor_product(a, op.tensor_product(b, c))
        assert np.array_equal(left, right)

    def test_associative_to_roundoff_on_generic_entries(self, rng):
        a, b, c = (random_operator(rng, d) for d in (2, 3, 2))
        left = op.tensor_product(op.tensor_product(a, b), c)
        right = op.tensor_product(a, op.tensor_product(b, c))
        assert op.max_norm(left - right) < 1e-15 * max(1.0, op.max_norm(left))

    def test_dimension_overflow(self):
        big = op.identity(100)
        with pytest.raises(DimensionError):
            op.tensor_product(big, op.identity(50))


class TestDirectSum:
    def test_identity_blocks(self):
        got = op.direct_sum([np.array([[1.0]]), op.identity(2)])
        assert np.array_equal(got, op.identity(3))

    def test_trace_additivity(self, rng):
        blocks = [random_hermitian(rng, d) for d in (2, 3, 1, 4)]
        got = op.direct_sum(blocks)
        assert np.trace(got) == pytest.approx(sum(np.trace(b) for b in blocks), abs=1e-12)

    def test_single_block_unchanged(self, rng):
        b = random_operator(rng, 3)
        assert np.array_equal(op.direct_sum([b]), b)

    def test_off_block_entries_exactly_zero(self, rng):
        got = op.direct_sum([random_operator(rng, 2), random_operator(rng, 2)])
        assert np.all(got[:2, 2:] == 0.0)
        assert np.all(got[2:, :2] == 0.0)

    def test_empty_list_rejected(self):
        with pytest.raises(DimensionError):
            op.direct_sum([])

    def test_spectral_function_acts_blockwise(self, rng):
        blocks = [random_hermitian(rng, d) for d in (2, 3)]
        whole = op.hermitian_function(op.direct_sum(blocks), np.exp)
        piecewise = op.direct_sum([op.hermitian_function(b, np.exp) for b in blocks])
        assert op.max_norm(whole - piecewise) < 1e-12


class TestPartialTrace:
    def test_product_state(self, rng):
        rho_s = random_density(rng, 2)
        rho_b = random_density(rng, 2)
        got = op.partial_trace_b(op.tensor_product(rho_s, rho_b), 2, 2)
        assert op.max_norm(got - rho_s) < 1e-12

    def test_bell_state(self):
        psi = np.zeros(4, dtype=complex)
        psi[0] = psi[3] = 1 / np.sqrt(2)
        rho = np.outer(psi, psi.conj())
        assert op.max_norm(op.partial_trace_b(rho, 2, 2) - op.identity(2) / 2) < 1e-14

    def test_hilbert_schmidt_duality(self, rng):
        # tr((T (x) Id)^+ S) = tr(T^+ tr_B(S)) on a 2x2 (x) 3x3 space.
        t = random_operator(rng, 2)
        s = random_operator(rng, 6)
        lhs = np.trace(op.tensor_product(t, op.identity(3)).conj().T @ s)
        rhs = np.trace(t.conj().T @ op.partial_trace_b(s, 2, 3))
        assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))

    @given(seed=st.integers(0, 2**32 - 1), ds=st.integers(1, 4), db=st.integers(1, 4))
    @settings(max_examples=25, deadline=None)
    def test_trace_preserving(self, seed, ds, db):
        r = np.random.default_rng(seed)
        rho = random_operator(r, ds * db)
        assert np.trace(op.partial_trace_b(rho, ds, db)) == pytest.approx(
            np.trace(rho), abs=1e-12
        )

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            op.partial_trace_b(random_operator(rng, 5), 2, 2)


class TestBracket:
    def test_self_commutator_vanishes(self, rng):
        a = random_operator(rng, 3)
        assert op.max_norm(op.bracket("commutator", a, a)) == 0.0

    def test_ladder_commutator_is_sigma_z(self):
        assert np.array_equal(op.bracket("commutator", op.SIGMA_PLUS, op.SIGMA_MINUS), op.SIGMA_Z)

    def test_ladder_anticommutator_is_identity(self):
        assert np.array_equal(
            op.bracket("anticommutator", op.SIGMA_PLUS, op.SIGMA_MINUS), op.identity(2)
        )

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            op.commutator(random_operator(rng, 2), random_operator(rng, 3))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            op.bracket("jordan", op.SIGMA_Z, op.SIGMA_Z)


class TestHermitianFunction:
    def test_exp_on_diagonal(self):
        h = np.diag([0.0, np.log(2.0)]).astype(complex)
        assert op.max_norm(op.hermitian_function(h, np.exp) - np.diag([1.0, 2.0])) < 1e-14

    def test_identity_function(self, rng):
        h = random_hermitian(rng, 4)
        assert op.max_norm(op.hermitian_function(h, lambda w: w) - h) < 1e-12

    def test_gibbs_exponential_against_expm_oracle(self, rng):
        beta = 0.7
        for _ in range(5):
            h = random_hermitian(rng, 4)
            mine = op.hermitian_function(h, lambda w: np.exp(-beta * w))
            assert op.max_norm(mine - expm_oracle(-beta * h)) < 1e-10

    @given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 5))
    @settings(max_examples=25, deadline=None)
    def test_exp_spectrum_positive(self, seed, dim):
        h = random_hermitian(np.random.default_rng(seed), dim, scale=3.0)
        assert np.linalg.eigvalsh(op.hermitian_function(h, np.exp)).min() > 0.0

    def test_rejects_non_hermitian(self, rng):
        with pytest.raises(ValueError, match="Hermitian"):
            op.hermitian_function(random_operator(rng, 3), np.exp)


class TestInteractionPicture:
    def test_zero_time_is_identity_map(self, rng):
        a = random_operator(rng, 3)
        h0 = random_hermitian(rng, 3)
        assert op.max_norm(op.interaction_picture(a, h0, 0.0) - a) < 1e-14

    def test_generator_is_fixed_point(self, rng):
        h0 = random_hermitian(rng, 3)
        assert op.max_norm(op.interaction_picture(h0, h0, 2.7) - h0) < 1e-12

    def test_preserves_trace(self, rng):
        a = random_operator(rng, 4)
        h0 = random_hermitian(rng, 4)
        moved = op.interaction_picture(a, h0, 1.3, hbar=0.8)
        assert abs(np.trace(moved) - np.trace(a)) < 1e-12

    def test_preserves_spectrum(self, rng):
        a = random_hermitian(rng, 4)
        h0 = random_hermitian(rng, 4)
        moved = op.interaction_picture(a, h0, 0.9)
        before = np.sort(np.linalg.eigvalsh(a))
        after = np.sort(np.linalg.eigvalsh(0.5 * (moved + moved.conj().T)))
        assert np.max(np.abs(before - after)) < 1e-10 * max(1.0, np.abs(before).max())

    def test_requires_positive_hbar(self, rng):
        with pytest.raises(ValueError):
            op.interaction_picture(op.SIGMA_Z, op.SIGMA_Z, 1.0, hbar=0.0)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            op.interaction_picture(random_operator(rng, 2), random_hermitian(rng, 3), 1.0)


class TestValidateDensity:
    def test_maximally_mixed_accepted(self):
        rho = op.validate_density(op.identity(2) / 2)
        assert np.trace(rho).real == pytest.approx(1.0)

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(InvalidDensityError, match="negative eigenvalue") as err:
            op.validate_density(np.diag([1.5, -0.5]).astype(complex))
        assert err.value.diagnostics.min_eigenvalue == pytest.approx(-0.5)

    def test_gibbs_construction_accepted(self, rng):
        h = random_hermitian(rng, 5)
        rho = op.hermitian_function(h, lambda w: np.exp(-w))
        op.validate_density(rho / np.trace(rho).real)

    def test_all_violations_reported(self):
        bad = np.array([[-1.0, 1.0], [0.0, -1.0]], dtype=complex)
        with pytest.raises(InvalidDensityError) as err:
            op.validate_density(bad)
        text = str(err.value)
        assert "hermiticity" in text and "negative eigenvalue" in text and "negative trace" in text

    def test_sector_weight_traces_allowed(self):
        # Trace far from 1 is fine; weights live in the trace.
        op.validate_density(0.01 * op.identity(3))


class TestSerialization:
    def test_round_trip_is_exact(self, rng):
        a = random_operator(rng, 3) * 1e-7
        a[0, 0] = 1.0 / 3.0 + 1j * np.pi
        assert np.array_equal(op.load_operator(op.dump_operator(a)), a)

    def test_known_layout(self):
        text = op.dump_operator(np.array([[1.0, 2.0j], [0.0, -1.0]]))
        lines = text.splitlines()
        assert lines[0] == "2"
        assert lines[1] == "1.0 0.0"
        assert lines[2] == "0.0 2.0"

    def test_bad_records_rejected(self):
        with pytest.raises(ValueError):
            op.load_operator("")
        with pytest.raises(ValueError):
            op.load_operator("2\n1 0\n")
        with pytest.raises(ValueError):
            op.load_operator("x\n1 0\n")


class TestAsOperator:
    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            op.as_operator(np.zeros((2, 3)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            op.as_operator(np.array([[np.inf, 0], [0, 1]]))

    def test_trace_distance_of_orthogonal_projectors(self):
        assert op.trace_distance(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])) == pytest.approx(1.0)
