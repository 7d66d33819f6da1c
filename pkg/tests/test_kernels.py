import numpy as np
import pytest

from spmvtune import (DEFAULT_CONFIG, LANE_WIDTHS, FormatTag, Library,
                      SpmvConfig, UnsupportedConfigError, convert,
                      enumerate_configs, execute_spmv, spmv_reference)

from helpers import coo_from_dense, random_coo

ATOMIC_CONFIG = SpmvConfig(FormatTag.COO, Library.LIB_B)


def rel_error(got, expected):
    scale = np.linalg.norm(expected)
    return np.linalg.norm(got - expected) / (scale if scale else 1.0)


def run_config(cfg, coo, x, workers=4):
    rep = convert(coo, cfg.format)
    return execute_spmv(cfg, rep, x, workers=workers)


class TestConfigSpace:
    def test_enumerate_count(self):
        assert len(enumerate_configs()) == 13

    def test_first_is_default(self):
        assert enumerate_configs()[0] == DEFAULT_CONFIG
        assert DEFAULT_CONFIG == SpmvConfig(FormatTag.COO, Library.LIB_A)

    def test_no_unsupported_pairs(self):
        tokens = {c.token() for c in enumerate_configs()}
        assert len(tokens) == 13
        assert not any(t.startswith("DIA/LibB") for t in tokens)
        assert not any(t.startswith("HYB/Lib") and "LibA" not in t
                       for t in tokens)

    def test_lane_required_for_vectorized_csr(self):
        with pytest.raises(UnsupportedConfigError):
            SpmvConfig(FormatTag.CSR, Library.LIB_A)
        with pytest.raises(UnsupportedConfigError):
            SpmvConfig(FormatTag.CSR, Library.LIB_A, 3)
        with pytest.raises(UnsupportedConfigError):
            SpmvConfig(FormatTag.COO, Library.LIB_A, 2)

    def test_unsupported_pair_rejected(self):
        with pytest.raises(UnsupportedConfigError):
            SpmvConfig(FormatTag.DIA, Library.LIB_B)

    def test_token_round_trip(self):
        for cfg in enumerate_configs():
            assert SpmvConfig.from_token(cfg.token()) == cfg


class TestKernels:
    def test_lane32_identity(self):
        coo = coo_from_dense(np.eye(3))
        cfg = SpmvConfig(FormatTag.CSR, Library.LIB_A, 32)
        got = run_config(cfg, coo, np.array([1.0, 2.0, 3.0]))
        assert got.tolist() == [1.0, 2.0, 3.0]

    def test_all_configs_on_fixed_random_matrix(self):
        rng = np.random.default_rng(42)
        coo = random_coo(rng, max_n=64, min_n=64, max_density=0.2)
        x = rng.uniform(0.5, 1.5, size=coo.ncols)
        expected = spmv_reference(convert(coo, FormatTag.CSR), x)
        for cfg in enumerate_configs():
            got = run_config(cfg, coo, x)
            assert rel_error(got, expected) <= 1e-8, cfg.token()

    def test_hyb_matches_coo_on_all_ones(self):
        coo = coo_from_dense(np.ones((2, 3)))
        x = np.array([1.0, 2.0, 3.0])
        hyb = run_config(SpmvConfig(FormatTag.HYB, Library.LIB_A), coo, x)
        plain = run_config(DEFAULT_CONFIG, coo, x)
        assert hyb.tolist() == plain.tolist()

    @pytest.mark.parametrize("cfg", enumerate_configs(),
                             ids=lambda c: c.token())
    def test_equivalence_random_rectangular(self, cfg):
        rng = np.random.default_rng(hash(cfg.token()) % 2**32)
        tol = 1e-8 if cfg == ATOMIC_CONFIG else 1e-10
        for _ in range(10):
            coo = random_coo(rng, max_n=256, max_density=0.2)
            x = rng.uniform(0.5, 1.5, size=coo.ncols)
            expected = spmv_reference(convert(coo, FormatTag.CSR), x)
            assert rel_error(run_config(cfg, coo, x), expected) <= tol

    @pytest.mark.parametrize("cfg", enumerate_configs(),
                             ids=lambda c: c.token())
    def test_empty_rows_and_columns(self, cfg):
        dense = np.zeros((5, 4))
        dense[0, 3] = 2.0
        dense[3, 0] = 1.0
        dense[3, 1] = 4.0
        coo = coo_from_dense(dense)
        x = np.array([1.0, 1.0, 1.0, 1.0])
        expected = dense @ x
        assert rel_error(run_config(cfg, coo, x), expected) <= 1e-10

    def test_determinism_for_fixed_workers(self):
        rng = np.random.default_rng(5)
        coo = random_coo(rng, max_n=128, min_n=64, max_density=0.15)
        x = rng.uniform(0.5, 1.5, size=coo.ncols)
        for cfg in enumerate_configs():
            if cfg == ATOMIC_CONFIG:
                continue
            first = run_config(cfg, coo, x)
            second = run_config(cfg, coo, x)
            assert np.array_equal(first, second), cfg.token()

    def test_lane_width_result_invariance(self):
        rng = np.random.default_rng(9)
        coo = random_coo(rng, max_n=200, min_n=100, max_density=0.2)
        csr = convert(coo, FormatTag.CSR)
        x = rng.uniform(0.5, 1.5, size=coo.ncols)
        results = [execute_spmv(SpmvConfig(FormatTag.CSR, Library.LIB_A, w),
                                csr, x, workers=4) for w in LANE_WIDTHS]
        for other in results[1:]:
            assert rel_error(other, results[0]) <= 1e-12

    def test_out_buffer_reused(self):
        coo = coo_from_dense(np.eye(4))
        rep = convert(coo, FormatTag.CSR)
        out = np.zeros(4)
        cfg = SpmvConfig(FormatTag.CSR, Library.LIB_B)
        got = execute_spmv(cfg, rep, np.ones(4), workers=2, out=out)
        assert got is out
        assert out.tolist() == [1.0, 1.0, 1.0, 1.0]

    def test_format_mismatch_rejected(self):
        coo = coo_from_dense(np.eye(3))
        with pytest.raises(UnsupportedConfigError, match="expects"):
            execute_spmv(SpmvConfig(FormatTag.CSR, Library.LIB_B), coo,
                         np.ones(3))

    def test_dimension_mismatch_rejected(self):
        coo = coo_from_dense(np.eye(3))
        with pytest.raises(ValueError, match="length"):
            execute_spmv(DEFAULT_CONFIG, coo, np.ones(4))

    def test_workers_one_matches_many(self):
        rng = np.random.default_rng(17)
        coo = random_coo(rng, max_n=150, min_n=80, max_density=0.2)
        x = rng.uniform(0.5, 1.5, size=coo.ncols)
        expected = spmv_reference(convert(coo, FormatTag.CSR), x)
        for cfg in enumerate_configs():
            if cfg == ATOMIC_CONFIG:
                continue
            for workers in (1, 3, 7):
                got = run_config(cfg, coo, x, workers=workers)
                assert rel_error(got, expected) <= 1e-10, cfg.token()
