import json

import numpy as np
import pytest

from axbench import intervene as iv
from axbench import synthdata as sd
from axbench.core import ContinuousParent, ContractError, DiscreteParent, ParentSpace
from axbench.synthdata import LabeledDataset, Provenance


def _tiny_dataset(hues):
    """1x1x1 observations carrying only a hue parent, for binning edge cases."""
    space = ParentSpace((ContinuousParent("hue", 0.0, 1.0),))
    n = len(hues)
    pixels = np.zeros((n, 1, 1, 1), dtype=np.float32)
    values = np.asarray(hues, dtype=np.float64)[:, None]
    return LabeledDataset(space, pixels, values, None, Provenance("external", 0))


def test_bin_uniform_counts():
    values, _, _ = sd._sample_colour_parents(sd.Unconfounded(), 10000, seed=31)
    ds = _tiny_dataset(values[:, 1])
    binning = iv.bin_parent(ds, 0, 5)
    assert binning.counts.sum() == 10000
    assert np.all(np.abs(binning.counts - 2000) <= 200)


def test_bin_interior_edge_goes_up():
    ds = _tiny_dataset([0.0, 0.2, 0.4, 0.3999999, 1.0])
    binning = iv.bin_parent(ds, 0, 5)
    assigned = binning.assign(ds.column(0))
    assert list(assigned) == [0, 1, 2, 1, 4]  # right-open; last bin closed


def test_bin_matches_sort_based_oracle(ds_conf_nosupport):
    binning = iv.bin_parent(ds_conf_nosupport, 1, 5)
    hues = np.sort(ds_conf_nosupport.column(1))
    edges = np.linspace(0.0, 1.0, 6)
    oracle_counts = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi == 1.0:
            oracle_counts.append(int(np.sum((hues >= lo) & (hues <= hi))))
        else:
            oracle_counts.append(int(np.sum((hues >= lo) & (hues < hi))))
    assert list(binning.counts) == oracle_counts


def test_bin_discrete_identity(ds_small):
    binning = iv.bin_parent(ds_small, 0, 99)
    assert binning.discrete and binning.n_bins == 10
    assert binning.counts.sum() == len(ds_small)
    assert list(binning.assign(np.array([3.0, 9.0]))) == [3, 9]


def test_bin_parent_requires_two_bins(ds_small):
    with pytest.raises(ContractError):
        iv.bin_parent(ds_small, 1, 1)


def test_support_unconfounded_full(ds_test_unconf):
    binnings = [iv.bin_parent(ds_test_unconf, k, 5) for k in range(2)]
    report = iv.support_report(ds_test_unconf, 1, binnings)
    assert report.full_support
    assert report.table.shape == (5, 10)
    assert report.table.sum() == len(ds_test_unconf)


def test_support_confounded_missing_cells(ds_conf_nosupport):
    binnings = [iv.bin_parent(ds_conf_nosupport, k, 5) for k in range(2)]
    report = iv.support_report(ds_conf_nosupport, 1, binnings)
    assert not report.full_support
    assert len(report.empty_cells) >= 1
    # digit 9 never lands in the lowest hue bin without outliers
    assert (0, 9) in report.empty_cells


def test_support_single_parent_trivial():
    ds = _tiny_dataset([0.1, 0.5, 0.9])
    report = iv.support_report(ds, 0, [iv.bin_parent(ds, 0, 2)])
    assert report.full_support
    assert report.table.shape == (2, 1)


def test_support_json_schema(ds_conf_nosupport):
    binnings = [iv.bin_parent(ds_conf_nosupport, k, 5) for k in range(2)]
    doc = json.loads(iv.support_report(ds_conf_nosupport, 1, binnings).to_json())
    assert set(doc) == {"target", "cells", "empty", "full_support"}
    assert doc["target"] == 1
    assert doc["full_support"] is False
    assert all(len(cell) == 2 for cell in doc["cells"])
    assert sum(count for _, count in doc["cells"]) == len(ds_conf_nosupport)
    assert [0, 9] in doc["empty"]


def test_resample_breaks_dependence(ds_conf_full, conf_full_binnings):
    out = iv.resample_intervention(ds_conf_full, [1], conf_full_binnings,
                                   20000, seed=2000)
    table = iv.contingency(out.column(0).astype(int),
                           conf_full_binnings[1].assign(out.column(1)), 10, 5)
    _, _, p, v = iv.chi_square_independence(table)
    assert p > 0.01
    assert v < 0.05
    assert out.provenance.scm == "intervened"


def test_resample_preserves_marginals_by_2_percent(ds_test_unconf):
    binnings = [iv.bin_parent(ds_test_unconf, k, 5) for k in range(2)]
    out = iv.resample_intervention(ds_test_unconf, [1], binnings, 10000, seed=5)
    for k, bins in ((0, 10), (1, 5)):
        src = np.bincount(binnings[k].assign(ds_test_unconf.column(k)), minlength=bins)
        res = np.bincount(binnings[k].assign(out.column(k)), minlength=bins)
        assert np.all(np.abs(res / len(out) - src / len(ds_test_unconf)) <= 0.02)


def test_resample_marginal_within_multinomial_noise(ds_conf_full, conf_full_binnings):
    n_out = 20000
    out = iv.resample_intervention(ds_conf_full, [1], conf_full_binnings,
                                   n_out, seed=2024)
    p_src = conf_full_binnings[1].counts / len(ds_conf_full)
    res = np.bincount(conf_full_binnings[1].assign(out.column(1)), minlength=5)
    sigma = np.sqrt(p_src * (1 - p_src) * n_out)
    assert np.all(np.abs(res - n_out * p_src) <= 3 * sigma)


def test_resample_never_fabricates(ds_small):
    binnings = [iv.bin_parent(ds_small, k, 5) for k in range(2)]
    out = iv.resample_intervention(ds_small, [1], binnings, 300, seed=9)
    source = {ds_small.pixels[i].tobytes() for i in range(len(ds_small))}
    for i in range(len(out)):
        assert out.pixels[i].tobytes() in source


def test_resample_without_support_raises(ds_conf_nosupport):
    binnings = [iv.bin_parent(ds_conf_nosupport, k, 5) for k in range(2)]
    with pytest.raises(iv.SupportError) as err:
        iv.resample_intervention(ds_conf_nosupport, [1], binnings, None, seed=1)
    assert len(err.value.cells) >= 1
    assert "empty" in str(err.value)


def test_resample_defaults_to_source_size(ds_small):
    binnings = [iv.bin_parent(ds_small, k, 5) for k in range(2)]
    out = iv.resample_intervention(ds_small, [1], binnings, None, seed=2)
    assert len(out) == len(ds_small)


def test_resample_all_parents_targeted(ds_test_unconf):
    binnings = [iv.bin_parent(ds_test_unconf, k, 5) for k in range(2)]
    out = iv.resample_intervention(ds_test_unconf, [0, 1], binnings, 8000, seed=3)
    table = iv.contingency(out.column(0).astype(int),
                           binnings[1].assign(out.column(1)), 10, 5)
    _, _, p, _ = iv.chi_square_independence(table)
    assert p > 0.01


def test_resample_deterministic(ds_small):
    binnings = [iv.bin_parent(ds_small, k, 5) for k in range(2)]
    a = iv.resample_intervention(ds_small, [1], binnings, 100, seed=4)
    b = iv.resample_intervention(ds_small, [1], binnings, 100, seed=4)
    assert a.pixels.tobytes() == b.pixels.tobytes()
    assert a.values.tobytes() == b.values.tobytes()


def test_chi_square_detects_dependence():
    dependent = np.diag([50] * 4)
    _, _, p, v = iv.chi_square_independence(dependent)
    assert p < 1e-6 and v > 0.9
    independent = np.full((4, 4), 50)
    _, _, p, v = iv.chi_square_independence(independent)
    assert p == 1.0 and v == 0.0
