import math

import numpy as np
import pytest

from core.errors import ParameterError
from core.metrics import aggregate_runs, mse_metric, shat_metric, summarize
from core.network import IDENTITY, RELU, Network
from core.training import DataSet


def row(setting, method, run, mse, shat=None, failed=False, **extra):
    return dict(setting=setting, method=method, run=run, mse=mse, shat=shat, failed=failed, **extra)


def test_mse_of_zero_network():
    net = Network((np.zeros((1, 2)),), (IDENTITY,))
    test = DataSet([[1.0, 2.0], [3.0, 4.0]], [1.0, -3.0])
    assert mse_metric(net, test) == 5.0


def test_shat_metric():
    net = Network(
        (np.array([[1.0, -1.0]]), np.array([[1.0, 0.0], [2.0, 1.0]]), np.array([[1.0, 2.0], [-1.0, 0.0]])),
        (IDENTITY, RELU, RELU),
    )
    assert shat_metric(net, 0.0) == 1
    assert shat_metric(net, 5.0) == 0


class TestSummarize:
    def test_median_and_q3(self):
        assert summarize([4.0, 1.0, 3.0, 2.0]) == (2.5, pytest.approx(3.25))

    def test_skips_nan(self):
        assert summarize([1.0, float("nan"), 3.0]) == (2.0, 2.5)

    def test_empty(self):
        median, q3 = summarize([])
        assert math.isnan(median) and math.isnan(q3)


class TestAggregateRuns:
    """Per (setting, method) summaries"""

    def test_failed_runs_excluded(self):
        rows = [
            row("a", "LS", 0, 1.0),
            row("a", "LS", 1, 3.0),
            row("a", "LS", 2, float("nan"), failed=True),
        ]
        summary = aggregate_runs(rows).iloc[0]
        assert summary["runs"] == 3
        assert summary["failed"] == 1
        assert summary["mse_median"] == 2.0
        assert summary["mse_q3"] == 2.5
        assert math.isnan(summary["shat_median"])

    def test_shat_columns(self):
        rows = [row("a", "FLS", r, 1.0, shat=s) for r, s in enumerate([1, 2, 2, 4])]
        summary = aggregate_runs(rows).iloc[0]
        assert summary["shat_median"] == 2.0
        assert summary["shat_q3"] == 2.5

    def test_order_columns(self):
        rows = [
            row("b", "SLS", 0, 1.0, setting_order=1, method_order=1),
            row("b", "LS", 0, 1.0, setting_order=1, method_order=0),
            row("a", "SLS", 0, 1.0, setting_order=0, method_order=1),
            row("a", "LS", 0, 1.0, setting_order=0, method_order=0),
        ]
        frame = aggregate_runs(rows)
        assert list(zip(frame["setting"], frame["method"])) == [("a", "LS"), ("a", "SLS"), ("b", "LS"), ("b", "SLS")]

    def test_first_appearance_without_order(self):
        rows = [row("z", "LS", 0, 1.0), row("a", "LS", 0, 2.0)]
        assert list(aggregate_runs(rows)["setting"]) == ["z", "a"]

    def test_all_failed(self):
        frame = aggregate_runs([row("a", "SLS", 0, float("nan"), failed=True)])
        assert math.isnan(frame.iloc[0]["mse_median"])
        assert frame.iloc[0]["failed"] == 1

    def test_empty(self):
        with pytest.raises(ParameterError):
            aggregate_runs([])
