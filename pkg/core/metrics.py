import numpy as np
import pandas as pd

from .condense import detect_active
from .errors import ParameterError
from .network import predict
from .numkit import quantile


def mse_metric(net, test):
    """Mean squared prediction error over the test set."""
    residuals = test.targets - predict(net, test.inputs)
    return float(np.mean(np.square(residuals)))


def shat_metric(net, tol):
    """Number of active hidden layers (indices 1..l-1) at tolerance tol."""
    return len(detect_active(net, tol)) - 1


def summarize(values):
    """(median, third quartile) of the finite values, or (nan, nan) when there are none."""
    values = [float(v) for v in values if v is not None and np.isfinite(v)]
    if not values:
        return float("nan"), float("nan")
    return quantile(values, 0.5), quantile(values, 0.75)


def aggregate_runs(results):
    """
    Per (setting, method) medians and third quartiles of mse and shat.

    Args:
        results: list of dicts with keys setting, method, run, mse, shat,
            failed and optionally setting_order, method_order

    Returns:
        DataFrame with columns setting, method, runs, failed, mse_median,
        mse_q3, shat_median, shat_q3; shat columns are nan where no run
        reports shat. Rows follow the order columns, then first appearance.
    """
    if not results:
        raise ParameterError("no run results to aggregate")
    df = pd.DataFrame(results)
    df["failed"] = df["failed"].astype(bool)
    order = [c for c in ("setting_order", "method_order", "run") if c in df.columns]
    if order:
        df = df.sort_values(order, kind="mergesort")
    rows = []
    for (setting, method), group in df.groupby(["setting", "method"], sort=False):
        ok = group[~group["failed"]]
        mse_median, mse_q3 = summarize(ok["mse"])
        shat_median, shat_q3 = summarize(ok["shat"].dropna())
        rows.append({
            "setting": setting,
            "method": method,
            "runs": int(len(group)),
            "failed": int(group["failed"].sum()),
            "mse_median": mse_median,
            "mse_q3": mse_q3,
            "shat_median": shat_median,
            "shat_q3": shat_q3,
        })
    return pd.DataFrame(rows)
