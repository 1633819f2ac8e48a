import pytest

from retrainbench.cost import CostError, CostModel, estimate_cost


def test_unit_conversion():
    model = CostModel(rate_per_hour=3.5, dataset_series=100, target_series=100)
    assert estimate_cost(3600.0, model) == pytest.approx(3.5)


def test_zero_seconds_zero_cost():
    model = CostModel(rate_per_hour=3.5, dataset_series=10, target_series=10)
    assert estimate_cost(0.0, model) == 0.0


def test_linear_in_time_rate_and_target():
    base = CostModel(rate_per_hour=2.0, dataset_series=50, target_series=1000)
    c = estimate_cost(500.0, base)
    assert estimate_cost(1000.0, base) == pytest.approx(2 * c)
    double_rate = CostModel(rate_per_hour=4.0, dataset_series=50, target_series=1000)
    assert estimate_cost(500.0, double_rate) == pytest.approx(2 * c)
    double_target = CostModel(rate_per_hour=2.0, dataset_series=50, target_series=2000)
    assert estimate_cost(500.0, double_target) == pytest.approx(2 * c)


def test_daily_retail_reference_cell():
    model = CostModel(rate_per_hour=3.5, dataset_series=28298, target_series=10**9)
    cost = estimate_cost(11373.0, model)
    assert abs(cost - 390_732.0) / 390_732.0 < 0.001


def test_weekly_retail_reference_cell():
    model = CostModel(rate_per_hour=3.5, dataset_series=15053, target_series=10**9)
    cost = estimate_cost(236.0, model)
    assert abs(cost - 15_234.0) / 15_234.0 < 0.005


def test_validation():
    with pytest.raises(CostError):
        CostModel(rate_per_hour=0.0, dataset_series=1, target_series=1)
    with pytest.raises(CostError):
        CostModel(rate_per_hour=1.0, dataset_series=0, target_series=1)
    with pytest.raises(CostError):
        CostModel(rate_per_hour=1.0, dataset_series=1, target_series=-5)
    model = CostModel(rate_per_hour=1.0, dataset_series=1, target_series=1)
    with pytest.raises(CostError):
        estimate_cost(-1.0, model)
