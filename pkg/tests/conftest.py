import pytest

from module.krein import KreinEvaluator
from module.schottky import axis_element, build_from_generators, build_three_funnel


@pytest.fixture(scope='session')
def funnel_666():
    return build_three_funnel(6.0, 6.0, 6.0)


@pytest.fixture(scope='session')
def cylinder():
    """rank 1，生成元平移长度 2；Z(λ) 的零点在 -k + iπm"""
    return build_from_generators([axis_element(2.0)])


@pytest.fixture(scope='session')
def rank_three():
    return build_from_generators([axis_element(8.0, s) for s in (0.0, 5.0, 10.0)])


@pytest.fixture(scope='session')
def evaluator_666(funnel_666):
    return KreinEvaluator.create(funnel_666)


@pytest.fixture(scope='session')
def evaluator_cylinder(cylinder):
    return KreinEvaluator.create(cylinder)


@pytest.fixture(scope='session')
def evaluator_666_fredholm(funnel_666, evaluator_666):
    return KreinEvaluator(group=funnel_666, delta=evaluator_666.delta, route='fredholm')
